// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/nn/ops.hpp"

#include <algorithm>
#include <initializer_list>
#include <cmath>

#include <Eigen/Core>

#include "sepkit/error.hpp"
#include "sepkit/parallel.hpp"

namespace sepkit::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw Error(Errc::kShapeMismatch, op + ": " + detail);
}

void expect_rank(const std::string& op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w;        // input
  std::size_t o, kh, kw;         // kernel
  std::size_t sh, sw;            // stride
  std::size_t ho, wo;            // output
  std::size_t pad_top, pad_left;

  std::size_t k() const { return c * kh * kw; }
  std::size_t p() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && sh == 1 && sw == 1; }
};

// Range of output columns ow for which ow * s + j - pad lands in [0, in).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, std::size_t s,
                                                std::size_t j, std::size_t pad) {
  // need ow * s >= pad - j  and  ow * s <= in - 1 + pad - j
  std::ptrdiff_t lo_num = static_cast<std::ptrdiff_t>(pad) - static_cast<std::ptrdiff_t>(j);
  std::ptrdiff_t hi_num = static_cast<std::ptrdiff_t>(in) - 1 + lo_num;
  auto ss = static_cast<std::ptrdiff_t>(s);
  std::ptrdiff_t lo = lo_num <= 0 ? 0 : (lo_num + ss - 1) / ss;
  std::ptrdiff_t hi = hi_num < 0 ? 0 : hi_num / ss + 1;
  lo = std::min<std::ptrdiff_t>(lo, static_cast<std::ptrdiff_t>(out));
  hi = std::clamp<std::ptrdiff_t>(hi, lo, static_cast<std::ptrdiff_t>(out));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t p = g.p();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* dst = col + ((c * g.kh + i) * g.kw + j) * p;
        auto [lo, hi] = valid_range(g.wo, g.w, g.sw, j, g.pad_left);
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          T* drow = dst + oh * g.wo;
          auto ih = static_cast<std::ptrdiff_t>(oh * g.sh + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h) || lo >= hi) {
            std::fill(drow, drow + g.wo, T(0));
            continue;
          }
          const T* srow = x + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          std::fill(drow, drow + lo, T(0));
          const std::size_t base = lo * g.sw + j - g.pad_left;
          if (g.sw == 1) {
            std::copy(srow + base, srow + base + (hi - lo), drow + lo);
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) drow[ow] = srow[base + (ow - lo) * g.sw];
          }
          std::fill(drow + hi, drow + g.wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t p = g.p();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* src = col + ((c * g.kh + i) * g.kw + j) * p;
        auto [lo, hi] = valid_range(g.wo, g.w, g.sw, j, g.pad_left);
        if (lo >= hi) continue;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          auto ih = static_cast<std::ptrdiff_t>(oh * g.sh + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const T* srow = src + oh * g.wo;
          T* drow = dx + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          const std::size_t base = lo * g.sw + j - g.pad_left;
          for (std::size_t ow = lo; ow < hi; ++ow) drow[base + (ow - lo) * g.sw] += srow[ow];
        }
      }
    }
  }
}

}  // namespace

std::size_t same_out(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

std::size_t same_pad_before(std::size_t in, std::size_t k, std::size_t stride) {
  const std::size_t out = same_out(in, stride);
  const std::size_t need = (out - 1) * stride + k;
  return need > in ? (need - in) / 2 : 0;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Stride2d stride) {
  expect_rank("conv2d input", x.shape(), 4);
  expect_rank("conv2d weight", weight.shape(), 4);
  if (x.dim(1) != weight.dim(1)) {
    shape_error("conv2d", "input " + shape_str(x.shape()) + " has " + std::to_string(x.dim(1)) +
                              " channels, kernel " + shape_str(weight.shape()) + " expects " +
                              std::to_string(weight.dim(1)));
  }
  if (stride.time < 1 || stride.freq < 1) shape_error("conv2d", "stride must be >= 1");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(0))) {
    shape_error("conv2d", "bias " + shape_str(bias.shape()) + " vs kernel " + shape_str(weight.shape()));
  }
  ConvGeometry g{};
  g.n = x.dim(0), g.c = x.dim(1), g.h = x.dim(2), g.w = x.dim(3);
  g.o = weight.dim(0), g.kh = weight.dim(2), g.kw = weight.dim(3);
  g.sh = stride.time, g.sw = stride.freq;
  g.ho = same_out(g.h, g.sh), g.wo = same_out(g.w, g.sw);
  g.pad_top = same_pad_before(g.h, g.kh, g.sh);
  g.pad_left = same_pad_before(g.w, g.kw, g.sw);

  const std::size_t K = g.k(), P = g.p(), in_sz = g.c * g.h * g.w, out_sz = g.o * P;
  Buffer<T> out(g.n * out_sz);
  const T* xd = x.data().data();
  ConstMatMap<T> wmat(weight.data().data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(K));

  parallel_chunks(g.n, [&](std::size_t, std::size_t b, std::size_t e) {
    Buffer<T> col(g.pointwise() ? 0 : K * P);
    for (std::size_t n = b; n < e; ++n) {
      const T* src = xd + n * in_sz;
      if (!g.pointwise()) {
        im2col(src, g, col.data());
        src = col.data();
      }
      MatMap<T> y(out.data() + n * out_sz, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(P));
      y.noalias() = wmat * ConstMatMap<T>(src, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
      if (bias.defined()) {
        const T* bd = bias.data().data();
        for (std::size_t o = 0; o < g.o; ++o) y.row(static_cast<Eigen::Index>(o)).array() += bd[o];
      }
    }
  });

  auto xn = x.node_ptr(), wn = weight.node_ptr(), bn = bias.node_ptr();
  return Tensor<T>::make_result(
      {g.n, g.o, g.ho, g.wo}, std::move(out), {xn, wn, bn}, [xn, wn, bn, g](Node<T>& self) {
        const std::size_t K = g.k(), P = g.p(), in_sz = g.c * g.h * g.w, out_sz = g.o * P;
        const bool need_x = xn->requires_grad, need_w = wn->requires_grad,
                   need_b = bn && bn->requires_grad;
        const std::size_t chunks = chunk_count(g.n);
        std::vector<Buffer<T>> dw_part(need_w ? chunks : 0), db_part(need_b ? chunks : 0);
        T* dx = need_x ? xn->grad_buffer() : nullptr;
        ConstMatMap<T> wmat(wn->data.data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(K));
        const T* dyd = self.grad.data();

        parallel_chunks(g.n, [&](std::size_t chunk, std::size_t b, std::size_t e) {
          Buffer<T> col(need_w && !g.pointwise() ? K * P : 0);
          Buffer<T> dcol(need_x && !g.pointwise() ? K * P : 0);
          if (need_w) dw_part[chunk].assign(g.o * K, T(0));
          if (need_b) db_part[chunk].assign(g.o, T(0));
          for (std::size_t n = b; n < e; ++n) {
            ConstMatMap<T> dy(dyd + n * out_sz, static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(P));
            if (need_b) {
              Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(db_part[chunk].data(),
                                                                  static_cast<Eigen::Index>(g.o));
              db += dy.rowwise().sum();
            }
            if (need_w) {
              const T* src = xn->data.data() + n * in_sz;
              if (!g.pointwise()) {
                im2col(src, g, col.data());
                src = col.data();
              }
              MatMap<T> dw(dw_part[chunk].data(), static_cast<Eigen::Index>(g.o), static_cast<Eigen::Index>(K));
              dw.noalias() += dy * ConstMatMap<T>(src, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P)).transpose();
            }
            if (need_x) {
              T* dxn = dx + n * in_sz;
              if (g.pointwise()) {
                MatMap<T>(dxn, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P)).noalias() +=
                    wmat.transpose() * dy;
              } else {
                MatMap<T> dc(dcol.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
                dc.noalias() = wmat.transpose() * dy;
                col2im_add(dcol.data(), g, dxn);
              }
            }
          }
        });
        if (need_w) {
          T* dw = wn->grad_buffer();
          for (const auto& part : dw_part)
            for (std::size_t i = 0; i < part.size(); ++i) dw[i] += part[i];
        }
        if (need_b) {
          T* db = bn->grad_buffer();
          for (const auto& part : db_part)
            for (std::size_t i = 0; i < part.size(); ++i) db[i] += part[i];
        }
      });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training, T eps,
                     T momentum) {
  expect_rank("batch_norm", x.shape(), 4);
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3), M = N * HW;
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (t->numel() != C) {
      shape_error("batch_norm", "per-channel parameter " + shape_str(t->shape()) + " vs input " +
                                    shape_str(x.shape()));
    }
  }
  if (training && M < 2) {
    throw Error(Errc::kDegenerateBatch, "batch_norm training needs N*H*W >= 2 per channel, got " +
                                            std::to_string(M));
  }
  const T* xd = x.data().data();
  Buffer<T> out(x.numel()), xhat(x.numel());
  Buffer<T> inv_std(C);
  auto rm = running_mean.data(), rv = running_var.data();
  auto gd = gamma.data(), bd = beta.data();

  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = xd + (n * C + c) * HW;
        for (std::size_t k = 0; k < HW; ++k) s += p[k];
      }
      mean = s / static_cast<double>(M);
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = xd + (n * C + c) * HW;
        for (std::size_t k = 0; k < HW; ++k) {
          double d = p[k] - mean;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(M);
      const double unbiased = ss / static_cast<double>(M - 1);
      rm[c] = static_cast<T>(momentum * rm[c] + (T(1) - momentum) * static_cast<T>(mean));
      rv[c] = static_cast<T>(momentum * rv[c] + (T(1) - momentum) * static_cast<T>(unbiased));
    } else {
      mean = rm[c];
      var = rv[c];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[c] = istd;
    const T mu = static_cast<T>(mean), g = gd[c], b = bd[c];
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * HW;
      for (std::size_t k = 0; k < HW; ++k) {
        T h = (xd[off + k] - mu) * istd;
        xhat[off + k] = h;
        out[off + k] = g * h + b;
      }
    }
  }

  auto xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, N, C, HW, M, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<T>& self) {
        const T* dy = self.grad.data();
        T* dx = xn->requires_grad ? xn->grad_buffer() : nullptr;
        T* dg = gn->requires_grad ? gn->grad_buffer() : nullptr;
        T* db = bn->requires_grad ? bn->grad_buffer() : nullptr;
        for (std::size_t c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            const std::size_t off = (n * C + c) * HW;
            for (std::size_t k = 0; k < HW; ++k) {
              sum_dy += dy[off + k];
              sum_dy_xhat += static_cast<double>(dy[off + k]) * xhat[off + k];
            }
          }
          if (dg) dg[c] += static_cast<T>(sum_dy_xhat);
          if (db) db[c] += static_cast<T>(sum_dy);
          if (!dx) continue;
          const T scale = gn->data[c] * inv_std[c];
          if (training) {
            const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(M));
            const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(M));
            for (std::size_t n = 0; n < N; ++n) {
              const std::size_t off = (n * C + c) * HW;
              for (std::size_t k = 0; k < HW; ++k) {
                dx[off + k] += scale * (dy[off + k] - mean_dy - xhat[off + k] * mean_dy_xhat);
              }
            }
          } else {
            for (std::size_t n = 0; n < N; ++n) {
              const std::size_t off = (n * C + c) * HW;
              for (std::size_t k = 0; k < HW; ++k) dx[off + k] += scale * dy[off + k];
            }
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto xd = x.data();
  Buffer<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
  auto xn = x.node_ptr();
  return Tensor<T>::make_result(x.shape(), std::move(out), {xn}, [xn](Node<T>& self) {
    T* dx = xn->grad_buffer();
    const T* dy = self.grad.data();
    const T* xd = xn->data.data();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      if (xd[i] > T(0)) dx[i] += dy[i];
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    shape_error("add", shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Buffer<T> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return Tensor<T>::make_result(a.shape(), std::move(out), {an, bn}, [an, bn](Node<T>& self) {
    for (Node<T>* in : {an.get(), bn.get()}) {
      if (!in->requires_grad) continue;
      T* d = in->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& per_channel) {
  expect_rank("add_channel_bias input", x.shape(), 4);
  expect_rank("add_channel_bias bias", per_channel.shape(), 2);
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (per_channel.dim(0) != N || per_channel.dim(1) != C) {
    shape_error("add_channel_bias", shape_str(per_channel.shape()) + " does not match (N, C) of " +
                                        shape_str(x.shape()));
  }
  Buffer<T> out(x.numel());
  const auto xd = x.data(), bd = per_channel.data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    for (std::size_t k = 0; k < HW; ++k) out[nc * HW + k] = xd[nc * HW + k] + bd[nc];
  }
  auto xn = x.node_ptr(), bn = per_channel.node_ptr();
  return Tensor<T>::make_result(x.shape(), std::move(out), {xn, bn}, [xn, bn, N, C, HW](Node<T>& self) {
    const T* dy = self.grad.data();
    if (xn->requires_grad) {
      T* dx = xn->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += dy[i];
    }
    if (bn->requires_grad) {
      T* db = bn->grad_buffer();
      for (std::size_t nc = 0; nc < N * C; ++nc) {
        T s = 0;
        for (std::size_t k = 0; k < HW; ++k) s += dy[nc * HW + k];
        db[nc] += s;
      }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  expect_rank("linear input", x.shape(), 2);
  expect_rank("linear weight", weight.shape(), 2);
  const std::size_t N = x.dim(0), D = x.dim(1), O = weight.dim(0);
  if (weight.dim(1) != D) {
    shape_error("linear", "input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.numel() != O) {
    shape_error("linear", "bias " + shape_str(bias.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  const auto n_ = static_cast<Eigen::Index>(N), d_ = static_cast<Eigen::Index>(D),
             o_ = static_cast<Eigen::Index>(O);
  Buffer<T> out(N * O);
  MatMap<T> y(out.data(), n_, o_);
  y.noalias() = ConstMatMap<T>(x.data().data(), n_, d_) *
                ConstMatMap<T>(weight.data().data(), o_, d_).transpose();
  if (bias.defined()) {
    const T* bd = bias.data().data();
    for (Eigen::Index n = 0; n < n_; ++n)
      for (Eigen::Index o = 0; o < o_; ++o) y(n, o) += bd[o];
  }
  auto xn = x.node_ptr(), wn = weight.node_ptr(), bn = bias.node_ptr();
  return Tensor<T>::make_result(
      {N, O}, std::move(out), {xn, wn, bn}, [xn, wn, bn, n_, d_, o_](Node<T>& self) {
        ConstMatMap<T> dy(self.grad.data(), n_, o_);
        if (xn->requires_grad) {
          MatMap<T>(xn->grad_buffer(), n_, d_).noalias() +=
              dy * ConstMatMap<T>(wn->data.data(), o_, d_);
        }
        if (wn->requires_grad) {
          MatMap<T>(wn->grad_buffer(), o_, d_).noalias() +=
              dy.transpose() * ConstMatMap<T>(xn->data.data(), n_, d_);
        }
        if (bn && bn->requires_grad) {
          T* db = bn->grad_buffer();
          for (Eigen::Index n = 0; n < n_; ++n)
            for (Eigen::Index o = 0; o < o_; ++o) db[o] += dy(n, o);
        }
      });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  expect_rank("global_avg_pool", x.shape(), 4);
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (HW == 0) shape_error("global_avg_pool", "empty spatial extent");
  Buffer<T> out(N * C);
  const auto xd = x.data();
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    for (std::size_t k = 0; k < HW; ++k) s += xd[nc * HW + k];
    out[nc] = static_cast<T>(s / static_cast<double>(HW));
  }
  auto xn = x.node_ptr();
  return Tensor<T>::make_result({N, C}, std::move(out), {xn}, [xn, N, C, HW](Node<T>& self) {
    T* dx = xn->grad_buffer();
    const T inv = T(1) / static_cast<T>(HW);
    for (std::size_t nc = 0; nc < N * C; ++nc) {
      const T g = self.grad[nc] * inv;
      for (std::size_t k = 0; k < HW; ++k) dx[nc * HW + k] += g;
    }
  });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 1) shape_error("flatten", "scalar input");
  const std::size_t N = x.dim(0);
  Buffer<T> out(x.data().begin(), x.data().end());
  auto xn = x.node_ptr();
  return Tensor<T>::make_result({N, N ? x.numel() / N : 0}, std::move(out), {xn}, [xn](Node<T>& self) {
    T* dx = xn->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& label) {
  if (pred.shape() != label.shape()) {
    shape_error("mse_loss", shape_str(pred.shape()) + " vs " + shape_str(label.shape()));
  }
  const auto pd = pred.data(), ld = label.data();
  const std::size_t n = pd.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(pd[i]) - ld[i];
    acc += d * d;
  }
  auto pn = pred.node_ptr(), ln = label.node_ptr();
  return Tensor<T>::make_result({}, {static_cast<T>(n ? acc / static_cast<double>(n) : 0.0)}, {pn, ln},
                                [pn, ln, n](Node<T>& self) {
                                  const T g = self.grad[0] * T(2) / static_cast<T>(n);
                                  T* dp = pn->requires_grad ? pn->grad_buffer() : nullptr;
                                  T* dl = ln->requires_grad ? ln->grad_buffer() : nullptr;
                                  for (std::size_t i = 0; i < n; ++i) {
                                    const T d = pn->data[i] - ln->data[i];
                                    if (dp) dp[i] += g * d;
                                    if (dl) dl[i] -= g * d;
                                  }
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.data()) acc += v;
  auto xn = x.node_ptr();
  return Tensor<T>::make_result({}, {static_cast<T>(acc)}, {xn}, [xn](Node<T>& self) {
    T* dx = xn->grad_buffer();
    for (std::size_t i = 0; i < xn->data.size(); ++i) dx[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> dot_const(const Tensor<T>& x, std::span<const T> w) {
  if (w.size() != x.numel()) {
    shape_error("dot_const", std::to_string(w.size()) + " weights for " + shape_str(x.shape()));
  }
  double acc = 0.0;
  const auto xd = x.data();
  for (std::size_t i = 0; i < w.size(); ++i) acc += static_cast<double>(xd[i]) * w[i];
  auto xn = x.node_ptr();
  Buffer<T> wc(w.begin(), w.end());
  return Tensor<T>::make_result({}, {static_cast<T>(acc)}, {xn}, [xn, wc = std::move(wc)](Node<T>& self) {
    T* dx = xn->grad_buffer();
    for (std::size_t i = 0; i < wc.size(); ++i) dx[i] += self.grad[0] * wc[i];
  });
}

#define SEPKIT_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Stride2d);     \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&, \
                                Tensor<T>&, bool, T, T);                                         \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                          \
  template Tensor<T> flatten(const Tensor<T>&);                                                  \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> dot_const(const Tensor<T>&, std::span<const T>);

SEPKIT_INSTANTIATE_OPS(float)
SEPKIT_INSTANTIATE_OPS(double)

}  // namespace sepkit::nn
