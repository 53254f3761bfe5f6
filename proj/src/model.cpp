// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/model.hpp"

#include <fstream>

#include "sepkit/error.hpp"
#include "sepkit/nn/checkpoint.hpp"
#include "sepkit/nn/ops.hpp"
#include "sepkit/nn/optim.hpp"

namespace sepkit {

template <typename T>
Tensor<T> condition(const Tensor<T>& feature_map, const Tensor<T>& target_embedding,
                    const Tensor<T>& interference_embedding, const nn::Linear<T>& proj_target,
                    const nn::Linear<T>& proj_interference) {
  if (feature_map.rank() != 4 || proj_target.weight.dim(0) != feature_map.dim(1) ||
      proj_interference.weight.dim(0) != feature_map.dim(1)) {
    throw Error(Errc::kShapeMismatch, "conditioning projections do not match feature map " +
                                          nn::shape_str(feature_map.shape()));
  }
  auto out = nn::add_channel_bias(feature_map, proj_target.forward(target_embedding));
  return nn::add_channel_bias(out, proj_interference.forward(interference_embedding));
}

// --- ResidualBlock ---------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(std::size_t in_ch, const BlockSpec& spec, std::size_t out_ch,
                                const ModelConfig& cfg, std::mt19937_64& rng, bool conditioned)
    : conv1(in_ch, out_ch, spec.kernel_time, spec.kernel_freq, {spec.stride_time, spec.stride_freq}, rng),
      conv2(out_ch, out_ch, spec.kernel_time, spec.kernel_freq, {1, 1}, rng),
      bn_mid(out_ch, static_cast<T>(cfg.bn_eps), static_cast<T>(cfg.bn_momentum)),
      bn_out(out_ch, static_cast<T>(cfg.bn_eps), static_cast<T>(cfg.bn_momentum)),
      injection(cfg.injection_point) {
  if (in_ch != out_ch || spec.stride_time != 1 || spec.stride_freq != 1) {
    shortcut.emplace(in_ch, out_ch, 1, 1, nn::Stride2d{spec.stride_time, spec.stride_freq}, rng);
  }
  if (conditioned) {
    const std::size_t e = cfg.embed_dim();
    cond.emplace(BlockConditioning<T>{nn::Linear<T>(e, out_ch, rng), nn::Linear<T>(e, out_ch, rng),
                                      nn::Linear<T>(e, out_ch, rng), nn::Linear<T>(e, out_ch, rng)});
  }
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, const Tensor<T>& tgt, const Tensor<T>& itf) {
  const bool post_conv = cond && injection == InjectionPoint::kPostConv;
  const bool post_bn = cond && injection == InjectionPoint::kPostBn;

  auto h = conv1.forward(x);
  if (post_conv) h = condition(h, tgt, itf, cond->target1, cond->interference1);
  h = bn_mid.forward(h);
  if (post_bn) h = condition(h, tgt, itf, cond->target1, cond->interference1);
  h = nn::relu(h);

  h = conv2.forward(h);
  if (post_conv) h = condition(h, tgt, itf, cond->target2, cond->interference2);
  h = nn::add(h, shortcut ? shortcut->forward(x) : x);
  h = bn_out.forward(h);
  if (post_bn) h = condition(h, tgt, itf, cond->target2, cond->interference2);
  return nn::relu(h);
}

template <typename T>
nn::Shape ResidualBlock<T>::output_shape(const nn::Shape& in) const {
  auto mid = conv1.output_shape(in);
  auto out = conv2.output_shape(mid);
  auto skip = shortcut ? shortcut->output_shape(in) : in;
  if (skip != out) {
    throw Error(Errc::kShapeMismatch, "residual branch " + nn::shape_str(out) + " vs shortcut " +
                                          nn::shape_str(skip));
  }
  return out;
}

template <typename T>
void ResidualBlock<T>::collect(const std::string& prefix, std::vector<nn::NamedTensor<T>>& out) const {
  conv1.collect(prefix + ".conv1", out);
  bn_mid.collect(prefix + ".bn_mid", out);
  conv2.collect(prefix + ".conv2", out);
  bn_out.collect(prefix + ".bn_out", out);
  if (shortcut) shortcut->collect(prefix + ".shortcut", out);
  if (cond) {
    cond->target1.collect(prefix + ".proj1_target", out);
    cond->interference1.collect(prefix + ".proj1_interference", out);
    cond->target2.collect(prefix + ".proj2_target", out);
    cond->interference2.collect(prefix + ".proj2_interference", out);
  }
}

template <typename T>
void ResidualBlock<T>::set_training(bool training) {
  bn_mid.training = training;
  bn_out.training = training;
}

// --- EmbeddingNet ----------------------------------------------------------

template <typename T>
EmbeddingNet<T>::EmbeddingNet(const ModelConfig& cfg, std::mt19937_64& rng) {
  std::size_t in = 1;
  for (const auto& spec : cfg.embed_blocks) {
    const std::size_t out = cfg.scaled(spec.channels);
    blocks.emplace_back(in, spec, out, cfg, rng, false);
    in = out;
  }
}

template <typename T>
Tensor<T> EmbeddingNet<T>::forward(const Tensor<T>& context) {
  Tensor<T> h = context, none;
  for (auto& b : blocks) h = b.forward(h, none, none);
  return nn::global_avg_pool(h);
}

template <typename T>
nn::Shape EmbeddingNet<T>::pre_pool_shape(const nn::Shape& in) const {
  nn::Shape s = in;
  for (const auto& b : blocks) s = b.output_shape(s);
  return s;
}

template <typename T>
void EmbeddingNet<T>::collect(const std::string& prefix, std::vector<nn::NamedTensor<T>>& out) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

template <typename T>
void EmbeddingNet<T>::set_training(bool training) {
  for (auto& b : blocks) b.set_training(training);
}

// --- SeparationNet ---------------------------------------------------------

template <typename T>
SeparationNet<T>::SeparationNet(const ModelConfig& cfg, std::mt19937_64& rng) {
  std::size_t in = 1;
  for (const auto& spec : cfg.sep_blocks) {
    const std::size_t out = cfg.scaled(spec.channels);
    blocks.emplace_back(in, spec, out, cfg, rng, true);
    in = out;
  }
  fc = nn::Linear<T>(flatten_size(cfg), cfg.n_freq, rng, nn::Init::kZero);
}

template <typename T>
Tensor<T> SeparationNet<T>::forward(const Tensor<T>& segment, const Tensor<T>& tgt, const Tensor<T>& itf) {
  Tensor<T> h = segment;
  for (auto& b : blocks) h = b.forward(h, tgt, itf);
  return fc.forward(nn::flatten(h));
}

template <typename T>
nn::Shape SeparationNet<T>::flatten_shape(const nn::Shape& in) const {
  nn::Shape s = in;
  for (const auto& b : blocks) s = b.output_shape(s);
  return {s[0], s[1] * s[2] * s[3]};
}

template <typename T>
void SeparationNet<T>::collect(const std::string& prefix, std::vector<nn::NamedTensor<T>>& out) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  fc.collect(prefix + ".fc", out);
}

template <typename T>
void SeparationNet<T>::set_training(bool training) {
  for (auto& b : blocks) b.set_training(training);
}

// --- Separator -------------------------------------------------------------

template <typename T>
Separator<T>::Separator(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  target_net = EmbeddingNet<T>(cfg_, rng);
  interference_net = EmbeddingNet<T>(cfg_, rng);
  separation = SeparationNet<T>(cfg_, rng);
}

template <typename T>
std::vector<nn::NamedTensor<T>> Separator<T>::named_state() const {
  std::vector<nn::NamedTensor<T>> out;
  target_net.collect("embed_target", out);
  interference_net.collect("embed_interference", out);
  separation.collect("separation", out);
  return out;
}

template <typename T>
std::vector<Tensor<T>> Separator<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& nt : named_state()) {
    if (nt.trainable) out.push_back(nt.tensor);
  }
  return out;
}

template <typename T>
void Separator<T>::set_training(bool training) {
  target_net.set_training(training);
  interference_net.set_training(training);
  separation.set_training(training);
}

template <typename T>
Tensor<T> Separator<T>::estimate_target(const Tensor<T>& segments, const Tensor<T>& target_contexts,
                                        const Tensor<T>& interference_contexts) {
  if (segments.rank() != 4 || segments.dim(2) != cfg_.segment_frames || segments.dim(3) != cfg_.n_freq) {
    throw Error(Errc::kShapeMismatch, "mixture segments " + nn::shape_str(segments.shape()) + " must be (N, 1, " +
                                          std::to_string(cfg_.segment_frames) + ", " +
                                          std::to_string(cfg_.n_freq) + ")");
  }
  auto tgt = embed_target(target_contexts);
  auto itf = embed_interference(interference_contexts);
  auto offset = separation.forward(segments, tgt, itf);
  return nn::add(offset, center_frames(segments, cfg_.center_frame()));
}

// --- free functions --------------------------------------------------------

template <typename T>
Tensor<T> pack_spectrograms(std::span<const RealFrames* const> mats) {
  if (mats.empty()) throw Error(Errc::kShapeMismatch, "empty spectrogram batch");
  const auto rows = static_cast<std::size_t>(mats[0]->rows()), cols = static_cast<std::size_t>(mats[0]->cols());
  std::vector<T> data(mats.size() * rows * cols);
  for (std::size_t n = 0; n < mats.size(); ++n) {
    if (static_cast<std::size_t>(mats[n]->rows()) != rows || static_cast<std::size_t>(mats[n]->cols()) != cols) {
      throw Error(Errc::kShapeMismatch, "spectrogram batch has mixed shapes");
    }
    const double* src = mats[n]->data();
    for (std::size_t i = 0; i < rows * cols; ++i) data[n * rows * cols + i] = static_cast<T>(src[i]);
  }
  return Tensor<T>::from({mats.size(), 1, rows, cols}, std::move(data));
}

template <typename T>
Tensor<T> center_frames(const Tensor<T>& segments, std::size_t center) {
  const std::size_t N = segments.dim(0), S = segments.dim(2), F = segments.dim(3);
  std::vector<T> data(N * F);
  auto src = segments.data();
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((n * S + center) * F), F,
                data.begin() + static_cast<std::ptrdiff_t>(n * F));
  }
  return Tensor<T>::from({N, F}, std::move(data));
}

template <typename T>
std::vector<T> embed_speaker(const LogMagSpectrogram& context, EmbeddingNet<T>& net, const ModelConfig& cfg) {
  if (static_cast<std::size_t>(context.frames()) != cfg.context_frames ||
      static_cast<std::size_t>(context.values.cols()) != cfg.n_freq) {
    throw Error(Errc::kShapeMismatch, "context must be " + std::to_string(cfg.context_frames) + "x" +
                                          std::to_string(cfg.n_freq) + " frames, got " +
                                          std::to_string(context.frames()) + "x" +
                                          std::to_string(context.values.cols()));
  }
  const RealFrames* mats[] = {&context.values};
  auto e = net.forward(pack_spectrograms<T>(mats));
  return {e.data().begin(), e.data().end()};
}

template <typename T>
FramePair<T> separate_frame(const LogMagSpectrogram& mixture_segment, std::span<const T> target_embedding,
                            std::span<const T> interference_embedding, SeparationNet<T>& net,
                            const ModelConfig& cfg) {
  if (static_cast<std::size_t>(mixture_segment.frames()) != cfg.segment_frames ||
      static_cast<std::size_t>(mixture_segment.values.cols()) != cfg.n_freq) {
    throw Error(Errc::kShapeMismatch, "mixture segment must be " + std::to_string(cfg.segment_frames) + "x" +
                                          std::to_string(cfg.n_freq) + " frames, got " +
                                          std::to_string(mixture_segment.frames()) + "x" +
                                          std::to_string(mixture_segment.values.cols()));
  }
  const std::size_t E = cfg.embed_dim();
  if (target_embedding.size() != E || interference_embedding.size() != E) {
    throw Error(Errc::kShapeMismatch, "speaker embeddings must have " + std::to_string(E) + " values");
  }
  const RealFrames* mats[] = {&mixture_segment.values};
  auto seg = pack_spectrograms<T>(mats);
  auto tgt = Tensor<T>::from({1, E}, {target_embedding.begin(), target_embedding.end()});
  auto itf = Tensor<T>::from({1, E}, {interference_embedding.begin(), interference_embedding.end()});
  auto offset = net.forward(seg, tgt, itf);
  auto center = center_frames(seg, cfg.center_frame());
  FramePair<T> out;
  out.est_target.resize(cfg.n_freq);
  out.est_interference.resize(cfg.n_freq);
  for (std::size_t f = 0; f < cfg.n_freq; ++f) {
    out.est_target[f] = center.data()[f] + offset.data()[f];
    out.est_interference[f] = center.data()[f] - out.est_target[f];
  }
  return out;
}

template <typename T>
Tensor<T> batch_loss(std::span<const TrainingExample> batch, Separator<T>& model) {
  if (batch.empty()) throw Error(Errc::kShapeMismatch, "empty training batch");
  std::vector<const RealFrames*> seg, tctx, ictx;
  std::vector<T> label;
  for (const auto& ex : batch) {
    seg.push_back(&ex.mixture_segment.values);
    tctx.push_back(&ex.target_context.values);
    ictx.push_back(&ex.interference_context.values);
    for (double v : ex.label_frame) label.push_back(static_cast<T>(v));
  }
  const auto& cfg = model.config();
  if (label.size() != batch.size() * cfg.n_freq) {
    throw Error(Errc::kShapeMismatch, "label frames must have " + std::to_string(cfg.n_freq) + " bins");
  }
  auto est = model.estimate_target(pack_spectrograms<T>(seg), pack_spectrograms<T>(tctx),
                                   pack_spectrograms<T>(ictx));
  return nn::mse_loss(est, Tensor<T>::from({batch.size(), cfg.n_freq}, std::move(label)));
}

template <typename T>
double training_step(std::span<const TrainingExample> batch, Separator<T>& model, T lr, double max_grad_norm) {
  model.set_training(true);
  auto params = model.parameters();
  for (auto& p : params) p.zero_grad();
  auto loss = batch_loss(batch, model);
  const double value = static_cast<double>(loss.item());
  loss.backward();
  if (max_grad_norm > 0.0) nn::clip_grad_norm(params, max_grad_norm);
  nn::sgd_step(params, lr);
  return value;
}

std::filesystem::path config_path_for(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& path, const Separator<float>& model, const nlohmann::json& extra) {
  nn::save_checkpoint(path, model.named_state());
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["model"] = model.config();
  std::ofstream out(config_path_for(path));
  if (!out) throw Error(Errc::kIoError, "cannot write " + config_path_for(path).string());
  out << j.dump(2) << '\n';
}

Separator<float> load_model(const std::filesystem::path& path) {
  const auto cfg_path = config_path_for(path);
  std::ifstream in(cfg_path);
  if (!in) throw Error(Errc::kIoError, "missing model config " + cfg_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, cfg_path.string() + ": " + e.what());
  }
  if (!j.contains("model")) throw Error(Errc::kInvalidConfig, cfg_path.string() + " has no \"model\" section");
  ModelConfig cfg = j["model"].get<ModelConfig>();
  Separator<float> model(cfg);
  nn::load_checkpoint(path, model.named_state());
  return model;
}

#define SEPKIT_INSTANTIATE_MODEL(T)                                                                      \
  template Tensor<T> condition(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const nn::Linear<T>&, \
                               const nn::Linear<T>&);                                                     \
  template class ResidualBlock<T>;                                                                        \
  template class EmbeddingNet<T>;                                                                         \
  template class SeparationNet<T>;                                                                        \
  template class Separator<T>;                                                                            \
  template Tensor<T> pack_spectrograms(std::span<const RealFrames* const>);                               \
  template Tensor<T> center_frames(const Tensor<T>&, std::size_t);                                        \
  template std::vector<T> embed_speaker(const LogMagSpectrogram&, EmbeddingNet<T>&, const ModelConfig&);  \
  template FramePair<T> separate_frame(const LogMagSpectrogram&, std::span<const T>, std::span<const T>,  \
                                       SeparationNet<T>&, const ModelConfig&);                            \
  template Tensor<T> batch_loss(std::span<const TrainingExample>, Separator<T>&);                         \
  template double training_step(std::span<const TrainingExample>, Separator<T>&, T, double);

SEPKIT_INSTANTIATE_MODEL(float)
SEPKIT_INSTANTIATE_MODEL(double)

}  // namespace sepkit
