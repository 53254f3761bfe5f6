// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "sepkit/dsp.hpp"
#include "sepkit/error.hpp"
#include "sepkit/separate.hpp"

namespace sepkit {
namespace {

constexpr double kGramDamping = 1e-10;
constexpr int kRefineSteps = 3;

// C[a][b] = sum_{n >= max(a, b)} x[n - a] * y[n - b], for a, b < L.
Eigen::MatrixXd delayed_cross_gram(std::span<const double> x, std::span<const double> y, std::size_t L) {
  const std::size_t n = x.size();
  const auto Li = static_cast<Eigen::Index>(L);
  Eigen::MatrixXd c(Li, Li);
  for (std::size_t b = 0; b < L; ++b) {
    double row = 0.0, col = 0.0;
    for (std::size_t k = b; k < n; ++k) {
      row += x[k] * y[k - b];  // (a = 0, b)
      col += x[k - b] * y[k];  // (a = b, 0)
    }
    c(0, static_cast<Eigen::Index>(b)) = row;
    c(static_cast<Eigen::Index>(b), 0) = col;
  }
  // shifting both delays by one drops the last product term
  for (std::size_t a = 1; a < L; ++a) {
    for (std::size_t b = 1; b < L; ++b) {
      double drop = 0.0;
      if (a - 1 < n && b - 1 < n) drop = x[n - a] * y[n - b];
      c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          c(static_cast<Eigen::Index>(a - 1), static_cast<Eigen::Index>(b - 1)) - drop;
    }
  }
  return c;
}

// r[a] = sum_{n >= a} x[n - a] * e[n]
Eigen::VectorXd delayed_correlation(std::span<const double> x, std::span<const double> e, std::size_t L) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(L));
  for (std::size_t a = 0; a < L; ++a) {
    double s = 0.0;
    for (std::size_t k = a; k < e.size(); ++k) s += x[k - a] * e[k];
    r(static_cast<Eigen::Index>(a)) = s;
  }
  return r;
}

void add_filtered(std::span<const double> x, const double* coeffs, std::size_t L, std::vector<double>& out) {
  for (std::size_t a = 0; a < L; ++a) {
    const double c = coeffs[a];
    if (c == 0.0) continue;
    for (std::size_t k = a; k < out.size(); ++k) out[k] += c * x[k - a];
  }
}

// Damped Cholesky solve plus a few refinement steps against the undamped
// system, so the damping only bites in near-null directions.
Eigen::VectorXd solve_damped(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  const double damping = kGramDamping * std::max(gram.diagonal().mean(), 1e-300);
  Eigen::MatrixXd damped = gram;
  damped.diagonal().array() += damping;
  Eigen::LLT<Eigen::MatrixXd> llt(damped);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::kSingularGram, "reference Gram matrix is not positive definite after damping");
  }
  Eigen::VectorXd x = llt.solve(rhs);
  for (int k = 0; k < kRefineSteps; ++k) x += llt.solve(rhs - gram * x);
  return x;
}

double energy(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace

double capped_ratio_db(double num, double den) {
  if (den <= 0.0) return kMetricCapDb;
  if (num <= 0.0) return -kMetricCapDb;
  return std::min(10.0 * std::log10(num / den), kMetricCapDb);
}

BssDecomposition bss_decompose(std::span<const double> estimate, std::span<const double> true_source,
                               std::span<const double> other_source, std::size_t filter_len) {
  const std::size_t n = estimate.size();
  if (true_source.size() != n || other_source.size() != n) {
    throw Error(Errc::kShapeMismatch, "estimate and references must share one length (" + std::to_string(n) +
                                          ", " + std::to_string(true_source.size()) + ", " +
                                          std::to_string(other_source.size()) + ")");
  }
  if (filter_len == 0) throw Error(Errc::kShapeMismatch, "filter length must be >= 1");
  if (n == 0) throw Error(Errc::kShapeMismatch, "empty signals");
  const std::size_t L = filter_len;
  const auto Li = static_cast<Eigen::Index>(L);

  const Eigen::MatrixXd g00 = delayed_cross_gram(true_source, true_source, L);
  const Eigen::MatrixXd g01 = delayed_cross_gram(true_source, other_source, L);
  const Eigen::MatrixXd g11 = delayed_cross_gram(other_source, other_source, L);
  const Eigen::VectorXd r0 = delayed_correlation(true_source, estimate, L);
  const Eigen::VectorXd r1 = delayed_correlation(other_source, estimate, L);

  BssDecomposition d;
  d.s_target.assign(n, 0.0);
  const Eigen::VectorXd c_target = solve_damped(g00, r0);
  add_filtered(true_source, c_target.data(), L, d.s_target);

  Eigen::MatrixXd g(2 * Li, 2 * Li);
  g.topLeftCorner(Li, Li) = g00;
  g.topRightCorner(Li, Li) = g01;
  g.bottomLeftCorner(Li, Li) = g01.transpose();
  g.bottomRightCorner(Li, Li) = g11;
  Eigen::VectorXd r(2 * Li);
  r << r0, r1;
  const Eigen::VectorXd c_both = solve_damped(g, r);
  std::vector<double> both(n, 0.0);
  add_filtered(true_source, c_both.data(), L, both);
  add_filtered(other_source, c_both.data() + L, L, both);

  d.e_interf.resize(n);
  d.e_artif.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    d.e_interf[k] = both[k] - d.s_target[k];
    d.e_artif[k] = estimate[k] - both[k];
  }
  return d;
}

BssEvalResult bss_eval(std::span<const double> estimate, std::span<const double> true_source,
                       std::span<const double> other_source, std::size_t filter_len) {
  const auto d = bss_decompose(estimate, true_source, other_source, filter_len);
  std::vector<double> noise(d.s_target.size()), signal(d.s_target.size());
  for (std::size_t k = 0; k < noise.size(); ++k) {
    noise[k] = d.e_interf[k] + d.e_artif[k];
    signal[k] = d.s_target[k] + d.e_interf[k];
  }
  const double s = energy(d.s_target);
  BssEvalResult r;
  r.filter_len = filter_len;
  r.sdr = capped_ratio_db(s, energy(noise));
  r.sir = capped_ratio_db(s, energy(d.e_interf));
  r.sar = capped_ratio_db(energy(signal), energy(d.e_artif));
  return r;
}

namespace {

Waveform from_offset(const Waveform& wf, std::size_t frames) {
  Waveform out;
  out.sample_rate = wf.sample_rate;
  const std::size_t off = std::min(wf.size(), frames * static_cast<std::size_t>(kHop));
  out.samples.assign(wf.samples.begin() + static_cast<std::ptrdiff_t>(off), wf.samples.end());
  return out;
}

}  // namespace

PairScore evaluate_pair(const Waveform& target, const Waveform& interference, double snr_db,
                        Separator<float>* model, std::size_t filter_len, OracleMode mode,
                        std::size_t target_context_offset, std::size_t interference_context_offset) {
  require_pipeline_rate(target, "target utterance");
  require_pipeline_rate(interference, "interference utterance");
  auto [t, i] = truncate_to_common(target, interference);
  const MixResult mix = mix_at_snr(t, i, snr_db);
  std::vector<double> scaled(i.samples.size());
  for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = mix.gain * i.samples[k];

  std::vector<double> estimate;
  switch (mode) {
    case OracleMode::kTarget:
      estimate = t.samples;
      break;
    case OracleMode::kMixture:
      estimate = mix.mixture.samples;
      break;
    case OracleMode::kNone: {
      if (model == nullptr) throw Error(Errc::kInvalidConfig, "evaluation without an oracle needs a model");
      estimate = separate_utterance(mix.mixture, from_offset(target, target_context_offset),
                                    from_offset(interference, interference_context_offset), *model)
                     .target.samples;
      break;
    }
  }
  PairScore score;
  score.snr_db = snr_db;
  score.metrics = bss_eval(estimate, t.samples, scaled, filter_len);
  return score;
}

EvalReport evaluate_model(const std::vector<EvalPair>& pairs, Separator<float>* model, std::size_t filter_len,
                          OracleMode mode) {
  if (pairs.empty()) throw Error(Errc::kInvalidManifest, "evaluation manifest has no pairs");
  EvalReport report;
  for (const auto& p : pairs) {
    auto score = evaluate_pair(read_wav(p.target_path), read_wav(p.interference_path), p.snr_db, model,
                               filter_len, mode, p.target_context_offset, p.interference_context_offset);
    score.pair_id = p.pair_id;
    report.mean_sdr += score.metrics.sdr;
    report.mean_sar += score.metrics.sar;
    report.mean_sir += score.metrics.sir;
    report.pairs.push_back(score);
  }
  const auto n = static_cast<double>(report.pairs.size());
  report.mean_sdr /= n;
  report.mean_sar /= n;
  report.mean_sir /= n;
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << std::setprecision(10);
  out << "pair_id,snr_db,sdr,sar,sir\n";
  double mean_snr = 0.0;
  for (const auto& p : report.pairs) {
    out << p.pair_id << ',' << p.snr_db << ',' << p.metrics.sdr << ',' << p.metrics.sar << ',' << p.metrics.sir
        << '\n';
    mean_snr += p.snr_db;
  }
  if (!report.pairs.empty()) mean_snr /= static_cast<double>(report.pairs.size());
  out << "mean," << mean_snr << ',' << report.mean_sdr << ',' << report.mean_sar << ',' << report.mean_sir << '\n';
  if (!out) throw Error(Errc::kIoError, "write failed for " + path.string());
}

}  // namespace sepkit
