// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "sepkit/error.hpp"
#include "sepkit/metrics.hpp"
#include "test_util.hpp"

using namespace sepkit;

namespace {

std::vector<double> unit_norm(std::vector<double> x) {
  const double n = std::sqrt(oracle::sum_sq(x));
  for (auto& v : x) v /= n;
  return x;
}

// r2 with its r1 component removed
std::vector<double> orthogonalize(std::vector<double> r2, const std::vector<double>& r1) {
  double d = 0.0, n = 0.0;
  for (std::size_t i = 0; i < r1.size(); ++i) d += r1[i] * r2[i], n += r1[i] * r1[i];
  for (std::size_t i = 0; i < r1.size(); ++i) r2[i] -= d / n * r1[i];
  return r2;
}

}  // namespace

TEST_CASE("projection of a reference onto itself") {
  const auto r1 = oracle::random_signal(300, 1), r2 = oracle::random_signal(300, 2);
  const auto d = bss_decompose(r1, r1, r2, 1);
  CHECK(oracle::rel_err(d.s_target, r1, 1e-300) < 1e-12);
  CHECK(std::sqrt(oracle::sum_sq(d.e_interf)) < 1e-9);
  CHECK(std::sqrt(oracle::sum_sq(d.e_artif)) < 1e-9);
  const auto r = bss_eval(r1, r1, r2, 1);
  CHECK(r.sdr == kMetricCapDb);
  CHECK(r.sir == kMetricCapDb);
  CHECK(r.sar == kMetricCapDb);
  CHECK(r.filter_len == 1);
}

TEST_CASE("orthogonal decomposition and the closed-form SIR") {
  const auto r1 = unit_norm(oracle::random_signal(512, 3));
  const auto r2 = unit_norm(orthogonalize(oracle::random_signal(512, 4), r1));
  std::vector<double> est(512);
  for (std::size_t i = 0; i < 512; ++i) est[i] = r1[i] + 0.5 * r2[i];
  const auto d = bss_decompose(est, r1, r2, 1);
  std::vector<double> half_r2(r2);
  for (auto& v : half_r2) v *= 0.5;
  CHECK(oracle::rel_err(d.s_target, r1, 1e-300) < 1e-9);
  CHECK(oracle::rel_err(d.e_interf, half_r2, 1e-300) < 1e-9);
  CHECK(std::sqrt(oracle::sum_sq(d.e_artif)) < 1e-9);
  const auto r = bss_eval(est, r1, r2, 1);
  CHECK(std::abs(r.sir - 10.0 * std::log10(1.0 / 0.25)) < 1e-6);
  CHECK(std::abs(r.sir - 6.0206) < 1e-3);
  CHECK(std::abs(r.sdr - 6.0206) < 1e-3);
  CHECK(r.sar >= 150.0);
}

TEST_CASE("scale invariance") {
  const auto r1 = oracle::random_signal(400, 5), r2 = oracle::random_signal(400, 6);
  for (double c : {3.0, -0.25, 1e3}) {
    std::vector<double> est(r1);
    for (auto& v : est) v *= c;
    const auto r = bss_eval(est, r1, r2, 1);
    CHECK(r.sdr == kMetricCapDb);
    CHECK(r.sir == kMetricCapDb);
    CHECK(r.sar == kMetricCapDb);
  }
  auto mixed = oracle::random_signal(400, 7);
  for (std::size_t i = 0; i < 400; ++i) mixed[i] += r1[i] + 0.3 * r2[i];
  const auto base = bss_eval(mixed, r1, r2, 4);
  for (double c : {2.0, -7.5}) {
    std::vector<double> est(mixed);
    for (auto& v : est) v *= c;
    const auto r = bss_eval(est, r1, r2, 4);
    CHECK(r.sdr == doctest::Approx(base.sdr).epsilon(1e-9));
    CHECK(r.sir == doctest::Approx(base.sir).epsilon(1e-9));
    CHECK(r.sar == doctest::Approx(base.sar).epsilon(1e-9));
  }
}

TEST_CASE("decomposition matches dense least squares") {
  std::uint64_t seed = 100;
  for (std::size_t len : {64u, 257u, 512u, 1024u}) {
    for (std::size_t L : {1u, 2u, 8u, 16u}) {
      const auto r1 = oracle::random_signal(len, seed++), r2 = oracle::random_signal(len, seed++);
      const auto est = oracle::random_signal(len, seed++);
      const auto d = bss_decompose(est, r1, r2, L);
      const auto ref = oracle::dense_bss(est, r1, r2, L);
      const double scale = std::sqrt(oracle::sum_sq(est));
      CAPTURE(len);
      CAPTURE(L);
      CHECK(oracle::rel_err(d.s_target, ref.s_target, scale) < 1e-9);
      CHECK(oracle::rel_err(d.e_interf, ref.e_interf, scale) < 1e-9);
      CHECK(oracle::rel_err(d.e_artif, ref.e_artif, scale) < 1e-9);

      // energy split: the three parts are mutually orthogonal
      double cross = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        cross += d.s_target[i] * d.e_interf[i] + d.s_target[i] * d.e_artif[i] + d.e_interf[i] * d.e_artif[i];
      }
      const double total = oracle::sum_sq(est);
      CHECK(std::abs(oracle::sum_sq(d.s_target) + oracle::sum_sq(d.e_interf) + oracle::sum_sq(d.e_artif) - total) <
            1e-6 * total);
      CHECK(std::abs(cross) < 1e-6 * total);
    }
  }
}

TEST_CASE("SIR falls as interference grows") {
  const auto r1 = unit_norm(oracle::random_signal(300, 8));
  const auto r2 = unit_norm(orthogonalize(oracle::random_signal(300, 9), r1));
  double prev = kMetricCapDb + 1.0;
  for (double alpha : {0.0, 0.01, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0}) {
    std::vector<double> est(300);
    for (std::size_t i = 0; i < 300; ++i) est[i] = r1[i] + alpha * r2[i];
    const double sir = bss_eval(est, r1, r2, 1).sir;
    CHECK(sir <= prev);
    prev = sir;
  }
}

TEST_CASE("metric errors") {
  const auto a = oracle::random_signal(100, 1);
  CHECK_THROWS_CODE(bss_decompose(a, oracle::random_signal(99, 2), a, 1), Errc::kShapeMismatch);
  CHECK_THROWS_CODE(bss_decompose(a, a, a, 0), Errc::kShapeMismatch);
  CHECK(capped_ratio_db(1.0, 0.0) == kMetricCapDb);
  CHECK(capped_ratio_db(1e30, 1e-300) == kMetricCapDb);
}

TEST_CASE("oracle evaluation modes on synthetic pairs") {
  const auto t = synth_speaker(Harmonic{220.0}, 1.5, 1);
  const auto i = synth_speaker(FilteredNoise{3000.0, 5000.0}, 1.5, 2);
  double mean_snr = 0.0, mean_sdr = 0.0;
  for (double snr : kEvalSnrsDb) {
    const auto target = evaluate_pair(t, i, snr, nullptr, 1, OracleMode::kTarget);
    CHECK(target.metrics.sdr == kMetricCapDb);
    const auto pass = evaluate_pair(t, i, snr, nullptr, 1, OracleMode::kMixture);
    mean_snr += snr;
    mean_sdr += pass.metrics.sdr;
    CHECK(std::abs(pass.metrics.sdr - snr) < 0.1);  // nearly orthogonal sources
  }
  CHECK(std::abs(mean_sdr - mean_snr) / double(kEvalSnrsDb.size()) < 1.0);
  CHECK_THROWS_CODE(evaluate_pair(t, i, 0.0, nullptr, 1, OracleMode::kNone), Errc::kInvalidConfig);
}
