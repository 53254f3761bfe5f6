// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "sepkit/dsp.hpp"
#include "sepkit/error.hpp"
#include "test_util.hpp"

using namespace sepkit;

TEST_CASE("periodic hann window") {
  const auto w4 = hann_window(4);
  REQUIRE(w4.size() == 4);
  CHECK(w4[0] == doctest::Approx(0.0));
  CHECK(w4[1] == doctest::Approx(0.5));
  CHECK(w4[2] == doctest::Approx(1.0));
  CHECK(w4[3] == doctest::Approx(0.5));
  const auto w2 = hann_window(2);
  CHECK(w2[0] == doctest::Approx(0.0));
  CHECK(w2[1] == doctest::Approx(1.0));
  double s = 0.0;
  for (double v : hann_window(400)) s += v;
  CHECK(s == doctest::Approx(200.0).epsilon(1e-12));
}

TEST_CASE("frame count law") {
  CHECK(frame_count(400) == 1);
  CHECK(frame_count(559) == 1);
  CHECK(frame_count(560) == 2);
  CHECK(frame_count(16000) == 98);
  CHECK(frame_count(399) == 0);
  CHECK_THROWS_CODE(stft(Waveform{std::vector<double>(399, 0.1), 16000}), Errc::kTooShort);
  CHECK_THROWS_CODE(stft(Waveform{std::vector<double>(800, 0.1), 8000}), Errc::kWrongSampleRate);
}

TEST_CASE("stft of silence") {
  const auto [spec, phase] = stft(Waveform{std::vector<double>(560, 0.0), 16000});
  CHECK(spec.frames() == 2);
  CHECK(spec.bins.cols() == 201);
  CHECK(spec.bins.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft matches a direct DFT") {
  const auto x = oracle::random_signal(1200, 5);
  const auto [spec, phase] = stft(Waveform{x, 16000});
  REQUIRE(spec.frames() == 6);
  double worst = 0.0;
  for (std::size_t t = 0; t < 6; ++t) {
    const auto ref = oracle::dft_frame(x, t);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      worst = std::max(worst, std::abs(spec.bins(Eigen::Index(t), Eigen::Index(k)) - ref[k]));
      // phase is the argument of the same bin, in (-pi, pi]
      const double ph = phase.values(Eigen::Index(t), Eigen::Index(k));
      CHECK(ph > -std::numbers::pi);
      CHECK(ph <= std::numbers::pi);
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("bin-centered cosine has magnitude 100") {
  std::vector<double> x(400);
  const int k = 17;
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::cos(2.0 * std::numbers::pi * k * double(n) / 400.0);
  const auto [spec, phase] = stft(Waveform{x, 16000});
  const double oracle_mag = std::abs(oracle::dft_frame(x, 0)[k]);
  CHECK(oracle_mag == doctest::Approx(100.0).epsilon(1e-10));
  CHECK(std::abs(spec.bins(0, k)) == doctest::Approx(oracle_mag).epsilon(1e-10));
}

TEST_CASE("stft is linear") {
  const auto a = oracle::random_signal(2000, 1), b = oracle::random_signal(2000, 2);
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.7 * a[i] - 1.3 * b[i];
  const auto sa = stft(Waveform{a, 16000}).first.bins;
  const auto sb = stft(Waveform{b, 16000}).first.bins;
  const auto sc = stft(Waveform{c, 16000}).first.bins;
  CHECK((sc - (0.7 * sa - 1.3 * sb)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log magnitude floor and inverse") {
  ComplexSpectrogram s;
  s.bins = ComplexFrames::Zero(1, 3);
  s.bins(0, 1) = std::complex<double>(1.0 - 1e-5, 0.0);
  s.bins(0, 2) = std::complex<double>(0.0, 3.0);
  const auto lm = log_magnitude(s);
  CHECK(lm.values(0, 0) == doctest::Approx(std::log(1e-5)));
  CHECK(lm.values(0, 0) == doctest::Approx(-11.5129).epsilon(1e-5));
  CHECK(std::abs(lm.values(0, 1)) < 1e-15);
  CHECK(lm.values(0, 2) > lm.values(0, 1));
  const auto mag = inv_log_magnitude(lm);
  CHECK(mag(0, 0) == 0.0);
  CHECK(mag(0, 2) == doctest::Approx(3.0).epsilon(1e-12));

  LogMagSpectrogram under;
  under.values = RealFrames::Constant(1, 2, std::log(1e-5) - 1.0);
  CHECK(inv_log_magnitude(under).maxCoeff() == 0.0);

  // round trip on real spectra and floor invariant
  const auto spec = stft(Waveform{oracle::random_signal(3000, 9), 16000}).first;
  const auto lm2 = log_magnitude(spec);
  CHECK(lm2.values.minCoeff() >= std::log(1e-5));
  const RealFrames back = inv_log_magnitude(lm2);
  const RealFrames ref = spec.bins.cwiseAbs();
  CHECK(((back - ref).cwiseAbs().array() / ref.array().max(1e-12)).maxCoeff() < 1e-9);
}

TEST_CASE("istft reconstructs the interior") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = oracle::random_signal(16000, 100 + seed);
    const auto [spec, phase] = stft(Waveform{x, 16000});
    const auto y = istft(spec.bins.cwiseAbs(), phase, x.size());
    REQUIRE(y.size() == x.size());
    CHECK(oracle::rel_l2(y.samples, x, 400, x.size() - 400) < 1e-6);
  }
}

TEST_CASE("istft is linear in magnitude and silent for zero magnitude") {
  const auto x = oracle::random_signal(4000, 3);
  const auto [spec, phase] = stft(Waveform{x, 16000});
  const RealFrames mag = spec.bins.cwiseAbs();
  const auto y1 = istft(mag, phase, x.size());
  const auto y3 = istft(2.5 * mag, phase, x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y3.samples[i] == doctest::Approx(2.5 * y1.samples[i]).epsilon(1e-9));
  const auto z = istft(RealFrames::Zero(mag.rows(), mag.cols()), phase, 5000);
  CHECK(z.size() == 5000);
  for (double v : z.samples) CHECK(v == 0.0);
  PhaseMatrix bad;
  bad.values = RealFrames::Zero(mag.rows() + 1, mag.cols());
  CHECK_THROWS_CODE(istft(mag, bad, 100), Errc::kShapeMismatch);
}

TEST_CASE("mix_at_snr gain formula and exactness") {
  const std::vector<double> a{1.0, -1.0, 1.0, -1.0}, b{-1.0, 1.0, 1.0, -1.0};
  CHECK(mix_at_snr(Waveform{a}, Waveform{b}, 0.0).gain == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mix_at_snr(Waveform{a}, Waveform{b}, 10.0).gain == doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-15));
  const auto t = oracle::random_signal(16000, 1, 0.2), i = oracle::random_signal(16000, 2, 0.05);
  for (double snr : {-5.0, -3.0, -1.0, 0.0, 1.0, 3.0, 5.0, 10.0, 15.0, 25.0}) {
    const auto m = mix_at_snr(Waveform{t}, Waveform{i}, snr);
    std::vector<double> scaled(i.size()), recovered(i.size());
    for (std::size_t k = 0; k < i.size(); ++k) {
      scaled[k] = m.gain * i[k];
      recovered[k] = m.mixture.samples[k] - t[k];
    }
    // independent power ratio on the components
    CHECK(std::abs(10.0 * std::log10(oracle::sum_sq(t) / oracle::sum_sq(scaled)) - snr) < 1e-9);
    CHECK(std::abs(measured_snr_db(t, recovered) - snr) < 1e-9);
  }
  CHECK_THROWS_CODE(mix_at_snr(Waveform{a}, Waveform{std::vector<double>(4, 0.0)}, 0.0), Errc::kZeroPower);
  CHECK_THROWS_CODE(mix_at_snr(Waveform{a}, Waveform{std::vector<double>(3, 1.0)}, 0.0), Errc::kShapeMismatch);
}

TEST_CASE("spectrogram image export") {
  TempDir dir;
  LogMagSpectrogram lm;
  lm.values = RealFrames::Constant(2, 201, -3.0);
  lm.values(1, 7) = 4.0;
  export_spectrogram_image(lm, dir / "a.pgm");
  std::ifstream f(dir / "a.pgm", std::ios::binary);
  std::string header;
  std::getline(f, header);
  CHECK(header == "P5 2 201 255");
  std::vector<unsigned char> px(2 * 201);
  f.read(reinterpret_cast<char*>(px.data()), std::streamsize(px.size()));
  REQUIRE(f.gcount() == std::streamsize(px.size()));
  // row r holds bin 200 - r; column = frame
  CHECK(px[(200 - 7) * 2 + 1] == 255);
  int bright = 0;
  for (auto v : px) bright += v != 0;
  CHECK(bright == 1);

  lm.values.setConstant(1.5);
  export_spectrogram_image(lm, dir / "c.pgm");
  std::ifstream g(dir / "c.pgm", std::ios::binary);
  std::getline(g, header);
  g.read(reinterpret_cast<char*>(px.data()), std::streamsize(px.size()));
  for (auto v : px) CHECK(v == 0);
}
