// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "sepkit/error.hpp"

namespace sepkit {
namespace {

// FFTW planning is not thread safe; plans are created once and executed
// through the new-array interface, which is.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const FftPlans& plans() {
  static FftPlans p;
  static std::once_flag once;
  std::call_once(once, [] {
    double* r = fftw_alloc_real(kWinLen);
    fftw_complex* c = fftw_alloc_complex(kNumBins);
    p.forward = fftw_plan_dft_r2c_1d(kWinLen, r, c, FFTW_ESTIMATE);
    p.inverse = fftw_plan_dft_c2r_1d(kWinLen, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
  });
  return p;
}

struct FftBuffers {
  double* real = fftw_alloc_real(kWinLen);
  fftw_complex* spec = fftw_alloc_complex(kNumBins);
  FftBuffers() = default;
  FftBuffers(const FftBuffers&) = delete;
  FftBuffers& operator=(const FftBuffers&) = delete;
  ~FftBuffers() {
    fftw_free(real);
    fftw_free(spec);
  }
};

const std::vector<double>& analysis_window() {
  static const std::vector<double> w = hann_window(kWinLen);
  return w;
}

}  // namespace

std::vector<double> hann_window(int n) {
  if (n < 2) throw Error(Errc::kInvalidConfig, "hann_window needs n >= 2");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    w[static_cast<std::size_t>(k)] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
  }
  return w;
}

Eigen::Index frame_count(std::size_t num_samples) {
  if (num_samples < static_cast<std::size_t>(kWinLen)) return 0;
  return static_cast<Eigen::Index>((num_samples - kWinLen) / kHop + 1);
}

std::pair<ComplexSpectrogram, PhaseMatrix> stft(const Waveform& wf) {
  require_pipeline_rate(wf, "stft input");
  const Eigen::Index frames = frame_count(wf.size());
  if (frames == 0) {
    throw Error(Errc::kTooShort, "stft needs at least " + std::to_string(kWinLen) +
                                     " samples, got " + std::to_string(wf.size()));
  }
  const auto& p = plans();
  const auto& win = analysis_window();
  FftBuffers buf;
  ComplexSpectrogram spec{ComplexFrames(frames, kNumBins)};
  PhaseMatrix phase{RealFrames(frames, kNumBins)};
  for (Eigen::Index t = 0; t < frames; ++t) {
    const double* src = wf.samples.data() + t * kHop;
    for (int k = 0; k < kWinLen; ++k) buf.real[k] = src[k] * win[static_cast<std::size_t>(k)];
    fftw_execute_dft_r2c(p.forward, buf.real, buf.spec);
    for (int b = 0; b < kNumBins; ++b) {
      std::complex<double> z(buf.spec[b][0], buf.spec[b][1]);
      spec.bins(t, b) = z;
      double a = std::arg(z);
      phase.values(t, b) = (a == -std::numbers::pi) ? std::numbers::pi : a;
    }
  }
  return {std::move(spec), std::move(phase)};
}

LogMagSpectrogram log_magnitude(const ComplexSpectrogram& spec) {
  LogMagSpectrogram lm{RealFrames(spec.bins.rows(), spec.bins.cols())};
  for (Eigen::Index i = 0; i < spec.bins.size(); ++i) {
    lm.values.data()[i] = std::log(std::abs(spec.bins.data()[i]) + kMagFloor);
  }
  return lm;
}

RealFrames inv_log_magnitude(const LogMagSpectrogram& lm) {
  RealFrames mag(lm.values.rows(), lm.values.cols());
  for (Eigen::Index i = 0; i < lm.values.size(); ++i) {
    mag.data()[i] = std::max(std::exp(lm.values.data()[i]) - kMagFloor, 0.0);
  }
  return mag;
}

double full_overlap_window_sum() {
  double s = 0.0;
  for (double w : analysis_window()) s += w * w;
  return s / kHop;
}

Waveform istft(const RealFrames& magnitude, const PhaseMatrix& phase, std::size_t out_len,
               double window_sum_floor) {
  if (magnitude.rows() != phase.values.rows() || magnitude.cols() != phase.values.cols() ||
      magnitude.cols() != kNumBins) {
    throw Error(Errc::kShapeMismatch, "istft magnitude " + std::to_string(magnitude.rows()) + "x" +
                                          std::to_string(magnitude.cols()) + " vs phase " +
                                          std::to_string(phase.values.rows()) + "x" +
                                          std::to_string(phase.values.cols()));
  }
  const Eigen::Index frames = magnitude.rows();
  const std::size_t span = frames > 0 ? static_cast<std::size_t>((frames - 1) * kHop + kWinLen) : 0;
  std::vector<double> acc(span, 0.0), wsum(span, 0.0);
  const auto& p = plans();
  const auto& win = analysis_window();
  FftBuffers buf;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int b = 0; b < kNumBins; ++b) {
      const double m = magnitude(t, b), ph = phase.values(t, b);
      buf.spec[b][0] = m * std::cos(ph);
      buf.spec[b][1] = m * std::sin(ph);
    }
    // DC and Nyquist bins of a real signal carry no imaginary part.
    buf.spec[0][1] = 0.0;
    buf.spec[kNumBins - 1][1] = 0.0;
    fftw_execute_dft_c2r(p.inverse, buf.spec, buf.real);
    const std::size_t off = static_cast<std::size_t>(t * kHop);
    for (int k = 0; k < kWinLen; ++k) {
      const double w = win[static_cast<std::size_t>(k)];
      acc[off + k] += buf.real[k] / kWinLen * w;
      wsum[off + k] += w * w;
    }
  }
  Waveform out;
  out.sample_rate = kSampleRate;
  out.samples.assign(out_len, 0.0);
  const std::size_t n = std::min(out_len, span);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = wsum[i] > 1e-10 ? acc[i] / std::max(wsum[i], window_sum_floor) : 0.0;
  }
  return out;
}

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double measured_snr_db(const std::vector<double>& target, const std::vector<double>& interference) {
  return 10.0 * std::log10(mean_power(target) / mean_power(interference));
}

MixResult mix_at_snr(const Waveform& target, const Waveform& interference, double snr_db) {
  if (target.size() != interference.size()) {
    throw Error(Errc::kShapeMismatch, "mix_at_snr needs equal lengths, got " +
                                          std::to_string(target.size()) + " and " +
                                          std::to_string(interference.size()));
  }
  const double pt = mean_power(target.samples), pi = mean_power(interference.samples);
  if (pt == 0.0 || pi == 0.0) throw Error(Errc::kZeroPower, "mix_at_snr input has zero power");
  MixResult r;
  r.gain = std::sqrt(pt / (pi * std::pow(10.0, snr_db / 10.0)));
  r.mixture.sample_rate = target.sample_rate;
  r.mixture.samples.resize(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    r.mixture.samples[i] = target.samples[i] + r.gain * interference.samples[i];
  }
  return r;
}

void export_spectrogram_image(const LogMagSpectrogram& lm, const std::filesystem::path& path) {
  const Eigen::Index width = lm.values.rows(), height = lm.values.cols();
  std::string pixels(static_cast<std::size_t>(width * height), '\0');
  if (lm.values.size() > 0) {
    const double lo = lm.values.minCoeff(), hi = lm.values.maxCoeff();
    const double range = hi - lo;
    if (range > 0.0) {
      for (Eigen::Index row = 0; row < height; ++row) {
        const Eigen::Index bin = height - 1 - row;
        for (Eigen::Index t = 0; t < width; ++t) {
          double v = (lm.values(t, bin) - lo) / range * 255.0;
          pixels[static_cast<std::size_t>(row * width + t)] =
              static_cast<char>(static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L)));
        }
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << "P5 " << width << ' ' << height << " 255\n";
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw Error(Errc::kIoError, "write failed for " + path.string());
}

}  // namespace sepkit
