// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "sepkit/audio_io.hpp"

namespace sepkit {

inline constexpr int kWinLen = 400;                // 25 ms at 16 kHz
inline constexpr int kHop = 160;                   // 10 ms at 16 kHz
inline constexpr int kNumBins = kWinLen / 2 + 1;   // 201
inline constexpr double kMagFloor = 1e-5;

/// frames x bins, row-major so each frame is contiguous.
using RealFrames = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexFrames =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ComplexSpectrogram {
  ComplexFrames bins;
  Eigen::Index frames() const { return bins.rows(); }
};

/// Natural-log magnitude with the 1e-5 floor added before the log.
struct LogMagSpectrogram {
  RealFrames values;
  Eigen::Index frames() const { return values.rows(); }
};

/// Radians in (-pi, pi].
struct PhaseMatrix {
  RealFrames values;
  Eigen::Index frames() const { return values.rows(); }
};

/// Periodic Hann: w[k] = 0.5 (1 - cos(2 pi k / n)).
std::vector<double> hann_window(int n);

/// floor((num_samples - 400) / 160) + 1, or 0 when shorter than one frame.
Eigen::Index frame_count(std::size_t num_samples);

/// Frame t covers samples [160 t, 160 t + 400); trailing samples that do not
/// fill a frame are dropped. Throws kWrongSampleRate / kTooShort.
std::pair<ComplexSpectrogram, PhaseMatrix> stft(const Waveform& wf);

/// ln(|X| + 1e-5)
LogMagSpectrogram log_magnitude(const ComplexSpectrogram& spec);

/// max(exp(lm) - 1e-5, 0)
RealFrames inv_log_magnitude(const LogMagSpectrogram& lm);

/// Squared-window sum of the fully overlapped interior: sum(w^2) / hop.
double full_overlap_window_sum();

/// Weighted overlap-add with squared-window normalization. Samples whose
/// accumulated squared window is <= 1e-10 come out as 0. Other samples are
/// divided by max(window sum, window_sum_floor); a positive floor keeps the
/// first and last few samples (covered only by window tails) from being
/// amplified by up to ~1e8 when the spectrogram is not an exact STFT. The
/// result is truncated or zero-padded to out_len.
Waveform istft(const RealFrames& magnitude, const PhaseMatrix& phase, std::size_t out_len,
               double window_sum_floor = 0.0);

struct MixResult {
  Waveform mixture;
  double gain = 1.0;  // applied to the interference
};

/// mixture = target + g * interference, with g chosen so that the power
/// ratio of target to scaled interference is exactly snr_db.
MixResult mix_at_snr(const Waveform& target, const Waveform& interference, double snr_db);

/// Mean squared amplitude.
double mean_power(const std::vector<double>& x);

/// 10 log10(P(target) / P(interference)).
double measured_snr_db(const std::vector<double>& target, const std::vector<double>& interference);

/// Binary PGM (P5), width = frames, height = bins, highest bin on the top row,
/// values min-max normalized per image (a constant image maps to 0).
void export_spectrogram_image(const LogMagSpectrogram& lm, const std::filesystem::path& path);

}  // namespace sepkit
