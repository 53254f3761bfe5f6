// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sepkit/audio_io.hpp"
#include "sepkit/datagen.hpp"
#include "sepkit/model.hpp"

namespace sepkit {

inline constexpr double kMetricCapDb = 200.0;
inline constexpr std::size_t kDefaultFilterLen = 512;

/// estimate = s_target + e_interf + e_artif
struct BssDecomposition {
  std::vector<double> s_target;  // projection onto delayed copies of the true source
  std::vector<double> e_interf;  // projection onto both references, minus s_target
  std::vector<double> e_artif;   // remainder
};

struct BssEvalResult {
  double sdr = 0.0;
  double sar = 0.0;
  double sir = 0.0;
  std::size_t filter_len = 0;
};

/// Least-squares projections onto the spans of delays 0..L-1 of the
/// references (delayed copies are zero-filled at the start and keep the
/// signal length). Normal equations are solved with a Tikhonov term of 1e-10
/// times the mean Gram diagonal. Throws kShapeMismatch or kSingularGram.
BssDecomposition bss_decompose(std::span<const double> estimate, std::span<const double> true_source,
                               std::span<const double> other_source, std::size_t filter_len);

/// SDR = 10 log10(|s|^2 / |e_i + e_a|^2), SIR = 10 log10(|s|^2 / |e_i|^2),
/// SAR = 10 log10(|s + e_i|^2 / |e_a|^2); a zero denominator gives +200 dB.
BssEvalResult bss_eval(std::span<const double> estimate, std::span<const double> true_source,
                       std::span<const double> other_source, std::size_t filter_len);

/// 10 log10(num / den) capped at +200 dB.
double capped_ratio_db(double num, double den);

/// What stands in for the model output during evaluation.
enum class OracleMode { kNone, kTarget, kMixture };

struct PairScore {
  std::size_t pair_id = 0;
  double snr_db = 0.0;
  BssEvalResult metrics;
};

struct EvalReport {
  std::vector<PairScore> pairs;
  double mean_sdr = 0.0;
  double mean_sar = 0.0;
  double mean_sir = 0.0;
};

/// Mixes (head-aligned truncation, then mix_at_snr), separates with the
/// contexts taken from the start of each utterance (plus the stored frame
/// offsets), and scores the estimated target against (target, gain *
/// interference). `model` may be null in oracle modes.
PairScore evaluate_pair(const Waveform& target, const Waveform& interference, double snr_db,
                        Separator<float>* model, std::size_t filter_len, OracleMode mode,
                        std::size_t target_context_offset = 0, std::size_t interference_context_offset = 0);

EvalReport evaluate_model(const std::vector<EvalPair>& pairs, Separator<float>* model, std::size_t filter_len,
                          OracleMode mode = OracleMode::kNone);

/// Header "pair_id,snr_db,sdr,sar,sir", one row per pair, then a "mean" row.
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace sepkit
