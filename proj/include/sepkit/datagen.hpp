// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sepkit/audio_io.hpp"
#include "sepkit/dsp.hpp"
#include "sepkit/model_config.hpp"

namespace sepkit {

inline constexpr std::array<double, 6> kTrainSnrsDb{-5, 0, 5, 10, 15, 25};
inline constexpr std::array<double, 7> kEvalSnrsDb{-5, -3, -1, 0, 1, 3, 5};

/// Utterances held in memory, grouped by speaker.
class Corpus {
 public:
  struct Speaker {
    std::string id;
    std::vector<Waveform> utterances;
  };

  Corpus() = default;
  /// Throws kWrongSampleRate for non-16 kHz audio and kInvalidManifest for
  /// duplicate ids or empty speakers.
  explicit Corpus(std::vector<Speaker> speakers);
  static Corpus load(const CorpusManifest& manifest);

  const std::vector<Speaker>& speakers() const { return speakers_; }

 private:
  std::vector<Speaker> speakers_;
};

/// Everything needed to rebuild one training example from the corpus.
/// Frame offsets index the STFT of the head-aligned, truncated utterances.
struct ExampleMeta {
  std::size_t target_speaker = 0;
  std::size_t interference_speaker = 0;
  std::string target_id;
  std::string interference_id;
  std::size_t target_utterance = 0;
  std::size_t interference_utterance = 0;
  double snr_db = 0.0;
  double gain = 1.0;                // applied to the interference
  std::size_t length = 0;           // samples after truncation
  std::size_t segment_start = 0;    // first mixture-segment frame
  std::size_t target_context_start = 0;
  std::size_t interference_context_start = 0;
  std::uint64_t seed = 0;

  bool operator==(const ExampleMeta&) const = default;
};

struct TrainingExample {
  LogMagSpectrogram mixture_segment;       // segment_frames x bins
  LogMagSpectrogram target_context;        // context_frames x bins
  LogMagSpectrogram interference_context;  // context_frames x bins
  std::vector<double> label_frame;         // target log-mag at the segment center
  ExampleMeta meta;
};

/// Draws speakers, utterances, SNR and window offsets; deterministic in seed.
/// Pairs whose truncated length is under segment + context frames are
/// redrawn, up to 100 attempts (kTooShortUtterance after that).
ExampleMeta plan_training_example(const Corpus& corpus, const ModelConfig& cfg, std::uint64_t seed,
                                  std::span<const double> snrs_db = kTrainSnrsDb);

/// Computes the features for a plan.
TrainingExample materialize_example(const Corpus& corpus, const ModelConfig& cfg, const ExampleMeta& meta);

TrainingExample sample_training_example(const Corpus& corpus, const ModelConfig& cfg, std::uint64_t seed,
                                        std::span<const double> snrs_db = kTrainSnrsDb);

struct MixtureComponents {
  Waveform target;                // truncated target utterance
  Waveform scaled_interference;   // gain * truncated interference utterance
  Waveform mixture;               // their sum
};

MixtureComponents mixture_components(const Corpus& corpus, const ExampleMeta& meta);

/// Deterministic per-example seed for step `step`, batch slot `index`.
std::uint64_t example_seed(std::uint64_t run_seed, std::uint64_t step, std::uint64_t index);

struct EvalPair {
  std::size_t pair_id = 0;
  std::string target_id;
  std::string interference_id;
  std::filesystem::path target_path;
  std::filesystem::path interference_path;
  double snr_db = 0.0;
  std::size_t target_context_offset = 0;        // frames; contexts come from the utterance start
  std::size_t interference_context_offset = 0;
  std::uint64_t seed = 0;

  bool operator==(const EvalPair&) const = default;
};

/// Seeded random cross-speaker pairing of the manifest's utterances. When a
/// perfect matching is impossible (odd count, or one speaker owning more
/// than half the utterances) the surplus utterances are left out. SNRs cycle
/// through snrs_db in pair order.
std::vector<EvalPair> build_eval_set(const CorpusManifest& manifest, std::uint64_t seed,
                                     std::span<const double> snrs_db = kEvalSnrsDb);

void save_eval_manifest(const std::filesystem::path& path, const std::vector<EvalPair>& pairs);
std::vector<EvalPair> load_eval_manifest(const std::filesystem::path& path);

struct SynthSpeakerSpec {
  std::string id;
  SpeakerKind kind;
};

/// "harmonic:<f0>" or "noise:<low>:<high>", id given separately.
SynthSpeakerSpec parse_synth_speaker(std::string id, std::string_view text);

/// harmonic 220 Hz and band-limited noise 3-5 kHz.
std::vector<SynthSpeakerSpec> default_synth_speakers();

/// Utterance u of speaker k is synth_speaker(kind, seconds, example_seed(seed, k, u)).
Corpus synth_corpus(const std::vector<SynthSpeakerSpec>& speakers, std::size_t utterances_per_speaker,
                    double seconds, std::uint64_t seed);

/// Writes <dir>/<id>/<u>.wav for every utterance of synth_corpus plus
/// <dir>/manifest.json, and returns that manifest.
CorpusManifest write_synth_corpus(const std::filesystem::path& dir, const std::vector<SynthSpeakerSpec>& speakers,
                                  std::size_t utterances_per_speaker, double seconds, std::uint64_t seed);

/// Head-aligned truncation of both signals to the shorter length.
std::pair<Waveform, Waveform> truncate_to_common(const Waveform& a, const Waveform& b);

}  // namespace sepkit
