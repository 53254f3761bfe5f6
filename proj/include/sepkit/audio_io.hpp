// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sepkit {

inline constexpr int kSampleRate = 16000;

/// Mono sample sequence. Amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

/// Throws Errc::kWrongSampleRate unless wf runs at 16 kHz.
void require_pipeline_rate(const Waveform& wf, std::string_view what);

/// RIFF/WAVE PCM 16-bit mono. Samples are int16 / 32768.
Waveform read_wav(const std::filesystem::path& path);

/// Writes PCM 16-bit mono. Samples are clipped to [-1, 1] and rounded to the
/// nearest int16 (full scale +1.0 saturates at 32767).
void write_wav(const std::filesystem::path& path, const Waveform& wf);

/// Quantizes one sample exactly as write_wav does.
std::int16_t to_pcm16(double sample);

struct Harmonic {
  double f0_hz;
};
struct FilteredNoise {
  double low_hz;
  double high_hz;
};
using SpeakerKind = std::variant<Harmonic, FilteredNoise>;

/// Deterministic stand-in for a speaker's utterance. Output RMS is 0.1.
///  - Harmonic: sum of the first 5 harmonics of f0 (those below Nyquist),
///    equal amplitude, seeded random phases.
///  - FilteredNoise: seeded Gaussian white noise through a windowed-sinc
///    band-pass FIR.
Waveform synth_speaker(const SpeakerKind& kind, double duration_s, std::uint64_t seed,
                       int sample_rate = kSampleRate);

double rms(const std::vector<double>& x);

/// speaker_id -> utterance paths. Serialized as a JSON object mapping each
/// speaker id to an array of WAV paths; relative paths resolve against the
/// manifest's directory.
struct CorpusManifest {
  struct Speaker {
    std::string id;
    std::vector<std::filesystem::path> utterances;
  };
  std::vector<Speaker> speakers;

  /// Throws kInvalidManifest on duplicate ids or empty speakers.
  void validate() const;
  std::size_t utterance_count() const;
};

CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);

/// True when no speaker id appears in more than one of the manifests.
bool speaker_disjoint(const std::vector<const CorpusManifest*>& manifests);

/// Seeded speaker-level split: `heldout_speakers` speakers go to the second
/// manifest, the rest to the first.
std::pair<CorpusManifest, CorpusManifest> split_manifest(const CorpusManifest& manifest,
                                                         std::size_t heldout_speakers,
                                                         std::uint64_t seed);

}  // namespace sepkit
