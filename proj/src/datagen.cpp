// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "sepkit/error.hpp"

namespace sepkit {
namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::size_t samples_for_frames(std::size_t frames) {
  return (frames - 1) * static_cast<std::size_t>(kHop) + static_cast<std::size_t>(kWinLen);
}

/// Log-magnitude of `frames` frames starting at frame `start` of x (scaled by g).
LogMagSpectrogram frames_logmag(const std::vector<double>& x, std::size_t start, std::size_t frames,
                                double g = 1.0) {
  const std::size_t off = start * static_cast<std::size_t>(kHop);
  Waveform slice;
  slice.samples.resize(samples_for_frames(frames));
  for (std::size_t i = 0; i < slice.samples.size(); ++i) slice.samples[i] = g * x[off + i];
  return log_magnitude(stft(slice).first);
}

}  // namespace

Corpus::Corpus(std::vector<Speaker> speakers) : speakers_(std::move(speakers)) {
  std::set<std::string> ids;
  for (const auto& s : speakers_) {
    if (!ids.insert(s.id).second) throw Error(Errc::kInvalidManifest, "duplicate speaker id '" + s.id + "'");
    if (s.utterances.empty()) throw Error(Errc::kInvalidManifest, "speaker '" + s.id + "' has no utterances");
    for (const auto& u : s.utterances) require_pipeline_rate(u, "utterance of speaker '" + s.id + "'");
  }
}

Corpus Corpus::load(const CorpusManifest& manifest) {
  manifest.validate();
  std::vector<Speaker> speakers;
  for (const auto& s : manifest.speakers) {
    Speaker sp{s.id, {}};
    for (const auto& p : s.utterances) sp.utterances.push_back(read_wav(p));
    speakers.push_back(std::move(sp));
  }
  return Corpus(std::move(speakers));
}

ExampleMeta plan_training_example(const Corpus& corpus, const ModelConfig& cfg, std::uint64_t seed,
                                  std::span<const double> snrs_db) {
  const auto& spk = corpus.speakers();
  if (spk.size() < 2) {
    throw Error(Errc::kNotEnoughSpeakers, "need at least 2 speakers, corpus has " + std::to_string(spk.size()));
  }
  if (snrs_db.empty()) throw Error(Errc::kInvalidConfig, "empty SNR set");
  const std::size_t seg = cfg.segment_frames, ctx = cfg.context_frames;
  std::mt19937_64 rng(seed);
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    ExampleMeta m;
    m.seed = seed;
    m.target_speaker = uniform_index(rng, spk.size());
    m.interference_speaker = uniform_index(rng, spk.size() - 1);
    if (m.interference_speaker >= m.target_speaker) ++m.interference_speaker;
    const auto& ts = spk[m.target_speaker];
    const auto& is = spk[m.interference_speaker];
    m.target_id = ts.id;
    m.interference_id = is.id;
    m.target_utterance = uniform_index(rng, ts.utterances.size());
    m.interference_utterance = uniform_index(rng, is.utterances.size());
    m.snr_db = snrs_db[uniform_index(rng, snrs_db.size())];

    const Waveform& tw = ts.utterances[m.target_utterance];
    const Waveform& iw = is.utterances[m.interference_utterance];
    m.length = std::min(tw.size(), iw.size());
    const auto frames = static_cast<std::size_t>(frame_count(m.length));
    if (frames < seg + ctx) continue;

    // segment starts that leave room for a disjoint context on either side
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + seg <= frames; ++s) {
      if (s >= ctx || s + seg + ctx <= frames) starts.push_back(s);
    }
    m.segment_start = starts[uniform_index(rng, starts.size())];
    std::vector<std::size_t> ctx_starts;
    for (std::size_t c = 0; c + ctx <= frames; ++c) {
      if (c + ctx <= m.segment_start || c >= m.segment_start + seg) ctx_starts.push_back(c);
    }
    m.target_context_start = ctx_starts[uniform_index(rng, ctx_starts.size())];
    m.interference_context_start = ctx_starts[uniform_index(rng, ctx_starts.size())];

    double pt = 0.0, pi = 0.0;
    for (std::size_t i = 0; i < m.length; ++i) {
      pt += tw.samples[i] * tw.samples[i];
      pi += iw.samples[i] * iw.samples[i];
    }
    if (pt == 0.0 || pi == 0.0) continue;
    m.gain = std::sqrt(pt / (pi * std::pow(10.0, m.snr_db / 10.0)));
    return m;
  }
  throw Error(Errc::kTooShortUtterance,
              "no utterance pair of at least " + std::to_string(seg + ctx) + " frames found in " +
                  std::to_string(kMaxAttempts) + " attempts");
}

TrainingExample materialize_example(const Corpus& corpus, const ModelConfig& cfg, const ExampleMeta& meta) {
  const auto& tw = corpus.speakers().at(meta.target_speaker).utterances.at(meta.target_utterance).samples;
  const auto& iw =
      corpus.speakers().at(meta.interference_speaker).utterances.at(meta.interference_utterance).samples;
  const std::size_t seg = cfg.segment_frames;

  TrainingExample ex;
  ex.meta = meta;
  {
    const std::size_t off = meta.segment_start * static_cast<std::size_t>(kHop);
    Waveform mix;
    mix.samples.resize(samples_for_frames(seg));
    for (std::size_t i = 0; i < mix.samples.size(); ++i) {
      mix.samples[i] = tw[off + i] + meta.gain * iw[off + i];
    }
    ex.mixture_segment = log_magnitude(stft(mix).first);
  }
  auto label = frames_logmag(tw, meta.segment_start + cfg.center_frame(), 1);
  ex.label_frame.assign(label.values.data(), label.values.data() + label.values.size());
  ex.target_context = frames_logmag(tw, meta.target_context_start, cfg.context_frames);
  ex.interference_context = frames_logmag(iw, meta.interference_context_start, cfg.context_frames);
  return ex;
}

TrainingExample sample_training_example(const Corpus& corpus, const ModelConfig& cfg, std::uint64_t seed,
                                        std::span<const double> snrs_db) {
  return materialize_example(corpus, cfg, plan_training_example(corpus, cfg, seed, snrs_db));
}

MixtureComponents mixture_components(const Corpus& corpus, const ExampleMeta& meta) {
  const auto& tw = corpus.speakers().at(meta.target_speaker).utterances.at(meta.target_utterance).samples;
  const auto& iw =
      corpus.speakers().at(meta.interference_speaker).utterances.at(meta.interference_utterance).samples;
  MixtureComponents c;
  c.target.samples.assign(tw.begin(), tw.begin() + static_cast<std::ptrdiff_t>(meta.length));
  c.scaled_interference.samples.resize(meta.length);
  c.mixture.samples.resize(meta.length);
  for (std::size_t i = 0; i < meta.length; ++i) {
    c.scaled_interference.samples[i] = meta.gain * iw[i];
    c.mixture.samples[i] = tw[i] + meta.gain * iw[i];
  }
  return c;
}

std::uint64_t example_seed(std::uint64_t run_seed, std::uint64_t step, std::uint64_t index) {
  // splitmix64 finalizer over a combined key
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(run_seed) ^ step) ^ index);
}

std::vector<EvalPair> build_eval_set(const CorpusManifest& manifest, std::uint64_t seed,
                                     std::span<const double> snrs_db) {
  manifest.validate();
  if (manifest.speakers.size() < 2) {
    throw Error(Errc::kNotEnoughSpeakers,
                "eval pairing needs at least 2 speakers, manifest has " + std::to_string(manifest.speakers.size()));
  }
  if (snrs_db.empty()) throw Error(Errc::kInvalidConfig, "empty SNR set");
  std::mt19937_64 rng(seed);

  struct Utt {
    std::size_t speaker;
    std::size_t index;
  };
  std::vector<std::vector<Utt>> groups(manifest.speakers.size());
  for (std::size_t s = 0; s < manifest.speakers.size(); ++s) {
    for (std::size_t u = 0; u < manifest.speakers[s].utterances.size(); ++u) groups[s].push_back({s, u});
    std::shuffle(groups[s].begin(), groups[s].end(), rng);
  }
  std::shuffle(groups.begin(), groups.end(), rng);

  // Trim so a cross-speaker perfect matching exists: the largest group may
  // hold at most half of the utterances, and the total must be even.
  std::size_t total = 0, largest = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    total += groups[g].size();
    if (groups[g].size() > groups[largest].size()) largest = g;
  }
  const std::size_t rest = total - groups[largest].size();
  if (groups[largest].size() > rest) {
    groups[largest].resize(rest);
  } else if (total % 2 == 1) {
    groups[largest].pop_back();
  }

  // Laid end to end, every speaker occupies a contiguous run no longer than
  // half the list, so item i and item i + n/2 always differ in speaker.
  std::vector<Utt> flat;
  for (const auto& g : groups) flat.insert(flat.end(), g.begin(), g.end());
  const std::size_t half = flat.size() / 2;
  std::vector<std::pair<Utt, Utt>> pairs;
  for (std::size_t i = 0; i < half; ++i) {
    Utt a = flat[i], b = flat[i + half];
    if (std::bernoulli_distribution(0.5)(rng)) std::swap(a, b);
    pairs.emplace_back(a, b);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);

  std::vector<EvalPair> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [t, i] = pairs[k];
    EvalPair p;
    p.pair_id = k;
    p.target_id = manifest.speakers[t.speaker].id;
    p.interference_id = manifest.speakers[i.speaker].id;
    p.target_path = manifest.speakers[t.speaker].utterances[t.index];
    p.interference_path = manifest.speakers[i.speaker].utterances[i.index];
    p.snr_db = snrs_db[k % snrs_db.size()];
    p.seed = seed;
    out.push_back(std::move(p));
  }
  return out;
}

void save_eval_manifest(const std::filesystem::path& path, const std::vector<EvalPair>& pairs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    arr.push_back({{"pair_id", p.pair_id},
                   {"target_id", p.target_id},
                   {"interference_id", p.interference_id},
                   {"target_path", std::filesystem::absolute(p.target_path).lexically_normal().string()},
                   {"interference_path", std::filesystem::absolute(p.interference_path).lexically_normal().string()},
                   {"snr_db", p.snr_db},
                   {"target_context_offset", p.target_context_offset},
                   {"interference_context_offset", p.interference_context_offset},
                   {"seed", p.seed}});
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIoError, "cannot write eval manifest " + path.string());
  out << arr.dump(2) << '\n';
}

std::vector<EvalPair> load_eval_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open eval manifest " + path.string());
  std::vector<EvalPair> out;
  try {
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw Error(Errc::kInvalidManifest, path.string() + ": expected an array");
    const auto base = path.parent_path();
    for (const auto& r : j) {
      EvalPair p;
      p.pair_id = r.at("pair_id").get<std::size_t>();
      p.target_id = r.at("target_id").get<std::string>();
      p.interference_id = r.at("interference_id").get<std::string>();
      p.target_path = r.at("target_path").get<std::string>();
      p.interference_path = r.at("interference_path").get<std::string>();
      if (p.target_path.is_relative()) p.target_path = base / p.target_path;
      if (p.interference_path.is_relative()) p.interference_path = base / p.interference_path;
      p.snr_db = r.at("snr_db").get<double>();
      p.target_context_offset = r.value("target_context_offset", std::size_t{0});
      p.interference_context_offset = r.value("interference_context_offset", std::size_t{0});
      p.seed = r.value("seed", std::uint64_t{0});
      if (p.target_id == p.interference_id) {
        throw Error(Errc::kInvalidManifest, "pair " + std::to_string(p.pair_id) + " uses one speaker twice");
      }
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidManifest, path.string() + ": " + e.what());
  }
  return out;
}

std::pair<Waveform, Waveform> truncate_to_common(const Waveform& a, const Waveform& b) {
  const std::size_t n = std::min(a.size(), b.size());
  Waveform x = a, y = b;
  x.samples.resize(n);
  y.samples.resize(n);
  return {std::move(x), std::move(y)};
}

SynthSpeakerSpec parse_synth_speaker(std::string id, std::string_view text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(':', pos);
    parts.emplace_back(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  const auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !(v > 0.0)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(Errc::kInvalidConfig, "bad number '" + s + "' in speaker spec '" + std::string(text) + "'");
    }
  };
  if (parts.size() == 2 && parts[0] == "harmonic") return {std::move(id), Harmonic{number(parts[1])}};
  if (parts.size() == 3 && parts[0] == "noise") {
    const double lo = number(parts[1]), hi = number(parts[2]);
    if (!(lo < hi)) throw Error(Errc::kInvalidConfig, "noise band needs low < high: " + std::string(text));
    return {std::move(id), FilteredNoise{lo, hi}};
  }
  throw Error(Errc::kInvalidConfig,
              "speaker spec must be harmonic:<f0> or noise:<low>:<high>, got '" + std::string(text) + "'");
}

std::vector<SynthSpeakerSpec> default_synth_speakers() {
  return {{"harmonic220", Harmonic{220.0}}, {"noise3k5k", FilteredNoise{3000.0, 5000.0}}};
}

Corpus synth_corpus(const std::vector<SynthSpeakerSpec>& speakers, std::size_t utterances_per_speaker,
                    double seconds, std::uint64_t seed) {
  std::vector<Corpus::Speaker> out;
  for (std::size_t k = 0; k < speakers.size(); ++k) {
    Corpus::Speaker sp{speakers[k].id, {}};
    for (std::size_t u = 0; u < utterances_per_speaker; ++u) {
      sp.utterances.push_back(synth_speaker(speakers[k].kind, seconds, example_seed(seed, k, u)));
    }
    out.push_back(std::move(sp));
  }
  return Corpus(std::move(out));
}

CorpusManifest write_synth_corpus(const std::filesystem::path& dir, const std::vector<SynthSpeakerSpec>& speakers,
                                  std::size_t utterances_per_speaker, double seconds, std::uint64_t seed) {
  const Corpus corpus = synth_corpus(speakers, utterances_per_speaker, seconds, seed);
  CorpusManifest manifest;
  for (const auto& sp : corpus.speakers()) {
    std::filesystem::create_directories(dir / sp.id);
    CorpusManifest::Speaker entry{sp.id, {}};
    for (std::size_t u = 0; u < sp.utterances.size(); ++u) {
      const auto rel = std::filesystem::path(sp.id) / (std::to_string(u) + ".wav");
      write_wav(dir / rel, sp.utterances[u]);
      entry.utterances.push_back(rel);
    }
    manifest.speakers.push_back(std::move(entry));
  }
  save_manifest(dir / "manifest.json", manifest);
  return load_manifest(dir / "manifest.json");
}

}  // namespace sepkit
