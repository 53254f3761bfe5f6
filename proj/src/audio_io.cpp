// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/audio_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "sepkit/error.hpp"

namespace sepkit {
namespace {

std::uint32_t le_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

void require_pipeline_rate(const Waveform& wf, std::string_view what) {
  if (wf.sample_rate != kSampleRate) {
    throw Error(Errc::kWrongSampleRate, std::string(what) + " has sample rate " +
                                            std::to_string(wf.sample_rate) + " Hz, expected " +
                                            std::to_string(kSampleRate) + " Hz");
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::kNotWav, path.string() + " is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t len = le_u32(hdr + 4);
    std::size_t body = pos + 8;
    std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw Error(Errc::kNotWav, path.string() + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = le_u16(f);
      channels = le_u16(f + 2);
      rate = le_u32(f + 4);
      bits = le_u16(f + 14);
      if (format == kFormatExtensible && avail >= 26) format = le_u16(f + 24);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = avail;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt || data == nullptr) {
    throw Error(Errc::kNotWav, path.string() + ": missing fmt or data chunk");
  }
  if (format != kFormatPcm || bits != 16 || channels != 1) {
    throw Error(Errc::kUnsupportedEncoding,
                path.string() + ": only PCM 16-bit mono is supported (format " +
                    std::to_string(format) + ", " + std::to_string(bits) + " bits, " +
                    std::to_string(channels) + " channels)");
  }

  Waveform wf;
  wf.sample_rate = static_cast<int>(rate);
  wf.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < wf.samples.size(); ++i) {
    auto v = static_cast<std::int16_t>(le_u16(data + 2 * i));
    wf.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return wf;
}

std::int16_t to_pcm16(double sample) {
  double clipped = std::clamp(sample, -1.0, 1.0);
  double scaled = std::nearbyint(clipped * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

void write_wav(const std::filesystem::path& path, const Waveform& wf) {
  const auto n = static_cast<std::uint32_t>(wf.samples.size());
  std::string out;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  put_u32(out, 36 + 2 * n);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wf.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wf.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, 2 * n);
  for (double s : wf.samples) put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::kIoError, "write failed for " + path.string());
}

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

namespace {

void normalize_rms(std::vector<double>& x, double target) {
  double r = rms(x);
  if (r == 0.0) return;
  for (double& v : x) v *= target / r;
}

std::vector<double> synth_harmonic(const Harmonic& h, std::size_t n, int sr, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::array<double, 5> phases{};
  for (double& p : phases) p = phase(rng);
  std::vector<double> x(n, 0.0);
  for (int k = 1; k <= 5; ++k) {
    double f = k * h.f0_hz;
    if (f >= sr / 2.0) break;
    double w = 2.0 * std::numbers::pi * f / sr;
    for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(w * static_cast<double>(i) + phases[k - 1]);
  }
  return x;
}

std::vector<double> synth_filtered_noise(const FilteredNoise& b, std::size_t n, int sr,
                                         std::mt19937_64& rng) {
  constexpr int kTaps = 129;
  constexpr int kHalf = kTaps / 2;
  // windowed-sinc band-pass: difference of two low-pass kernels
  std::vector<double> h(kTaps);
  const double lo = b.low_hz / sr, hi = b.high_hz / sr;
  for (int k = 0; k < kTaps; ++k) {
    int m = k - kHalf;
    double ideal = (m == 0) ? 2.0 * (hi - lo)
                            : (std::sin(2.0 * std::numbers::pi * hi * m) -
                               std::sin(2.0 * std::numbers::pi * lo * m)) /
                                  (std::numbers::pi * m);
    double win = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (k + 1) / (kTaps + 1)));
    h[k] = ideal * win;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(n + kTaps - 1);
  for (double& v : white) v = gauss(rng);
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < kTaps; ++k) acc += h[k] * white[i + kTaps - 1 - k];
    x[i] = acc;
  }
  return x;
}

}  // namespace

Waveform synth_speaker(const SpeakerKind& kind, double duration_s, std::uint64_t seed,
                       int sample_rate) {
  if (!(duration_s > 0.0)) throw Error(Errc::kInvalidConfig, "synth duration must be positive");
  auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  n = std::max<std::size_t>(n, 1);
  std::mt19937_64 rng(seed);
  Waveform wf;
  wf.sample_rate = sample_rate;
  wf.samples = std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Harmonic>) {
          return synth_harmonic(k, n, sample_rate, rng);
        } else {
          return synth_filtered_noise(k, n, sample_rate, rng);
        }
      },
      kind);
  normalize_rms(wf.samples, 0.1);
  return wf;
}

void CorpusManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& s : speakers) {
    if (!seen.insert(s.id).second) {
      throw Error(Errc::kInvalidManifest, "duplicate speaker id '" + s.id + "'");
    }
    if (s.utterances.empty()) {
      throw Error(Errc::kInvalidManifest, "speaker '" + s.id + "' has no utterances");
    }
  }
}

std::size_t CorpusManifest::utterance_count() const {
  std::size_t n = 0;
  for (const auto& s : speakers) n += s.utterances.size();
  return n;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open manifest " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidManifest, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::kInvalidManifest, path.string() + ": expected an object");
  const auto base = path.parent_path();
  CorpusManifest m;
  for (const auto& [id, utts] : j.items()) {
    if (!utts.is_array()) {
      throw Error(Errc::kInvalidManifest, "speaker '" + id + "' must map to an array of paths");
    }
    CorpusManifest::Speaker s{id, {}};
    for (const auto& p : utts) {
      std::filesystem::path up = p.get<std::string>();
      s.utterances.push_back(up.is_relative() ? base / up : up);
    }
    m.speakers.push_back(std::move(s));
  }
  m.validate();
  return m;
}

void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest) {
  manifest.validate();
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& s : manifest.speakers) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& u : s.utterances) arr.push_back(u.string());
    j[s.id] = arr;
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIoError, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

bool speaker_disjoint(const std::vector<const CorpusManifest*>& manifests) {
  std::set<std::string> seen;
  for (const auto* m : manifests) {
    for (const auto& s : m->speakers) {
      if (!seen.insert(s.id).second) return false;
    }
  }
  return true;
}

std::pair<CorpusManifest, CorpusManifest> split_manifest(const CorpusManifest& manifest,
                                                         std::size_t heldout_speakers,
                                                         std::uint64_t seed) {
  manifest.validate();
  if (heldout_speakers >= manifest.speakers.size()) {
    throw Error(Errc::kNotEnoughSpeakers, "cannot hold out " + std::to_string(heldout_speakers) +
                                              " of " + std::to_string(manifest.speakers.size()) +
                                              " speakers");
  }
  std::vector<std::size_t> order(manifest.speakers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> held(order.size(), false);
  for (std::size_t i = 0; i < heldout_speakers; ++i) held[order[i]] = true;
  std::pair<CorpusManifest, CorpusManifest> out;
  for (std::size_t i = 0; i < manifest.speakers.size(); ++i) {
    (held[i] ? out.second : out.first).speakers.push_back(manifest.speakers[i]);
  }
  return out;
}

}  // namespace sepkit
