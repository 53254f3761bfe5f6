// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "sepkit/error.hpp"

namespace sepkit::nn {
namespace {

constexpr char kMagic[4] = {'S', 'P', 'K', 'C'};

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(Errc::kIoError, "cannot open checkpoint " + path.string());
  }

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) throw Error(Errc::kIoError, "truncated checkpoint " + path_.string());
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor<float>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw Error(Errc::kIoError, "write failed for " + path.string());
}

std::vector<StoredTensor> read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(Errc::kConfigMismatch, path.string() + " is not a sepkit checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::kConfigMismatch, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<StoredTensor> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    StoredTensor t;
    t.name.resize(r.u32());
    r.bytes(t.name.data(), t.name.size());
    const std::uint32_t rank = r.u32();
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(r.u32());
    t.data.resize(numel(t.shape));
    for (float& v : t.data) v = std::bit_cast<float>(r.u32());
    out.push_back(std::move(t));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor<float>>& tensors) {
  auto stored = read_checkpoint(path);
  std::map<std::string, StoredTensor*> by_name;
  for (auto& s : stored) by_name[s.name] = &s;
  if (stored.size() != tensors.size()) {
    throw Error(Errc::kConfigMismatch, "checkpoint holds " + std::to_string(stored.size()) +
                                           " tensors, model expects " + std::to_string(tensors.size()));
  }
  for (const auto& t : tensors) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw Error(Errc::kConfigMismatch, "checkpoint lacks tensor " + t.name);
    if (it->second->shape != t.tensor.shape()) {
      throw Error(Errc::kConfigMismatch, "tensor " + t.name + " has shape " +
                                             shape_str(it->second->shape) + " in checkpoint, model expects " +
                                             shape_str(t.tensor.shape()));
    }
  }
  for (const auto& t : tensors) {
    Tensor<float> handle = t.tensor;
    const auto& src = by_name[t.name]->data;
    std::copy(src.begin(), src.end(), handle.data().begin());
  }
}

}  // namespace sepkit::nn
