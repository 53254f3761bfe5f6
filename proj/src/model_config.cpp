// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/model_config.hpp"

#include <cmath>

#include "sepkit/error.hpp"
#include "sepkit/nn/ops.hpp"

namespace sepkit {

std::vector<BlockSpec> default_embedding_blocks() {
  return {{8, 4, 3, 2, 64}, {8, 4, 3, 2, 128}, {4, 4, 1, 1, 256}, {4, 4, 1, 2, 512}};
}

std::vector<BlockSpec> default_separation_blocks() {
  return {{4, 4, 1, 1, 64},  {4, 4, 1, 1, 64},  {4, 4, 2, 2, 128}, {4, 4, 1, 1, 128},
          {3, 3, 2, 2, 256}, {3, 3, 1, 1, 256}, {3, 3, 2, 2, 512}, {3, 3, 1, 1, 512}};
}

std::size_t ModelConfig::scaled(std::size_t channels) const {
  // the epsilon keeps exact products (64 * 0.125) from rounding up
  return static_cast<std::size_t>(std::ceil(static_cast<double>(channels) * width_scale - 1e-9));
}

std::size_t ModelConfig::embed_dim() const { return scaled(embed_blocks.back().channels); }

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::kInvalidConfig, m); };
  if (embed_blocks.empty() || sep_blocks.empty()) fail("block tables must be non-empty");
  for (const auto* table : {&embed_blocks, &sep_blocks}) {
    for (const auto& b : *table) {
      if (b.kernel_time == 0 || b.kernel_freq == 0 || b.stride_time == 0 || b.stride_freq == 0 ||
          b.channels == 0) {
        fail("kernel, stride and channel entries must be >= 1");
      }
    }
  }
  if (!(width_scale > 0.0 && width_scale <= 1.0)) fail("width_scale must lie in (0, 1]");
  if (segment_frames == 0 || context_frames == 0 || n_freq == 0) {
    fail("segment_frames, context_frames and n_freq must be positive");
  }
  if (!(bn_eps > 0.0) || !(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("invalid batch-norm constants");
}

namespace {

std::vector<nn::Shape> ladder(const std::vector<BlockSpec>& blocks, const ModelConfig& cfg,
                              std::size_t frames, std::size_t batch) {
  std::vector<nn::Shape> out{{batch, 1, frames, cfg.n_freq}};
  for (const auto& b : blocks) {
    const auto& prev = out.back();
    out.push_back({batch, cfg.scaled(b.channels), nn::same_out(prev[2], b.stride_time),
                   nn::same_out(prev[3], b.stride_freq)});
  }
  return out;
}

const char* to_string(InjectionPoint p) { return p == InjectionPoint::kPostConv ? "post_conv" : "post_bn"; }

}  // namespace

std::vector<nn::Shape> embedding_shape_ladder(const ModelConfig& cfg, std::size_t batch) {
  return ladder(cfg.embed_blocks, cfg, cfg.context_frames, batch);
}

std::vector<nn::Shape> separation_shape_ladder(const ModelConfig& cfg, std::size_t batch) {
  return ladder(cfg.sep_blocks, cfg, cfg.segment_frames, batch);
}

std::size_t flatten_size(const ModelConfig& cfg) {
  const auto last = separation_shape_ladder(cfg).back();
  return last[1] * last[2] * last[3];
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  auto blocks = [](const std::vector<BlockSpec>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& b : v) {
      arr.push_back({{"kernel", {b.kernel_time, b.kernel_freq}},
                     {"stride", {b.stride_time, b.stride_freq}},
                     {"channels", b.channels}});
    }
    return arr;
  };
  j = nlohmann::json{{"embed_blocks", blocks(cfg.embed_blocks)},
                     {"sep_blocks", blocks(cfg.sep_blocks)},
                     {"embed_dim", cfg.embed_dim()},
                     {"segment_frames", cfg.segment_frames},
                     {"context_frames", cfg.context_frames},
                     {"n_freq", cfg.n_freq},
                     {"width_scale", cfg.width_scale},
                     {"injection_point", to_string(cfg.injection_point)},
                     {"bn_eps", cfg.bn_eps},
                     {"bn_momentum", cfg.bn_momentum},
                     {"feature_log_base", "e"}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  auto blocks = [](const nlohmann::json& arr) {
    std::vector<BlockSpec> v;
    for (const auto& b : arr) {
      v.push_back({b.at("kernel").at(0).get<std::size_t>(), b.at("kernel").at(1).get<std::size_t>(),
                   b.at("stride").at(0).get<std::size_t>(), b.at("stride").at(1).get<std::size_t>(),
                   b.at("channels").get<std::size_t>()});
    }
    return v;
  };
  try {
    if (j.contains("embed_blocks")) cfg.embed_blocks = blocks(j["embed_blocks"]);
    if (j.contains("sep_blocks")) cfg.sep_blocks = blocks(j["sep_blocks"]);
    if (j.contains("segment_frames")) cfg.segment_frames = j["segment_frames"].get<std::size_t>();
    if (j.contains("context_frames")) cfg.context_frames = j["context_frames"].get<std::size_t>();
    if (j.contains("n_freq")) cfg.n_freq = j["n_freq"].get<std::size_t>();
    if (j.contains("width_scale")) cfg.width_scale = j["width_scale"].get<double>();
    if (j.contains("bn_eps")) cfg.bn_eps = j["bn_eps"].get<double>();
    if (j.contains("bn_momentum")) cfg.bn_momentum = j["bn_momentum"].get<double>();
    if (j.contains("injection_point")) {
      const auto s = j["injection_point"].get<std::string>();
      if (s == "post_conv") {
        cfg.injection_point = InjectionPoint::kPostConv;
      } else if (s == "post_bn") {
        cfg.injection_point = InjectionPoint::kPostBn;
      } else {
        throw Error(Errc::kInvalidConfig, "injection_point must be post_conv or post_bn, got " + s);
      }
    }
    if (j.contains("feature_log_base") && j["feature_log_base"].get<std::string>() != "e") {
      throw Error(Errc::kConfigMismatch, "only natural-log features are supported");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, std::string("model config: ") + e.what());
  }
  cfg.validate();
  if (j.contains("embed_dim") && j["embed_dim"].get<std::size_t>() != cfg.embed_dim()) {
    throw Error(Errc::kConfigMismatch, "embed_dim " + j["embed_dim"].dump() +
                                           " disagrees with the last embedding block (" +
                                           std::to_string(cfg.embed_dim()) + ")");
  }
}

}  // namespace sepkit
