// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "sepkit/datagen.hpp"
#include "sepkit/model.hpp"
#include "sepkit/model_config.hpp"

namespace sepkit {

struct RunConfig {
  ModelConfig model;
  double lr = 0.1;
  // Global gradient-norm ceiling, 0 to disable. With two speakers a batch can
  // hold a single target speaker; batch norm then cancels the conditioning and
  // the unclipped update from that one batch sets training back by hundreds of steps.
  double max_grad_norm = 10.0;
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  std::vector<double> train_snrs_db{kTrainSnrsDb.begin(), kTrainSnrsDb.end()};
  std::vector<double> eval_snrs_db{kEvalSnrsDb.begin(), kEvalSnrsDb.end()};
  std::size_t filter_len = 512;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::size_t prefetch_batches = 2;

  /// Throws kInvalidConfig.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);
/// Reads a run config file, or the "run" section of a checkpoint config.
RunConfig load_run_config(const std::filesystem::path& path);

struct TrainOptions {
  /// When set, the final weights go here, the resolved config to
  /// `<checkpoint>.json`, the "step,loss" log to `<checkpoint>.loss.csv` and
  /// periodic snapshots to `<checkpoint>.step<n>`.
  std::optional<std::filesystem::path> checkpoint;
  /// Called after every step with (1-based step, pre-step loss).
  std::function<void(std::size_t, double)> on_step;
};

struct TrainResult {
  std::vector<double> losses;  // one per step, before the update
};

std::filesystem::path loss_log_path_for(const std::filesystem::path& checkpoint);

/// Batches are generated on a background thread; example i of step s always
/// uses example_seed(cfg.seed, s, i), so results do not depend on timing.
TrainResult train(const Corpus& corpus, const RunConfig& cfg, Separator<float>& model,
                  const TrainOptions& options = {});

}  // namespace sepkit
