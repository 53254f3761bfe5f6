// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/train.hpp"

#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <thread>

#include "sepkit/error.hpp"

namespace sepkit {

void RunConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw Error(Errc::kInvalidConfig, "lr must be positive");
  if (!(max_grad_norm >= 0.0)) throw Error(Errc::kInvalidConfig, "max_grad_norm must be >= 0");
  if (batch_size == 0) throw Error(Errc::kInvalidConfig, "batch_size must be >= 1");
  if (train_snrs_db.empty() || eval_snrs_db.empty()) throw Error(Errc::kInvalidConfig, "SNR sets must not be empty");
  if (filter_len == 0) throw Error(Errc::kInvalidConfig, "filter_len must be >= 1");
  if (prefetch_batches == 0) throw Error(Errc::kInvalidConfig, "prefetch_batches must be >= 1");
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
  j = nlohmann::json{{"model", cfg.model},
                     {"lr", cfg.lr},
                     {"max_grad_norm", cfg.max_grad_norm},
                     {"batch_size", cfg.batch_size},
                     {"steps", cfg.steps},
                     {"seed", cfg.seed},
                     {"train_snrs_db", cfg.train_snrs_db},
                     {"eval_snrs_db", cfg.eval_snrs_db},
                     {"filter_len", cfg.filter_len},
                     {"checkpoint_every", cfg.checkpoint_every},
                     {"prefetch_batches", cfg.prefetch_batches}};
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  if (!j.is_object()) throw Error(Errc::kInvalidConfig, "run config must be a JSON object");
  try {
    if (j.contains("model")) cfg.model = j.at("model").get<ModelConfig>();
    cfg.lr = j.value("lr", cfg.lr);
    cfg.max_grad_norm = j.value("max_grad_norm", cfg.max_grad_norm);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.train_snrs_db = j.value("train_snrs_db", cfg.train_snrs_db);
    cfg.eval_snrs_db = j.value("eval_snrs_db", cfg.eval_snrs_db);
    cfg.filter_len = j.value("filter_len", cfg.filter_len);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.prefetch_batches = j.value("prefetch_batches", cfg.prefetch_batches);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, std::string("bad run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidConfig, path.string() + ": " + e.what());
  }
  // a config written next to a checkpoint nests the run under "run"
  if (j.is_object() && j.contains("run")) j = j.at("run");
  RunConfig cfg = j.get<RunConfig>();
  cfg.validate();
  return cfg;
}

namespace {

using Batch = std::vector<TrainingExample>;

class BatchQueue {
 public:
  BatchQueue(const Corpus& corpus, const RunConfig& cfg) : cfg_(cfg) {
    worker_ = std::jthread([this, &corpus](std::stop_token st) { produce(corpus, st); });
  }

  ~BatchQueue() {
    worker_.request_stop();
    cv_.notify_all();
  }

  Batch pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !ready_.empty() || error_; });
    if (ready_.empty()) std::rethrow_exception(error_);
    Batch b = std::move(ready_.front());
    ready_.pop_front();
    cv_.notify_all();
    return b;
  }

 private:
  void produce(const Corpus& corpus, std::stop_token st) {
    try {
      for (std::size_t step = 1; step <= cfg_.steps; ++step) {
        Batch batch;
        batch.reserve(cfg_.batch_size);
        for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
          if (st.stop_requested()) return;
          batch.push_back(
              sample_training_example(corpus, cfg_.model, example_seed(cfg_.seed, step, i), cfg_.train_snrs_db));
        }
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return ready_.size() < cfg_.prefetch_batches || st.stop_requested(); });
        if (st.stop_requested()) return;
        ready_.push_back(std::move(batch));
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard lock(mu_);
      error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  const RunConfig& cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Batch> ready_;
  std::exception_ptr error_;
  std::jthread worker_;  // last: joins before the members above go away
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

std::filesystem::path loss_log_path_for(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".loss.csv");
}

TrainResult train(const Corpus& corpus, const RunConfig& cfg, Separator<float>& model, const TrainOptions& options) {
  cfg.validate();
  if (!(model.config() == cfg.model)) {
    throw Error(Errc::kConfigMismatch, "model was built from a different configuration than the run config");
  }
  if (corpus.speakers().size() < 2) {
    throw Error(Errc::kNotEnoughSpeakers, "training needs at least two speakers");
  }
  TrainResult result;
  std::ofstream loss_csv;
  const nlohmann::json extra = {{"run", cfg}};
  if (options.checkpoint) {
    const auto& ckpt = *options.checkpoint;
    if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
    write_json(config_path_for(ckpt), nlohmann::json{{"model", cfg.model}, {"run", cfg}});
    loss_csv.open(loss_log_path_for(ckpt));
    if (!loss_csv) throw Error(Errc::kIoError, "cannot write " + loss_log_path_for(ckpt).string());
    loss_csv << "step,loss\n" << std::setprecision(10);
  }

  if (cfg.steps > 0) {
    BatchQueue queue(corpus, cfg);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
      const Batch batch = queue.pop();
      const double loss = training_step<float>(batch, model, static_cast<float>(cfg.lr), cfg.max_grad_norm);
      result.losses.push_back(loss);
      if (loss_csv.is_open()) loss_csv << step << ',' << loss << '\n' << std::flush;
      if (options.on_step) options.on_step(step, loss);
      if (options.checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps) {
        save_model(options.checkpoint->string() + ".step" + std::to_string(step), model, extra);
      }
    }
  }
  if (options.checkpoint) save_model(*options.checkpoint, model, extra);
  return result;
}

}  // namespace sepkit
