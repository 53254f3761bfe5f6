// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <chrono>
#include <cmath>

#include "doctest.h"
#include "grad_checks.hpp"
#include "oracles.hpp"
#include "sepkit/datagen.hpp"
#include "sepkit/error.hpp"
#include "sepkit/model.hpp"
#include "sepkit/nn/ops.hpp"
#include "sepkit/nn/optim.hpp"
#include "test_util.hpp"

using namespace sepkit;
using nn::Shape;

using checks::random_batch;
using checks::random_lm;
using checks::randomize;
using checks::tiny_config;

TEST_CASE("default block tables") {
  const ModelConfig cfg;
  REQUIRE(cfg.embed_blocks.size() == 4);
  REQUIRE(cfg.sep_blocks.size() == 8);
  const BlockSpec e1 = cfg.embed_blocks[0], e4 = cfg.embed_blocks[3];
  CHECK((e1.kernel_time == 8 && e1.kernel_freq == 4 && e1.stride_time == 3 && e1.stride_freq == 2 && e1.channels == 64));
  CHECK((e4.kernel_time == 4 && e4.kernel_freq == 4 && e4.stride_time == 1 && e4.stride_freq == 2 && e4.channels == 512));
  const BlockSpec s5 = cfg.sep_blocks[4], s8 = cfg.sep_blocks[7];
  CHECK((s5.kernel_time == 3 && s5.stride_time == 2 && s5.stride_freq == 2 && s5.channels == 256));
  CHECK((s8.kernel_time == 3 && s8.stride_time == 1 && s8.channels == 512));
  CHECK(cfg.embed_dim() == 512);
  CHECK(cfg.center_frame() == 50);
  ModelConfig half;
  half.width_scale = 0.125;
  CHECK(half.embed_dim() == 64);
  CHECK(half.scaled(64) == 8);
  half.width_scale = 0.3;
  CHECK(half.scaled(64) == 20);  // ceil(19.2)
  ModelConfig bad;
  bad.width_scale = 0.0;
  CHECK_THROWS_CODE(bad.validate(), Errc::kInvalidConfig);
}

TEST_CASE("shape ladders at full width") {
  const ModelConfig cfg;
  // independent ceil-division ladder
  auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  std::size_t h = 35, w = 201;
  const auto emb = embedding_shape_ladder(cfg);
  REQUIRE(emb.size() == 5);
  for (std::size_t b = 0; b < 4; ++b) {
    h = ceil_div(h, cfg.embed_blocks[b].stride_time);
    w = ceil_div(w, cfg.embed_blocks[b].stride_freq);
    CHECK(emb[b + 1] == Shape{1, cfg.embed_blocks[b].channels, h, w});
  }
  CHECK(emb[1] == Shape{1, 64, 12, 101});
  CHECK(emb[2] == Shape{1, 128, 4, 51});
  CHECK(emb.back() == Shape{1, 512, 4, 26});

  const auto sep = separation_shape_ladder(cfg);
  const std::vector<std::size_t> times{100, 100, 100, 50, 50, 25, 25, 13, 13};
  const std::vector<std::size_t> freqs{201, 201, 201, 101, 101, 51, 51, 26, 26};
  REQUIRE(sep.size() == 9);
  for (std::size_t i = 0; i < sep.size(); ++i) {
    CHECK(sep[i][2] == times[i]);
    CHECK(sep[i][3] == freqs[i]);
  }
  CHECK(flatten_size(cfg) == 13 * 26 * 512);
  CHECK(flatten_size(cfg) == 173056);
}

TEST_CASE("residual block shapes and shortcut presence") {
  ModelConfig cfg;
  std::mt19937_64 rng(1);
  ResidualBlock<float> b1(1, cfg.sep_blocks[0], 64, cfg, rng, false);
  CHECK(b1.output_shape({2, 1, 100, 201}) == Shape{2, 64, 100, 201});
  CHECK(b1.shortcut.has_value());
  ResidualBlock<float> b2(64, cfg.sep_blocks[1], 64, cfg, rng, false);
  CHECK_FALSE(b2.shortcut.has_value());
  ResidualBlock<float> b3(64, cfg.sep_blocks[2], 128, cfg, rng, false);
  CHECK(b3.output_shape({2, 64, 100, 201}) == Shape{2, 128, 50, 101});
  CHECK(b3.shortcut.has_value());
  CHECK(b3.shortcut->stride.time == 2);
  CHECK(b3.conv1.stride.time == 2);
  CHECK(b3.conv2.stride.time == 1);
}

TEST_CASE("zero-weight block reduces to relu(bn(x))") {
  ModelConfig cfg;
  cfg.width_scale = 1.0 / 64.0;
  std::mt19937_64 rng(2);
  BlockSpec spec{3, 3, 1, 1, 128};
  ResidualBlock<double> block(2, spec, 2, cfg, rng, false);
  REQUIRE_FALSE(block.shortcut.has_value());
  for (auto* t : {&block.conv1.weight, &block.conv1.bias, &block.conv2.weight, &block.conv2.bias}) {
    for (auto& v : t->data()) v = 0.0;
  }
  auto x = nn::Tensor<double>::from({2, 2, 4, 5}, oracle::random_signal(80, 3, 1.0));
  const auto y = block.forward(x, {}, {});
  nn::BatchNorm2d<double> bn(2);
  const auto ref = nn::relu(bn.forward(x));
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
}

TEST_CASE("condition adds per-channel offsets") {
  std::mt19937_64 rng(4);
  nn::Linear<double> pt(3, 2, rng, nn::Init::kZero), pi(3, 2, rng, nn::Init::kZero);
  auto fm = nn::Tensor<double>::from({1, 2, 2, 3}, oracle::random_signal(12, 5));
  auto te = nn::Tensor<double>::from({1, 3}, {0.3, -1.0, 2.0});
  auto ie = nn::Tensor<double>::from({1, 3}, {1.0, 1.0, 1.0});
  const auto same = condition(fm, te, ie, pt, pi);
  for (std::size_t i = 0; i < 12; ++i) CHECK(same.data()[i] == fm.data()[i]);

  pt.bias.data()[0] = 1.0;
  pt.bias.data()[1] = -1.0;
  const auto shifted = condition(fm, te, ie, pt, pi);
  for (std::size_t i = 0; i < 6; ++i) CHECK(shifted.data()[i] == doctest::Approx(fm.data()[i] + 1.0));
  for (std::size_t i = 6; i < 12; ++i) CHECK(shifted.data()[i] == doctest::Approx(fm.data()[i] - 1.0));

  nn::Linear<double> rt(3, 2, rng), ri(3, 2, rng);
  const auto out = condition(fm, te, ie, rt, ri);
  for (std::size_t c = 0; c < 2; ++c) {
    const double d0 = out.data()[c * 6] - fm.data()[c * 6];
    for (std::size_t i = 1; i < 6; ++i) CHECK(out.data()[c * 6 + i] - fm.data()[c * 6 + i] == doctest::Approx(d0));
  }
  nn::Linear<double> wrong(3, 4, rng);
  CHECK_THROWS_CODE(condition(fm, te, ie, wrong, ri), Errc::kShapeMismatch);
}

TEST_CASE("residual identity with a zero final layer") {
  ModelConfig cfg;
  cfg.width_scale = 0.125;
  cfg.segment_frames = 20;
  Separator<float> model(cfg, 3);
  for (auto v : model.separation.fc.weight.data()) CHECK(v == 0.0f);
  model.set_training(false);
  // scramble everything except the final layer
  std::uint64_t seed = 100;
  for (auto& nt : model.named_state()) {
    if (nt.trainable && nt.name.rfind("separation.fc", 0) != 0) randomize(nt.tensor, seed++, 0.2);
  }
  const auto seg = random_lm(cfg.segment_frames, cfg.n_freq, 7);
  const auto tctx = random_lm(cfg.context_frames, cfg.n_freq, 8);
  const auto ictx = random_lm(cfg.context_frames, cfg.n_freq, 9);
  const auto te = embed_speaker(tctx, model.target_net, cfg);
  const auto ie = embed_speaker(ictx, model.interference_net, cfg);
  CHECK(te.size() == 64);
  const auto fp = separate_frame<float>(seg, te, ie, model.separation, cfg);
  for (std::size_t f = 0; f < cfg.n_freq; ++f) {
    const float center = static_cast<float>(seg.values(Eigen::Index(cfg.center_frame()), Eigen::Index(f)));
    CHECK(fp.est_target[f] == center);
    CHECK(fp.est_interference[f] == 0.0f);
  }
  CHECK_THROWS_CODE(separate_frame<float>(random_lm(19, 201, 1), te, ie, model.separation, cfg), Errc::kShapeMismatch);
  CHECK_THROWS_CODE(embed_speaker(random_lm(34, 201, 1), model.target_net, cfg), Errc::kShapeMismatch);
}

TEST_CASE("interference estimate is the exact complement and conditioning matters") {
  ModelConfig cfg;
  cfg.width_scale = 0.125;
  cfg.segment_frames = 20;
  Separator<float> model(cfg, 5);
  model.set_training(false);
  randomize(model.separation.fc.weight, 1, 0.01);
  const auto seg = random_lm(cfg.segment_frames, cfg.n_freq, 11);
  auto te = embed_speaker(random_lm(35, 201, 12), model.target_net, cfg);
  const auto ie = embed_speaker(random_lm(35, 201, 13), model.interference_net, cfg);
  const auto a = separate_frame<float>(seg, te, ie, model.separation, cfg);
  for (std::size_t f = 0; f < cfg.n_freq; ++f) {
    const float center = static_cast<float>(seg.values(Eigen::Index(cfg.center_frame()), Eigen::Index(f)));
    CHECK(a.est_interference[f] == center - a.est_target[f]);
  }
  const auto delta = oracle::random_signal(te.size(), 14, 1.0);
  const double norm = std::sqrt(oracle::sum_sq(delta));
  for (std::size_t i = 0; i < te.size(); ++i) te[i] += static_cast<float>(delta[i] / norm);
  const auto b = separate_frame<float>(seg, te, ie, model.separation, cfg);
  double diff = 0.0;
  for (std::size_t f = 0; f < cfg.n_freq; ++f) diff += std::abs(a.est_target[f] - b.est_target[f]);
  CHECK(diff > 0.0);
}

TEST_CASE("full tiny model gradient check") {
  for (auto inj : {InjectionPoint::kPostBn, InjectionPoint::kPostConv}) {
    const auto rep = checks::tiny_model_grad_check(inj);
    CHECK(rep.train_rel < 1e-3);
    CHECK(rep.eval_rel < 1e-3);
    CHECK(rep.zero_numeric < 1e-8);
  }
}

TEST_CASE("training step returns the pre-step loss and decreases it on a fixed batch") {
  ModelConfig cfg;
  cfg.width_scale = 0.125;
  const Corpus corpus = synth_corpus(default_synth_speakers(), 2, 2.0, 1);
  std::vector<TrainingExample> batch;
  for (std::uint64_t i = 0; i < 4; ++i) batch.push_back(sample_training_example(corpus, cfg, example_seed(9, 0, i)));
  Separator<float> model(cfg, 9);
  // 0.1 overshoots on a single repeated batch of 4
  const double first = training_step<float>(batch, model, 0.01f);
  CHECK(first > 0.0);
  double last = first;
  for (int step = 1; step < 50; ++step) last = training_step<float>(batch, model, 0.01f);
  MESSAGE("overfit loss " << first << " -> " << last);
  CHECK(last <= 0.01 * first);
  // the returned loss is the pre-update value
  const auto before = batch_loss<float>(batch, model).item();
  CHECK(training_step<float>(batch, model, 0.01f) == doctest::Approx(before).epsilon(1e-5));
}

TEST_CASE("model save and load round trip") {
  TempDir dir;
  auto cfg = tiny_config();
  cfg.injection_point = InjectionPoint::kPostConv;
  Separator<float> model(cfg, 31);
  randomize(model.separation.fc.weight, 32, 0.1);
  save_model(dir / "m.ckpt", model, {{"note", "x"}});
  CHECK(std::filesystem::exists(dir / "m.ckpt.json"));
  auto back = load_model(dir / "m.ckpt");
  CHECK(back.config() == cfg);
  const auto a = model.named_state(), b = back.named_state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }

  // config says a different width than the stored tensors
  auto other = cfg;
  other.width_scale = 1.0 / 32.0;
  Separator<float> wider(other, 1);
  save_model(dir / "w.ckpt", wider);
  std::filesystem::copy_file(dir / "m.ckpt.json", dir / "w.ckpt.json", std::filesystem::copy_options::overwrite_existing);
  CHECK_THROWS_CODE(load_model(dir / "w.ckpt"), Errc::kConfigMismatch);
}
