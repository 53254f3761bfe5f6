// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "sepkit/audio_io.hpp"
#include "sepkit/datagen.hpp"
#include "sepkit/dsp.hpp"
#include "sepkit/error.hpp"
#include "sepkit/metrics.hpp"
#include "sepkit/model.hpp"
#include "sepkit/separate.hpp"
#include "sepkit/train.hpp"

namespace sepkit {
namespace {

struct MixArgs {
  std::string target, interference, out;
  double snr_db = 0.0;
};

struct TrainArgs {
  std::string corpus, config, out = "model.ckpt";
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
};

struct SeparateArgs {
  std::string mixture, target_context, interference_context, ckpt, out_dir;
};

struct EvaluateArgs {
  std::string manifest, ckpt, out;
  std::size_t filter_len = kDefaultFilterLen;
  std::string oracle = "none";
};

struct SpectrogramArgs {
  std::string wav, out;
};

struct SynthArgs {
  std::string out_dir;
  std::vector<std::string> speakers;
  std::size_t utterances = 8;
  double seconds = 3.0;
  std::uint64_t seed = 0;
};

struct SplitArgs {
  std::string corpus, train_out, heldout_out;
  std::size_t heldout = 1;
  std::uint64_t seed = 0;
};

struct MakeEvalArgs {
  std::string corpus, out;
  std::uint64_t seed = 0;
};

void cmd_mix(const MixArgs& a, std::ostream& out) {
  const Waveform t = read_wav(a.target);
  const Waveform i = read_wav(a.interference);
  require_pipeline_rate(t, a.target);
  require_pipeline_rate(i, a.interference);
  const auto [tt, ii] = truncate_to_common(t, i);
  const MixResult mix = mix_at_snr(tt, ii, a.snr_db);
  write_wav(a.out, mix.mixture);
  out << std::setprecision(17) << "gain " << mix.gain << '\n';
}

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.steps) cfg.steps = *a.steps;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const Corpus corpus = Corpus::load(load_manifest(a.corpus));
  Separator<float> model(cfg.model, cfg.seed);
  const std::size_t report_every = std::max<std::size_t>(1, cfg.steps / 20);
  TrainOptions opts;
  opts.checkpoint = a.out;
  opts.on_step = [&](std::size_t step, double loss) {
    if (step % report_every == 0 || step == cfg.steps) err << "step " << step << " loss " << loss << '\n';
  };
  const auto result = train(corpus, cfg, model, opts);
  out << "checkpoint " << a.out << '\n';
  if (!result.losses.empty()) {
    out << std::setprecision(10) << "first_loss " << result.losses.front() << "\nfinal_loss " << result.losses.back()
        << '\n';
  }
}

void cmd_separate(const SeparateArgs& a, std::ostream& out) {
  Separator<float> model = load_model(a.ckpt);
  const auto result =
      separate_utterance(read_wav(a.mixture), read_wav(a.target_context), read_wav(a.interference_context), model);
  std::filesystem::create_directories(a.out_dir);
  const auto dir = std::filesystem::path(a.out_dir);
  write_wav(dir / "target.wav", result.target);
  write_wav(dir / "interference.wav", result.interference);
  out << "target " << (dir / "target.wav").string() << "\ninterference " << (dir / "interference.wav").string()
      << '\n';
}

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  static const std::map<std::string, OracleMode> kModes{
      {"none", OracleMode::kNone}, {"target", OracleMode::kTarget}, {"mixture", OracleMode::kMixture}};
  const OracleMode mode = kModes.at(a.oracle);
  std::optional<Separator<float>> model;
  if (mode == OracleMode::kNone) {
    if (a.ckpt.empty()) throw Error(Errc::kInvalidConfig, "--ckpt is required unless --oracle is given");
    model.emplace(load_model(a.ckpt));
  }
  const auto pairs = load_eval_manifest(a.manifest);
  const auto report = evaluate_model(pairs, model ? &*model : nullptr, a.filter_len, mode);
  if (!a.out.empty()) write_eval_csv(a.out, report);
  out << std::fixed << std::setprecision(4) << "pairs " << report.pairs.size() << "\nsdr " << report.mean_sdr
      << "\nsar " << report.mean_sar << "\nsir " << report.mean_sir << '\n';
}

void cmd_spectrogram(const SpectrogramArgs& a, std::ostream& out) {
  const Waveform wf = read_wav(a.wav);
  require_pipeline_rate(wf, a.wav);
  const auto [spec, phase] = stft(wf);
  const auto lm = log_magnitude(spec);
  export_spectrogram_image(lm, a.out);
  out << "frames " << lm.values.rows() << "\nbins " << lm.values.cols() << '\n';
}

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::vector<SynthSpeakerSpec> specs;
  if (a.speakers.empty()) {
    specs = default_synth_speakers();
  } else {
    for (std::size_t k = 0; k < a.speakers.size(); ++k) {
      const auto& s = a.speakers[k];
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        specs.push_back(parse_synth_speaker("spk" + std::to_string(k), s));
      } else {
        specs.push_back(parse_synth_speaker(s.substr(0, eq), s.substr(eq + 1)));
      }
    }
  }
  const auto manifest = write_synth_corpus(a.out_dir, specs, a.utterances, a.seconds, a.seed);
  out << "manifest " << (std::filesystem::path(a.out_dir) / "manifest.json").string() << "\nspeakers "
      << manifest.speakers.size() << "\nutterances " << manifest.utterance_count() << '\n';
}

void cmd_split(const SplitArgs& a, std::ostream& out) {
  const auto [train, heldout] = split_manifest(load_manifest(a.corpus), a.heldout, a.seed);
  save_manifest(a.train_out, train);
  save_manifest(a.heldout_out, heldout);
  out << "train_speakers " << train.speakers.size() << "\nheldout_speakers " << heldout.speakers.size() << '\n';
}

void cmd_make_eval(const MakeEvalArgs& a, std::ostream& out) {
  const auto pairs = build_eval_set(load_manifest(a.corpus), a.seed);
  save_eval_manifest(a.out, pairs);
  out << "pairs " << pairs.size() << '\n';
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker-conditioned single-channel source separation"};
  app.require_subcommand(1);

  MixArgs mix;
  auto* c_mix = app.add_subcommand("mix", "Mix two WAVs at a target-to-interference SNR");
  c_mix->add_option("target", mix.target, "Target WAV")->required()->check(CLI::ExistingFile);
  c_mix->add_option("interference", mix.interference, "Interference WAV")->required()->check(CLI::ExistingFile);
  c_mix->add_option("--snr", mix.snr_db, "SNR in dB")->required();
  c_mix->add_option("--out", mix.out, "Mixture WAV")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model with SGD");
  c_train->add_option("--corpus", tr.corpus, "Corpus manifest JSON")->required()->check(CLI::ExistingFile);
  c_train->add_option("--config", tr.config, "Run config JSON (defaults for missing keys)")
      ->check(CLI::ExistingFile);
  c_train->add_option("--steps", tr.steps, "Override the number of steps");
  c_train->add_option("--seed", tr.seed, "Override the run seed");
  c_train->add_option("--out", tr.out, "Checkpoint path")->capture_default_str();

  SeparateArgs sep;
  auto* c_sep = app.add_subcommand("separate", "Separate a mixture given two context recordings");
  c_sep->add_option("--mixture", sep.mixture)->required()->check(CLI::ExistingFile);
  c_sep->add_option("--target-context", sep.target_context)->required()->check(CLI::ExistingFile);
  c_sep->add_option("--interference-context", sep.interference_context)->required()->check(CLI::ExistingFile);
  c_sep->add_option("--ckpt", sep.ckpt)->required()->check(CLI::ExistingFile);
  c_sep->add_option("--out-dir", sep.out_dir, "Receives target.wav and interference.wav")->required();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score a checkpoint on an evaluation manifest");
  c_eval->add_option("--manifest", ev.manifest, "Eval manifest JSON")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint; not used by the oracle modes")->check(CLI::ExistingFile);
  c_eval->add_option("--filter-len", ev.filter_len, "BSS filter taps")->capture_default_str()->check(
      CLI::PositiveNumber);
  c_eval->add_option("--out", ev.out, "Per-pair CSV");
  c_eval->add_option("--oracle", ev.oracle, "none | target | mixture")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "target", "mixture"}));

  SpectrogramArgs sp;
  auto* c_spec = app.add_subcommand("spectrogram", "Export a log-magnitude spectrogram as PGM");
  c_spec->add_option("--wav", sp.wav)->required()->check(CLI::ExistingFile);
  c_spec->add_option("--out", sp.out)->required();

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth-corpus", "Write a synthetic speaker corpus");
  c_synth->add_option("--out-dir", sy.out_dir)->required();
  c_synth->add_option("--speaker", sy.speakers, "[id=]harmonic:<f0> or [id=]noise:<low>:<high>, repeatable");
  c_synth->add_option("--utterances", sy.utterances, "Per speaker")->capture_default_str()->check(
      CLI::PositiveNumber);
  c_synth->add_option("--seconds", sy.seconds, "Utterance length")->capture_default_str()->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", sy.seed)->capture_default_str();

  SplitArgs sl;
  auto* c_split = app.add_subcommand("split", "Speaker-disjoint split of a corpus manifest");
  c_split->add_option("--corpus", sl.corpus)->required()->check(CLI::ExistingFile);
  c_split->add_option("--heldout", sl.heldout, "Speakers to hold out")->capture_default_str();
  c_split->add_option("--train-out", sl.train_out)->required();
  c_split->add_option("--heldout-out", sl.heldout_out)->required();
  c_split->add_option("--seed", sl.seed)->capture_default_str();

  MakeEvalArgs me;
  auto* c_make = app.add_subcommand("make-eval", "Freeze an evaluation manifest from a corpus");
  c_make->add_option("--corpus", me.corpus)->required()->check(CLI::ExistingFile);
  c_make->add_option("--out", me.out)->required();
  c_make->add_option("--seed", me.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*c_mix) cmd_mix(mix, out);
    else if (*c_train) cmd_train(tr, out, err);
    else if (*c_sep) cmd_separate(sep, out);
    else if (*c_eval) cmd_evaluate(ev, out);
    else if (*c_spec) cmd_spectrogram(sp, out);
    else if (*c_synth) cmd_synth(sy, out);
    else if (*c_split) cmd_split(sl, out);
    else if (*c_make) cmd_make_eval(me, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sepkit
