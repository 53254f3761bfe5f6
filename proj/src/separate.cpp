// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/separate.hpp"

#include <algorithm>
#include <string>

#include "sepkit/error.hpp"

namespace sepkit {

LogMagSpectrogram leading_frames(const Waveform& wf, std::size_t frames, std::string_view what) {
  require_pipeline_rate(wf, what);
  const std::size_t need = (frames - 1) * kHop + kWinLen;
  if (wf.size() < need) {
    throw Error(Errc::kTooShort,
                std::string(what) + " has " + std::to_string(wf.size()) + " samples (" +
                    std::to_string(frame_count(wf.size())) + " frames); at least " + std::to_string(need) +
                    " samples (" + std::to_string(frames) + " frames, " +
                    std::to_string(static_cast<double>(need) / kSampleRate) + " s) are required");
  }
  Waveform head;
  head.samples.assign(wf.samples.begin(), wf.samples.begin() + static_cast<std::ptrdiff_t>(need));
  return log_magnitude(stft(head).first);
}

SeparationOutput separate_utterance(const Waveform& mixture, const Waveform& target_context,
                                    const Waveform& interference_context, Separator<float>& model,
                                    std::size_t window_batch) {
  const ModelConfig& cfg = model.config();
  require_pipeline_rate(mixture, "mixture");
  if (mixture.size() < static_cast<std::size_t>(kWinLen)) {
    throw Error(Errc::kTooShort, "mixture has " + std::to_string(mixture.size()) + " samples; at least " +
                                     std::to_string(kWinLen) + " are required");
  }
  const auto tctx = leading_frames(target_context, cfg.context_frames, "target context");
  const auto ictx = leading_frames(interference_context, cfg.context_frames, "interference context");
  auto [spec, phase] = stft(mixture);
  const LogMagSpectrogram mix_lm = log_magnitude(spec);
  const Eigen::Index T = mix_lm.frames(), F = mix_lm.values.cols();
  if (static_cast<std::size_t>(F) != cfg.n_freq) {
    throw Error(Errc::kShapeMismatch, "model expects " + std::to_string(cfg.n_freq) + " bins, STFT has " +
                                          std::to_string(F));
  }

  nn::NoGradGuard no_grad;
  model.set_training(false);
  const RealFrames* tm[] = {&tctx.values};
  const RealFrames* im[] = {&ictx.values};
  const auto tgt_emb = model.embed_target(pack_spectrograms<float>(tm));
  const auto itf_emb = model.embed_interference(pack_spectrograms<float>(im));
  const std::size_t E = cfg.embed_dim();

  const auto S = static_cast<Eigen::Index>(cfg.segment_frames);
  const auto C = static_cast<Eigen::Index>(cfg.center_frame());
  // window for frame t covers padded rows [t, t + S), i.e. original frames
  // [t - C, t - C + S), clamped to the valid range
  auto padded_row = [&](Eigen::Index t, Eigen::Index r) {
    return std::clamp<Eigen::Index>(t - C + r, 0, T - 1);
  };

  SeparationOutput out;
  out.target_logmag.values.resize(T, F);
  out.interference_logmag.values.resize(T, F);
  window_batch = std::max<std::size_t>(window_batch, 1);
  for (Eigen::Index t0 = 0; t0 < T; t0 += static_cast<Eigen::Index>(window_batch)) {
    const Eigen::Index nb = std::min<Eigen::Index>(static_cast<Eigen::Index>(window_batch), T - t0);
    const auto nbu = static_cast<std::size_t>(nb);
    std::vector<float> seg(nbu * static_cast<std::size_t>(S * F));
    for (Eigen::Index n = 0; n < nb; ++n) {
      for (Eigen::Index r = 0; r < S; ++r) {
        const double* src = mix_lm.values.row(padded_row(t0 + n, r)).data();
        float* dst = seg.data() + (n * S + r) * F;
        for (Eigen::Index f = 0; f < F; ++f) dst[f] = static_cast<float>(src[f]);
      }
    }
    std::vector<float> te, ie;
    for (std::size_t n = 0; n < nbu; ++n) {
      te.insert(te.end(), tgt_emb.data().begin(), tgt_emb.data().end());
      ie.insert(ie.end(), itf_emb.data().begin(), itf_emb.data().end());
    }
    auto offset = model.separation.forward(
        nn::Tensor<float>::from({nbu, 1, static_cast<std::size_t>(S), static_cast<std::size_t>(F)}, std::move(seg)),
        nn::Tensor<float>::from({nbu, E}, std::move(te)), nn::Tensor<float>::from({nbu, E}, std::move(ie)));
    out.windows_evaluated += nbu;
    const auto od = offset.data();
    for (Eigen::Index n = 0; n < nb; ++n) {
      const Eigen::Index t = t0 + n;
      for (Eigen::Index f = 0; f < F; ++f) {
        const double center = mix_lm.values(t, f);
        const double est = center + static_cast<double>(od[static_cast<std::size_t>(n * F + f)]);
        out.target_logmag.values(t, f) = est;
        out.interference_logmag.values(t, f) = center - est;
      }
    }
  }

  const RealFrames target_mag = inv_log_magnitude(out.target_logmag);
  const RealFrames mix_mag = spec.bins.cwiseAbs();
  const RealFrames interf_mag = (mix_mag - target_mag).cwiseMax(0.0);
  const double floor = kEdgeWindowSumFloor * full_overlap_window_sum();
  out.target = istft(target_mag, phase, mixture.size(), floor);
  out.interference = istft(interf_mag, phase, mixture.size(), floor);
  return out;
}

}  // namespace sepkit
