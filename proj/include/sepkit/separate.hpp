// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>

#include "sepkit/audio_io.hpp"
#include "sepkit/dsp.hpp"
#include "sepkit/model.hpp"

namespace sepkit {

/// Fraction of the full-overlap window sum used as the iSTFT floor when
/// resynthesizing estimates.
inline constexpr double kEdgeWindowSumFloor = 0.1;

struct SeparationOutput {
  Waveform target;
  Waveform interference;
  LogMagSpectrogram target_logmag;
  LogMagSpectrogram interference_logmag;  // mixture - target, frame by frame
  std::size_t windows_evaluated = 0;
};

/// Full-utterance separation. Every mixture frame becomes the center of one
/// segment_frames window (edges padded by replicating the first/last frame);
/// windows run through the model in inference mode, `window_batch` at a time.
/// Speaker embeddings come once from the first context_frames frames of each
/// context recording. The target waveform is the iSTFT of the estimated
/// target magnitude with the mixture phase; the interference waveform uses
/// the magnitude max(|mixture| - |target|, 0) with the same phase. Both go
/// through istft with a floor of kEdgeWindowSumFloor * full_overlap_window_sum().
/// Throws kWrongSampleRate or kTooShort.
SeparationOutput separate_utterance(const Waveform& mixture, const Waveform& target_context,
                                    const Waveform& interference_context, Separator<float>& model,
                                    std::size_t window_batch = 32);

/// First `frames` frames of a recording as log-magnitude (kTooShort when the
/// recording cannot supply them).
LogMagSpectrogram leading_frames(const Waveform& wf, std::size_t frames, std::string_view what);

}  // namespace sepkit
