// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/error.hpp"

namespace sepkit {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kIoError: return "IoError";
    case Errc::kNotWav: return "NotWav";
    case Errc::kUnsupportedEncoding: return "UnsupportedEncoding";
    case Errc::kWrongSampleRate: return "WrongSampleRate";
    case Errc::kTooShort: return "TooShort";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kZeroPower: return "ZeroPower";
    case Errc::kDegenerateBatch: return "DegenerateBatch";
    case Errc::kMissingGrad: return "MissingGrad";
    case Errc::kTooShortUtterance: return "TooShortUtterance";
    case Errc::kNotEnoughSpeakers: return "NotEnoughSpeakers";
    case Errc::kSingularGram: return "SingularGram";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kConfigMismatch: return "ConfigMismatch";
    case Errc::kInvalidManifest: return "InvalidManifest";
  }
  return "Unknown";
}

}  // namespace sepkit
