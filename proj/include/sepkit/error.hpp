// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sepkit {

enum class Errc {
  kIoError,
  kNotWav,
  kUnsupportedEncoding,
  kWrongSampleRate,
  kTooShort,
  kShapeMismatch,
  kZeroPower,
  kDegenerateBatch,
  kMissingGrad,
  kTooShortUtterance,
  kNotEnoughSpeakers,
  kSingularGram,
  kInvalidConfig,
  kConfigMismatch,
  kInvalidManifest,
};

std::string_view to_string(Errc code);

/// Every failure raised by the toolkit carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sepkit
