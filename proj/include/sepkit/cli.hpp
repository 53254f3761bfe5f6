// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <iosfwd>

namespace sepkit {

/// Entry point of the `sepkit` tool. Machine output goes to `out`,
/// diagnostics to `err`. Returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace sepkit
