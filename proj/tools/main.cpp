// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>

#include "sepkit/cli.hpp"

int main(int argc, char** argv) { return sepkit::run_cli(argc, argv, std::cout, std::cerr); }
