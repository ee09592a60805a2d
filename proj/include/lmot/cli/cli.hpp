// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace lmot::cli {

// Full command surface (synth / smooth / track / train / eval / gradcheck).
// Returns the process exit code: 0 success, 1 usage or validation error,
// 2 numeric failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace lmot::cli
