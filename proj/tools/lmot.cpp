// SPDX-License-Identifier: Apache-2.0
#include "lmot/cli/cli.hpp"

int main(int argc, char** argv) { return lmot::cli::run(argc, argv); }
