// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "lmot/nn/layers.hpp"

namespace lmot::nn {

// Binary parameter container: an 8-byte magic + version, a JSON index
// (parameter names, shapes, payload offsets, plus caller metadata), then the
// raw row-major little-endian double payload.
void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const nlohmann::json& meta);

// Loads values into an already-constructed store. Every parameter in the
// store must be present in the file with a matching shape. Returns the
// stored metadata.
nlohmann::json load_checkpoint(const std::string& path, ParameterStore& params);

// Reads only the metadata block.
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace lmot::nn
