#pragma once

#include <string>

#include "contextnav/nn/tensor.hpp"

namespace contextnav::nn {

// Versioned binary checkpoint: magic, version, then named tensors with shape
// and little-endian f32 payload. A JSON manifest (same stem, .json) carries
// the tensor table plus caller-provided metadata.
void save_checkpoint(const ParamStore& params, const std::string& path,
                     const std::string& meta_json);

// Loads into an empty or matching store; returns the manifest's meta text.
std::string load_checkpoint(ParamStore& params, const std::string& path);

// Reads just the metadata without touching tensors.
std::string read_checkpoint_meta(const std::string& path);

}  // namespace contextnav::nn
