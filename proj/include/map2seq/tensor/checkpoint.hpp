#pragma once

// On-disk checkpoint: a directory holding manifest.json and weights.bin.
// The manifest lists {name, shape, dtype, offset} per tensor (offset in
// bytes into the blob) plus free-form metadata; the blob is packed
// little-endian float32.

#include <filesystem>

#include "json.hpp"
#include "map2seq/tensor/params.hpp"

namespace map2seq::tensor {

inline constexpr const char* kCheckpointFormat = "map2seq.checkpoint";
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const ParameterStore<float>& params,
                     const nlohmann::json& meta);

// Metadata block of a checkpoint without touching the weights.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir);

// Copies stored values into `params`. Every parameter of `params` must be
// present with the same shape; extra entries in the checkpoint are an error.
void load_checkpoint(const std::filesystem::path& dir, ParameterStore<float>& params);

}  // namespace map2seq::tensor
