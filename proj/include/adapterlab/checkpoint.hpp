#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "adapterlab/tensor.hpp"

namespace adapterlab {

// Tensor checkpoint directory:
//   manifest.json  {"dtype": "f64", "tensors": {name: {shape, dtype, offset}}}
//   weights.bin    little-endian float64 values, tensors back to back
// Offsets are in bytes. Round trips are bitwise exact.

void save_tensor_dir(const std::filesystem::path& dir, std::span<const NamedTensor> tensors);

/// Tensors in manifest order. Throws CheckpointError naming the file and field
/// on any malformed entry or size mismatch.
std::vector<NamedTensor> load_tensor_dir(const std::filesystem::path& dir);

}  // namespace adapterlab
