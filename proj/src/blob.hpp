#pragma once

// Shared by the tensor, model, and adapter checkpoint writers.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "adapterlab/tensor.hpp"

namespace adapterlab::detail {

using ordered_json = nlohmann::ordered_json;

/// Writes the values to `file` and returns the {name: {shape, dtype, offset}}
/// manifest object describing them.
ordered_json write_blob(const std::filesystem::path& file, std::span<const NamedTensor> tensors);

/// Reads tensors described by `entries`. `where` names the manifest file in
/// diagnostics.
std::vector<NamedTensor> read_blob(const std::filesystem::path& file, const ordered_json& entries,
                                   const std::string& where);

ordered_json read_json_file(const std::filesystem::path& file);
void write_json_file(const std::filesystem::path& file, const ordered_json& value);
void write_text_file(const std::filesystem::path& file, const std::string& text);
std::string read_text_file(const std::filesystem::path& file);

}  // namespace adapterlab::detail
