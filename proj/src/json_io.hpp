#pragma once

// JSON (de)serialization for configuration structs. Parsers name the
// offending field path in ConfigError messages.

#include <string>

#include "adapterlab/model_config.hpp"
#include "blob.hpp"

namespace adapterlab::detail {

ordered_json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const ordered_json& j, const std::string& where);

ordered_json to_json(const LabelSpace& labels);
LabelSpace label_space_from_json(const ordered_json& j, const std::string& where);

// Field readers used by the config parsers.
std::size_t get_size(const ordered_json& j, const std::string& path);
double get_double(const ordered_json& j, const std::string& path);
bool get_bool(const ordered_json& j, const std::string& path);
std::string get_string(const ordered_json& j, const std::string& path);
void reject_unknown(const ordered_json& j, std::initializer_list<const char*> known, const std::string& path);

}  // namespace adapterlab::detail
