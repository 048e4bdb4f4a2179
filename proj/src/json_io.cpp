#include "json_io.hpp"

#include <algorithm>

#include "adapterlab/error.hpp"

namespace adapterlab::detail {

std::size_t get_size(const ordered_json& j, const std::string& path) {
  if (!j.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

double get_double(const ordered_json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

bool get_bool(const ordered_json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

std::string get_string(const ordered_json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

void reject_unknown(const ordered_json& j, std::initializer_list<const char*> known, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(path + "." + key + ": unknown field");
    }
  }
}

ordered_json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"ffn_dim", c.ffn_dim},         {"max_seq_len", c.max_seq_len},
          {"dropout", c.dropout},       {"tie_mlm_head", c.tie_mlm_head}, {"init_std", c.init_std},
          {"position_init_std", c.position_init_std},
          {"pooling", c.pooling == Pooling::kCls ? "cls" : "mean"}};
}

ModelConfig model_config_from_json(const ordered_json& j, const std::string& where) {
  reject_unknown(j,
                 {"vocab_size", "d_model", "n_layers", "n_heads", "ffn_dim", "max_seq_len", "dropout", "tie_mlm_head",
                  "init_std", "position_init_std", "pooling"},
                 where);
  ModelConfig c;
  auto p = [&](const char* k) { return where + "." + k; };
  if (j.contains("vocab_size")) c.vocab_size = get_size(j["vocab_size"], p("vocab_size"));
  if (j.contains("d_model")) c.d_model = get_size(j["d_model"], p("d_model"));
  if (j.contains("n_layers")) c.n_layers = get_size(j["n_layers"], p("n_layers"));
  if (j.contains("n_heads")) c.n_heads = get_size(j["n_heads"], p("n_heads"));
  if (j.contains("ffn_dim")) c.ffn_dim = get_size(j["ffn_dim"], p("ffn_dim"));
  if (j.contains("max_seq_len")) c.max_seq_len = get_size(j["max_seq_len"], p("max_seq_len"));
  if (j.contains("dropout")) c.dropout = get_double(j["dropout"], p("dropout"));
  if (j.contains("tie_mlm_head")) c.tie_mlm_head = get_bool(j["tie_mlm_head"], p("tie_mlm_head"));
  if (j.contains("init_std")) c.init_std = get_double(j["init_std"], p("init_std"));
  if (j.contains("position_init_std")) {
    c.position_init_std = get_double(j["position_init_std"], p("position_init_std"));
  }
  if (j.contains("pooling")) {
    const std::string v = get_string(j["pooling"], p("pooling"));
    if (v == "cls") c.pooling = Pooling::kCls;
    else if (v == "mean") c.pooling = Pooling::kMean;
    else throw ConfigError(p("pooling") + ": expected \"cls\" or \"mean\", got \"" + v + "\"");
  }
  return c;
}

ordered_json to_json(const LabelSpace& labels) { return labels.names(); }

LabelSpace label_space_from_json(const ordered_json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of label names");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < j.size(); ++i) names.push_back(get_string(j[i], where + "[" + std::to_string(i) + "]"));
  return LabelSpace(std::move(names));
}

}  // namespace adapterlab::detail
