#include "adapterlab/model_config.hpp"

#include <set>

#include "adapterlab/error.hpp"

namespace adapterlab {

void ModelConfig::validate() const {
  if (vocab_size < 5) throw ConfigError("model.vocab_size must be at least 5 (4 reserved ids + 1)");
  if (d_model == 0) throw ConfigError("model.d_model must be positive");
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must be divisible by model.n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (n_layers == 0) throw ConfigError("model.n_layers must be positive");
  if (ffn_dim == 0) throw ConfigError("model.ffn_dim must be positive");
  if (max_seq_len < 2) throw ConfigError("model.max_seq_len must be at least 2");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must be in [0, 1)");
  if (!(init_std > 0.0)) throw ConfigError("model.init_std must be positive");
  if (!(position_init_std >= 0.0)) throw ConfigError("model.position_init_std must be non-negative");
}

std::string ModelConfig::signature() const {
  return "d" + std::to_string(d_model) + "-l" + std::to_string(n_layers) + "-h" + std::to_string(n_heads) +
         "-f" + std::to_string(ffn_dim) + "-v" + std::to_string(vocab_size);
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("label space must not be empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("label names must be nonempty");
    if (!seen.insert(n).second) throw ConfigError("duplicate label '" + n + "'");
  }
}

LabelSpace LabelSpace::six_emotions() {
  return LabelSpace({"anger", "disgust", "fear", "joy", "sadness", "surprise"});
}

LabelSpace LabelSpace::five_emotions() {
  return LabelSpace({"anger", "fear", "joy", "sadness", "surprise"});
}

}  // namespace adapterlab
