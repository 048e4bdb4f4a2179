#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace adapterlab {

/// How the classification head summarizes a sequence.
enum class Pooling {
  kCls,   // state at position 0
  kMean,  // mean over non-pad positions
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 64;
  // 256 reproduces the original fine-tuning setup; 32 suits the synthetic corpora.
  std::size_t max_seq_len = 32;
  double dropout = 0.0;
  // Untied: the MLM head owns a [d_model, vocab] projection. Tied: logits use
  // the transposed token embedding and the head owns only its bias.
  bool tie_mlm_head = false;
  // Standard deviation of the normal initializer for weight matrices and token
  // embeddings. About 1/sqrt(d_model): the base stays frozen and random, so
  // its maps need roughly unit gain for token identity to reach the adapters.
  double init_std = 0.18;
  // Kept small next to the token embeddings so a token's state does not
  // depend mostly on where it sits.
  double position_init_std = 0.02;
  Pooling pooling = Pooling::kCls;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;

  /// Everything an adapter depends on. Adapters only load into models with the
  /// same signature.
  std::string signature() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Ordered emotion label names.
class LabelSpace {
 public:
  /// anger, disgust, fear, joy, sadness, surprise
  static LabelSpace six_emotions();
  /// The six emotions without disgust.
  static LabelSpace five_emotions();

  explicit LabelSpace(std::vector<std::string> names);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  const std::string& operator[](std::size_t i) const { return names_[i]; }
  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> names_;
};

}  // namespace adapterlab
