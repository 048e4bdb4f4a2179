#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adapterlab/adapter.hpp"
#include "adapterlab/model_config.hpp"
#include "adapterlab/rng.hpp"
#include "adapterlab/tensor.hpp"

namespace adapterlab {

/// Padded batch of token id sequences. mask is 1 for real tokens, 0 for pad.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  static TokenBatch pad(std::span<const std::vector<int>> sequences, int pad_id);
};

struct LinearHead {
  Tensor weight;  // [in, out]; undefined for a tied MLM head
  Tensor bias;    // [out]

  LinearHead clone() const;
};

struct EncoderLayer {
  Tensor wq, bq, wk, wv, bv, wo, bo;  // no key bias
  Tensor ln1_gamma, ln1_beta;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor ln2_gamma, ln2_beta;
};

/// Post-LN transformer encoder with one adapter slot per layer:
///
///   x = LN1(x + MHA(x))
///   x = LN2(x + stack(FFN(x)))
///
/// Copies share parameter storage; clone() is a deep copy.
class EncoderModel {
 public:
  static EncoderModel create(const ModelConfig& config, const LabelSpace& labels, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const LabelSpace& labels() const { return labels_; }

  /// Hidden states [batch, seq, d_model]. Dropout applies only when
  /// dropout_rng is given and config().dropout > 0.
  Tensor encode(const TokenBatch& tokens, const AdapterStack& stack, Rng* dropout_rng = nullptr) const;

  /// [batch, seq, vocab]
  Tensor mlm_logits(const Tensor& hidden) const;
  /// [rows, vocab] for flat positions (b * seq + t) only.
  Tensor mlm_logits_at(const Tensor& hidden, std::span<const std::size_t> flat_positions) const;
  /// [batch, labels] from the pooled sequence state. Mean pooling needs the
  /// batch mask.
  Tensor classify_logits(const Tensor& hidden, std::span<const std::uint8_t> mask = {}) const;

  const LinearHead& mlm_head() const { return mlm_head_; }
  const LinearHead& classifier() const { return classifier_; }
  /// Shallow copies sharing the base weights but carrying another head.
  EncoderModel with_mlm_head(LinearHead head) const;
  EncoderModel with_classifier(LinearHead head) const;

  /// Embeddings and encoder layers.
  std::vector<NamedTensor> base_tensors() const;
  std::vector<NamedTensor> mlm_head_tensors() const;
  std::vector<NamedTensor> classifier_tensors() const;
  /// base + both heads
  std::vector<NamedTensor> all_tensors() const;

  EncoderModel clone() const;

  // Checkpoint: manifest.json + weights.bin (tensor format) + config.json.
  void save(const std::filesystem::path& dir) const;
  static EncoderModel load(const std::filesystem::path& dir);

  Tensor& token_embedding() { return token_embedding_; }
  Tensor& position_embedding() { return position_embedding_; }
  std::vector<EncoderLayer>& layers() { return layers_; }
  const std::vector<EncoderLayer>& layers() const { return layers_; }
  LinearHead& mutable_classifier() { return classifier_; }

 private:
  EncoderModel(ModelConfig config, LabelSpace labels);
  Tensor attention(const EncoderLayer& layer, const Tensor& x, const Tensor& mask_bias,
                   std::size_t batch, std::size_t seq) const;

  ModelConfig config_;
  LabelSpace labels_;
  Tensor token_embedding_;     // [vocab, d]
  Tensor position_embedding_;  // [max_seq_len, d]
  std::vector<EncoderLayer> layers_;
  LinearHead mlm_head_;
  LinearHead classifier_;
};

struct ParamReport {
  std::size_t base_params = 0;       // every non-adapter tensor, heads included
  std::size_t adapter_params = 0;    // adapters present in the stack
  std::size_t trainable_params = 0;  // tensors whose freeze flag is off
};

ParamReport param_report(const EncoderModel& model, const AdapterStack& stack);

}  // namespace adapterlab
