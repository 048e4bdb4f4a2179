#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "adapterlab/model_config.hpp"
#include "adapterlab/tensor.hpp"

namespace adapterlab {

class EncoderModel;

enum class AdapterRole { kLanguage, kTask };

std::string_view role_name(AdapterRole role);
AdapterRole parse_role(std::string_view name);

/// Bottleneck width given either directly or as d_model / reduction_factor.
struct BottleneckSpec {
  enum class Kind { kDimension, kReductionFactor };
  Kind kind = Kind::kReductionFactor;
  std::size_t value = 16;

  static BottleneckSpec dimension(std::size_t n) { return {Kind::kDimension, n}; }
  static BottleneckSpec reduction_factor(std::size_t r) { return {Kind::kReductionFactor, r}; }

  /// Throws ConfigError if the factor does not divide d_model or the result is 0.
  std::size_t resolve(std::size_t d_model) const;
};

struct AdapterLayer {
  Tensor down;       // [d_model, b]
  Tensor down_bias;  // [b]
  Tensor up;         // [b, d_model]
  Tensor up_bias;    // [d_model]
};

/// Bottleneck adapter: h + up(relu(down(h))) at every encoder layer.
///
/// Copies share weight storage; clone() gives independent weights.
class AdapterModule {
 public:
  AdapterModule(AdapterRole role, std::string tag, std::string model_signature, std::size_t d_model,
                std::size_t bottleneck, std::uint64_t seed, std::vector<AdapterLayer> layers);

  AdapterRole role() const { return role_; }
  const std::string& tag() const { return tag_; }
  std::size_t bottleneck() const { return bottleneck_; }
  std::size_t d_model() const { return d_model_; }
  std::size_t n_layers() const { return layers_.size(); }
  const std::string& model_signature() const { return model_signature_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<AdapterLayer>& layers() const { return layers_; }

  Tensor apply(std::size_t layer, const Tensor& hidden) const;

  /// "layer{i}.{down,down_bias,up,up_bias}" in layer order.
  std::vector<NamedTensor> named_tensors() const;
  /// Same tensors under "adapter.{role}.{tag}." so names are unique in a stack.
  std::vector<NamedTensor> qualified_tensors() const;
  std::size_t param_count() const;
  AdapterModule clone() const;

  /// Throws CheckpointError unless the adapter was built for `config`.
  void check_compatible(const ModelConfig& config) const;

 private:
  AdapterRole role_;
  std::string tag_;
  std::string model_signature_;
  std::size_t d_model_;
  std::size_t bottleneck_;
  std::uint64_t seed_;
  std::vector<AdapterLayer> layers_;
};

/// Down weights ~ N(0, 0.02^2) from `seed`; up weights and both biases are
/// exactly zero, so a fresh adapter is the identity.
AdapterModule make_adapter(AdapterRole role, std::string tag, const ModelConfig& config,
                           const BottleneckSpec& bottleneck, std::uint64_t seed);

/// Closed-form parameter count of one adapter layer: 2*d*b + b + d.
constexpr std::size_t adapter_layer_params(std::size_t d_model, std::size_t bottleneck) {
  return 2 * d_model * bottleneck + bottleneck + d_model;
}

struct StackEntry {
  AdapterModule adapter;
  bool frozen = true;
};

/// Language adapter slot followed by task adapter slot. Applying the stack at
/// a layer computes TA(LA(h)); an empty slot is skipped.
class AdapterStack {
 public:
  AdapterStack() = default;

  /// Trainable LA alone (masked-LM pretraining).
  static AdapterStack language_pretraining(AdapterModule la);
  /// Trainable TA alone.
  static AdapterStack task_only(AdapterModule ta);
  /// Frozen LA under a trainable TA.
  static AdapterStack language_task(AdapterModule la, AdapterModule ta);

  void set_language(AdapterModule la, bool frozen);
  void set_task(AdapterModule ta, bool frozen);
  void clear_language() { language_.reset(); }
  void clear_task() { task_.reset(); }
  /// Marks every adapter frozen (inference shape).
  void freeze_all();

  const std::optional<StackEntry>& language() const { return language_; }
  const std::optional<StackEntry>& task() const { return task_; }
  bool base_frozen() const { return base_frozen_; }
  void set_base_frozen(bool frozen) { base_frozen_ = frozen; }

  bool empty() const { return !language_ && !task_; }
  bool fully_frozen() const;
  std::size_t adapter_params() const;

  Tensor apply(std::size_t layer, const Tensor& hidden) const;

 private:
  std::optional<StackEntry> language_;
  std::optional<StackEntry> task_;
  bool base_frozen_ = true;
};

/// New stack with `new_la` in the language slot (inserted if the slot is
/// empty, keeping the previous frozen flag otherwise). Only the LA changes.
AdapterStack swap_language_adapter(const AdapterStack& stack, AdapterModule new_la);

// Adapter checkpoint directory:
//   adapter.json  role, tag, bottleneck, model signature, seed, tensor manifest
//   weights.bin   little-endian float64, manifest order
void save_adapter(const AdapterModule& adapter, const std::filesystem::path& dir);
AdapterModule load_adapter(const std::filesystem::path& dir);

enum class Objective {
  kMaskedLm,        // LA pretraining: LA + MLM head train
  kClassification,  // TA training: TA + classification head train
  kInference,       // nothing trains
};

struct FreezeMask {
  std::set<std::string> frozen;
  std::vector<NamedTensor> trainable;

  bool is_frozen(const std::string& name) const { return frozen.count(name) != 0; }
};

/// Validates that `stack` is a legal shape for `objective`, sets requires_grad
/// on every model, head, and adapter tensor accordingly, and returns the mask.
/// Throws ConfigError for illegal shapes (e.g. a trainable LA under a TA).
FreezeMask apply_freeze(const EncoderModel& model, const AdapterStack& stack, Objective objective);

}  // namespace adapterlab
