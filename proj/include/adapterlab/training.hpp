#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adapterlab/adapter.hpp"
#include "adapterlab/data.hpp"
#include "adapterlab/model.hpp"
#include "adapterlab/rng.hpp"

namespace adapterlab {

/// Whether TLR training moves to the next language adapter every batch or
/// every epoch.
enum class TlrCycle { kPerBatch, kPerEpoch };

/// Where TLR batches come from: the active LA's own language when it has
/// labeled data (falling back to the pool), or always the pooled set.
enum class TlrBatching { kLanguageMatched, kPooled };

// Defaults are the desk profile.
struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t max_steps = 2000;
  std::size_t max_epochs = 100;
  double mask_rate = 0.15;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  TlrCycle tlr_cycle = TlrCycle::kPerBatch;
  TlrBatching tlr_batching = TlrBatching::kLanguageMatched;

  /// lr 1e-5, 100 epochs or 100,000 steps, batch 8.
  static TrainConfig paper();
  /// As paper() with the 30,000-step budget used for low-resource languages.
  static TrainConfig paper_low_resource();
  /// lr 1e-3, 2,000 steps, batch 16: sized for the synthetic corpora.
  static TrainConfig desk();

  /// Throws ConfigError naming the field.
  void validate() const;
  /// Number of optimizer steps for a dataset of n examples.
  std::size_t total_steps(std::size_t n_examples) const;

  bool operator==(const TrainConfig&) const = default;
};

std::string_view tlr_cycle_name(TlrCycle cycle);
TlrCycle parse_tlr_cycle(std::string_view name);
std::string_view tlr_batching_name(TlrBatching batching);
TlrBatching parse_tlr_batching(std::string_view name);

struct MaskedBatch {
  TokenBatch batch;                    // with selected positions rewritten
  std::vector<std::size_t> positions;  // flat b * seq + t, ascending
  std::vector<int> targets;            // original ids at `positions`
};

/// Selects each non-special, non-pad position with probability mask_rate;
/// selected tokens become [mask] (80%), a random non-reserved id (10%) or
/// stay (10%). An empty `positions` means the batch should be skipped.
MaskedBatch mlm_mask(const TokenBatch& batch, double mask_rate, std::size_t vocab_size, Rng& rng);

/// Mean per-label binary cross-entropy with logits. targets is [batch][L].
Tensor bce_multilabel_loss(const Tensor& logits, std::span<const std::vector<std::uint8_t>> targets);

enum class RegimeKind { kSourceLaTa, kTaskOnly, kTlr, kFamilyTlr };

std::string_view regime_name(RegimeKind kind);
RegimeKind parse_regime_kind(std::string_view name);

struct Regime {
  RegimeKind kind = RegimeKind::kTaskOnly;
  std::string source_tag;         // kSourceLaTa
  std::vector<std::string> tags;  // kTlr, kFamilyTlr
  std::string family;             // kFamilyTlr

  static Regime source_la_ta(std::string source_tag);
  static Regime task_only();
  static Regime tlr(std::vector<std::string> tags);
  static Regime family_tlr(std::string family, std::vector<std::string> tags);

  std::string name() const { return std::string(regime_name(kind)); }
  /// Language adapters the regime needs.
  std::vector<std::string> required_adapters() const;
  /// Throws ConfigError for an empty tag list or a family regime whose tags
  /// are not all in `family` (partition may be null for other regimes).
  void validate(const FamilyPartition* partition) const;
};

/// Round-robin assignment of language tags to training units (batches or
/// epochs).
class TlrSchedule {
 public:
  /// Cycles through `order` as given.
  static TlrSchedule round_robin(std::vector<std::string> order, std::size_t length);

  const std::vector<std::string>& order() const { return order_; }
  std::size_t size() const { return length_; }
  const std::string& at(std::size_t unit) const { return order_[unit % order_.size()]; }
  std::vector<std::string> materialize() const;

 private:
  std::vector<std::string> order_;
  std::size_t length_ = 0;
};

/// Round-robin over a seeded permutation of `tags`. Throws InvalidArgument
/// if tags is empty.
TlrSchedule make_tlr_schedule(std::vector<std::string> tags, std::size_t n_batches, std::uint64_t seed);

/// Seed train_task_adapter passes to make_tlr_schedule for a run seed.
std::uint64_t tlr_schedule_seed(std::uint64_t train_seed);

/// One line per optimizer step: step, active_la_tag, loss.
struct LogEntry {
  std::size_t step = 0;
  std::string active_la;  // "-" when no language adapter is active
  double loss = 0.0;
};

struct TrainLog {
  std::vector<LogEntry> entries;
  /// CSV with header "step,active_la_tag,loss".
  std::string to_text() const;
  static TrainLog parse(const std::string& text);
};

struct EncodedDataset {
  std::vector<std::vector<int>> ids;
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t size() const { return ids.size(); }
};

EncodedDataset encode_dataset(std::span<const LabeledExample> examples, const Vocab& vocab, std::size_t max_seq_len);
std::vector<std::vector<int>> encode_corpus(std::span<const std::string> sentences, const Vocab& vocab,
                                            std::size_t max_seq_len);

struct LanguageAdapterResult {
  AdapterModule adapter;
  LinearHead mlm_head;
  TrainLog log;
  std::size_t steps = 0;
  // Masked-LM loss on a fixed masked sample of the corpus before and after.
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Trains a fresh language adapter and a copy of the model's MLM head on
/// token id sequences. The model itself is left bitwise unchanged.
LanguageAdapterResult train_language_adapter(std::span<const std::vector<int>> corpus, const std::string& tag,
                                             const EncoderModel& model, const TrainConfig& config,
                                             const BottleneckSpec& bottleneck = {});

struct TaskAdapterResult {
  AdapterModule adapter;
  LinearHead head;
  TrainLog log;
  std::size_t steps = 0;
};

/// Trains a fresh task adapter and a copy of the classification head under
/// `regime`. Language adapters in `la_bank` and the model are left bitwise
/// unchanged. Missing adapters and data are rejected before any training.
TaskAdapterResult train_task_adapter(const Regime& regime, const std::map<std::string, EncodedDataset>& datasets,
                                     const std::map<std::string, AdapterModule>& la_bank, const EncoderModel& model,
                                     const TrainConfig& config, const FamilyPartition* partition = nullptr,
                                     const BottleneckSpec& bottleneck = {});

using LabelMatrix = std::vector<std::vector<std::uint8_t>>;

/// Label l is predicted iff sigmoid(logit_l) >= threshold. The stack must be
/// fully frozen and threshold in (0, 1). Clears requires_grad on every tensor
/// it touches.
LabelMatrix predict(const EncoderModel& model, const AdapterStack& stack, std::span<const std::vector<int>> inputs,
                    double threshold);

}  // namespace adapterlab
