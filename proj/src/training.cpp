#include "adapterlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "adapterlab/error.hpp"
#include "adapterlab/ops.hpp"
#include "adapterlab/optim.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace adapterlab {

// ---- config ----

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.batch_size = 8;
  c.lr = 1e-5;
  c.max_steps = 100000;
  c.max_epochs = 100;
  return c;
}

TrainConfig TrainConfig::paper_low_resource() {
  TrainConfig c = paper();
  c.max_steps = 30000;
  return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (max_steps == 0) throw ConfigError("train.max_steps must be at least 1");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be at least 1");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("train.mask_rate must be in (0, 1)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("train.threshold must be in (0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
}

std::size_t TrainConfig::total_steps(std::size_t n_examples) const {
  const std::size_t per_epoch = (n_examples + batch_size - 1) / batch_size;
  return std::min(max_steps, max_epochs * per_epoch);
}

std::string_view tlr_cycle_name(TlrCycle cycle) { return cycle == TlrCycle::kPerBatch ? "per_batch" : "per_epoch"; }

TlrCycle parse_tlr_cycle(std::string_view name) {
  if (name == "per_batch") return TlrCycle::kPerBatch;
  if (name == "per_epoch") return TlrCycle::kPerEpoch;
  throw ConfigError("train.tlr_cycle: expected per_batch or per_epoch, got '" + std::string(name) + "'");
}

std::string_view tlr_batching_name(TlrBatching batching) {
  return batching == TlrBatching::kLanguageMatched ? "language_matched" : "pooled";
}

TlrBatching parse_tlr_batching(std::string_view name) {
  if (name == "language_matched") return TlrBatching::kLanguageMatched;
  if (name == "pooled") return TlrBatching::kPooled;
  throw ConfigError("train.tlr_batching: expected language_matched or pooled, got '" + std::string(name) + "'");
}

// ---- objectives ----

MaskedBatch mlm_mask(const TokenBatch& batch, double mask_rate, std::size_t vocab_size, Rng& rng) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw InvalidArgument("mlm_mask: mask_rate must be in (0, 1), got " + std::to_string(mask_rate));
  }
  MaskedBatch out{batch, {}, {}};
  const bool can_randomize = vocab_size > static_cast<std::size_t>(kNumReservedIds);
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    const int id = batch.ids[i];
    if (id == kMaskId) throw InvalidArgument("mlm_mask: batch already contains mask tokens");
    if (!batch.mask[i] || id == kPadId || id == kClsId) continue;
    if (!rng.bernoulli(mask_rate)) continue;
    out.positions.push_back(i);
    out.targets.push_back(id);
    const double u = rng.uniform();
    if (u < 0.8) {
      out.batch.ids[i] = kMaskId;
    } else if (u < 0.9 && can_randomize) {
      out.batch.ids[i] = kNumReservedIds + static_cast<int>(rng.uniform_int(vocab_size - kNumReservedIds));
    }
  }
  return out;
}

Tensor bce_multilabel_loss(const Tensor& logits, std::span<const std::vector<std::uint8_t>> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw ShapeError("bce_multilabel_loss: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " target rows");
  }
  std::vector<double> flat;
  flat.reserve(logits.numel());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r].size() != logits.dim(1)) {
      throw ShapeError("bce_multilabel_loss: target row " + std::to_string(r) + " has " +
                       std::to_string(targets[r].size()) + " labels, logits have " + std::to_string(logits.dim(1)));
    }
    for (auto y : targets[r]) {
      if (y > 1) throw InvalidArgument("bce_multilabel_loss: targets must be 0 or 1");
      flat.push_back(static_cast<double>(y));
    }
  }
  return bce_with_logits(logits, flat);
}

// ---- regimes and schedules ----

std::string_view regime_name(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::kSourceLaTa: return "SOURCE_LA_TA";
    case RegimeKind::kTaskOnly: return "TASK_ONLY";
    case RegimeKind::kTlr: return "TLR";
    case RegimeKind::kFamilyTlr: return "FAMILY_TLR";
  }
  return "?";
}

RegimeKind parse_regime_kind(std::string_view name) {
  for (auto k : {RegimeKind::kSourceLaTa, RegimeKind::kTaskOnly, RegimeKind::kTlr, RegimeKind::kFamilyTlr}) {
    if (regime_name(k) == name) return k;
  }
  throw ConfigError("unknown regime '" + std::string(name) +
                    "' (expected SOURCE_LA_TA, TASK_ONLY, TLR or FAMILY_TLR)");
}

Regime Regime::source_la_ta(std::string source_tag) {
  Regime r;
  r.kind = RegimeKind::kSourceLaTa;
  r.source_tag = std::move(source_tag);
  return r;
}

Regime Regime::task_only() { return Regime{}; }

Regime Regime::tlr(std::vector<std::string> tags) {
  Regime r;
  r.kind = RegimeKind::kTlr;
  r.tags = std::move(tags);
  return r;
}

Regime Regime::family_tlr(std::string family, std::vector<std::string> tags) {
  Regime r;
  r.kind = RegimeKind::kFamilyTlr;
  r.family = std::move(family);
  r.tags = std::move(tags);
  return r;
}

std::vector<std::string> Regime::required_adapters() const {
  switch (kind) {
    case RegimeKind::kSourceLaTa: return {source_tag};
    case RegimeKind::kTaskOnly: return {};
    default: return tags;
  }
}

void Regime::validate(const FamilyPartition* partition) const {
  switch (kind) {
    case RegimeKind::kSourceLaTa:
      if (source_tag.empty()) throw ConfigError("regime SOURCE_LA_TA needs a source_tag");
      return;
    case RegimeKind::kTaskOnly:
      return;
    case RegimeKind::kTlr:
    case RegimeKind::kFamilyTlr:
      break;
  }
  if (tags.empty()) throw ConfigError("regime " + name() + " needs a nonempty tag list");
  std::set<std::string> seen;
  for (const auto& t : tags) {
    if (!seen.insert(t).second) throw ConfigError("regime " + name() + " lists '" + t + "' twice");
  }
  if (kind != RegimeKind::kFamilyTlr) return;
  if (!partition) throw ConfigError("regime FAMILY_TLR needs a family partition");
  // An unnamed family is taken from the first tag.
  std::string expected = family;
  for (const auto& t : tags) {
    const auto fam = partition->family_of(t);
    if (!fam) throw ConfigError("regime FAMILY_TLR: language '" + t + "' is not in the family partition");
    if (expected.empty()) expected = *fam;
    if (*fam != expected) {
      throw ConfigError("regime FAMILY_TLR: language '" + t + "' belongs to family '" + *fam + "', not '" + expected +
                        "'; the tags span more than one family");
    }
  }
}

TlrSchedule TlrSchedule::round_robin(std::vector<std::string> order, std::size_t length) {
  if (order.empty()) throw InvalidArgument("TLR schedule needs at least one language tag");
  TlrSchedule s;
  s.order_ = std::move(order);
  s.length_ = length;
  return s;
}

std::vector<std::string> TlrSchedule::materialize() const {
  std::vector<std::string> out;
  out.reserve(length_);
  for (std::size_t i = 0; i < length_; ++i) out.push_back(at(i));
  return out;
}

std::uint64_t tlr_schedule_seed(std::uint64_t train_seed) { return Rng::derive(train_seed, 0x71); }

TlrSchedule make_tlr_schedule(std::vector<std::string> tags, std::size_t n_batches, std::uint64_t seed) {
  if (tags.empty()) throw InvalidArgument("make_tlr_schedule: tags must be nonempty");
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(tags));
  return TlrSchedule::round_robin(std::move(tags), n_batches);
}

std::string TrainLog::to_text() const {
  std::string out = "step,active_la_tag,loss\n";
  char buf[64];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, ",%.17g\n", e.loss);
    out += std::to_string(e.step) + "," + e.active_la + buf;
  }
  return out;
}

TrainLog TrainLog::parse(const std::string& text) {
  TrainLog log;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "step,active_la_tag,loss") {
    throw DataError("training log: missing 'step,active_la_tag,loss' header");
  }
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.rfind(',');
    if (a == std::string::npos || a == b) throw DataError("training log: line " + std::to_string(n) + " is malformed");
    try {
      log.entries.push_back({std::stoul(line.substr(0, a)), line.substr(a + 1, b - a - 1), std::stod(line.substr(b + 1))});
    } catch (const std::logic_error&) {
      throw DataError("training log: line " + std::to_string(n) + " is malformed");
    }
  }
  return log;
}

// ---- encoding ----

EncodedDataset encode_dataset(std::span<const LabeledExample> examples, const Vocab& vocab, std::size_t max_seq_len) {
  EncodedDataset out;
  for (const auto& ex : examples) {
    out.ids.push_back(tokenize(ex.text, vocab, max_seq_len));
    out.labels.push_back(ex.labels);
  }
  return out;
}

std::vector<std::vector<int>> encode_corpus(std::span<const std::string> sentences, const Vocab& vocab,
                                            std::size_t max_seq_len) {
  std::vector<std::vector<int>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(tokenize(s, vocab, max_seq_len));
  return out;
}

namespace {

// Activation and gradient buffers are freed and reallocated every step. With
// glibc defaults the larger ones go back to the OS each time and come back
// as fresh zero pages, which costs about a third of step time.
void keep_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

// Draws batches from a fixed index range, reshuffling at every epoch. The
// last batch of an epoch may be short.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = n;
  }

  std::vector<std::size_t> next(std::size_t batch_size) {
    if (cursor_ >= order_.size()) {
      rng_.shuffle(std::span<std::size_t>(order_));
      cursor_ = 0;
    }
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size);
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_;
  Rng rng_;
};

AdamOptions adam_options(const TrainConfig& c) { return {c.lr, c.beta1, c.beta2, c.adam_eps}; }

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  for (const auto& nt : named) out.push_back(nt.tensor);
  return out;
}

void set_frozen(const AdapterModule& adapter) {
  for (auto nt : adapter.named_tensors()) nt.tensor.set_requires_grad(false);
}

void check_sequences(std::span<const std::vector<int>> seqs, const ModelConfig& config, const char* what) {
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    if (s.empty() || s.size() > config.max_seq_len) {
      throw DataError(std::string(what) + ": sequence " + std::to_string(i) + " has length " +
                      std::to_string(s.size()) + ", expected 1.." + std::to_string(config.max_seq_len));
    }
    for (int id : s) {
      if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
        throw DataError(std::string(what) + ": sequence " + std::to_string(i) + " has token id " +
                        std::to_string(id) + " outside the model vocabulary");
      }
    }
  }
}

}  // namespace

// ---- language adapter ----

LanguageAdapterResult train_language_adapter(std::span<const std::vector<int>> corpus, const std::string& tag,
                                             const EncoderModel& model, const TrainConfig& config,
                                             const BottleneckSpec& bottleneck) {
  keep_freed_memory();
  config.validate();
  if (corpus.empty()) throw DataError("language adapter '" + tag + "': corpus is empty");
  check_sequences(corpus, model.config(), "language corpus");
  const bool any_maskable = std::any_of(corpus.begin(), corpus.end(), [](const auto& s) {
    return std::any_of(s.begin(), s.end(), [](int id) { return id != kPadId && id != kClsId && id != kMaskId; });
  });
  if (!any_maskable) throw DataError("language adapter '" + tag + "': corpus has no maskable tokens");

  const std::size_t V = model.config().vocab_size;
  LinearHead head = model.mlm_head().clone();
  const EncoderModel m = model.with_mlm_head(head);
  AdapterModule la = make_adapter(AdapterRole::kLanguage, tag, model.config(), bottleneck, Rng::derive(config.seed, 0x1a));
  const AdapterStack stack = AdapterStack::language_pretraining(la);
  const FreezeMask mask = apply_freeze(m, stack, Objective::kMaskedLm);
  Adam opt(tensors_of(mask.trainable), adam_options(config));

  // Fixed evaluation sample, masked once.
  std::vector<std::vector<int>> eval_seqs;
  {
    std::vector<std::size_t> idx(corpus.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng pick(Rng::derive(config.seed, 0xe1));
    pick.shuffle(std::span<std::size_t>(idx));
    idx.resize(std::min<std::size_t>(idx.size(), 64));
    for (auto i : idx) eval_seqs.push_back(corpus[i]);
  }
  const TokenBatch eval_tokens = TokenBatch::pad(eval_seqs, kPadId);
  MaskedBatch eval_masked;
  {
    Rng r(Rng::derive(config.seed, 0xe2));
    for (int attempt = 0; attempt < 1000 && eval_masked.positions.empty(); ++attempt) {
      eval_masked = mlm_mask(eval_tokens, config.mask_rate, V, r);
    }
  }
  auto eval_loss = [&]() -> double {
    if (eval_masked.positions.empty()) return 0.0;
    const Tensor hidden = m.encode(eval_masked.batch, stack);
    return cross_entropy(m.mlm_logits_at(hidden, eval_masked.positions), eval_masked.targets).item();
  };

  LanguageAdapterResult result{la, head, {}, 0, eval_loss(), 0.0};
  const std::size_t total = config.total_steps(corpus.size());
  EpochSampler sampler(corpus.size(), Rng::derive(config.seed, 0x5a));
  Rng mask_rng(Rng::derive(config.seed, 0x3a));
  Rng drop_rng(Rng::derive(config.seed, 0xd0));
  Rng* drop = model.config().dropout > 0.0 ? &drop_rng : nullptr;
  std::vector<std::vector<int>> seqs;
  for (std::size_t step = 0; step < total; ++step) {
    seqs.clear();
    for (auto i : sampler.next(config.batch_size)) seqs.push_back(corpus[i]);
    const MaskedBatch mb = mlm_mask(TokenBatch::pad(seqs, kPadId), config.mask_rate, V, mask_rng);
    if (mb.positions.empty()) continue;
    opt.zero_grad();
    const Tensor hidden = m.encode(mb.batch, stack, drop);
    Tensor loss = cross_entropy(m.mlm_logits_at(hidden, mb.positions), mb.targets);
    loss.backward();
    opt.step();
    result.log.entries.push_back({step, tag, loss.item()});
  }
  result.steps = total;
  result.final_loss = eval_loss();
  opt.zero_grad();
  return result;
}

// ---- task adapter ----

TaskAdapterResult train_task_adapter(const Regime& regime, const std::map<std::string, EncodedDataset>& datasets,
                                     const std::map<std::string, AdapterModule>& la_bank, const EncoderModel& model,
                                     const TrainConfig& config, const FamilyPartition* partition,
                                     const BottleneckSpec& bottleneck) {
  keep_freed_memory();
  config.validate();
  regime.validate(partition);
  const ModelConfig& mc = model.config();
  const std::size_t L = model.labels().size();

  // Everything that can be missing is checked before training starts.
  for (const auto& tag : regime.required_adapters()) {
    auto it = la_bank.find(tag);
    if (it == la_bank.end()) {
      throw ConfigError("regime " + regime.name() + " needs a language adapter for '" + tag + "'");
    }
    if (it->second.role() != AdapterRole::kLanguage) {
      throw ConfigError("adapter for '" + tag + "' is not a language adapter");
    }
    it->second.check_compatible(mc);
  }
  for (const auto& [tag, ds] : datasets) {
    if (ds.ids.size() != ds.labels.size()) throw DataError("dataset '" + tag + "': ids and labels differ in length");
    check_sequences(ds.ids, mc, ("dataset '" + tag + "'").c_str());
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
      if (ds.labels[i].size() != L) {
        throw DataError("dataset '" + tag + "': example " + std::to_string(i) + " has " +
                        std::to_string(ds.labels[i].size()) + " labels, the model has " + std::to_string(L));
      }
    }
  }
  auto has_data = [&](const std::string& tag) {
    auto it = datasets.find(tag);
    return it != datasets.end() && it->second.size() > 0;
  };

  std::vector<std::string> pool_tags;
  switch (regime.kind) {
    case RegimeKind::kSourceLaTa:
      if (!has_data(regime.source_tag)) {
        throw DataError("regime SOURCE_LA_TA needs labeled data for source language '" + regime.source_tag + "'");
      }
      pool_tags = {regime.source_tag};
      break;
    case RegimeKind::kTaskOnly:
      for (const auto& [tag, ds] : datasets) {
        if (ds.size()) pool_tags.push_back(tag);
      }
      break;
    case RegimeKind::kTlr:
    case RegimeKind::kFamilyTlr: {
      std::set<std::string> sorted(regime.tags.begin(), regime.tags.end());
      for (const auto& t : sorted) {
        if (has_data(t)) pool_tags.push_back(t);
      }
      if (pool_tags.empty()) {
        for (const auto& [tag, ds] : datasets) {
          if (ds.size()) pool_tags.push_back(tag);
        }
      }
      break;
    }
  }
  if (pool_tags.empty()) throw DataError("regime " + regime.name() + ": no labeled training data");

  // Pool entries as (tag, index) pairs in tag order.
  std::vector<std::pair<const EncodedDataset*, std::size_t>> pool;
  for (const auto& t : pool_tags) {
    const auto& ds = datasets.at(t);
    for (std::size_t i = 0; i < ds.size(); ++i) pool.emplace_back(&ds, i);
  }
  const std::size_t total = config.total_steps(pool.size());
  const std::size_t per_epoch = (pool.size() + config.batch_size - 1) / config.batch_size;

  const bool cycling = regime.kind == RegimeKind::kTlr || regime.kind == RegimeKind::kFamilyTlr;
  std::optional<TlrSchedule> schedule;
  if (cycling) {
    const std::size_t units =
        config.tlr_cycle == TlrCycle::kPerBatch ? total : (total + per_epoch - 1) / per_epoch;
    schedule = make_tlr_schedule(regime.tags, units, tlr_schedule_seed(config.seed));
  }

  LinearHead head = model.classifier().clone();
  const EncoderModel m = model.with_classifier(head);
  AdapterModule ta = make_adapter(AdapterRole::kTask, "task", mc, bottleneck, Rng::derive(config.seed, 0x7a));
  for (const auto& tag : regime.required_adapters()) set_frozen(la_bank.at(tag));

  AdapterStack stack;
  switch (regime.kind) {
    case RegimeKind::kSourceLaTa: stack = AdapterStack::language_task(la_bank.at(regime.source_tag), ta); break;
    case RegimeKind::kTaskOnly: stack = AdapterStack::task_only(ta); break;
    default: stack = AdapterStack::language_task(la_bank.at(schedule->at(0)), ta); break;
  }
  const FreezeMask mask = apply_freeze(m, stack, Objective::kClassification);
  Adam opt(tensors_of(mask.trainable), adam_options(config));

  EpochSampler pooled(pool.size(), Rng::derive(config.seed, 0x5b));
  std::map<std::string, EpochSampler> matched;
  if (cycling && config.tlr_batching == TlrBatching::kLanguageMatched) {
    std::uint64_t salt = 0x600;
    for (const auto& t : regime.tags) {
      if (has_data(t)) matched.emplace(t, EpochSampler(datasets.at(t).size(), Rng::derive(config.seed, salt++)));
    }
  }
  Rng drop_rng(Rng::derive(config.seed, 0xd1));
  Rng* drop = mc.dropout > 0.0 ? &drop_rng : nullptr;

  TaskAdapterResult result{ta, head, {}, total};
  std::vector<std::vector<int>> seqs;
  std::vector<std::vector<std::uint8_t>> labels;
  for (std::size_t step = 0; step < total; ++step) {
    std::string active = "-";
    if (regime.kind == RegimeKind::kSourceLaTa) active = regime.source_tag;
    seqs.clear();
    labels.clear();
    bool drawn = false;
    if (cycling) {
      active = schedule->at(config.tlr_cycle == TlrCycle::kPerBatch ? step : step / per_epoch);
      stack = swap_language_adapter(stack, la_bank.at(active));
      if (auto it = matched.find(active); it != matched.end()) {
        const auto& ds = datasets.at(active);
        for (auto i : it->second.next(config.batch_size)) {
          seqs.push_back(ds.ids[i]);
          labels.push_back(ds.labels[i]);
        }
        drawn = true;
      }
    }
    if (!drawn) {
      for (auto i : pooled.next(config.batch_size)) {
        seqs.push_back(pool[i].first->ids[pool[i].second]);
        labels.push_back(pool[i].first->labels[pool[i].second]);
      }
    }
    opt.zero_grad();
    const TokenBatch tokens = TokenBatch::pad(seqs, kPadId);
    const Tensor hidden = m.encode(tokens, stack, drop);
    Tensor loss = bce_multilabel_loss(m.classify_logits(hidden, tokens.mask), labels);
    loss.backward();
    opt.step();
    result.log.entries.push_back({step, active, loss.item()});
  }
  opt.zero_grad();
  return result;
}

// ---- inference ----

LabelMatrix predict(const EncoderModel& model, const AdapterStack& stack, std::span<const std::vector<int>> inputs,
                    double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("predict: threshold must be in (0, 1), got " + std::to_string(threshold));
  }
  if (!stack.fully_frozen()) throw InvalidArgument("predict: every adapter in the stack must be frozen");
  apply_freeze(model, stack, Objective::kInference);
  check_sequences(inputs, model.config(), "predict input");

  LabelMatrix out;
  out.reserve(inputs.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
    const auto chunk = inputs.subspan(start, std::min(kChunk, inputs.size() - start));
    const TokenBatch tokens = TokenBatch::pad(chunk, kPadId);
    const Tensor logits = model.classify_logits(model.encode(tokens, stack), tokens.mask);
    const std::size_t L = logits.dim(1);
    const auto z = logits.data();
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      std::vector<std::uint8_t> row(L);
      for (std::size_t l = 0; l < L; ++l) {
        const double p = 1.0 / (1.0 + std::exp(-z[r * L + l]));
        row[l] = p >= threshold ? 1 : 0;
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace adapterlab
