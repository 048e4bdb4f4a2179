// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 iff all pass.
// Arguments select criteria by number (default: all).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adapterlab/checkpoint.hpp"
#include "adapterlab/grad_check.hpp"
#include "adapterlab/harness.hpp"
#include "adapterlab/metrics.hpp"
#include "adapterlab/model.hpp"
#include "adapterlab/training.hpp"
#include "support/random_graph.hpp"
#include "support/temp_dir.hpp"

using namespace adapterlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, const char* f = "%.4f") {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + fmt(f, x);
  return out;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<std::vector<double>> snapshot(const std::vector<NamedTensor>& ts) {
  std::vector<std::vector<double>> out;
  for (const auto& t : ts) out.emplace_back(t.tensor.data().begin(), t.tensor.data().end());
  return out;
}

bool unchanged(const std::vector<NamedTensor>& ts, const std::vector<std::vector<double>>& before) {
  if (ts.size() != before.size()) return false;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!bitwise_equal(ts[i].tensor.data(), before[i])) return false;
  }
  return true;
}

void randomize(const std::vector<NamedTensor>& ts, Rng& rng, double std) {
  for (const auto& t : ts) {
    Tensor h = t.tensor;
    for (double& v : h.mutable_data()) v = rng.normal(0.0, std);
  }
}

// Default synthetic corpus with a vocabulary over every unlabeled corpus.
struct Desk {
  SynthCorpus corpus = generate_synthetic(SynthSpec::default_spec());
  Vocab vocab;
  Desk() {
    std::vector<std::vector<std::string>> texts;
    for (const auto& l : corpus.languages) texts.push_back(l.unlabeled);
    vocab = Vocab::build(texts);
  }
  ModelConfig config() const {
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    return mc;
  }
};

const Desk& desk() {
  static const Desk d;
  return d;
}

// ---- 1 ----

Outcome gradient_correctness() {
  double worst_graph = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = testing::make_random_graph(seed);
    const CheckReport r = grad_check(g.params, g.loss, 1e-5, 1e-4);
    worst_graph = std::max(worst_graph, r.max_rel_error);
    if (!r.pass) return {false, "random graph " + std::to_string(seed) + " (" + g.description + "): " + fmt("%.3g", r.max_rel_error)};
  }

  double worst_model = 0.0;
  for (Pooling pooling : {Pooling::kCls, Pooling::kMean}) {
    ModelConfig mc;
    mc.vocab_size = 12;
    mc.d_model = 16;
    mc.n_layers = 2;
    mc.n_heads = 2;
    mc.ffn_dim = 24;
    mc.max_seq_len = 8;
    mc.init_std = 0.3;
    mc.pooling = pooling;
    const auto model = EncoderModel::create(mc, LabelSpace::six_emotions(), 3);
    const auto la = make_adapter(AdapterRole::kLanguage, "la", mc, BottleneckSpec::dimension(4), 5);
    const auto ta = make_adapter(AdapterRole::kTask, "ta", mc, BottleneckSpec::dimension(4), 6);
    Rng rng(9);
    randomize(la.named_tensors(), rng, 0.3);
    randomize(ta.named_tensors(), rng, 0.3);
    AdapterStack stack = AdapterStack::language_task(la, ta);
    const std::vector<std::vector<int>> seqs{{1, 5, 6, 7, 8}, {1, 9, 10, 4}};
    const TokenBatch tb = TokenBatch::pad(seqs, kPadId);
    const std::vector<std::vector<std::uint8_t>> y{{1, 0, 0, 1, 0, 0}, {0, 1, 1, 0, 0, 1}};
    std::vector<NamedTensor> params = model.all_tensors();
    for (const auto& v : {la.qualified_tensors(), ta.qualified_tensors()}) params.insert(params.end(), v.begin(), v.end());
    const CheckReport r = grad_check(params, [&] {
      return bce_multilabel_loss(model.classify_logits(model.encode(tb, stack), tb.mask), y);
    });
    worst_model = std::max(worst_model, r.max_rel_error);
    if (!r.pass) return {false, "encoder+adapters+BCE: " + fmt("%.3g", r.max_rel_error)};
  }
  return {true, "max rel error: 20 graphs " + fmt("%.2e", worst_graph) + ", encoder+LA+TA+BCE d=16 " +
                    fmt("%.2e", worst_model) + " (< 1e-4)"};
}

// ---- 2 ----

struct SmallWorld {
  SynthCorpus corpus;
  Vocab vocab;
  EncoderModel model;
  std::map<std::string, EncodedDataset> train;
  std::map<std::string, AdapterModule> la_bank;
  std::vector<std::vector<int>> unlabeled;
};

SmallWorld small_world() {
  SynthSpec spec = SynthSpec::default_spec();
  spec.unlabeled_sentences = 40;
  spec.train_size = 24;
  spec.dev_size = 4;
  spec.test_size = 8;
  SynthCorpus corpus = generate_synthetic(spec);
  std::vector<std::vector<std::string>> texts;
  for (const auto& l : corpus.languages) texts.push_back(l.unlabeled);
  Vocab vocab = Vocab::build(texts);
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.d_model = 16;
  mc.ffn_dim = 16;
  mc.max_seq_len = 24;
  SmallWorld w{corpus, vocab, EncoderModel::create(mc, corpus.labels, 1), {}, {}, {}};
  Rng rng(77);
  for (const auto& l : corpus.languages) {
    w.train[l.tag] = encode_dataset(l.train, vocab, mc.max_seq_len);
    auto la = make_adapter(AdapterRole::kLanguage, l.tag, mc, BottleneckSpec::dimension(4), rng.next_u64());
    randomize(la.named_tensors(), rng, 0.3);  // distinct, nonzero LAs
    w.la_bank.emplace(l.tag, la);
  }
  w.unlabeled = encode_corpus(corpus.languages[0].unlabeled, vocab, mc.max_seq_len);
  return w;
}

Outcome freeze_soundness() {
  const SmallWorld w = small_world();
  const auto model_before = snapshot(w.model.all_tensors());
  std::map<std::string, std::vector<std::vector<double>>> la_before;
  for (const auto& [tag, la] : w.la_bank) la_before[tag] = snapshot(la.named_tensors());
  std::size_t frozen_tensors = model_before.size();
  for (const auto& [tag, s] : la_before) frozen_tensors += s.size();

  TrainConfig c;
  c.batch_size = 4;
  c.max_steps = 50;
  c.seed = 5;
  const std::vector<Regime> regimes{Regime::source_la_ta("noa"), Regime::task_only(), Regime::tlr({"noa", "nob", "soa"}),
                                    Regime::family_tlr("south", {"soa", "sob", "soc"})};
  for (const auto& r : regimes) {
    const auto res = train_task_adapter(r, w.train, w.la_bank, w.model, c, &w.corpus.partition);
    if (res.steps != 50) return {false, r.name() + " ran " + std::to_string(res.steps) + " steps"};
    if (!unchanged(w.model.all_tensors(), model_before)) return {false, r.name() + " changed the base model"};
    for (const auto& [tag, la] : w.la_bank) {
      if (!unchanged(la.named_tensors(), la_before.at(tag))) return {false, r.name() + " changed LA " + tag};
    }
    bool moved = false;
    for (const auto& l : res.adapter.layers()) {
      for (double v : l.up.data()) moved = moved || v != 0.0;
    }
    if (!moved) return {false, r.name() + ": the task adapter did not train"};
  }
  const auto la = train_language_adapter(w.unlabeled, "noa", w.model, c);
  if (!unchanged(w.model.all_tensors(), model_before)) return {false, "LA training changed the base model"};
  return {true, "4 regimes x 50 steps (+ LA pretraining): " + std::to_string(frozen_tensors) +
                    " frozen tensors bitwise unchanged, task adapters trained"};
}

// ---- 3 ----

Outcome identity_at_init() {
  ModelConfig mc;
  mc.vocab_size = 60;
  mc.max_seq_len = 16;
  const auto model = EncoderModel::create(mc, LabelSpace::six_emotions(), 21);
  Rng rng(2);
  std::size_t compared = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::vector<int>> seqs(1 + rng.uniform_int(4));
    for (auto& s : seqs) {
      s.push_back(kClsId);
      const std::size_t len = rng.uniform_int(mc.max_seq_len);
      for (std::size_t t = 0; t < len; ++t) s.push_back(static_cast<int>(kNumReservedIds + rng.uniform_int(56)));
    }
    const TokenBatch tb = TokenBatch::pad(seqs, kPadId);
    const BottleneckSpec b = rng.bernoulli(0.5) ? BottleneckSpec::dimension(1 + rng.uniform_int(40))
                                                : BottleneckSpec::reduction_factor(1u << rng.uniform_int(6));
    const auto la = make_adapter(AdapterRole::kLanguage, "la", mc, b, rng.next_u64());
    const auto ta = make_adapter(AdapterRole::kTask, "ta", mc, b, rng.next_u64());
    const Tensor plain = model.encode(tb, AdapterStack());
    for (const AdapterStack& stack : {AdapterStack::language_pretraining(la), AdapterStack::task_only(ta),
                                      AdapterStack::language_task(la, ta)}) {
      const Tensor h = model.encode(tb, stack);
      if (!bitwise_equal(h.data(), plain.data())) return {false, "input " + std::to_string(i) + " changed"};
      ++compared;
    }
  }
  return {true, std::to_string(compared) + " encodings of 100 random inputs bitwise equal to the adapter-free model"};
}

// ---- 4 ----

std::size_t closed_form_base(const ModelConfig& c, std::size_t labels) {
  const std::size_t V = c.vocab_size, d = c.d_model, f = c.ffn_dim, S = c.max_seq_len;
  const std::size_t layer = 4 * d * d + 2 * d * f + f + 8 * d;  // q,v,o biases; LN1, LN2; FFN
  return V * d + S * d + c.n_layers * layer + (c.tie_mlm_head ? 0 : d * V) + V + d * labels + labels;
}

Outcome parameter_efficiency() {
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    ModelConfig mc;
    mc.n_heads = 1 + rng.uniform_int(4);
    mc.d_model = mc.n_heads * (2 + rng.uniform_int(12));
    mc.n_layers = 1 + rng.uniform_int(3);
    mc.ffn_dim = 4 + rng.uniform_int(60);
    mc.vocab_size = 5 + rng.uniform_int(200);
    mc.max_seq_len = 2 + rng.uniform_int(30);
    mc.tie_mlm_head = rng.bernoulli(0.3);
    const std::size_t b = 1 + rng.uniform_int(mc.d_model);
    const auto model = EncoderModel::create(mc, LabelSpace::six_emotions(), rng.next_u64());
    const auto la = make_adapter(AdapterRole::kLanguage, "la", mc, BottleneckSpec::dimension(b), 1);
    const auto ta = make_adapter(AdapterRole::kTask, "ta", mc, BottleneckSpec::dimension(b), 2);
    const AdapterStack stack = AdapterStack::language_task(la, ta);
    apply_freeze(model, stack, Objective::kClassification);
    const ParamReport r = param_report(model, stack);
    const std::size_t adapter = 2 * mc.n_layers * (2 * mc.d_model * b + b + mc.d_model);
    const std::size_t trainable = mc.n_layers * (2 * mc.d_model * b + b + mc.d_model) + mc.d_model * 6 + 6;
    if (r.base_params != closed_form_base(mc, 6) || r.adapter_params != adapter || r.trainable_params != trainable) {
      return {false, "config " + std::to_string(i) + " (d=" + std::to_string(mc.d_model) + ", b=" + std::to_string(b) +
                         "): report " + std::to_string(r.base_params) + "/" + std::to_string(r.adapter_params) +
                         "/" + std::to_string(r.trainable_params) + ", closed form " +
                         std::to_string(closed_form_base(mc, 6)) + "/" + std::to_string(adapter) + "/" +
                         std::to_string(trainable)};
    }
  }
  if (adapter_layer_params(32, 2) != 162 || adapter_layer_params(768, 48) != 74544) {
    return {false, "per-layer counts for (32,2) or (768,48) are off"};
  }

  const ModelConfig mc = desk().config();
  const auto model = EncoderModel::create(mc, desk().corpus.labels, 1);
  double ratios[2];
  const BottleneckSpec specs[2] = {BottleneckSpec{}, BottleneckSpec::dimension(16)};
  for (int k = 0; k < 2; ++k) {
    const AdapterStack stack = AdapterStack::language_task(make_adapter(AdapterRole::kLanguage, "la", mc, specs[k], 1),
                                                           make_adapter(AdapterRole::kTask, "ta", mc, specs[k], 2));
    const ParamReport r = param_report(model, stack);
    ratios[k] = static_cast<double>(r.adapter_params) / static_cast<double>(r.base_params);
  }
  const bool pass = ratios[0] < 0.05;
  return {pass, "10 random configs match the closed form exactly; LA+TA / base at defaults " +
                    fmt("%.2f%%", 100 * ratios[0]) + " < 5% (b=16, the setting criteria 7-9 train with: " + fmt("%.2f%%", 100 * ratios[1]) +
                    ", vocab " + std::to_string(mc.vocab_size) + ")"};
}

// ---- 5 ----

Outcome tlr_conformance() {
  const SmallWorld w = small_world();
  const std::vector<std::string> all{"noa", "nob", "noc", "soa", "sob", "soc"};
  std::string detail;
  for (std::size_t K : {1, 2, 3, 5}) {
    const std::vector<std::string> tags(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(K));
    TrainConfig c;
    c.batch_size = 2;
    c.max_steps = 1000;
    c.seed = 40 + K;
    const auto res = train_task_adapter(Regime::tlr(tags), w.train, w.la_bank, w.model, c);
    if (res.steps != 1000) return {false, "K=" + std::to_string(K) + " ran " + std::to_string(res.steps) + " batches"};
    const auto expected = make_tlr_schedule(tags, 1000, tlr_schedule_seed(c.seed)).materialize();
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < 1000; ++i) {
      if (res.log.entries[i].active_la != expected[i] || res.log.entries[i].step != i) {
        return {false, "K=" + std::to_string(K) + ": batch " + std::to_string(i) + " used " +
                           res.log.entries[i].active_la + ", schedule says " + expected[i]};
      }
      ++counts[expected[i]];
    }
    std::size_t lo = 1000, hi = 0;
    for (const auto& t : tags) {
      lo = std::min(lo, counts[t]);
      hi = std::max(hi, counts[t]);
    }
    if (hi - lo > 1) return {false, "K=" + std::to_string(K) + ": usage counts spread " + std::to_string(hi - lo)};
    detail += (detail.empty() ? "" : ", ") + ("K=" + std::to_string(K) + " counts " + std::to_string(lo) + ".." +
                                              std::to_string(hi));
  }
  return {true, "1000-batch audit logs equal the schedule; " + detail};
}

// ---- 6 ----

// Independent brute force: per label, per row, classify the cell.
double brute_macro_f1(const LabelMatrix& pred, const LabelMatrix& gold) {
  const std::size_t L = gold[0].size();
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t r = 0; r < gold.size(); ++r) {
      if (pred[r][l] && gold[r][l]) ++tp;
      else if (pred[r][l]) ++fp;
      else if (gold[r][l]) ++fn;
    }
    total += tp + fp + fn == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
  }
  return total / static_cast<double>(L);
}

Outcome metric_oracle() {
  const double worked = macro_f1({{1, 0}, {1, 1}}, {{1, 0}, {0, 1}}).macro;
  if (std::abs(worked - 5.0 / 6.0) > 1e-15) return {false, "worked example gave " + fmt("%.17g", worked)};
  Rng rng(606);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t rows = 1 + rng.uniform_int(50), cols = 1 + rng.uniform_int(10);
    LabelMatrix gold(rows, std::vector<std::uint8_t>(cols)), pred = gold;
    const double pg = rng.uniform(), pp = rng.uniform();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        gold[r][c] = rng.bernoulli(pg);
        pred[r][c] = rng.bernoulli(pp);
      }
    }
    const double got = macro_f1(pred, gold).macro, want = brute_macro_f1(pred, gold);
    if (got != want) return {false, "matrix " + std::to_string(i) + ": " + fmt("%.17g", got) + " vs " + fmt("%.17g", want)};
  }
  return {true, "1000 random matrices equal the brute-force oracle exactly; worked example = 5/6"};
}

// ---- 7 ----

Outcome mlm_learning() {
  const Desk& d = desk();
  const auto& lang = d.corpus.languages[0];
  const auto corpus = encode_corpus(lang.unlabeled, d.vocab, d.config().max_seq_len);
  std::vector<double> ratios;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto model = EncoderModel::create(d.config(), d.corpus.labels, seed);
    TrainConfig c = TrainConfig::desk();
    c.seed = seed;
    const auto r = train_language_adapter(corpus, lang.tag, model, c, BottleneckSpec::dimension(16));
    if (r.steps > 2000) return {false, "ran " + std::to_string(r.steps) + " steps"};
    ratios.push_back(r.final_loss / r.initial_loss);
  }
  const double m = median(ratios);
  return {m < 0.8, "median final/initial MLM loss " + fmt("%.4f", m) + " < 0.8 over " +
                       std::to_string(lang.unlabeled.size()) + " sentences, 2000 steps [" + join(ratios) + "]"};
}

// ---- 8 ----

Outcome task_learning() {
  const Desk& d = desk();
  const auto& lang = d.corpus.languages[0];
  const std::size_t S = d.config().max_seq_len;
  const std::map<std::string, EncodedDataset> train{{lang.tag, encode_dataset(lang.train, d.vocab, S)}};
  const EncodedDataset test = encode_dataset(lang.test, d.vocab, S);
  std::vector<double> f1;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto model = EncoderModel::create(d.config(), d.corpus.labels, seed);
    TrainConfig c = TrainConfig::desk();
    c.seed = seed;
    const auto r = train_task_adapter(Regime::task_only(), train, {}, model, c, nullptr, BottleneckSpec::dimension(16));
    if (r.steps > 2000) return {false, "ran " + std::to_string(r.steps) + " steps"};
    AdapterStack stack = AdapterStack::task_only(r.adapter);
    stack.freeze_all();
    f1.push_back(evaluate(model.with_classifier(r.head), stack, test, c.threshold, lang.tag, "TASK_ONLY").macro_f1);
  }
  const double m = median(f1);
  return {m >= 0.95, "median TASK_ONLY test macro-F1 " + fmt("%.4f", m) + " >= 0.95 (" + lang.tag + ", 2000 steps) [" +
                         join(f1) + "]"};
}

// ---- 9 ----

std::string cross_lingual_config(std::uint64_t seed) {
  std::string paths;
  for (const char* t : {"noa", "nob", "noc", "soa", "sob", "soc"}) {
    const std::string s = t;
    paths += std::string(paths.empty() ? "" : ",\n") + "    \"" + s + "\": {\"unlabeled\": \"" + s + "/unlabeled.txt\", \"train\": \"" +
             s + "/train.csv\", \"dev\": \"" + s + "/dev.csv\", \"test\": \"" + s + "/test.csv\"}";
  }
  return "{\n  \"seed\": " + std::to_string(seed) +
         ",\n  \"bottleneck\": {\"dimension\": 16},\n  \"train\": {\"preset\": \"desk\"},\n"
         "  \"regimes\": [\"TASK_ONLY\", \"FAMILY_TLR\"],\n"
         "  \"languages\": [\"noa\", \"nob\", \"soa\", \"sob\"],\n  \"targets\": [\"noc\", \"soc\"],\n"
         "  \"family_partition\": \"partition.json\",\n  \"output_dir\": \"runs/seed" +
         std::to_string(seed) + "\",\n  \"data_paths\": {\n" + paths + "\n  }\n}\n";
}

Outcome cross_lingual() {
  testing::TempDir tmp;
  cmd_synth(SynthSpec::default_spec(), tmp.path());
  std::map<std::string, std::map<std::string, std::vector<double>>> scores;  // regime -> language -> per seed
  std::vector<double> task_only, family;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const fs::path file = tmp.path() / ("seed" + std::to_string(seed) + ".json");
    testing::write_file(file, cross_lingual_config(seed));
    const ExperimentConfig c = ExperimentConfig::load(file);
    cmd_train_la(c);
    cmd_train_ta(c);
    const fs::path dir = cmd_eval(c, {Track::kC, false});
    std::map<std::string, std::vector<double>> per_regime;
    for (const auto& r : reports_from_jsonl(testing::read_file(dir / "reports.jsonl"))) {
      scores[r.regime][r.language].push_back(r.macro_f1);
      per_regime[r.regime].push_back(r.macro_f1);
    }
    task_only.push_back((per_regime["TASK_ONLY"][0] + per_regime["TASK_ONLY"][1]) / 2);
    family.push_back((per_regime["FAMILY_TLR"][0] + per_regime["FAMILY_TLR"][1]) / 2);
    std::printf("  criterion 9 seed %llu: target mean macro-F1 TASK_ONLY %.4f, FAMILY_TLR %.4f\n",
                static_cast<unsigned long long>(seed), task_only.back(), family.back());
    std::fflush(stdout);
  }

  // Matrix of 5-seed medians, rendered like the per-run tables.
  std::vector<EvalReport> medians;
  for (const auto& [regime, langs] : scores) {
    for (const auto& [lang, v] : langs) {
      EvalReport r;
      r.language = lang;
      r.regime = regime;
      r.macro_f1 = median(v);
      medians.push_back(r);
    }
  }
  std::printf("  Track-C target macro-F1, median of 5 seeds:\n");
  const std::string table = results_table(medians).to_text();
  std::size_t start = 0;
  while (start < table.size()) {
    const std::size_t end = table.find('\n', start);
    std::printf("    %s\n", table.substr(start, end - start).c_str());
    start = end + 1;
  }
  const double mt = median(task_only), mf = median(family);
  return {mf >= mt - 0.02, "median target macro-F1 FAMILY_TLR " + fmt("%.4f", mf) + " >= TASK_ONLY " +
                               fmt("%.4f", mt) + " - 0.02"};
}

// ---- 10 ----

Outcome serialization() {
  testing::TempDir tmp;
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    ModelConfig mc;
    mc.vocab_size = 5 + rng.uniform_int(100);
    mc.n_heads = 1 + rng.uniform_int(3);
    mc.d_model = mc.n_heads * (1 + rng.uniform_int(16));
    mc.n_layers = 1 + rng.uniform_int(4);
    const auto role = rng.bernoulli(0.5) ? AdapterRole::kLanguage : AdapterRole::kTask;
    const auto a = make_adapter(role, "tag" + std::to_string(i), mc, BottleneckSpec::dimension(1 + rng.uniform_int(mc.d_model)),
                                rng.next_u64());
    randomize(a.named_tensors(), rng, rng.uniform() * 3.0);
    const fs::path dir = tmp.path() / ("a" + std::to_string(i));
    save_adapter(a, dir);
    const auto b = load_adapter(dir);
    if (b.role() != a.role() || b.tag() != a.tag() || b.bottleneck() != a.bottleneck() ||
        b.model_signature() != a.model_signature() || b.seed() != a.seed()) {
      return {false, "adapter " + std::to_string(i) + " metadata changed"};
    }
    const auto ta = a.named_tensors(), tb = b.named_tensors();
    if (ta.size() != tb.size()) return {false, "adapter " + std::to_string(i) + " tensor count changed"};
    for (std::size_t k = 0; k < ta.size(); ++k) {
      if (ta[k].name != tb[k].name || ta[k].tensor.shape() != tb[k].tensor.shape() ||
          !bitwise_equal(ta[k].tensor.data(), tb[k].tensor.data())) {
        return {false, "adapter " + std::to_string(i) + " tensor " + ta[k].name + " changed"};
      }
    }
  }

  ModelConfig mc;
  mc.vocab_size = 300;
  auto model = EncoderModel::create(mc, LabelSpace::six_emotions(), 8);
  randomize(model.all_tensors(), rng, 0.5);
  model.save(tmp.path() / "model");
  const auto loaded = EncoderModel::load(tmp.path() / "model");
  const auto x = model.all_tensors(), y = loaded.all_tensors();
  if (!(loaded.config() == mc) || x.size() != y.size()) return {false, "model config or tensor count changed"};
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].name != y[k].name || !bitwise_equal(x[k].tensor.data(), y[k].tensor.data())) {
      return {false, "model tensor " + x[k].name + " changed"};
    }
  }

  // Signature mismatches: an adapter built for another model shape.
  ModelConfig other = mc;
  other.d_model = 48;
  other.ffn_dim = 48;
  const auto foreign = make_adapter(AdapterRole::kLanguage, "noa", other, BottleneckSpec::dimension(4), 1);
  save_adapter(foreign, tmp.path() / "foreign");
  const auto reloaded = load_adapter(tmp.path() / "foreign");
  int rejected = 0;
  try {
    reloaded.check_compatible(mc);
  } catch (const CheckpointError&) {
    ++rejected;
  }
  try {
    EncodedDataset ds;
    ds.ids = {{kClsId, 5}};
    ds.labels = {{1, 0, 0, 0, 0, 0}};
    train_task_adapter(Regime::source_la_ta("noa"), {{"noa", ds}}, {{"noa", reloaded}}, model, TrainConfig::desk());
  } catch (const CheckpointError&) {
    ++rejected;
  }
  // Same shape, different vocabulary: also a different signature.
  ModelConfig vocab_only = mc;
  vocab_only.vocab_size = 301;
  try {
    make_adapter(AdapterRole::kTask, "t", vocab_only, BottleneckSpec{}, 1).check_compatible(mc);
  } catch (const CheckpointError&) {
    ++rejected;
  }
  if (rejected != 3) return {false, "only " + std::to_string(rejected) + " of 3 mismatched loads were rejected"};
  return {true, "100 adapters and a full model round-trip bitwise; 3 of 3 signature mismatches rejected"};
}

// ---- 11 ----

Outcome protocol_guards() {
  testing::TempDir tmp;
  SynthSpec spec = SynthSpec::default_spec();
  spec.unlabeled_sentences = 60;
  spec.train_size = 40;
  spec.dev_size = 10;
  spec.test_size = 20;
  cmd_synth(spec, tmp.path());
  const fs::path file = tmp.path() / "experiment.json";
  const std::vector<std::string> small{"model.d_model=16", "model.ffn_dim=16", "bottleneck.dimension=4",
                                       "train.max_steps=10", "la_train.max_steps=10"};

  std::string dev_msg;
  try {
    auto o = small;
    o.push_back("data_paths.noa.train=noa/dev.csv");
    const auto c = ExperimentConfig::load(file, o);
    cmd_train_ta(c);
  } catch (const ConfigError& e) {
    dev_msg = e.what();
  }
  if (dev_msg.empty()) return {false, "training with a dev-set path was accepted"};

  // Source LA/TA on noa, Track C over noa and noc.
  std::string text = testing::read_file(file);
  text.replace(text.find("\"targets\": []"), 13, "\"targets\": [\"noa\", \"noc\"]");
  text.replace(text.find("\"regimes\": ["), 12, "\"regimes\": [\"SOURCE_LA_TA\"], \"unused\": [");
  const auto unused = text.find(", \"unused\": [");
  text.erase(unused, text.find(']', unused) - unused + 1);
  testing::write_file(tmp.path() / "track_c.json", text);
  const auto c = ExperimentConfig::load(tmp.path() / "track_c.json", small);
  cmd_train_la(c);
  cmd_train_ta(c);
  std::string src_msg;
  try {
    cmd_eval(c, {Track::kC, false});
  } catch (const ConfigError& e) {
    src_msg = e.what();
  }
  if (src_msg.empty()) return {false, "Track-C scoring of the source language was accepted"};
  const auto reports = reports_from_jsonl(testing::read_file(cmd_eval(c, {Track::kC, true}) / "reports.jsonl"));
  if (reports.size() != 2) return {false, "--allow-source run scored " + std::to_string(reports.size()) + " cells"};
  return {true, "dev path rejected (\"" + dev_msg.substr(0, dev_msg.find(';')) +
                    "\"); Track-C on source 'noa' rejected without --allow-source, scored with it"};
}

struct Criterion {
  int number;
  const char* name;
  double limit_s;  // 0: no runtime limit
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion criteria[] = {
      {1, "gradient correctness", 120, gradient_correctness},
      {2, "freeze soundness", 120, freeze_soundness},
      {3, "identity at init", 0, identity_at_init},
      {4, "parameter efficiency", 0, parameter_efficiency},
      {5, "TLR schedule conformance", 0, tlr_conformance},
      {6, "metric oracle", 0, metric_oracle},
      {7, "MLM learning", 300, mlm_learning},
      {8, "end-to-end task learning", 300, task_learning},
      {9, "cross-lingual mechanism (Track C)", 0, cross_lingual},
      {10, "serialization", 0, serialization},
      {11, "protocol guards", 0, protocol_guards},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const std::clock_t cpu0 = std::clock();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double cpu = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
    std::string timing = fmt("%.1f s", wall);
    if (c.limit_s > 0) {
      timing += fmt(", limit %.0f s", c.limit_s);
      if (std::max(wall, cpu) >= c.limit_s) {
        o.pass = false;
        timing += " EXCEEDED";
      }
    }
    if (!o.pass) ++failed;
    std::printf("%s  criterion %d %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.number, c.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%s: %d failed\n", failed ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failed);
  return failed ? 1 : 0;
}
