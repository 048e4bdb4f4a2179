#include "adapterlab/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <functional>
#include <system_error>

#include "adapterlab/checkpoint.hpp"
#include "adapterlab/model.hpp"
#include "adapterlab/rng.hpp"
#include "json_io.hpp"

namespace adapterlab {

namespace fs = std::filesystem;
using detail::ordered_json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidArgument: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kCheckpoint: return 4;
    case ErrorKind::kShape: return 1;
  }
  return 1;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

std::FILE* g_progress = nullptr;

template <class... Args>
void progress(const char* fmt, Args... args) {
  if (!g_progress) return;
  std::fprintf(g_progress, fmt, args...);
  std::fflush(g_progress);
}

const char* kManifest = "run_manifest.json";

// ---- config parsing ----

ordered_json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"max_steps", c.max_steps},
          {"max_epochs", c.max_epochs},
          {"mask_rate", c.mask_rate},
          {"threshold", c.threshold},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"tlr_cycle", std::string(tlr_cycle_name(c.tlr_cycle))},
          {"tlr_batching", std::string(tlr_batching_name(c.tlr_batching))}};
}

// Overlays the fields of `j` on `base`. "preset" first resets to a named
// profile.
TrainConfig train_config_from_json(const ordered_json& j, TrainConfig base, const std::string& where) {
  detail::reject_unknown(j,
                         {"preset", "batch_size", "lr", "max_steps", "max_epochs", "mask_rate", "threshold", "beta1",
                          "beta2", "adam_eps", "tlr_cycle", "tlr_batching"},
                         where);
  auto p = [&](const char* k) { return where + "." + k; };
  if (j.contains("preset")) {
    const std::string name = detail::get_string(j["preset"], p("preset"));
    if (name == "desk") base = TrainConfig::desk();
    else if (name == "paper") base = TrainConfig::paper();
    else if (name == "paper_low_resource") base = TrainConfig::paper_low_resource();
    else throw ConfigError(p("preset") + ": expected desk, paper or paper_low_resource, got '" + name + "'");
  }
  if (j.contains("batch_size")) base.batch_size = detail::get_size(j["batch_size"], p("batch_size"));
  if (j.contains("lr")) base.lr = detail::get_double(j["lr"], p("lr"));
  if (j.contains("max_steps")) base.max_steps = detail::get_size(j["max_steps"], p("max_steps"));
  if (j.contains("max_epochs")) base.max_epochs = detail::get_size(j["max_epochs"], p("max_epochs"));
  if (j.contains("mask_rate")) base.mask_rate = detail::get_double(j["mask_rate"], p("mask_rate"));
  if (j.contains("threshold")) base.threshold = detail::get_double(j["threshold"], p("threshold"));
  if (j.contains("beta1")) base.beta1 = detail::get_double(j["beta1"], p("beta1"));
  if (j.contains("beta2")) base.beta2 = detail::get_double(j["beta2"], p("beta2"));
  if (j.contains("adam_eps")) base.adam_eps = detail::get_double(j["adam_eps"], p("adam_eps"));
  try {
    if (j.contains("tlr_cycle")) base.tlr_cycle = parse_tlr_cycle(detail::get_string(j["tlr_cycle"], p("tlr_cycle")));
    if (j.contains("tlr_batching")) {
      base.tlr_batching = parse_tlr_batching(detail::get_string(j["tlr_batching"], p("tlr_batching")));
    }
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return base;
}

BottleneckSpec bottleneck_from_json(const ordered_json& j) {
  detail::reject_unknown(j, {"dimension", "reduction_factor"}, "bottleneck");
  if (j.size() != 1) throw ConfigError("bottleneck: give exactly one of dimension or reduction_factor");
  if (j.contains("dimension")) return BottleneckSpec::dimension(detail::get_size(j["dimension"], "bottleneck.dimension"));
  return BottleneckSpec::reduction_factor(detail::get_size(j["reduction_factor"], "bottleneck.reduction_factor"));
}

ordered_json to_json(const BottleneckSpec& b) {
  if (b.kind == BottleneckSpec::Kind::kDimension) return {{"dimension", b.value}};
  return {{"reduction_factor", b.value}};
}

std::vector<std::string> string_list(const ordered_json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(detail::get_string(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

void apply_override(ordered_json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  ordered_json value;
  try {
    value = ordered_json::parse(text);
  } catch (const ordered_json::parse_error&) {
    value = text;
  }
  if (value.is_structured()) throw ConfigError("override '" + key + "': only scalar values can be set");

  ordered_json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + key + "': empty path component");
    if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      if (node->contains(part) && (*node)[part].is_structured()) {
        throw ConfigError("override '" + key + "': not a scalar field");
      }
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = ordered_json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

fs::path canonical_or_self(const fs::path& p) {
  std::error_code ec;
  fs::path c = fs::weakly_canonical(p, ec);
  return ec ? p.lexically_normal() : c;
}

bool named_like_dev(const fs::path& p) {
  std::string stem = p.stem().string();
  std::transform(stem.begin(), stem.end(), stem.begin(), [](unsigned char c) { return std::tolower(c); });
  if (stem == "dev") return true;
  if (stem.size() > 4) {
    const std::string tail = stem.substr(stem.size() - 4);
    return tail == "_dev" || tail == "-dev" || tail == ".dev";
  }
  return false;
}

std::string regime_id(const Regime& r) {
  return r.kind == RegimeKind::kFamilyTlr ? "FAMILY_TLR." + r.family : r.name();
}

// ---- files ----

std::string file_hash(const fs::path& p) { return hex64(fnv1a64(detail::read_text_file(p))); }

// Hash of every regular file under `dir`, keyed by relative path.
ordered_json tree_hashes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != kManifest) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ordered_json out = ordered_json::object();
  for (const auto& f : files) out[fs::relative(f, dir).generic_string()] = file_hash(f);
  return out;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  std::FILE* f = std::fopen(probe.c_str(), "wb");
  if (!f) throw ConfigError("output directory " + dir.string() + " is not writable");
  std::fclose(f);
  fs::remove(probe, ec);
}

// Removes and recreates an artifact directory inside output_dir.
void fresh_dir(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  prepare_dir(dir);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_run_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& config,
                        std::uint64_t unit_seed, const std::vector<fs::path>& inputs, ordered_json extra,
                        double wall_time) {
  ordered_json m;
  m["command"] = command;
  m["config_hash"] = config.hash();
  m["seed"] = config.seed;
  m["unit_seed"] = unit_seed;
  ordered_json in = ordered_json::object();
  for (const auto& p : inputs) in[p.string()] = file_hash(p);
  m["inputs"] = in;
  m["outputs"] = tree_hashes(dir);
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["wall_time_s"] = wall_time;
  m["config"] = ordered_json::parse(config.to_json_text());
  detail::write_json_file(dir / kManifest, m);
}

// ---- worker processes ----

// Runs fn(0..n-1). With jobs > 1 each unit runs in a forked child; the
// first failing unit's error is rethrown with its kind.
void run_units(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  struct Child {
    pid_t pid;
    int fd;
    std::size_t unit;
  };
  struct Failure {
    std::size_t unit;
    int kind;
    std::string message;
  };
  std::vector<Failure> failures;
  std::vector<Child> running;

  auto reap = [&](Child c) {
    std::string msg;
    char buf[512];
    ssize_t got;
    while ((got = read(c.fd, buf, sizeof buf)) > 0) msg.append(buf, static_cast<std::size_t>(got));
    close(c.fd);
    int status = 0;
    waitpid(c.pid, &status, 0);
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return;
    int kind = -1;
    if (!msg.empty() && msg[0] >= '0' && msg[0] <= '9') {
      kind = msg[0] - '0';
      msg.erase(0, 2);
    } else if (msg.empty()) {
      msg = "worker for unit " + std::to_string(c.unit) + " exited abnormally";
    }
    failures.push_back({c.unit, kind, msg});
  };

  std::fflush(nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    if (running.size() >= jobs) {
      reap(running.front());
      running.erase(running.begin());
    }
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
      close(fds[0]);
      std::string report;
      int code = 0;
      try {
        fn(i);
      } catch (const Error& e) {
        report = std::to_string(static_cast<int>(e.kind())) + ":" + e.what();
        code = 1;
      } catch (const std::exception& e) {
        report = std::string("x:") + e.what();
        code = 1;
      }
      if (!report.empty()) {
        ssize_t ignored = write(fds[1], report.data(), report.size());
        (void)ignored;
      }
      close(fds[1]);
      std::fflush(nullptr);
      _exit(code);
    }
    close(fds[1]);
    running.push_back({pid, fds[0], i});
  }
  for (const auto& c : running) reap(c);
  if (failures.empty()) return;
  const auto first = std::min_element(failures.begin(), failures.end(),
                                      [](const Failure& a, const Failure& b) { return a.unit < b.unit; });
  if (first->kind < 0) throw std::runtime_error(first->message);
  throw Error(static_cast<ErrorKind>(first->kind), first->message);
}

// ---- shared loading ----

struct Base {
  Vocab vocab;
  EncoderModel model;
};

fs::path base_dir(const ExperimentConfig& c) { return c.output_dir / "base"; }
fs::path la_dir(const ExperimentConfig& c, const std::string& tag) { return c.output_dir / "la" / tag; }
fs::path ta_dir(const ExperimentConfig& c, const std::string& id) { return c.output_dir / "ta" / id; }

std::vector<fs::path> vocab_sources(const ExperimentConfig& c) {
  std::vector<fs::path> out;
  for (const auto& tag : c.la_languages()) out.push_back(c.data_paths.at(tag).unlabeled);
  for (const auto& tag : c.languages) out.push_back(c.data_paths.at(tag).train);
  return out;
}

// Loads the base model, building it first when `create` is set and it does
// not exist yet.
Base ensure_base(const ExperimentConfig& c, bool create) {
  const fs::path dir = base_dir(c);
  if (fs::exists(dir / "model" / "config.json")) {
    Vocab vocab = Vocab::load(dir / "vocab.txt");
    EncoderModel model = EncoderModel::load(dir / "model");
    ModelConfig expected = c.model;
    expected.vocab_size = vocab.size();
    if (!(model.config() == expected)) {
      throw CheckpointError("base model in " + dir.string() +
                            " was built with a different model config; use a fresh output_dir");
    }
    if (!(model.labels() == c.labels)) {
      throw CheckpointError("base model in " + dir.string() + " was built for a different label space");
    }
    return {std::move(vocab), std::move(model)};
  }
  if (!create) throw CheckpointError("no base model in " + dir.string() + "; run train-la or train-ta first");

  const Stopwatch clock;
  std::vector<std::vector<std::string>> corpora;
  for (const auto& tag : c.la_languages()) corpora.push_back(load_corpus(c.data_paths.at(tag).unlabeled));
  for (const auto& tag : c.languages) {
    std::vector<std::string> texts;
    for (auto& ex : load_labeled_dataset(c.data_paths.at(tag).train, c.labels, c.column_map)) {
      texts.push_back(std::move(ex.text));
    }
    corpora.push_back(std::move(texts));
  }
  Vocab vocab = Vocab::build(corpora, c.vocab_min_count);
  ModelConfig mc = c.model;
  mc.vocab_size = vocab.size();
  const std::uint64_t seed = Rng::derive(c.seed, fnv1a64("base"));
  EncoderModel model = EncoderModel::create(mc, c.labels, seed);
  fresh_dir(dir);
  vocab.save(dir / "vocab.txt");
  model.save(dir / "model");
  write_run_manifest(dir, "base", c, seed, vocab_sources(c), {{"vocab_size", vocab.size()}}, clock.seconds());
  progress("base: vocab %zu, model saved to %s\n", vocab.size(), (dir / "model").c_str());
  return {std::move(vocab), std::move(model)};
}

AdapterModule load_language_adapter(const ExperimentConfig& c, const std::string& tag, const ModelConfig& mc) {
  const fs::path dir = la_dir(c, tag);
  if (!fs::exists(dir / "adapter.json")) {
    throw ConfigError("no language adapter for '" + tag + "' in " + dir.string() + "; run train-la first");
  }
  AdapterModule la = load_adapter(dir);
  if (la.role() != AdapterRole::kLanguage) throw CheckpointError(dir.string() + " does not hold a language adapter");
  la.check_compatible(mc);
  return la;
}

LinearHead load_head(const fs::path& dir, const LinearHead& like) {
  const auto tensors = load_tensor_dir(dir);
  LinearHead head;
  for (const auto& nt : tensors) {
    if (nt.name == "head.cls.weight") head.weight = nt.tensor;
    else if (nt.name == "head.cls.bias") head.bias = nt.tensor;
    else throw CheckpointError(dir.string() + ": unexpected tensor '" + nt.name + "'");
  }
  if (!head.weight.defined() || !head.bias.defined()) throw CheckpointError(dir.string() + ": head tensors missing");
  if (head.weight.shape() != like.weight.shape() || head.bias.shape() != like.bias.shape()) {
    throw CheckpointError(dir.string() + ": head shape does not match the model");
  }
  return head;
}

std::map<std::string, EncodedDataset> load_train_sets(const ExperimentConfig& c, const Base& base) {
  std::map<std::string, EncodedDataset> out;
  for (const auto& tag : c.languages) {
    const auto examples = load_labeled_dataset(c.data_paths.at(tag).train, c.labels, c.column_map);
    out[tag] = encode_dataset(examples, base.vocab, c.model.max_seq_len);
  }
  return out;
}

}  // namespace

// ---- ExperimentConfig ----

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text, const fs::path& base_dir,
                                                  const std::vector<std::string>& overrides,
                                                  std::optional<std::uint64_t> seed) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("experiment config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("experiment config: expected an object");
  for (const auto& o : overrides) apply_override(j, o);
  detail::reject_unknown(j,
                         {"seed", "model", "train", "la_train", "bottleneck", "labels", "column_map", "regime",
                          "regimes", "source_language", "languages", "targets", "family_partition", "data_paths",
                          "output_dir", "vocab_min_count"},
                         "config");

  ExperimentConfig c;
  if (j.contains("seed")) c.seed = detail::get_size(j["seed"], "seed");
  if (seed) c.seed = *seed;
  if (j.contains("model")) c.model = detail::model_config_from_json(j["model"], "model");
  if (c.model.vocab_size != 0) throw ConfigError("model.vocab_size: set from the vocabulary, leave it out");
  if (j.contains("train")) c.train = train_config_from_json(j["train"], TrainConfig::desk(), "train");
  c.la_train = c.train;
  if (j.contains("la_train")) c.la_train = train_config_from_json(j["la_train"], c.train, "la_train");
  if (j.contains("bottleneck")) c.bottleneck = bottleneck_from_json(j["bottleneck"]);
  if (j.contains("labels")) c.labels = detail::label_space_from_json(j["labels"], "labels");
  if (j.contains("column_map")) {
    const auto& m = j["column_map"];
    if (!m.is_object()) throw ConfigError("column_map: expected an object");
    for (const auto& [k, v] : m.items()) c.column_map[k] = detail::get_string(v, "column_map." + k);
  }
  if (j.contains("vocab_min_count")) c.vocab_min_count = detail::get_size(j["vocab_min_count"], "vocab_min_count");
  if (j.contains("languages")) c.languages = string_list(j["languages"], "languages");
  if (j.contains("targets")) c.targets = string_list(j["targets"], "targets");
  if (j.contains("family_partition")) {
    c.family_partition = resolve(base_dir, detail::get_string(j["family_partition"], "family_partition"));
  }
  if (!j.contains("output_dir")) throw ConfigError("output_dir: missing");
  c.output_dir = resolve(base_dir, detail::get_string(j["output_dir"], "output_dir"));
  if (j.contains("data_paths")) {
    const auto& dp = j["data_paths"];
    if (!dp.is_object()) throw ConfigError("data_paths: expected an object");
    for (const auto& [tag, v] : dp.items()) {
      const std::string where = "data_paths." + tag;
      detail::reject_unknown(v, {"unlabeled", "train", "dev", "test"}, where);
      DataPaths p;
      if (v.contains("unlabeled")) p.unlabeled = resolve(base_dir, detail::get_string(v["unlabeled"], where + ".unlabeled"));
      if (v.contains("train")) p.train = resolve(base_dir, detail::get_string(v["train"], where + ".train"));
      if (v.contains("dev")) p.dev = resolve(base_dir, detail::get_string(v["dev"], where + ".dev"));
      if (v.contains("test")) p.test = resolve(base_dir, detail::get_string(v["test"], where + ".test"));
      c.data_paths[tag] = p;
    }
  }

  // Regimes: names expand with defaults, objects give the fields directly.
  if (j.contains("regime") && j.contains("regimes")) throw ConfigError("config: give regime or regimes, not both");
  ordered_json regimes = ordered_json::array();
  if (j.contains("regime")) regimes.push_back(j["regime"]);
  if (j.contains("regimes")) {
    if (!j["regimes"].is_array()) throw ConfigError("regimes: expected a list");
    regimes = j["regimes"];
  }
  if (regimes.empty()) throw ConfigError("regimes: missing or empty");
  std::string source_language;
  if (j.contains("source_language")) source_language = detail::get_string(j["source_language"], "source_language");
  std::optional<FamilyPartition> partition;
  auto need_partition = [&](const std::string& where) -> const FamilyPartition& {
    if (!partition) {
      if (c.family_partition.empty()) throw ConfigError(where + ": FAMILY_TLR needs family_partition");
      try {
        partition = FamilyPartition::load(c.family_partition);
      } catch (const Error& e) {
        throw ConfigError(std::string("family_partition: ") + e.what());
      }
    }
    return *partition;
  };
  auto with_corpus = [&](const std::vector<std::string>& tags) {
    std::vector<std::string> out;
    for (const auto& t : tags) {
      auto it = c.data_paths.find(t);
      if (it != c.data_paths.end() && !it->second.unlabeled.empty()) out.push_back(t);
    }
    return out;
  };

  for (std::size_t i = 0; i < regimes.size(); ++i) {
    const std::string where = "regimes[" + std::to_string(i) + "]";
    const ordered_json& r = regimes[i];
    ordered_json obj;
    if (r.is_string()) obj = {{"kind", r.get<std::string>()}};
    else if (r.is_object()) obj = r;
    else throw ConfigError(where + ": expected a regime name or object");
    detail::reject_unknown(obj, {"kind", "id", "source_tag", "tags", "family"}, where);
    if (!obj.contains("kind")) throw ConfigError(where + ".kind: missing");
    RegimeKind kind;
    try {
      kind = parse_regime_kind(detail::get_string(obj["kind"], where + ".kind"));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ".kind: " + e.what());
    }
    std::vector<std::string> tags;
    if (obj.contains("tags")) tags = string_list(obj["tags"], where + ".tags");
    std::vector<Regime> expanded;
    switch (kind) {
      case RegimeKind::kTaskOnly: expanded.push_back(Regime::task_only()); break;
      case RegimeKind::kSourceLaTa: {
        std::string src = obj.contains("source_tag") ? detail::get_string(obj["source_tag"], where + ".source_tag")
                                                      : source_language;
        if (src.empty()) throw ConfigError(where + ": SOURCE_LA_TA needs source_tag or a top-level source_language");
        expanded.push_back(Regime::source_la_ta(src));
        break;
      }
      case RegimeKind::kTlr: {
        if (!obj.contains("tags")) {
          std::vector<std::string> all;
          for (const auto& [t, p] : c.data_paths) all.push_back(t);
          tags = with_corpus(all);
        }
        expanded.push_back(Regime::tlr(tags));
        break;
      }
      case RegimeKind::kFamilyTlr: {
        const FamilyPartition& fp = need_partition(where);
        if (obj.contains("family")) {
          const std::string fam = detail::get_string(obj["family"], where + ".family");
          auto it = fp.families().find(fam);
          if (it == fp.families().end()) throw ConfigError(where + ".family: '" + fam + "' is not in the partition");
          if (!obj.contains("tags")) tags = with_corpus(it->second);
          expanded.push_back(Regime::family_tlr(fam, tags));
        } else {
          if (obj.contains("tags")) throw ConfigError(where + ".tags: needs a family");
          for (const auto& [fam, members] : fp.families()) {
            const auto t = with_corpus(members);
            if (!t.empty()) expanded.push_back(Regime::family_tlr(fam, t));
          }
          if (expanded.empty()) throw ConfigError(where + ": no family has a language with an unlabeled corpus");
        }
        break;
      }
    }
    for (auto& reg : expanded) {
      std::string id = obj.contains("id") && expanded.size() == 1 ? detail::get_string(obj["id"], where + ".id")
                                                                  : regime_id(reg);
      c.regimes.push_back({std::move(id), std::move(reg)});
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file, const std::vector<std::string>& overrides,
                                        std::optional<std::uint64_t> seed) {
  std::string text;
  try {
    text = detail::read_text_file(file);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + file.string());
  }
  const fs::path base = fs::absolute(file).parent_path();
  return from_json_text(text, base, overrides, seed);
}

void ExperimentConfig::validate() const {
  ModelConfig probe = model;
  probe.vocab_size = kNumReservedIds + 1;
  probe.validate();
  train.validate();
  try {
    la_train.validate();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (msg.rfind("train.", 0) == 0) msg = "la_" + msg;
    throw ConfigError(msg);
  }
  bottleneck.resolve(model.d_model);
  if (output_dir.empty()) throw ConfigError("output_dir: empty");
  if (vocab_min_count == 0) throw ConfigError("vocab_min_count: must be at least 1");

  if (languages.empty()) throw ConfigError("languages: at least one labeled training language is needed");
  std::set<std::string> seen;
  for (const auto& tag : languages) {
    if (!seen.insert(tag).second) throw ConfigError("languages: '" + tag + "' listed twice");
    auto it = data_paths.find(tag);
    if (it == data_paths.end()) throw ConfigError("languages: '" + tag + "' has no data_paths entry");
    if (it->second.train.empty()) throw ConfigError("data_paths." + tag + ".train: missing");
    if (it->second.test.empty()) throw ConfigError("data_paths." + tag + ".test: missing");
  }
  // A target may also be a training language; cmd_eval guards that case.
  std::set<std::string> seen_targets;
  for (const auto& tag : targets) {
    if (!seen_targets.insert(tag).second) throw ConfigError("targets: '" + tag + "' listed twice");
    auto it = data_paths.find(tag);
    if (it == data_paths.end() || it->second.test.empty()) throw ConfigError("data_paths." + tag + ".test: missing");
  }

  // Dev sets never feed training.
  std::vector<fs::path> devs;
  for (const auto& [tag, p] : data_paths) {
    if (!p.dev.empty()) devs.push_back(canonical_or_self(p.dev));
  }
  for (const auto& [tag, p] : data_paths) {
    for (const auto& [field, path] : {std::pair{"train", &p.train}, std::pair{"unlabeled", &p.unlabeled}}) {
      if (path->empty()) continue;
      const std::string where = "data_paths." + tag + "." + field;
      const fs::path cp = canonical_or_self(*path);
      if (std::find(devs.begin(), devs.end(), cp) != devs.end() || named_like_dev(*path)) {
        throw ConfigError(where + ": " + path->string() + " is a development set; dev sets are not used for training");
      }
    }
  }

  std::optional<FamilyPartition> fp;
  if (!family_partition.empty()) {
    try {
      fp = FamilyPartition::load(family_partition);
    } catch (const Error& e) {
      throw ConfigError(std::string("family_partition: ") + e.what());
    }
  }
  std::set<std::string> names;
  std::set<std::string> ids;
  for (const auto& run : regimes) {
    try {
      run.regime.validate(fp ? &*fp : nullptr);
    } catch (const ConfigError& e) {
      throw ConfigError("regimes: " + std::string(e.what()));
    }
    if (!ids.insert(run.id).second) throw ConfigError("regimes: duplicate id '" + run.id + "'");
    if (run.regime.kind != RegimeKind::kFamilyTlr && !names.insert(run.regime.name()).second) {
      throw ConfigError("regimes: " + run.regime.name() + " listed twice");
    }
    // Every language adapter must come from a corpus or an existing checkpoint.
    for (const auto& tag : run.regime.required_adapters()) {
      auto it = data_paths.find(tag);
      const bool has_corpus = it != data_paths.end() && !it->second.unlabeled.empty();
      if (!has_corpus && !fs::exists(output_dir / "la" / tag / "adapter.json")) {
        throw ConfigError("regimes: " + run.id + " needs a language adapter for '" + tag +
                          "', which has no unlabeled corpus in data_paths and no checkpoint");
      }
    }
  }
}

std::string ExperimentConfig::to_json_text() const {
  ordered_json j;
  j["seed"] = seed;
  j["model"] = detail::to_json(model);
  j["train"] = to_json(train);
  j["la_train"] = to_json(la_train);
  j["bottleneck"] = to_json(bottleneck);
  j["labels"] = detail::to_json(labels);
  j["column_map"] = column_map;
  j["vocab_min_count"] = vocab_min_count;
  ordered_json regs = ordered_json::array();
  for (const auto& run : regimes) {
    ordered_json r{{"id", run.id}, {"kind", run.regime.name()}};
    if (run.regime.kind == RegimeKind::kSourceLaTa) r["source_tag"] = run.regime.source_tag;
    if (run.regime.kind == RegimeKind::kFamilyTlr) r["family"] = run.regime.family;
    if (!run.regime.tags.empty()) r["tags"] = run.regime.tags;
    regs.push_back(r);
  }
  j["regimes"] = regs;
  j["languages"] = languages;
  j["targets"] = targets;
  j["family_partition"] = family_partition.string();
  ordered_json dp = ordered_json::object();
  for (const auto& [tag, p] : data_paths) {
    ordered_json e = ordered_json::object();
    if (!p.unlabeled.empty()) e["unlabeled"] = p.unlabeled.string();
    if (!p.train.empty()) e["train"] = p.train.string();
    if (!p.dev.empty()) e["dev"] = p.dev.string();
    if (!p.test.empty()) e["test"] = p.test.string();
    dp[tag] = e;
  }
  j["data_paths"] = dp;
  j["output_dir"] = output_dir.string();
  return j.dump(2) + "\n";
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(to_json_text())); }

FamilyPartition ExperimentConfig::partition() const {
  if (family_partition.empty()) return {};
  return FamilyPartition::load(family_partition);
}

std::vector<std::string> ExperimentConfig::la_languages() const {
  std::vector<std::string> out;
  for (const auto& [tag, p] : data_paths) {
    if (!p.unlabeled.empty()) out.push_back(tag);
  }
  return out;
}

std::set<std::string> ExperimentConfig::task_sources(const RegimeRun& run) const {
  const std::set<std::string> labeled(languages.begin(), languages.end());
  const Regime& r = run.regime;
  switch (r.kind) {
    case RegimeKind::kSourceLaTa: return {r.source_tag};
    case RegimeKind::kTaskOnly: return labeled;
    case RegimeKind::kTlr:
    case RegimeKind::kFamilyTlr: {
      std::set<std::string> out;
      for (const auto& t : r.tags) {
        if (labeled.count(t)) out.insert(t);
      }
      return out.empty() ? labeled : out;
    }
  }
  return labeled;
}

// ---- commands ----

void cmd_synth(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  prepare_dir(out_dir);
  const SynthCorpus corpus = generate_synthetic(spec);
  ordered_json data_paths = ordered_json::object();
  std::vector<std::string> tags;
  for (const auto& lang : corpus.languages) {
    const fs::path dir = out_dir / lang.tag;
    prepare_dir(dir);
    write_corpus(dir / "unlabeled.txt", lang.unlabeled);
    write_labeled_dataset(dir / "train.csv", lang.train, corpus.labels);
    write_labeled_dataset(dir / "dev.csv", lang.dev, corpus.labels);
    write_labeled_dataset(dir / "test.csv", lang.test, corpus.labels);
    data_paths[lang.tag] = {{"unlabeled", lang.tag + "/unlabeled.txt"},
                            {"train", lang.tag + "/train.csv"},
                            {"dev", lang.tag + "/dev.csv"},
                            {"test", lang.tag + "/test.csv"}};
    tags.push_back(lang.tag);
  }
  corpus.partition.save(out_dir / "partition.json");

  ordered_json exp;
  exp["seed"] = spec.seed;
  exp["model"] = ordered_json::object();
  exp["train"] = {{"preset", "desk"}};
  exp["bottleneck"] = {{"dimension", 16}};
  exp["labels"] = detail::to_json(corpus.labels);
  exp["regimes"] = {"SOURCE_LA_TA", "TASK_ONLY", "TLR", "FAMILY_TLR"};
  exp["source_language"] = tags.front();
  exp["languages"] = tags;
  exp["targets"] = ordered_json::array();
  exp["family_partition"] = "partition.json";
  exp["data_paths"] = data_paths;
  exp["output_dir"] = "runs";
  detail::write_json_file(out_dir / "experiment.json", exp);

  ordered_json m;
  m["command"] = "synth";
  m["seed"] = spec.seed;
  const std::string spec_text = spec.to_json_text();
  m["spec_hash"] = hex64(fnv1a64(spec_text));
  m["spec"] = ordered_json::parse(spec_text);
  m["outputs"] = tree_hashes(out_dir);
  detail::write_json_file(out_dir / kManifest, m);
  progress("synth: %zu languages written to %s\n", corpus.languages.size(), out_dir.c_str());
}

void cmd_synth(const fs::path& spec_file, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  SynthSpec spec = SynthSpec::default_spec();
  if (!spec_file.empty()) {
    std::string text;
    try {
      text = detail::read_text_file(spec_file);
    } catch (const DataError&) {
      throw ConfigError("cannot read spec file " + spec_file.string());
    }
    spec = SynthSpec::from_json_text(text);
  }
  if (seed) spec.seed = *seed;
  cmd_synth(spec, out_dir);
}

void cmd_train_la(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  prepare_dir(config.output_dir);
  const Base base = ensure_base(config, true);
  const std::vector<std::string> tags = config.la_languages();
  if (tags.empty()) throw ConfigError("data_paths: no language has an unlabeled corpus");
  for (const auto& tag : tags) {
    if (!fs::exists(config.data_paths.at(tag).unlabeled)) {
      throw DataError("data_paths." + tag + ".unlabeled: " + config.data_paths.at(tag).unlabeled.string() +
                      " does not exist");
    }
  }
  run_units(tags.size(), jobs, [&](std::size_t i) {
    const std::string& tag = tags[i];
    const Stopwatch clock;
    const fs::path corpus_path = config.data_paths.at(tag).unlabeled;
    const auto sentences = load_corpus(corpus_path);
    const auto corpus = encode_corpus(sentences, base.vocab, base.model.config().max_seq_len);
    TrainConfig tc = config.la_train;
    tc.seed = Rng::derive(config.seed, fnv1a64("la:" + tag));
    const LanguageAdapterResult r = train_language_adapter(corpus, tag, base.model, tc, config.bottleneck);

    const fs::path dir = la_dir(config, tag);
    fresh_dir(dir);
    save_adapter(r.adapter, dir);
    save_tensor_dir(dir / "mlm_head", base.model.with_mlm_head(r.mlm_head).mlm_head_tensors());
    detail::write_text_file(dir / "log.csv", r.log.to_text());
    write_run_manifest(dir, "train-la", config, tc.seed,
                       {corpus_path, base_dir(config) / "vocab.txt", base_dir(config) / "model" / "weights.bin"},
                       {{"tag", tag},
                        {"steps", r.steps},
                        {"initial_loss", r.initial_loss},
                        {"final_loss", r.final_loss}},
                       clock.seconds());
    progress("train-la %s: %zu steps, MLM loss %.4f -> %.4f (%.1f s)\n", tag.c_str(), r.steps, r.initial_loss,
             r.final_loss, clock.seconds());
  });
}

void cmd_train_ta(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  prepare_dir(config.output_dir);
  const Base base = ensure_base(config, true);
  const ModelConfig& mc = base.model.config();

  // Pre-run checks: every language adapter and dataset loads.
  std::map<std::string, AdapterModule> bank;
  for (const auto& run : config.regimes) {
    for (const auto& tag : run.regime.required_adapters()) {
      if (!bank.count(tag)) bank.emplace(tag, load_language_adapter(config, tag, mc));
    }
  }
  const auto datasets = load_train_sets(config, base);
  const FamilyPartition partition = config.partition();

  run_units(config.regimes.size(), jobs, [&](std::size_t i) {
    const RegimeRun& run = config.regimes[i];
    const Stopwatch clock;
    TrainConfig tc = config.train;
    tc.seed = Rng::derive(config.seed, fnv1a64("ta:" + run.id));
    std::map<std::string, AdapterModule> las;
    for (const auto& tag : run.regime.required_adapters()) las.emplace(tag, bank.at(tag));
    const TaskAdapterResult r =
        train_task_adapter(run.regime, datasets, las, base.model, tc, &partition, config.bottleneck);

    const fs::path dir = ta_dir(config, run.id);
    fresh_dir(dir);
    save_adapter(r.adapter, dir);
    save_tensor_dir(dir / "head", base.model.with_classifier(r.head).classifier_tensors());
    detail::write_text_file(dir / "log.csv", r.log.to_text());
    std::vector<fs::path> inputs{base_dir(config) / "vocab.txt", base_dir(config) / "model" / "weights.bin"};
    for (const auto& tag : config.languages) inputs.push_back(config.data_paths.at(tag).train);
    for (const auto& tag : run.regime.required_adapters()) inputs.push_back(la_dir(config, tag) / "weights.bin");
    const auto sources = config.task_sources(run);
    write_run_manifest(dir, "train-ta", config, tc.seed, inputs,
                       {{"regime_id", run.id},
                        {"regime", run.regime.name()},
                        {"source_languages", std::vector<std::string>(sources.begin(), sources.end())},
                        {"steps", r.steps},
                        {"final_loss", r.log.entries.empty() ? 0.0 : r.log.entries.back().loss}},
                       clock.seconds());
    progress("train-ta %s: %zu steps, final loss %.4f (%.1f s)\n", run.id.c_str(), r.steps,
             r.log.entries.empty() ? 0.0 : r.log.entries.back().loss, clock.seconds());
  });
}

fs::path cmd_eval(const ExperimentConfig& config, const EvalOptions& options) {
  config.validate();
  const std::vector<std::string>& langs = options.track == Track::kA ? config.languages : config.targets;
  const char* track = options.track == Track::kA ? "track_a" : "track_c";
  if (langs.empty()) {
    throw ConfigError(options.track == Track::kA ? "languages: nothing to evaluate"
                                                 : "targets: Track-C evaluation needs held-out target languages");
  }
  const FamilyPartition partition = config.partition();

  struct Cell {
    const RegimeRun* run;
    std::string language;
  };
  std::vector<Cell> cells;
  for (const auto& run : config.regimes) {
    const auto sources = config.task_sources(run);
    for (const auto& lang : langs) {
      if (run.regime.kind == RegimeKind::kFamilyTlr && partition.family_of(lang) != run.regime.family) continue;
      if (options.track == Track::kC && sources.count(lang) && !options.allow_source) {
        throw ConfigError("Track-C: '" + lang + "' was a training source of the " + run.id +
                          " task adapter; its score is excluded unless --allow-source is given");
      }
      cells.push_back({&run, lang});
    }
  }

  // Load everything before scoring anything.
  const Base base = ensure_base(config, false);
  const ModelConfig& mc = base.model.config();
  std::map<std::string, std::pair<AdapterModule, LinearHead>> tas;
  std::map<std::string, AdapterModule> las;
  std::map<std::string, EncodedDataset> tests;
  for (const auto& cell : cells) {
    const std::string& id = cell.run->id;
    if (!tas.count(id)) {
      const fs::path dir = ta_dir(config, id);
      if (!fs::exists(dir / "adapter.json")) {
        throw CheckpointError("no task adapter for " + id + " in " + dir.string() + "; run train-ta first");
      }
      AdapterModule ta = load_adapter(dir);
      if (ta.role() != AdapterRole::kTask) throw CheckpointError(dir.string() + " does not hold a task adapter");
      ta.check_compatible(mc);
      tas.emplace(id, std::pair{ta, load_head(dir / "head", base.model.classifier())});
    }
    if (cell.run->regime.kind != RegimeKind::kTaskOnly && !las.count(cell.language)) {
      las.emplace(cell.language, load_language_adapter(config, cell.language, mc));
    }
    if (!tests.count(cell.language)) {
      const auto examples = load_labeled_dataset(config.data_paths.at(cell.language).test, config.labels,
                                                 config.column_map);
      tests[cell.language] = encode_dataset(examples, base.vocab, mc.max_seq_len);
    }
  }

  const Stopwatch clock;
  std::vector<EvalReport> reports;
  for (const auto& cell : cells) {
    const auto& [ta, head] = tas.at(cell.run->id);
    AdapterStack stack = cell.run->regime.kind == RegimeKind::kTaskOnly
                             ? AdapterStack::task_only(ta)
                             : AdapterStack::language_task(las.at(cell.language), ta);
    stack.freeze_all();
    reports.push_back(evaluate(base.model.with_classifier(head), stack, tests.at(cell.language),
                               config.train.threshold, cell.language, cell.run->regime.name()));
    progress("eval %s %s/%s: macro-F1 %.4f\n", track, cell.language.c_str(), cell.run->id.c_str(),
             reports.back().macro_f1);
  }

  const fs::path dir = config.output_dir / "eval" / track;
  fresh_dir(dir);
  detail::write_text_file(dir / "reports.jsonl", reports_to_jsonl(reports));
  detail::write_text_file(dir / "reports.csv", reports_to_csv(reports));
  std::vector<fs::path> inputs{base_dir(config) / "model" / "weights.bin"};
  for (const auto& [id, ta] : tas) inputs.push_back(ta_dir(config, id) / "weights.bin");
  for (const auto& [tag, la] : las) inputs.push_back(la_dir(config, tag) / "weights.bin");
  for (const auto& [tag, ds] : tests) inputs.push_back(config.data_paths.at(tag).test);
  write_run_manifest(dir, "eval", config, config.seed, inputs,
                     {{"track", options.track == Track::kA ? "A" : "C"}, {"allow_source", options.allow_source}},
                     clock.seconds());
  return dir;
}

ResultsTable cmd_report(const fs::path& report_dir) {
  const fs::path in = report_dir / "reports.jsonl";
  if (!fs::exists(in)) throw DataError("no reports.jsonl in " + report_dir.string());
  const Stopwatch clock;
  const auto reports = reports_from_jsonl(detail::read_text_file(in));
  const ResultsTable table = results_table(reports);
  detail::write_text_file(report_dir / "table.txt", table.to_text());
  detail::write_text_file(report_dir / "table.csv", table.to_csv());
  ordered_json m;
  m["command"] = "report";
  m["inputs"] = {{in.string(), file_hash(in)}};
  m["outputs"] = {{"table.txt", file_hash(report_dir / "table.txt")},
                  {"table.csv", file_hash(report_dir / "table.csv")}};
  m["wall_time_s"] = clock.seconds();
  detail::write_json_file(report_dir / "report_manifest.json", m);
  return table;
}

void set_progress_output(std::FILE* stream) { g_progress = stream; }

}  // namespace adapterlab
