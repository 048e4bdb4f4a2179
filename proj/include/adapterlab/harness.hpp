#pragma once

// Experiment runner behind the command-line tool.
//
// Layout of an experiment's output_dir:
//   base/            vocab.txt, model/ (encoder checkpoint)
//   la/<tag>/        adapter.json, weights.bin, mlm_head/, log.csv
//   ta/<regime id>/  adapter.json, weights.bin, head/, log.csv
//   eval/track_a/    reports.jsonl, reports.csv (track_c likewise)
// Each artifact directory also holds run_manifest.json.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adapterlab/adapter.hpp"
#include "adapterlab/data.hpp"
#include "adapterlab/error.hpp"
#include "adapterlab/metrics.hpp"
#include "adapterlab/model_config.hpp"
#include "adapterlab/training.hpp"

namespace adapterlab {

/// Exit status for a failure class: 2 config, 3 data, 4 checkpoint, 1 other.
int exit_code_for(ErrorKind kind);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

struct DataPaths {
  std::filesystem::path unlabeled, train, dev, test;  // empty when absent
};

/// A training regime plus the directory name its task adapter lives under.
/// FAMILY_TLR ids carry the family: "FAMILY_TLR.<family>".
struct RegimeRun {
  std::string id;
  Regime regime;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;     // task adapters
  TrainConfig la_train;  // language adapters; defaults to `train`
  BottleneckSpec bottleneck;
  LabelSpace labels = LabelSpace::six_emotions();
  ColumnMap column_map;
  std::vector<RegimeRun> regimes;
  std::vector<std::string> languages;  // labeled training languages (Track A)
  std::vector<std::string> targets;    // held-out languages (Track C)
  std::filesystem::path family_partition;
  std::map<std::string, DataPaths> data_paths;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  std::size_t vocab_min_count = 2;

  /// Parses and validates. Relative paths resolve against `base_dir`.
  /// `overrides` are "dotted.key=value" assignments to scalar fields, applied
  /// before parsing; values parse as JSON, falling back to a plain string.
  static ExperimentConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir,
                                         const std::vector<std::string>& overrides = {},
                                         std::optional<std::uint64_t> seed = std::nullopt);
  static ExperimentConfig load(const std::filesystem::path& file, const std::vector<std::string>& overrides = {},
                               std::optional<std::uint64_t> seed = std::nullopt);

  /// Throws ConfigError. Rejects any training or unlabeled path that is a dev
  /// set: equal to a declared dev path, or named dev.* / *_dev.* / *-dev.*.
  void validate() const;

  /// Canonical JSON with absolute paths; what the manifests record.
  std::string to_json_text() const;
  std::string hash() const;

  FamilyPartition partition() const;
  /// Every tag with an unlabeled corpus, sorted.
  std::vector<std::string> la_languages() const;
  /// Languages whose labeled data trains the regime's task adapter.
  std::set<std::string> task_sources(const RegimeRun& run) const;
};

enum class Track { kA, kC };

struct EvalOptions {
  Track track = Track::kA;
  bool allow_source = false;
};

/// Writes <tag>/{unlabeled.txt, train.csv, dev.csv, test.csv}, partition.json,
/// a ready-to-run experiment.json (Track A, all four regimes) and
/// run_manifest.json. Two runs of one spec give byte-identical trees.
void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out_dir);
/// Reads the spec from a JSON file; a seed given here replaces the spec's.
void cmd_synth(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed = std::nullopt);

/// Builds (or reloads) the vocabulary and base model, then trains one
/// language adapter per tag in la_languages(). `jobs` > 1 trains adapters in
/// forked worker processes.
void cmd_train_la(const ExperimentConfig& config, std::size_t jobs = 1);
/// Trains one task adapter per regime. Missing language adapters are
/// rejected before anything trains.
void cmd_train_ta(const ExperimentConfig& config, std::size_t jobs = 1);
/// Scores every (language, regime) cell of the track and writes the reports.
/// Returns the report directory.
std::filesystem::path cmd_eval(const ExperimentConfig& config, const EvalOptions& options);
/// One line per trained or scored unit goes to `stream`; null (the default)
/// silences it.
void set_progress_output(std::FILE* stream);

/// Renders reports.jsonl in `report_dir` to table.txt and table.csv there.
ResultsTable cmd_report(const std::filesystem::path& report_dir);

}  // namespace adapterlab
