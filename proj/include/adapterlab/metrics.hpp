#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adapterlab/training.hpp"

namespace adapterlab {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// F1 of a label with no gold and no predicted positives.
enum class ZeroDivision { kZero, kOne };

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
  std::vector<double> per_label;
  std::vector<ConfusionCounts> counts;
};

/// Per-label counts. Throws ShapeError on a shape mismatch and
/// InvalidArgument on entries other than 0/1.
std::vector<ConfusionCounts> confusion_counts(const LabelMatrix& pred, const LabelMatrix& gold);

/// Per label F1 = 2tp / (2tp + fp + fn); macro is their unweighted mean,
/// micro pools the counts first.
F1Scores macro_f1(const LabelMatrix& pred, const LabelMatrix& gold, ZeroDivision zero = ZeroDivision::kZero);

struct EvalReport {
  std::string language;
  std::string regime;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::vector<std::pair<std::string, double>> per_label_f1;  // label-space order
  std::size_t n_examples = 0;

  bool operator==(const EvalReport&) const = default;

  std::string to_json_line() const;
  static EvalReport from_json_line(const std::string& line);
};

/// predict + macro_f1. Throws DataError on an empty dataset.
EvalReport evaluate(const EncoderModel& model, const AdapterStack& stack, const EncodedDataset& dataset,
                    double threshold, const std::string& language, const std::string& regime,
                    ZeroDivision zero = ZeroDivision::kZero);

std::string reports_to_jsonl(std::span<const EvalReport> reports);
std::vector<EvalReport> reports_from_jsonl(const std::string& text);
/// language,regime,macro_f1,micro_f1,n_examples,<per-label columns>
std::string reports_to_csv(std::span<const EvalReport> reports);

/// Languages x regimes grid of macro-F1.
struct ResultsTable {
  std::vector<std::string> languages;  // sorted
  std::vector<std::string> regimes;    // known regimes in canonical order, then others sorted
  std::vector<std::vector<std::optional<double>>> cells;

  /// Aligned text. Cells show 4 decimals, missing ones "n/a", and the best
  /// value in each row carries a trailing '*'.
  std::string to_text() const;
  std::string to_csv() const;
};

/// Throws InvalidArgument on a duplicate (language, regime) pair.
ResultsTable results_table(std::span<const EvalReport> reports);

}  // namespace adapterlab
