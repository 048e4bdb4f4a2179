#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adapterlab/model_config.hpp"

namespace adapterlab {

inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kMaskId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumReservedIds = 4;

/// Lowercased whitespace-separated words. Only ASCII letters are case-folded;
/// other UTF-8 bytes pass through unchanged.
std::vector<std::string> split_words(std::string_view text);

/// Word-level vocabulary with ids 0..3 reserved for pad, cls, mask, unk.
class Vocab {
 public:
  Vocab();

  /// Counts words over every sentence of every corpus; words seen at least
  /// `min_count` times get ids in lexicographic order after the reserved ids.
  static Vocab build(std::span<const std::vector<std::string>> corpora, std::size_t min_count = 2);

  std::size_t size() const { return tokens_.size(); }
  /// kUnkId for unknown words.
  int id(std::string_view word) const;
  const std::string& token(int id) const;
  static bool is_special(int id) { return id >= 0 && id < kNumReservedIds; }

  /// One token per line, in id order.
  void save(const std::filesystem::path& file) const;
  static Vocab load(const std::filesystem::path& file);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// [cls] followed by word ids, truncated to max_seq_len. Empty text gives [cls].
std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_seq_len);

struct LabeledExample {
  std::string id;
  std::string text;
  std::vector<std::uint8_t> labels;  // one 0/1 entry per label, in label-space order

  bool operator==(const LabeledExample&) const = default;
};

/// Header renames applied before validation, e.g. {"Anger": "anger"}.
using ColumnMap = std::map<std::string, std::string>;

/// CSV with header `id,text,<label columns in label-space order>`. Label
/// cells must be 0 or 1. A header-only file is an empty dataset. Throws
/// DataError naming the column or row on malformed input.
std::vector<LabeledExample> load_labeled_dataset(const std::filesystem::path& path, const LabelSpace& labels,
                                                 const ColumnMap& renames = {});
void write_labeled_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples,
                           const LabelSpace& labels);

/// One sentence per line; blank lines are skipped.
std::vector<std::string> load_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const std::string> sentences);

/// Language families, each a list of language tags. Stored as a JSON map.
class FamilyPartition {
 public:
  FamilyPartition() = default;
  /// Throws ConfigError if a family is empty or a tag appears twice.
  explicit FamilyPartition(std::map<std::string, std::vector<std::string>> families);

  const std::map<std::string, std::vector<std::string>>& families() const { return families_; }
  std::optional<std::string> family_of(const std::string& tag) const;
  bool contains(const std::string& tag) const { return family_of(tag).has_value(); }

  void save(const std::filesystem::path& file) const;
  static FamilyPartition load(const std::filesystem::path& file);

 private:
  std::map<std::string, std::vector<std::string>> families_;
};

struct SynthFamilySpec {
  std::string name;
  std::size_t n_languages = 3;
  std::size_t stem_count = 120;
  // Optional explicit tags; generated from the family name when empty.
  std::vector<std::string> languages;
};

/// Recipe for the synthetic multilingual corpus. Languages in a family share
/// a stem pool and emotion marker words; each language rewrites stems with
/// its own letter substitutions. Marker words are never rewritten.
struct SynthSpec {
  std::uint64_t seed = 1;
  std::vector<SynthFamilySpec> families;
  std::vector<std::string> labels = LabelSpace::six_emotions().names();
  std::size_t markers_per_label = 1;
  std::size_t min_len = 5;   // content words per sentence, markers not counted
  std::size_t max_len = 12;
  double marker_probability = 0.5;
  std::size_t substitutions = 3;
  double zipf_exponent = 1.0;
  std::size_t unlabeled_sentences = 600;
  std::size_t train_size = 600;
  std::size_t dev_size = 100;
  std::size_t test_size = 200;

  /// Two families of three languages.
  static SynthSpec default_spec();

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Tags of family `f`, generated if not given explicitly.
  std::vector<std::string> language_tags(std::size_t f) const;

  static SynthSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct SynthLanguage {
  std::string tag;
  std::string family;
  std::vector<std::string> unlabeled;
  std::vector<LabeledExample> train, dev, test;
  // Pre-substitution stem -> number of draws, across all generated text.
  std::map<std::string, std::size_t> stem_draws;
};

struct SynthCorpus {
  std::vector<SynthLanguage> languages;
  FamilyPartition partition;
  LabelSpace labels = LabelSpace::six_emotions();
  // family -> per-label marker words
  std::map<std::string, std::vector<std::vector<std::string>>> markers;
};

SynthCorpus generate_synthetic(const SynthSpec& spec);

}  // namespace adapterlab
