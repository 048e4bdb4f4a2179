#include "adapterlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "adapterlab/error.hpp"
#include "adapterlab/rng.hpp"
#include "json_io.hpp"

namespace adapterlab {

namespace {

const char* const kReservedTokens[kNumReservedIds] = {"[pad]", "[cls]", "[mask]", "[unk]"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Splits CSV text into records. Quoted fields may contain commas, newlines
// and doubled quotes. Each record remembers the line it started on.
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

std::vector<CsvRecord> parse_csv(const std::string& text, const std::string& where) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A lone empty field is a blank line.
    if (!(current.fields.size() == 1 && current.fields[0].empty())) records.push_back(std::move(current));
    current = CsvRecord{};
    current.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (field_started && !field.empty()) {
        throw DataError(where + ": line " + std::to_string(line) + ": stray quote inside unquoted field");
      }
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // tolerated before \n
    } else if (c == '\n') {
      ++line;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError(where + ": unterminated quoted field starting near line " + std::to_string(current.line));
  if (field_started || !field.empty() || !current.fields.empty()) end_record();
  return records;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ascii_lower(c));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Vocab::Vocab() {
  for (int i = 0; i < kNumReservedIds; ++i) {
    tokens_.emplace_back(kReservedTokens[i]);
    ids_.emplace(kReservedTokens[i], i);
  }
}

Vocab Vocab::build(std::span<const std::vector<std::string>> corpora, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& corpus : corpora) {
    for (const auto& sentence : corpus) {
      for (auto& w : split_words(sentence)) ++counts[w];
    }
  }
  Vocab v;
  for (const auto& [word, n] : counts) {
    if (n < min_count || v.ids_.count(word)) continue;
    v.ids_.emplace(word, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(word);
  }
  return v;
}

int Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::filesystem::path& file) const {
  std::string out;
  for (const auto& t : tokens_) out += t + "\n";
  detail::write_text_file(file, out);
}

Vocab Vocab::load(const std::filesystem::path& file) {
  const std::string text = detail::read_text_file(file);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < static_cast<std::size_t>(kNumReservedIds)) {
    throw DataError(file.string() + ": vocabulary must list at least the reserved tokens");
  }
  Vocab v;
  for (int i = 0; i < kNumReservedIds; ++i) {
    if (lines[static_cast<std::size_t>(i)] != kReservedTokens[i]) {
      throw DataError(file.string() + ": line " + std::to_string(i + 1) + ": expected reserved token " +
                      kReservedTokens[i]);
    }
  }
  for (std::size_t i = kNumReservedIds; i < lines.size(); ++i) {
    const auto& t = lines[i];
    if (t.empty() || !v.ids_.emplace(t, static_cast<int>(v.tokens_.size())).second) {
      throw DataError(file.string() + ": line " + std::to_string(i + 1) + ": empty or duplicate token");
    }
    v.tokens_.push_back(t);
  }
  return v;
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_seq_len) {
  if (max_seq_len == 0) throw InvalidArgument("tokenize: max_seq_len must be positive");
  std::vector<int> ids{kClsId};
  for (const auto& w : split_words(text)) {
    if (ids.size() >= max_seq_len) break;
    ids.push_back(vocab.id(w));
  }
  return ids;
}

std::vector<LabeledExample> load_labeled_dataset(const std::filesystem::path& path, const LabelSpace& labels,
                                                 const ColumnMap& renames) {
  const std::string where = path.string();
  const auto records = parse_csv(detail::read_text_file(path), where);
  if (records.empty()) throw DataError(where + ": missing header row");

  std::vector<std::string> header = records[0].fields;
  for (auto& h : header) {
    if (auto it = renames.find(h); it != renames.end()) h = it->second;
  }
  if (header.size() < 2 || header[0] != "id" || header[1] != "text") {
    throw DataError(where + ": header must start with columns 'id,text'");
  }
  const std::size_t L = labels.size();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t col = l + 2;
    if (col >= header.size()) throw DataError(where + ": missing label column '" + labels[l] + "'");
    if (header[col] != labels[l]) {
      const auto& names = labels.names();
      if (std::find(names.begin(), names.end(), header[col]) == names.end()) {
        throw DataError(where + ": unexpected column '" + header[col] + "'");
      }
      throw DataError(where + ": column " + std::to_string(col + 1) + " is '" + header[col] + "' but label '" +
                      labels[l] + "' belongs there");
    }
  }
  if (header.size() > L + 2) throw DataError(where + ": unexpected column '" + header[L + 2] + "'");

  std::vector<LabeledExample> out;
  out.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string row = "row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
    if (rec.fields.size() != header.size()) {
      throw DataError(where + ": " + row + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(rec.fields.size()));
    }
    LabeledExample ex;
    ex.id = rec.fields[0];
    ex.text = rec.fields[1];
    ex.labels.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      const auto& cell = rec.fields[l + 2];
      if (cell == "0") ex.labels[l] = 0;
      else if (cell == "1") ex.labels[l] = 1;
      else throw DataError(where + ": " + row + ": column '" + labels[l] + "' has non-binary value '" + cell + "'");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void write_labeled_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples,
                           const LabelSpace& labels) {
  std::string out = "id,text";
  for (const auto& n : labels.names()) out += "," + n;
  out += "\n";
  for (const auto& ex : examples) {
    if (ex.labels.size() != labels.size()) {
      throw InvalidArgument("example '" + ex.id + "' has " + std::to_string(ex.labels.size()) + " labels, expected " +
                            std::to_string(labels.size()));
    }
    out += ex.id + "," + csv_quote(ex.text);
    for (auto v : ex.labels) out += v ? ",1" : ",0";
    out += "\n";
  }
  detail::write_text_file(path, out);
}

std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    out.push_back(line);
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const std::string> sentences) {
  std::string out;
  for (const auto& s : sentences) out += s + "\n";
  detail::write_text_file(path, out);
}

FamilyPartition::FamilyPartition(std::map<std::string, std::vector<std::string>> families)
    : families_(std::move(families)) {
  std::set<std::string> seen;
  for (const auto& [name, tags] : families_) {
    if (name.empty()) throw ConfigError("family partition: family names must be nonempty");
    if (tags.empty()) throw ConfigError("family partition: family '" + name + "' has no languages");
    for (const auto& t : tags) {
      if (t.empty()) throw ConfigError("family partition: family '" + name + "' lists an empty tag");
      if (!seen.insert(t).second) throw ConfigError("family partition: language '" + t + "' appears twice");
    }
  }
}

std::optional<std::string> FamilyPartition::family_of(const std::string& tag) const {
  for (const auto& [name, tags] : families_) {
    if (std::find(tags.begin(), tags.end(), tag) != tags.end()) return name;
  }
  return std::nullopt;
}

void FamilyPartition::save(const std::filesystem::path& file) const {
  detail::ordered_json j = detail::ordered_json::object();
  for (const auto& [name, tags] : families_) j[name] = tags;
  detail::write_json_file(file, j);
}

FamilyPartition FamilyPartition::load(const std::filesystem::path& file) {
  const auto j = detail::read_json_file(file);
  const std::string where = file.string();
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object mapping family names to tag lists");
  std::map<std::string, std::vector<std::string>> families;
  for (const auto& [name, tags] : j.items()) {
    if (!tags.is_array()) throw ConfigError(where + ": " + name + ": expected a list of language tags");
    auto& out = families[name];
    for (std::size_t i = 0; i < tags.size(); ++i) {
      out.push_back(detail::get_string(tags[i], where + ": " + name + "[" + std::to_string(i) + "]"));
    }
  }
  return FamilyPartition(std::move(families));
}

// ---- synthetic corpus ----

SynthSpec SynthSpec::default_spec() {
  SynthSpec s;
  s.families = {{"north", 3, 120, {}}, {"south", 3, 120, {}}};
  return s;
}

std::vector<std::string> SynthSpec::language_tags(std::size_t f) const {
  const auto& fam = families.at(f);
  if (!fam.languages.empty()) return fam.languages;
  std::string stem;
  for (char c : fam.name.substr(0, 2)) stem.push_back(ascii_lower(c));
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < fam.n_languages; ++i) {
    tags.push_back(stem + static_cast<char>('a' + static_cast<char>(i % 26)) +
                   (i >= 26 ? std::to_string(i / 26) : std::string()));
  }
  return tags;
}

void SynthSpec::validate() const {
  if (families.empty()) throw ConfigError("families: at least one family is required");
  std::set<std::string> names, tags;
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto& fam = families[f];
    const std::string p = "families[" + std::to_string(f) + "]";
    if (fam.name.empty()) throw ConfigError(p + ".name: must be nonempty");
    if (!names.insert(fam.name).second) throw ConfigError(p + ".name: duplicate family '" + fam.name + "'");
    if (fam.n_languages == 0) throw ConfigError(p + ".n_languages: family '" + fam.name + "' has no languages");
    if (!fam.languages.empty() && fam.languages.size() != fam.n_languages) {
      throw ConfigError(p + ".languages: lists " + std::to_string(fam.languages.size()) + " tags but n_languages is " +
                        std::to_string(fam.n_languages));
    }
    if (fam.stem_count < 2 || fam.stem_count > 4000) throw ConfigError(p + ".stem_count: must be in [2, 4000]");
    for (const auto& t : language_tags(f)) {
      if (t.empty()) throw ConfigError(p + ".languages: tags must be nonempty");
      if (!tags.insert(t).second) throw ConfigError(p + ".languages: tag '" + t + "' is used twice");
    }
  }
  (void)LabelSpace(labels);
  if (markers_per_label == 0) throw ConfigError("markers_per_label: must be at least 1");
  if (min_len == 0 || min_len > max_len) throw ConfigError("sentence_length: need 1 <= min <= max");
  if (!(marker_probability >= 0.0 && marker_probability <= 1.0)) {
    throw ConfigError("marker_probability: must be in [0, 1]");
  }
  if (substitutions > 10) throw ConfigError("substitutions: at most 10 letters may be rewritten");
  if (!(zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent: must be non-negative");
  if (unlabeled_sentences == 0) throw ConfigError("unlabeled_sentences: must be at least 1");
}

SynthSpec SynthSpec::from_json_text(const std::string& text) {
  using detail::get_double;
  using detail::get_size;
  using detail::get_string;
  detail::ordered_json j;
  try {
    j = detail::ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("synth spec: invalid JSON: ") + e.what());
  }
  detail::reject_unknown(j,
                         {"seed", "families", "labels", "markers_per_label", "sentence_length", "marker_probability",
                          "substitutions", "zipf_exponent", "unlabeled_sentences", "train_size", "dev_size",
                          "test_size"},
                         "spec");
  SynthSpec s;
  if (j.contains("seed")) s.seed = get_size(j["seed"], "seed");
  if (!j.contains("families") || !j["families"].is_array()) throw ConfigError("families: expected a list");
  for (std::size_t f = 0; f < j["families"].size(); ++f) {
    const auto& fj = j["families"][f];
    const std::string p = "families[" + std::to_string(f) + "]";
    detail::reject_unknown(fj, {"name", "n_languages", "stem_count", "languages"}, p);
    SynthFamilySpec fam;
    if (!fj.contains("name")) throw ConfigError(p + ".name: required");
    fam.name = get_string(fj["name"], p + ".name");
    if (fj.contains("languages")) {
      if (!fj["languages"].is_array()) throw ConfigError(p + ".languages: expected a list");
      for (std::size_t i = 0; i < fj["languages"].size(); ++i) {
        fam.languages.push_back(get_string(fj["languages"][i], p + ".languages[" + std::to_string(i) + "]"));
      }
      fam.n_languages = fam.languages.size();
    }
    if (fj.contains("n_languages")) fam.n_languages = get_size(fj["n_languages"], p + ".n_languages");
    if (fj.contains("stem_count")) fam.stem_count = get_size(fj["stem_count"], p + ".stem_count");
    s.families.push_back(std::move(fam));
  }
  if (j.contains("labels")) s.labels = detail::label_space_from_json(j["labels"], "labels").names();
  if (j.contains("markers_per_label")) s.markers_per_label = get_size(j["markers_per_label"], "markers_per_label");
  if (j.contains("sentence_length")) {
    const auto& r = j["sentence_length"];
    if (!r.is_array() || r.size() != 2) throw ConfigError("sentence_length: expected [min, max]");
    s.min_len = get_size(r[0], "sentence_length[0]");
    s.max_len = get_size(r[1], "sentence_length[1]");
  }
  if (j.contains("marker_probability")) s.marker_probability = get_double(j["marker_probability"], "marker_probability");
  if (j.contains("substitutions")) s.substitutions = get_size(j["substitutions"], "substitutions");
  if (j.contains("zipf_exponent")) s.zipf_exponent = get_double(j["zipf_exponent"], "zipf_exponent");
  if (j.contains("unlabeled_sentences")) {
    s.unlabeled_sentences = get_size(j["unlabeled_sentences"], "unlabeled_sentences");
  }
  if (j.contains("train_size")) s.train_size = get_size(j["train_size"], "train_size");
  if (j.contains("dev_size")) s.dev_size = get_size(j["dev_size"], "dev_size");
  if (j.contains("test_size")) s.test_size = get_size(j["test_size"], "test_size");
  s.validate();
  return s;
}

std::string SynthSpec::to_json_text() const {
  detail::ordered_json j;
  j["seed"] = seed;
  j["families"] = detail::ordered_json::array();
  for (std::size_t f = 0; f < families.size(); ++f) {
    j["families"].push_back({{"name", families[f].name},
                             {"n_languages", families[f].n_languages},
                             {"stem_count", families[f].stem_count},
                             {"languages", language_tags(f)}});
  }
  j["labels"] = labels;
  j["markers_per_label"] = markers_per_label;
  j["sentence_length"] = {min_len, max_len};
  j["marker_probability"] = marker_probability;
  j["substitutions"] = substitutions;
  j["zipf_exponent"] = zipf_exponent;
  j["unlabeled_sentences"] = unlabeled_sentences;
  j["train_size"] = train_size;
  j["dev_size"] = dev_size;
  j["test_size"] = test_size;
  return j.dump(2) + "\n";
}

namespace {

// Stems use only these letters; 'q' is reserved for marker words so that no
// stem can ever collide with a marker, before or after substitution.
constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string random_syllable(Rng& rng) {
  std::string s;
  s.push_back(kConsonants[rng.uniform_int(kConsonants.size())]);
  s.push_back(kVowels[rng.uniform_int(kVowels.size())]);
  return s;
}

std::string fresh_word(Rng& rng, std::set<std::string>& used, bool marker) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::string w;
    if (marker) {
      w = "q";
      w.push_back(kVowels[rng.uniform_int(kVowels.size())]);
      w += random_syllable(rng);
      if (attempt > 1000) w += random_syllable(rng);
    } else {
      const std::size_t syllables = 2 + rng.uniform_int(2);
      for (std::size_t i = 0; i < syllables; ++i) w += random_syllable(rng);
    }
    if (used.insert(w).second) return w;
  }
  throw ConfigError("synth spec: ran out of distinct word forms");
}

// Letter -> replacement, for `n` letters, each mapped within its class.
std::map<char, char> substitution_map(Rng& rng, std::size_t n) {
  std::string pool = std::string(kConsonants) + std::string(kVowels);
  std::span<char> span(pool.data(), pool.size());
  rng.shuffle(span);
  std::map<char, char> out;
  for (std::size_t i = 0; i < n; ++i) {
    const char from = pool[i];
    const std::string_view cls = kVowels.find(from) != std::string_view::npos ? kVowels : kConsonants;
    char to = from;
    while (to == from) to = cls[rng.uniform_int(cls.size())];
    out[from] = to;
  }
  return out;
}

struct FamilyPool {
  std::vector<std::string> stems;
  std::vector<double> cumulative;  // Zipf over stem rank
  std::vector<std::vector<std::string>> markers;
};

struct Sentence {
  std::string text;
  std::vector<std::uint8_t> labels;
};

Sentence make_sentence(const SynthSpec& spec, const FamilyPool& pool, const std::map<char, char>& subst, Rng& rng,
                       std::map<std::string, std::size_t>& stem_draws) {
  const std::size_t n = spec.min_len + rng.uniform_int(spec.max_len - spec.min_len + 1);
  std::vector<std::string> words;
  words.reserve(n + pool.markers.size());
  const double total = pool.cumulative.back();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(pool.cumulative.begin(), pool.cumulative.end(), u);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - pool.cumulative.begin()),
                                                pool.stems.size() - 1);
    const std::string& stem = pool.stems[k];
    ++stem_draws[stem];
    std::string surface = stem;
    for (char& c : surface) {
      if (auto s = subst.find(c); s != subst.end()) c = s->second;
    }
    words.push_back(std::move(surface));
  }
  Sentence out;
  out.labels.assign(pool.markers.size(), 0);
  for (std::size_t l = 0; l < pool.markers.size(); ++l) {
    if (!rng.bernoulli(spec.marker_probability)) continue;
    const auto& choices = pool.markers[l];
    const std::string& m = choices[rng.uniform_int(choices.size())];
    const std::size_t pos = rng.uniform_int(words.size() + 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), m);
    out.labels[l] = 1;
  }
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.text += ' ';
    out.text += words[i];
  }
  return out;
}

}  // namespace

SynthCorpus generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus corpus;
  corpus.labels = LabelSpace(spec.labels);
  const std::size_t L = spec.labels.size();

  std::set<std::string> used;
  std::vector<FamilyPool> pools;
  std::map<std::string, std::vector<std::string>> partition;
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    const auto& fam = spec.families[f];
    Rng rng(Rng::derive(spec.seed, 0x100 + f));
    FamilyPool pool;
    for (std::size_t i = 0; i < fam.stem_count; ++i) pool.stems.push_back(fresh_word(rng, used, false));
    double acc = 0.0;
    for (std::size_t r = 0; r < pool.stems.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
      pool.cumulative.push_back(acc);
    }
    pool.markers.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t m = 0; m < spec.markers_per_label; ++m) pool.markers[l].push_back(fresh_word(rng, used, true));
    }
    corpus.markers[fam.name] = pool.markers;
    partition[fam.name] = spec.language_tags(f);
    pools.push_back(std::move(pool));
  }
  corpus.partition = FamilyPartition(partition);

  std::size_t lang_index = 0;
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    for (const auto& tag : spec.language_tags(f)) {
      Rng rng(Rng::derive(spec.seed, 0x10000 + lang_index++));
      SynthLanguage lang;
      lang.tag = tag;
      lang.family = spec.families[f].name;
      const auto subst = substitution_map(rng, spec.substitutions);
      for (std::size_t i = 0; i < spec.unlabeled_sentences; ++i) {
        lang.unlabeled.push_back(make_sentence(spec, pools[f], subst, rng, lang.stem_draws).text);
      }
      std::set<std::string> texts;
      auto fill = [&](std::vector<LabeledExample>& split, const char* name, std::size_t n) {
        std::size_t rejected = 0;
        while (split.size() < n) {
          auto s = make_sentence(spec, pools[f], subst, rng, lang.stem_draws);
          if (!texts.insert(s.text).second) {
            if (++rejected > 100 * (n + 10)) {
              throw ConfigError("synth spec: cannot draw " + std::to_string(n) + " distinct " + name +
                                " sentences for '" + tag + "'; raise stem_count or sentence_length");
            }
            continue;
          }
          char id[32];
          std::snprintf(id, sizeof id, "%05zu", split.size());
          split.push_back({tag + "-" + name + "-" + id, std::move(s.text), std::move(s.labels)});
        }
      };
      fill(lang.train, "train", spec.train_size);
      fill(lang.dev, "dev", spec.dev_size);
      fill(lang.test, "test", spec.test_size);
      corpus.languages.push_back(std::move(lang));
    }
  }
  return corpus;
}

}  // namespace adapterlab
