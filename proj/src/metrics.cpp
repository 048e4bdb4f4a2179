#include "adapterlab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "adapterlab/error.hpp"
#include "blob.hpp"

namespace adapterlab {

std::vector<ConfusionCounts> confusion_counts(const LabelMatrix& pred, const LabelMatrix& gold) {
  if (pred.size() != gold.size()) {
    throw ShapeError("macro_f1: pred has " + std::to_string(pred.size()) + " rows, gold has " +
                     std::to_string(gold.size()));
  }
  const std::size_t L = gold.empty() ? 0 : gold[0].size();
  std::vector<ConfusionCounts> counts(L);
  for (std::size_t r = 0; r < gold.size(); ++r) {
    if (gold[r].size() != L || pred[r].size() != L) {
      throw ShapeError("macro_f1: row " + std::to_string(r) + " has " + std::to_string(pred[r].size()) +
                       " predicted and " + std::to_string(gold[r].size()) + " gold labels, expected " +
                       std::to_string(L));
    }
    for (std::size_t l = 0; l < L; ++l) {
      const auto p = pred[r][l], g = gold[r][l];
      if (p > 1 || g > 1) throw InvalidArgument("macro_f1: entries must be 0 or 1");
      auto& c = counts[l];
      if (p && g) ++c.tp;
      else if (p) ++c.fp;
      else if (g) ++c.fn;
      else ++c.tn;
    }
  }
  return counts;
}

namespace {

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn, ZeroDivision zero) {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return zero == ZeroDivision::kOne ? 1.0 : 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

}  // namespace

F1Scores macro_f1(const LabelMatrix& pred, const LabelMatrix& gold, ZeroDivision zero) {
  F1Scores s;
  s.counts = confusion_counts(pred, gold);
  std::size_t tp = 0, fp = 0, fn = 0;
  double sum = 0.0;
  for (const auto& c : s.counts) {
    s.per_label.push_back(f1_of(c.tp, c.fp, c.fn, zero));
    sum += s.per_label.back();
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  s.macro = s.counts.empty() ? 0.0 : sum / static_cast<double>(s.counts.size());
  s.micro = f1_of(tp, fp, fn, zero);
  return s;
}

std::string EvalReport::to_json_line() const {
  detail::ordered_json per = detail::ordered_json::object();
  for (const auto& [label, f1] : per_label_f1) per[label] = f1;
  detail::ordered_json j{{"language", language}, {"regime", regime},        {"macro_f1", macro_f1},
                         {"micro_f1", micro_f1}, {"per_label_f1", per},      {"n_examples", n_examples}};
  return j.dump();
}

EvalReport EvalReport::from_json_line(const std::string& line) {
  try {
    const auto j = detail::ordered_json::parse(line);
    EvalReport r;
    r.language = j.at("language").get<std::string>();
    r.regime = j.at("regime").get<std::string>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.micro_f1 = j.value("micro_f1", 0.0);
    for (const auto& [label, f1] : j.at("per_label_f1").items()) r.per_label_f1.emplace_back(label, f1.get<double>());
    r.n_examples = j.at("n_examples").get<std::size_t>();
    return r;
  } catch (const detail::ordered_json::exception& e) {
    throw DataError(std::string("eval report: ") + e.what());
  }
}

EvalReport evaluate(const EncoderModel& model, const AdapterStack& stack, const EncodedDataset& dataset,
                    double threshold, const std::string& language, const std::string& regime, ZeroDivision zero) {
  if (dataset.size() == 0) throw DataError("evaluate: dataset for '" + language + "' is empty");
  const LabelMatrix pred = predict(model, stack, dataset.ids, threshold);
  const F1Scores s = macro_f1(pred, dataset.labels, zero);
  EvalReport r;
  r.language = language;
  r.regime = regime;
  r.macro_f1 = s.macro;
  r.micro_f1 = s.micro;
  for (std::size_t l = 0; l < s.per_label.size(); ++l) r.per_label_f1.emplace_back(model.labels()[l], s.per_label[l]);
  r.n_examples = dataset.size();
  return r;
}

std::string reports_to_jsonl(std::span<const EvalReport> reports) {
  std::string out;
  for (const auto& r : reports) out += r.to_json_line() + "\n";
  return out;
}

std::vector<EvalReport> reports_from_jsonl(const std::string& text) {
  std::vector<EvalReport> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(EvalReport::from_json_line(line));
  }
  return out;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string reports_to_csv(std::span<const EvalReport> reports) {
  std::vector<std::string> labels;
  for (const auto& r : reports) {
    for (const auto& [label, f1] : r.per_label_f1) {
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    }
  }
  std::string out = "language,regime,macro_f1,micro_f1,n_examples";
  for (const auto& l : labels) out += ",f1_" + l;
  out += "\n";
  for (const auto& r : reports) {
    out += r.language + "," + r.regime + "," + fixed4(r.macro_f1) + "," + fixed4(r.micro_f1) + "," +
           std::to_string(r.n_examples);
    for (const auto& l : labels) {
      auto it = std::find_if(r.per_label_f1.begin(), r.per_label_f1.end(), [&](const auto& p) { return p.first == l; });
      out += "," + (it == r.per_label_f1.end() ? std::string("n/a") : fixed4(it->second));
    }
    out += "\n";
  }
  return out;
}

ResultsTable results_table(std::span<const EvalReport> reports) {
  static const std::vector<std::string> kCanonical = {"SOURCE_LA_TA", "TASK_ONLY", "TLR", "FAMILY_TLR"};
  std::map<std::pair<std::string, std::string>, double> cells;
  std::set<std::string> languages, others;
  std::set<std::string> present;
  for (const auto& r : reports) {
    if (!cells.emplace(std::make_pair(r.language, r.regime), r.macro_f1).second) {
      throw InvalidArgument("results_table: duplicate report for language '" + r.language + "' and regime '" +
                            r.regime + "'");
    }
    languages.insert(r.language);
    present.insert(r.regime);
    if (std::find(kCanonical.begin(), kCanonical.end(), r.regime) == kCanonical.end()) others.insert(r.regime);
  }
  ResultsTable t;
  t.languages.assign(languages.begin(), languages.end());
  for (const auto& k : kCanonical) {
    if (present.count(k)) t.regimes.push_back(k);
  }
  t.regimes.insert(t.regimes.end(), others.begin(), others.end());
  for (const auto& lang : t.languages) {
    std::vector<std::optional<double>> row;
    for (const auto& reg : t.regimes) {
      auto it = cells.find({lang, reg});
      row.push_back(it == cells.end() ? std::nullopt : std::optional<double>(it->second));
    }
    t.cells.push_back(std::move(row));
  }
  return t;
}

namespace {

// Rendered cells, with '*' on every cell that ties for the row maximum at
// the printed precision.
std::vector<std::vector<std::string>> render_cells(const ResultsTable& t) {
  std::vector<std::vector<std::string>> out;
  for (const auto& row : t.cells) {
    std::string best;
    for (const auto& c : row) {
      if (c && (best.empty() || fixed4(*c) > best)) best = fixed4(*c);
    }
    std::vector<std::string> r;
    for (const auto& c : row) {
      if (!c) r.push_back("n/a");
      else r.push_back(fixed4(*c) == best ? fixed4(*c) + "*" : fixed4(*c));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::string ResultsTable::to_text() const {
  const auto rendered = render_cells(*this);
  std::size_t first = std::string("language").size();
  for (const auto& l : languages) first = std::max(first, l.size());
  std::vector<std::size_t> widths;
  for (std::size_t c = 0; c < regimes.size(); ++c) {
    std::size_t w = regimes[c].size();
    for (const auto& r : rendered) w = std::max(w, r[c].size());
    widths.push_back(w);
  }
  auto pad = [](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w - s.size(), ' ');
    return right ? fill + s : s + fill;
  };
  std::string out = pad("language", first, false);
  for (std::size_t c = 0; c < regimes.size(); ++c) out += "  " + pad(regimes[c], widths[c], true);
  out += "\n";
  for (std::size_t r = 0; r < languages.size(); ++r) {
    out += pad(languages[r], first, false);
    for (std::size_t c = 0; c < regimes.size(); ++c) out += "  " + pad(rendered[r][c], widths[c], true);
    out += "\n";
  }
  return out;
}

std::string ResultsTable::to_csv() const {
  const auto rendered = render_cells(*this);
  std::string out = "language";
  for (const auto& reg : regimes) out += "," + reg;
  out += "\n";
  for (std::size_t r = 0; r < languages.size(); ++r) {
    out += languages[r];
    for (const auto& cell : rendered[r]) out += "," + cell;
    out += "\n";
  }
  return out;
}

}  // namespace adapterlab
