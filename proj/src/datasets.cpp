#include "churn/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "churn/model.hpp"
#include "churn/textprep.hpp"

namespace churn {

std::optional<Label> parse_label(std::string_view s) {
  if (s == "1" || s == "churn") return Label::Churn;
  if (s == "0" || s == "non_churn") return Label::NonChurn;
  return std::nullopt;
}

std::optional<Medium> parse_medium(std::string_view s) {
  if (s == "twitter") return Medium::Twitter;
  if (s == "chatbot") return Medium::Chatbot;
  return std::nullopt;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      auto d = static_cast<unsigned char>(s[i + k]);
      if ((d & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (d & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_row();
      ++i;
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw ParseError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<LabeledExample> parse_dataset(std::string_view csv_text, double min_confidence,
                                          LoadReport* report, const std::string& origin) {
  if (!is_valid_utf8(csv_text)) throw ParseError(origin + ": invalid UTF-8");
  auto rows = parse_csv(csv_text);
  if (rows.empty()) throw ParseError(origin + ": missing header row");

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (auto name : kDatasetColumns)
    if (!col.contains(std::string(name)))
      throw ParseError(origin + ": missing required column '" + std::string(name) + "'");

  LoadReport local;
  std::vector<LabeledExample> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto where = origin + ": row " + std::to_string(r + 1);
    auto get = [&](std::string_view name) -> const std::string& {
      std::size_t i = col.at(std::string(name));
      if (i >= row.size()) throw ParseError(where + ": missing field '" + std::string(name) + "'");
      return row[i];
    };
    ++local.rows;
    LabeledExample e;
    e.id = get("id");
    e.raw_text = get("text");
    if (const auto& b = get("brand"); !b.empty()) e.source_brand = b;
    auto label = parse_label(get("label"));
    if (!label) throw ParseError(where + ": invalid label '" + get("label") + "'");
    e.label = *label;
    if (const auto& c = get("confidence"); !c.empty()) {
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), e.confidence);
      if (ec != std::errc() || ptr != c.data() + c.size() || e.confidence < 0 || e.confidence > 1)
        throw ParseError(where + ": invalid confidence '" + c + "'");
    }
    e.language = get("language");
    if (e.language != "en" && e.language != "de")
      throw ParseError(where + ": invalid language '" + e.language + "'");
    auto medium = parse_medium(get("medium"));
    if (!medium) throw ParseError(where + ": invalid medium '" + get("medium") + "'");
    e.medium = *medium;
    if (e.confidence < min_confidence) {
      ++local.dropped_low_confidence;
      continue;
    }
    out.push_back(std::move(e));
  }
  if (report) *report = local;
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, double min_confidence,
                                         LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), min_confidence, report, path.string());
}

std::string dataset_csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kDatasetColumns.size(); ++i) {
    if (i) out += ',';
    out += kDatasetColumns[i];
  }
  return out;
}

std::string dataset_csv_row(const LabeledExample& e) {
  std::ostringstream conf;
  conf.precision(17);
  conf << e.confidence;
  std::string out = csv_escape(e.id);
  out += ',' + csv_escape(e.raw_text);
  out += ',' + csv_escape(e.source_brand.value_or(""));
  out += e.label == Label::Churn ? ",1" : ",0";
  out += ',' + conf.str();
  out += ',' + csv_escape(e.language);
  out += ',' + std::string(to_string(e.medium));
  return out;
}

void save_dataset(std::span<const LabeledExample> examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  out << dataset_csv_header() << '\n';
  for (const auto& e : examples) out << dataset_csv_row(e) << '\n';
}

std::vector<std::string> load_keywords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open keyword file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    out.push_back(line.substr(b, line.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

namespace {

std::string normalize_for_match(std::string_view text) {
  std::string lower = to_lower(text);
  std::string out;
  bool space = false;
  for (char c : lower) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

}  // namespace

std::vector<KeywordHit> keyword_filter(std::span<const std::string> corpus,
                                       std::span<const std::string> keywords) {
  if (keywords.empty()) throw Error("keyword_filter: empty keyword list");
  std::vector<std::string> norm_keys;
  for (const auto& k : keywords) norm_keys.push_back(normalize_for_match(k));
  std::vector<KeywordHit> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string text = normalize_for_match(corpus[i]);
    KeywordHit hit{i, corpus[i], {}};
    for (std::size_t k = 0; k < norm_keys.size(); ++k) {
      if (norm_keys[k].empty() || text.find(norm_keys[k]) == std::string::npos) continue;
      if (std::find(hit.matched.begin(), hit.matched.end(), keywords[k]) == hit.matched.end())
        hit.matched.push_back(keywords[k]);
    }
    if (!hit.matched.empty()) out.push_back(std::move(hit));
  }
  return out;
}

std::vector<BootstrapCandidate> bootstrap_select(const Classifier& model,
                                                 std::span<const std::string> corpus,
                                                 double threshold, const std::string& language,
                                                 Medium medium) {
  if (!(threshold > 0.5 && threshold <= 1.0))
    throw Error("bootstrap threshold must be in (0.5, 1]");
  std::vector<BootstrapCandidate> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!seen.insert(corpus[i]).second) continue;
    LabeledExample ex;
    ex.raw_text = corpus[i];
    ex.language = language;
    ex.medium = medium;
    if (prepare(ex, model.lexicon(), model.params().config.strip_target).tokens.empty()) continue;
    auto p = model.predict(ex);
    if (p.churn_probability >= threshold) out.push_back({i, corpus[i], p.churn_probability});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.churn_probability > b.churn_probability;
  });
  return out;
}

MergeResult merge_annotations(std::span<const LabeledExample> a, std::span<const LabeledExample> b) {
  std::unordered_map<std::string, const LabeledExample*> by_id;
  for (const auto& e : b) by_id.emplace(e.id, &e);
  if (a.size() != b.size() || by_id.size() != b.size())
    throw Error("merge_annotations: annotator files cover different ids");
  MergeResult out;
  for (const auto& e : a) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw Error("merge_annotations: id '" + e.id + "' missing from second annotator");
    if (it->second->label == e.label) {
      out.examples.push_back(e);
    } else {
      ++out.disagreements;
    }
  }
  out.agreement_rate = a.empty() ? 1.0
                                 : static_cast<double>(out.examples.size()) / static_cast<double>(a.size());
  return out;
}

ConcatResult concat_datasets(std::span<const std::vector<LabeledExample>> parts) {
  ConcatResult out;
  std::unordered_set<std::string> seen;
  for (const auto& part : parts)
    for (const auto& e : part) {
      if (seen.insert(e.id).second) {
        out.examples.push_back(e);
      } else {
        ++out.duplicates;
      }
    }
  return out;
}

double DatasetStats::churn_ratio() const {
  return total() == 0 ? 0.0 : static_cast<double>(churn) / static_cast<double>(total());
}

const GroupCount* DatasetStats::find(std::string_view group) const {
  for (const auto& g : groups)
    if (g.group == group) return &g;
  return nullptr;
}

DatasetStats stats(std::span<const LabeledExample> dataset, StatsGrouping grouping,
                   std::size_t top_n) {
  std::map<std::string, GroupCount> counts;
  GroupCount unbranded{"Others", 0, 0};
  DatasetStats out;
  for (const auto& e : dataset) {
    GroupCount* g = nullptr;
    if (grouping == StatsGrouping::Language) {
      g = &counts[e.language];
      g->group = e.language;
    } else if (e.source_brand) {
      g = &counts[*e.source_brand];
      g->group = *e.source_brand;
    } else {
      g = &unbranded;
    }
    (e.label == Label::Churn ? g->churn : g->non_churn) += 1;
    (e.label == Label::Churn ? out.churn : out.non_churn) += 1;
  }
  std::vector<GroupCount> sorted;
  for (auto& [k, v] : counts) sorted.push_back(v);
  if (grouping == StatsGrouping::Language) {
    out.groups = std::move(sorted);
    return out;
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const GroupCount& a, const GroupCount& b) {
    return a.churn + a.non_churn > b.churn + b.non_churn;
  });
  GroupCount others = unbranded;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i < top_n) {
      out.groups.push_back(sorted[i]);
    } else {
      others.churn += sorted[i].churn;
      others.non_churn += sorted[i].non_churn;
    }
  }
  if (others.churn + others.non_churn > 0) out.groups.push_back(others);
  return out;
}

std::string format_stats(const DatasetStats& s) {
  std::ostringstream out;
  out << "group\tchurn\tnon_churn\n";
  for (const auto& g : s.groups) out << g.group << '\t' << g.churn << '\t' << g.non_churn << '\n';
  out << "total\t" << s.churn << '\t' << s.non_churn << '\n';
  return out.str();
}

}  // namespace churn
