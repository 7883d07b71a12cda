#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "churn/common.hpp"

namespace churn {

class Classifier;

// ---------------------------------------------------------------------------
// CSV (RFC 4180): quoted fields, doubled quotes, embedded newlines, CRLF.

std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);
bool is_valid_utf8(std::string_view s);

// ---------------------------------------------------------------------------
// Dataset files: header "id,text,brand,label,confidence,language,medium",
// label in {1, 0}. An empty brand means none; an empty confidence means 1.

inline constexpr std::array<std::string_view, 7> kDatasetColumns = {
    "id", "text", "brand", "label", "confidence", "language", "medium"};

struct LoadReport {
  std::size_t rows = 0;
  std::size_t dropped_low_confidence = 0;
};

std::vector<LabeledExample> parse_dataset(std::string_view csv_text, double min_confidence = 0.0,
                                          LoadReport* report = nullptr,
                                          const std::string& origin = "<memory>");
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         double min_confidence = 0.0,
                                         LoadReport* report = nullptr);

std::string dataset_csv_header();
std::string dataset_csv_row(const LabeledExample& e);
void save_dataset(std::span<const LabeledExample> examples, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

/// One keyword per line; blank lines and '#' comments skipped.
std::vector<std::string> load_keywords(const std::filesystem::path& path);

struct KeywordHit {
  std::size_t index = 0;  // position in the corpus
  std::string text;
  std::vector<std::string> matched;
};

/// Texts containing any keyword as a case-insensitive substring of the
/// whitespace-collapsed, lowercased text. Each text appears at most once.
std::vector<KeywordHit> keyword_filter(std::span<const std::string> corpus,
                                       std::span<const std::string> keywords);

struct BootstrapCandidate {
  std::size_t index = 0;
  std::string text;
  double churn_probability = 0.0;
};

/// Unlabelled texts whose predicted churn probability is >= threshold,
/// sorted by descending probability (ties by corpus order). Duplicate texts
/// are kept once. Candidates go to human annotation; nothing is auto-labelled.
std::vector<BootstrapCandidate> bootstrap_select(const Classifier& model,
                                                 std::span<const std::string> corpus,
                                                 double threshold = 0.9,
                                                 const std::string& language = "de",
                                                 Medium medium = Medium::Twitter);

struct MergeResult {
  std::vector<LabeledExample> examples;
  std::size_t disagreements = 0;
  double agreement_rate = 0.0;
};

/// Keeps the examples where both annotators gave the same label.
MergeResult merge_annotations(std::span<const LabeledExample> a, std::span<const LabeledExample> b);

struct ConcatResult {
  std::vector<LabeledExample> examples;
  std::size_t duplicates = 0;
};

/// Concatenation with id de-duplication; the first occurrence wins.
ConcatResult concat_datasets(std::span<const std::vector<LabeledExample>> parts);

struct GroupCount {
  std::string group;
  std::size_t churn = 0;
  std::size_t non_churn = 0;
};

struct DatasetStats {
  std::vector<GroupCount> groups;
  std::size_t churn = 0;
  std::size_t non_churn = 0;

  std::size_t total() const { return churn + non_churn; }
  double churn_ratio() const;
  const GroupCount* find(std::string_view group) const;
};

enum class StatsGrouping { Brand, Language };

/// Per-group churn/non-churn counts. With brand grouping, the `top_n`
/// brands by size are listed (ties by name) and the rest, including
/// examples without a brand, are pooled as "Others".
DatasetStats stats(std::span<const LabeledExample> dataset,
                   StatsGrouping grouping = StatsGrouping::Brand, std::size_t top_n = 3);

std::string format_stats(const DatasetStats& s);

}  // namespace churn
