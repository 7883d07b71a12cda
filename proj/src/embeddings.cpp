#include "churn/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace churn {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

WordEmbeddings::WordEmbeddings(std::string language, std::vector<std::string> words,
                               RowMatrix<float> matrix, bool normalized)
    : language_(std::move(language)),
      words_(std::move(words)),
      matrix_(std::move(matrix)),
      normalized_(normalized) {
  if (static_cast<Index>(words_.size()) != matrix_.rows())
    throw DimensionError("vocabulary size " + std::to_string(words_.size()) +
                         " does not match matrix rows " + std::to_string(matrix_.rows()));
  if (!matrix_.allFinite()) throw Error("embedding matrix contains non-finite values");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<Index>(i)).second)
      throw Error("duplicate vocabulary word '" + words_[i] + "'");
  }
}

std::optional<Index> WordEmbeddings::index_of(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordEmbeddings WordEmbeddings::with_language(std::string language) const {
  WordEmbeddings out = *this;
  out.language_ = std::move(language);
  return out;
}

WordEmbeddings load_embeddings(const std::filesystem::path& path, std::string language,
                               std::optional<std::size_t> max_words) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings file " + path.string());

  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  auto header = split_spaces(line);
  std::size_t count = 0;
  long dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) ||
      dim <= 0)
    fail(path, 1, "malformed header, expected \"<count> <dim>\"");

  std::size_t limit = max_words.value_or(count);
  std::vector<std::string> words;
  std::vector<float> values;
  words.reserve(std::min(limit, count));
  values.reserve(std::min(limit, count) * static_cast<std::size_t>(dim));
  std::unordered_set<std::string> seen;

  std::size_t line_no = 1;
  while (words.size() < limit && std::getline(in, line)) {
    ++line_no;
    auto fields = split_spaces(line);
    if (fields.empty()) continue;
    if (static_cast<long>(fields.size()) != dim + 1)
      fail(path, line_no,
           "expected " + std::to_string(dim + 1) + " fields, got " + std::to_string(fields.size()));
    std::string word(fields[0]);
    std::size_t base = values.size();
    values.resize(base + static_cast<std::size_t>(dim));
    for (long j = 0; j < dim; ++j) {
      float v = 0;
      if (!parse_number(fields[j + 1], v))
        fail(path, line_no, "non-numeric value '" + std::string(fields[j + 1]) + "'");
      if (!std::isfinite(v)) fail(path, line_no, "non-finite value");
      values[base + static_cast<std::size_t>(j)] = v;
    }
    if (!seen.insert(word).second) {
      values.resize(base);
      continue;
    }
    words.push_back(std::move(word));
  }

  RowMatrix<float> matrix =
      Eigen::Map<RowMatrix<float>>(values.data(), static_cast<Index>(words.size()), dim);
  return WordEmbeddings(std::move(language), std::move(words), std::move(matrix));
}

void save_embeddings(const WordEmbeddings& emb, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embeddings file " + path.string());
  out << emb.size() << ' ' << emb.dim() << '\n';
  out.precision(9);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << emb.words()[i];
    for (Index j = 0; j < emb.dim(); ++j) out << ' ' << emb.matrix()(static_cast<Index>(i), j);
    out << '\n';
  }
}

WordEmbeddings normalize_rows(const WordEmbeddings& emb) {
  RowMatrix<float> m = emb.matrix();
  for (Index i = 0; i < m.rows(); ++i) {
    double norm = m.row(i).cast<double>().norm();
    if (norm > 0) m.row(i) = (m.row(i).cast<double>() / norm).cast<float>();
  }
  return WordEmbeddings(emb.language(), emb.words(), std::move(m), true);
}

Matrix<float> lookup(const WordEmbeddings& emb, std::span<const std::string> tokens) {
  Matrix<float> out = Matrix<float>::Zero(static_cast<Index>(tokens.size()), emb.dim());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (auto i = emb.index_of(tokens[t])) out.row(static_cast<Index>(t)) = emb.row(*i);
  }
  return out;
}

EmbeddingSpace::EmbeddingSpace(WordEmbeddings emb) { add(std::move(emb)); }

void EmbeddingSpace::add(WordEmbeddings emb) {
  if (!tables_.empty() && emb.dim() != dim_)
    throw DimensionError("embedding dimension mismatch: space has " + std::to_string(dim_) +
                         ", '" + emb.language() + "' has " + std::to_string(emb.dim()));
  dim_ = emb.dim();
  auto lang = emb.language();
  tables_.insert_or_assign(lang, std::move(emb));
}

const WordEmbeddings& EmbeddingSpace::at(const std::string& language) const {
  auto it = tables_.find(language);
  if (it == tables_.end()) throw Error("no embeddings loaded for language '" + language + "'");
  return it->second;
}

std::vector<std::string> EmbeddingSpace::languages() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : tables_) out.push_back(k);
  return out;
}

}  // namespace churn
