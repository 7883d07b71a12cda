#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "churn/common.hpp"

namespace churn {

/// Per-language vocabulary with fixed-width vectors stored row-wise in
/// single precision. Immutable once built; safe for concurrent reads.
class WordEmbeddings {
 public:
  WordEmbeddings() = default;
  WordEmbeddings(std::string language, std::vector<std::string> words, RowMatrix<float> matrix,
                 bool normalized = false);

  const std::string& language() const { return language_; }
  Index dim() const { return matrix_.cols(); }
  std::size_t size() const { return words_.size(); }
  bool normalized() const { return normalized_; }

  const std::vector<std::string>& words() const { return words_; }
  const RowMatrix<float>& matrix() const { return matrix_; }

  std::optional<Index> index_of(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.contains(word); }
  auto row(Index i) const { return matrix_.row(i); }

  WordEmbeddings with_language(std::string language) const;

 private:
  std::string language_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, Index> index_;
  RowMatrix<float> matrix_;
  bool normalized_ = false;
};

/// Reads the whitespace text vector format: a "<count> <dim>" header line
/// followed by "<word> <v1> ... <vdim>" rows. Duplicate words keep their
/// first occurrence; `max_words` bounds the number of distinct entries.
WordEmbeddings load_embeddings(const std::filesystem::path& path, std::string language,
                               std::optional<std::size_t> max_words = std::nullopt);

void save_embeddings(const WordEmbeddings& emb, const std::filesystem::path& path);

/// Divides every nonzero row by its Euclidean norm; zero rows stay zero.
WordEmbeddings normalize_rows(const WordEmbeddings& emb);

/// One row per token; out-of-vocabulary tokens give a zero row.
Matrix<float> lookup(const WordEmbeddings& emb, std::span<const std::string> tokens);

/// Language code -> embeddings, all sharing one dimension. This is what the
/// classifier reads from: monolingual runs hold one table, multilingual runs
/// hold the aligned tables of both languages.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  explicit EmbeddingSpace(WordEmbeddings emb);

  void add(WordEmbeddings emb);
  const WordEmbeddings& at(const std::string& language) const;
  bool has(const std::string& language) const { return tables_.contains(language); }
  Index dim() const { return dim_; }
  std::vector<std::string> languages() const;

 private:
  std::map<std::string, WordEmbeddings> tables_;
  Index dim_ = 0;
};

}  // namespace churn
