#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "churn/common.hpp"
#include "churn/embeddings.hpp"

namespace churn {

/// Word-translation pairs with a train/test partition over pair indices.
struct BilingualDictionary {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::size_t> train_split;
  std::vector<std::size_t> test_split;

  /// Deterministic seeded shuffle; `test_fraction` of the pairs go to test.
  void split(std::uint64_t seed, double test_fraction = 0.1);
};

enum class DictionarySplit { Train, Test };

/// Reads "<source>\t<target>" lines. Repeated pairs are kept once. The
/// returned dictionary is split 90/10 with `seed`.
BilingualDictionary load_dictionary(const std::filesystem::path& path, std::uint64_t seed = 0);

/// Builds a dictionary from separate train and test files.
BilingualDictionary load_dictionary(const std::filesystem::path& train_path,
                                    const std::filesystem::path& test_path);

struct DictionaryMatrices {
  Matrix<double> source;  // p x d
  Matrix<double> target;  // p x d
  std::vector<std::size_t> kept_pairs;
  std::size_t dropped = 0;
};

/// Rows are the normalized vectors of the split's pairs present in both
/// vocabularies, in dictionary order.
DictionaryMatrices build_dictionary_matrices(const BilingualDictionary& dict, DictionarySplit split,
                                             const WordEmbeddings& src, const WordEmbeddings& tgt);

/// Source -> target map obtained from the SVD of the d x d cross-covariance
/// XᵀY = U Σ Vᵀ. At full rank W = V Uᵀ (orthogonal). At reduced rank r both
/// languages are expressed in the r leading target components: W = U_rᵀ and
/// target vectors are projected with V_rᵀ.
class AlignmentTransform {
 public:
  AlignmentTransform() = default;
  AlignmentTransform(Matrix<double> u, Vector<double> singular_values, Matrix<double> v,
                     double threshold, std::string source_language, std::string target_language);

  Index dim() const { return u_.rows(); }
  Index rank() const { return rank_; }
  double threshold() const { return threshold_; }
  const Vector<double>& singular_values() const { return singular_values_; }
  const Matrix<double>& u() const { return u_; }
  const Matrix<double>& v() const { return v_; }
  const std::string& source_language() const { return source_language_; }
  const std::string& target_language() const { return target_language_; }

  /// r x d source map.
  Matrix<double> weights() const;
  /// r x d projection applied to target-language vectors (identity at full rank).
  Matrix<double> target_projection() const;

 private:
  friend AlignmentTransform reduce_dimensions(const AlignmentTransform& t, double threshold);

  Matrix<double> u_;
  Vector<double> singular_values_;
  Matrix<double> v_;
  double threshold_ = 0.0;
  Index rank_ = 0;
  std::string source_language_;
  std::string target_language_;
};

struct FitOptions {
  std::string source_language = "de";
  std::string target_language = "en";
  /// Subtract column means of both dictionary matrices before the SVD.
  bool mean_center = false;
};

AlignmentTransform fit_alignment(const Matrix<double>& source, const Matrix<double>& target,
                                 double threshold = 1.0, const FitOptions& options = {});

/// Keeps the leading components whose singular value is >= threshold.
AlignmentTransform reduce_dimensions(const AlignmentTransform& t, double threshold);

/// Maps every source row x to W x (dimension r).
WordEmbeddings apply_alignment(const AlignmentTransform& t, const WordEmbeddings& emb);

/// Projects target-language rows onto the retained target components.
WordEmbeddings project_target(const AlignmentTransform& t, const WordEmbeddings& emb);

/// Cosine nearest-neighbour search of aligned source words among target rows.
class TranslationIndex {
 public:
  TranslationIndex(const AlignmentTransform& t, const WordEmbeddings& src, const WordEmbeddings& tgt);

  /// k target words by descending cosine, ties broken by vocabulary index.
  std::vector<std::string> translate(const std::string& word, std::size_t k) const;

 private:
  const WordEmbeddings* src_;
  const WordEmbeddings* tgt_;
  Matrix<double> weights_;
  RowMatrix<double> targets_;  // projected, unit rows
};

std::vector<std::string> translate(const AlignmentTransform& t, const WordEmbeddings& src,
                                   const WordEmbeddings& tgt, const std::string& word,
                                   std::size_t k);

/// Fraction of test pairs (present in both vocabularies) whose gold
/// translation is among the top-k.
double evaluate_alignment(const AlignmentTransform& t, const BilingualDictionary& dict,
                          const WordEmbeddings& src, const WordEmbeddings& tgt, std::size_t k = 1);

void save_transform(const AlignmentTransform& t, const std::filesystem::path& path);
AlignmentTransform load_transform(const std::filesystem::path& path);

}  // namespace churn
