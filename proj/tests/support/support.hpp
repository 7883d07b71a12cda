#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "churn/align.hpp"
#include "churn/common.hpp"
#include "churn/embeddings.hpp"
#include "churn/nn/tape.hpp"

namespace churn::testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

Matrix<double> gaussian(Index rows, Index cols, std::mt19937_64& rng, double stddev = 1.0);
/// Haar-distributed orthogonal matrix (QR of a Gaussian, signs fixed).
Matrix<double> random_orthogonal(Index d, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Finite differences

using LossBuilder =
    std::function<nn::Var<double>(nn::Tape<double>&, const std::vector<nn::Var<double>>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // name of the tensor with the largest error
};

/// Central differences for every entry of every tensor. Per-tensor error is
/// |a - n| / max(|a| + |n|, 1e-7) over the flattened gradients.
GradCheckResult gradcheck(const std::vector<std::pair<std::string, Matrix<double>*>>& tensors,
                          const LossBuilder& build, double h = 1e-5);

/// Reduces a matrix-valued output to a scalar with fixed random weights.
nn::Var<double> weighted_sum(nn::Var<double> out, const Matrix<double>& weights);

// ---------------------------------------------------------------------------
// Synthetic corpora

/// Two keyword vocabularies that never overlap plus shared fillers.
struct ToyCorpus {
  WordEmbeddings embeddings;
  std::vector<LabeledExample> examples;
};

ToyCorpus make_toy_corpus(Index dim, std::size_t count, std::uint64_t seed);

struct BilingualWorldOptions {
  Index dim = 32;
  std::size_t churn_concepts = 40;
  std::size_t non_churn_concepts = 40;
  std::size_t filler_concepts = 40;
  std::size_t dictionary_only = 200;
  double word_noise = 0.2;    // relative to the concept vector norm
  double target_noise = 0.0;  // extra per-entry noise on German vectors
  std::size_t en_examples = 800;
  std::size_t de_examples = 150;
  double churn_rate = 0.4;
};

/// Shared latent concepts; every concept has an English and a German word.
/// German vectors are a fixed rotation of their concept plus word noise, so
/// the known rotation links the two vocabularies.
struct BilingualWorld {
  WordEmbeddings en;
  WordEmbeddings de;
  Matrix<double> rotation;  // de = rotation * en (up to noise)
  BilingualDictionary dictionary;
  std::vector<LabeledExample> en_examples;
  std::vector<LabeledExample> de_examples;
};

BilingualWorld make_bilingual_world(const BilingualWorldOptions& options, std::uint64_t seed);

/// Vocabulary of `n` random unit vectors and a rotated copy with optional
/// Gaussian noise, linked by a word-for-word dictionary split 90/10.
struct RotationFixture {
  WordEmbeddings source;
  WordEmbeddings target;
  Matrix<double> rotation;
  BilingualDictionary dictionary;
};

RotationFixture make_rotation_fixture(Index dim, std::size_t words, double noise, std::uint64_t seed);

}  // namespace churn::testing
