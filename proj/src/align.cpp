#include "churn/align.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "churn/checkpoint.hpp"

namespace churn {

namespace {

std::vector<std::pair<std::string, std::string>> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dictionary file " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected \"<source>\\t<target>\"");
    std::pair<std::string, std::string> p{line.substr(0, tab), line.substr(tab + 1)};
    if (seen.insert(p).second) pairs.push_back(std::move(p));
  }
  return pairs;
}

RowMatrix<double> unit_rows(RowMatrix<double> m) {
  for (Index i = 0; i < m.rows(); ++i) {
    double n = m.row(i).norm();
    if (n > 0) m.row(i) /= n;
  }
  return m;
}

}  // namespace

void BilingualDictionary::split(std::uint64_t seed, double test_fraction) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(pairs.size()) + 0.5);
  test_split.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  train_split.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test_split.begin(), test_split.end());
  std::sort(train_split.begin(), train_split.end());
}

BilingualDictionary load_dictionary(const std::filesystem::path& path, std::uint64_t seed) {
  BilingualDictionary d;
  d.pairs = read_pairs(path);
  d.split(seed);
  return d;
}

BilingualDictionary load_dictionary(const std::filesystem::path& train_path,
                                    const std::filesystem::path& test_path) {
  BilingualDictionary d;
  auto train = read_pairs(train_path);
  auto test = read_pairs(test_path);
  std::set<std::pair<std::string, std::string>> seen;
  for (auto& p : train) {
    if (!seen.insert(p).second) continue;
    d.train_split.push_back(d.pairs.size());
    d.pairs.push_back(std::move(p));
  }
  for (auto& p : test) {
    if (!seen.insert(p).second) continue;
    d.test_split.push_back(d.pairs.size());
    d.pairs.push_back(std::move(p));
  }
  return d;
}

DictionaryMatrices build_dictionary_matrices(const BilingualDictionary& dict, DictionarySplit split,
                                             const WordEmbeddings& src, const WordEmbeddings& tgt) {
  if (src.dim() != tgt.dim())
    throw DimensionError("source dim " + std::to_string(src.dim()) + " != target dim " +
                         std::to_string(tgt.dim()));
  const auto& indices = split == DictionarySplit::Train ? dict.train_split : dict.test_split;
  DictionaryMatrices out;
  std::vector<std::pair<Index, Index>> rows;
  for (std::size_t i : indices) {
    const auto& [s, t] = dict.pairs.at(i);
    auto si = src.index_of(s);
    auto ti = tgt.index_of(t);
    if (!si || !ti) {
      ++out.dropped;
      continue;
    }
    rows.emplace_back(*si, *ti);
    out.kept_pairs.push_back(i);
  }
  if (rows.empty()) throw Error("no dictionary pair has both words in vocabulary; cannot fit");

  const Index p = static_cast<Index>(rows.size());
  RowMatrix<double> x(p, src.dim()), y(p, tgt.dim());
  for (Index r = 0; r < p; ++r) {
    x.row(r) = src.row(rows[static_cast<std::size_t>(r)].first).cast<double>();
    y.row(r) = tgt.row(rows[static_cast<std::size_t>(r)].second).cast<double>();
  }
  out.source = unit_rows(std::move(x));
  out.target = unit_rows(std::move(y));
  return out;
}

AlignmentTransform::AlignmentTransform(Matrix<double> u, Vector<double> singular_values,
                                       Matrix<double> v, double threshold,
                                       std::string source_language, std::string target_language)
    : u_(std::move(u)),
      singular_values_(std::move(singular_values)),
      v_(std::move(v)),
      threshold_(threshold),
      source_language_(std::move(source_language)),
      target_language_(std::move(target_language)) {
  const Index d = u_.rows();
  if (u_.cols() != d || v_.rows() != d || v_.cols() != d || singular_values_.size() != d)
    throw DimensionError("alignment factors must be d x d with d singular values");
  for (Index i = 1; i < d; ++i)
    if (singular_values_(i) > singular_values_(i - 1))
      throw Error("singular values must be nonincreasing");
  rank_ = static_cast<Index>((singular_values_.array() >= threshold_).count());
  if (rank_ == 0)
    throw Error("all singular values are below threshold " + std::to_string(threshold_));
}

Matrix<double> AlignmentTransform::weights() const {
  if (rank_ == dim()) return v_ * u_.transpose();
  return u_.leftCols(rank_).transpose();
}

Matrix<double> AlignmentTransform::target_projection() const {
  if (rank_ == dim()) return Matrix<double>::Identity(dim(), dim());
  return v_.leftCols(rank_).transpose();
}

AlignmentTransform fit_alignment(const Matrix<double>& source, const Matrix<double>& target,
                                 double threshold, const FitOptions& options) {
  if (source.rows() != target.rows() || source.cols() != target.cols())
    throw DimensionError("dictionary matrices must have the same shape");
  if (source.rows() == 0) throw Error("empty dictionary matrices");
  if (!source.allFinite() || !target.allFinite())
    throw Error("dictionary matrices contain non-finite values");
  if (threshold < 0) throw Error("threshold must be nonnegative");

  Matrix<double> cross;
  if (options.mean_center) {
    Matrix<double> xs = source.rowwise() - source.colwise().mean();
    Matrix<double> ys = target.rowwise() - target.colwise().mean();
    cross = xs.transpose() * ys;
  } else {
    cross = source.transpose() * target;
  }
  Eigen::BDCSVD<Matrix<double>> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw Error("SVD of the cross-covariance failed");
  return AlignmentTransform(svd.matrixU(), svd.singularValues(), svd.matrixV(), threshold,
                            options.source_language, options.target_language);
}

AlignmentTransform reduce_dimensions(const AlignmentTransform& t, double threshold) {
  if (!(threshold > 0)) throw Error("threshold must be positive");
  return AlignmentTransform(t.u(), t.singular_values(), t.v(), threshold, t.source_language(),
                            t.target_language());
}

namespace {

WordEmbeddings map_rows(const Matrix<double>& map, const WordEmbeddings& emb) {
  if (emb.dim() != map.cols())
    throw DimensionError("embedding dim " + std::to_string(emb.dim()) +
                         " does not match transform dim " + std::to_string(map.cols()));
  RowMatrix<float> out = (emb.matrix().cast<double>() * map.transpose()).cast<float>();
  return WordEmbeddings(emb.language(), emb.words(), std::move(out));
}

}  // namespace

WordEmbeddings apply_alignment(const AlignmentTransform& t, const WordEmbeddings& emb) {
  if (emb.language() != t.source_language())
    throw Error("transform maps '" + t.source_language() + "', embeddings are '" +
                emb.language() + "'");
  return map_rows(t.weights(), emb);
}

WordEmbeddings project_target(const AlignmentTransform& t, const WordEmbeddings& emb) {
  if (emb.language() != t.target_language())
    throw Error("transform targets '" + t.target_language() + "', embeddings are '" +
                emb.language() + "'");
  if (t.rank() == t.dim()) {
    if (emb.dim() != t.dim())
      throw DimensionError("embedding dim " + std::to_string(emb.dim()) +
                           " does not match transform dim " + std::to_string(t.dim()));
    return emb;
  }
  return map_rows(t.target_projection(), emb);
}

TranslationIndex::TranslationIndex(const AlignmentTransform& t, const WordEmbeddings& src,
                                   const WordEmbeddings& tgt)
    : src_(&src), tgt_(&tgt), weights_(t.weights()) {
  if (src.dim() != t.dim() || tgt.dim() != t.dim())
    throw DimensionError("translation requires embeddings of the transform's dimension " +
                         std::to_string(t.dim()));
  targets_ = unit_rows(tgt.matrix().cast<double>() * t.target_projection().transpose());
}

std::vector<std::string> TranslationIndex::translate(const std::string& word, std::size_t k) const {
  auto idx = src_->index_of(word);
  if (!idx) throw Error("word '" + word + "' is not in the source vocabulary");
  Vector<double> x = src_->row(*idx).cast<double>().transpose();
  if (double n = x.norm(); n > 0) x /= n;
  Vector<double> q = weights_ * x;
  if (double n = q.norm(); n > 0) q /= n;
  Vector<double> scores = targets_ * q;

  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](Index a, Index b) {
                      if (scores(a) != scores(b)) return scores(a) > scores(b);
                      return a < b;
                    });
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(tgt_->words()[static_cast<std::size_t>(order[i])]);
  return out;
}

std::vector<std::string> translate(const AlignmentTransform& t, const WordEmbeddings& src,
                                   const WordEmbeddings& tgt, const std::string& word,
                                   std::size_t k) {
  return TranslationIndex(t, src, tgt).translate(word, k);
}

double evaluate_alignment(const AlignmentTransform& t, const BilingualDictionary& dict,
                          const WordEmbeddings& src, const WordEmbeddings& tgt, std::size_t k) {
  if (dict.test_split.empty()) throw Error("dictionary has an empty test split");
  TranslationIndex index(t, src, tgt);
  std::size_t total = 0, hits = 0;
  for (std::size_t i : dict.test_split) {
    const auto& [s, g] = dict.pairs.at(i);
    if (!src.contains(s) || !tgt.contains(g)) continue;
    ++total;
    auto top = index.translate(s, k);
    if (std::find(top.begin(), top.end(), g) != top.end()) ++hits;
  }
  if (total == 0) throw Error("no test pair has both words in vocabulary");
  return static_cast<double>(hits) / static_cast<double>(total);
}

void save_transform(const AlignmentTransform& t, const std::filesystem::path& path) {
  Container c;
  c.kind = "alignment";
  c.meta = {{"source_language", t.source_language()},
            {"target_language", t.target_language()},
            {"threshold", t.threshold()},
            {"dim", t.dim()},
            {"rank", t.rank()}};
  c.add_matrix("W", t.weights());
  c.add_matrix("U", t.u());
  c.add_matrix("V", t.v());
  c.add_matrix("singular_values", t.singular_values());
  write_container(c, path);
}

AlignmentTransform load_transform(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != "alignment") throw ParseError(path.string() + ": not an alignment transform");
  Matrix<double> u = c.matrix("U").cast<double>();
  Matrix<double> v = c.matrix("V").cast<double>();
  Vector<double> s = c.matrix("singular_values").cast<double>().col(0);
  return AlignmentTransform(std::move(u), std::move(s), std::move(v),
                            c.meta.at("threshold").get<double>(),
                            c.meta.at("source_language").get<std::string>(),
                            c.meta.at("target_language").get<std::string>());
}

}  // namespace churn
