#include "support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace churn::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("churn-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Matrix<double> gaussian(Index rows, Index cols, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix<double> m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

Matrix<double> random_orthogonal(Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix<double>> qr(gaussian(d, d, rng));
  Matrix<double> q = qr.householderQ();
  Matrix<double> r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

GradCheckResult gradcheck(const std::vector<std::pair<std::string, Matrix<double>*>>& tensors,
                          const LossBuilder& build, double h) {
  std::vector<Matrix<double>> analytic;
  for (const auto& t : tensors) analytic.push_back(Matrix<double>::Zero(t.second->rows(), t.second->cols()));
  {
    nn::Tape<double> tape;
    std::vector<nn::Var<double>> vars;
    for (std::size_t i = 0; i < tensors.size(); ++i)
      vars.push_back(tape.parameter(*tensors[i].second, &analytic[i]));
    tape.backward(build(tape, vars));
  }
  auto loss_at = [&]() {
    nn::Tape<double> tape;
    std::vector<nn::Var<double>> vars;
    for (const auto& t : tensors) vars.push_back(tape.parameter(*t.second, nullptr));
    return build(tape, vars).value()(0, 0);
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Matrix<double>& m = *tensors[i].second;
    Matrix<double> numeric(m.rows(), m.cols());
    for (Index k = 0; k < m.size(); ++k) {
      const double saved = m(k);
      m(k) = saved + h;
      const double up = loss_at();
      m(k) = saved - h;
      const double down = loss_at();
      m(k) = saved;
      numeric(k) = (up - down) / (2 * h);
    }
    const double err = (analytic[i] - numeric).norm() /
                       std::max(analytic[i].norm() + numeric.norm(), 1e-7);
    if (err >= result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = tensors[i].first;
    }
  }
  return result;
}

nn::Var<double> weighted_sum(nn::Var<double> out, const Matrix<double>& weights) {
  return nn::sum(nn::mul(out, out.tape->constant(weights)));
}

namespace {

WordEmbeddings table(std::string language, std::vector<std::string> words, const Matrix<double>& rows) {
  return WordEmbeddings(std::move(language), std::move(words), rows.cast<float>(), false);
}

Vector<double> random_unit(Index d, std::mt19937_64& rng) {
  Vector<double> v = gaussian(d, 1, rng);
  return v / v.norm();
}

}  // namespace

ToyCorpus make_toy_corpus(Index dim, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> churn_words = {"cancel", "leave", "quit", "switching",
                                                "goodbye", "terminate", "done", "moving"};
  const std::vector<std::string> calm_words = {"thanks", "love", "great", "awesome",
                                               "happy", "helpful", "nice", "perfect"};
  const std::vector<std::string> fillers = {"the", "my", "service", "phone", "today",
                                            "plan", "really", "so", "this", "with"};
  std::vector<std::string> vocab;
  for (const auto* list : {&churn_words, &calm_words, &fillers})
    vocab.insert(vocab.end(), list->begin(), list->end());
  Matrix<double> rows = gaussian(static_cast<Index>(vocab.size()), dim, rng, 0.2);

  ToyCorpus out{table("en", vocab, rows), {}};
  std::uniform_int_distribution<std::size_t> pick_kw(0, 7), pick_fill(0, fillers.size() - 1);
  std::uniform_int_distribution<int> n_kw(1, 2), n_fill(2, 4);
  for (std::size_t i = 0; i < count; ++i) {
    const bool churn = i % 2 == 0;
    std::vector<std::string> words;
    for (int k = n_kw(rng); k > 0; --k) words.push_back((churn ? churn_words : calm_words)[pick_kw(rng)]);
    for (int k = n_fill(rng); k > 0; --k) words.push_back(fillers[pick_fill(rng)]);
    std::shuffle(words.begin(), words.end(), rng);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    LabeledExample e;
    e.id = "toy" + std::to_string(i);
    e.raw_text = text;
    e.label = churn ? Label::Churn : Label::NonChurn;
    out.examples.push_back(std::move(e));
  }
  return out;
}

BilingualWorld make_bilingual_world(const BilingualWorldOptions& o, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Index d = o.dim;
  const std::size_t concepts =
      o.churn_concepts + o.non_churn_concepts + o.filler_concepts + o.dictionary_only;
  BilingualWorld w;
  w.rotation = random_orthogonal(d, rng);

  Matrix<double> en_rows(static_cast<Index>(concepts), d), de_rows(static_cast<Index>(concepts), d);
  std::vector<std::string> en_words, de_words;
  std::normal_distribution<double> noise(0.0, o.word_noise / std::sqrt(static_cast<double>(d)));
  std::normal_distribution<double> target_noise(0.0, o.target_noise);
  for (std::size_t c = 0; c < concepts; ++c) {
    const Vector<double> z = random_unit(d, rng);
    Vector<double> en = z, de = z;
    for (Index k = 0; k < d; ++k) {
      en(k) += noise(rng);
      de(k) += noise(rng);
    }
    de = w.rotation * de;
    if (o.target_noise > 0)
      for (Index k = 0; k < d; ++k) de(k) += target_noise(rng);
    en_rows.row(static_cast<Index>(c)) = en.transpose();
    de_rows.row(static_cast<Index>(c)) = de.transpose();
    en_words.push_back("en" + std::to_string(c));
    de_words.push_back("de" + std::to_string(c));
    w.dictionary.pairs.emplace_back(de_words.back(), en_words.back());
  }
  w.dictionary.split(seed);
  w.en = table("en", en_words, en_rows);
  w.de = table("de", de_words, de_rows);

  auto generate = [&](const std::string& lang, std::size_t count) {
    std::vector<LabeledExample> out;
    std::bernoulli_distribution is_churn(o.churn_rate);
    std::uniform_int_distribution<std::size_t> churn_c(0, o.churn_concepts - 1);
    std::uniform_int_distribution<std::size_t> calm_c(o.churn_concepts,
                                                      o.churn_concepts + o.non_churn_concepts - 1);
    const std::size_t filler_start = o.churn_concepts + o.non_churn_concepts;
    std::uniform_int_distribution<std::size_t> filler_c(filler_start, filler_start + o.filler_concepts - 1);
    std::uniform_int_distribution<int> n_fill(2, 5);
    for (std::size_t i = 0; i < count; ++i) {
      const bool churn = is_churn(rng);
      std::vector<std::size_t> ids{churn ? churn_c(rng) : calm_c(rng)};
      for (int k = n_fill(rng); k > 0; --k) ids.push_back(filler_c(rng));
      std::shuffle(ids.begin(), ids.end(), rng);
      std::string text;
      for (auto id : ids) text += (text.empty() ? "" : " ") + lang + std::to_string(id);
      LabeledExample e;
      e.id = lang + "-" + std::to_string(i);
      e.raw_text = text;
      e.label = churn ? Label::Churn : Label::NonChurn;
      e.language = lang;
      out.push_back(std::move(e));
    }
    return out;
  };
  w.en_examples = generate("en", o.en_examples);
  w.de_examples = generate("de", o.de_examples);
  return w;
}

RotationFixture make_rotation_fixture(Index dim, std::size_t words, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RotationFixture f;
  f.rotation = random_orthogonal(dim, rng);
  Matrix<double> src(static_cast<Index>(words), dim);
  for (Index i = 0; i < src.rows(); ++i) src.row(i) = random_unit(dim, rng).transpose();
  Matrix<double> tgt = src * f.rotation.transpose();
  if (noise > 0) tgt += gaussian(tgt.rows(), dim, rng, noise);
  std::vector<std::string> s, t;
  for (std::size_t i = 0; i < words; ++i) {
    s.push_back("src" + std::to_string(i));
    t.push_back("tgt" + std::to_string(i));
    f.dictionary.pairs.emplace_back(s.back(), t.back());
  }
  f.dictionary.split(seed);
  f.source = table("de", s, src);
  f.target = table("en", t, tgt);
  return f;
}

}  // namespace churn::testing
