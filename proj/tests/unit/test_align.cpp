#include <doctest.h>

#include "churn/align.hpp"
#include "support.hpp"

using namespace churn;
using namespace churn::testing;

TEST_CASE("identity dictionary gives W = I") {
  const Index d = 6;
  Matrix<double> x = Matrix<double>::Identity(d, d) * 2.0;
  auto t = fit_alignment(x, x);
  CHECK(t.rank() == d);
  CHECK((t.weights() - Matrix<double>::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.target_projection() - Matrix<double>::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-dimensional swap") {
  Matrix<double> x = Matrix<double>::Identity(2, 2) * 1.5;
  Matrix<double> y(2, 2);
  y << 0, 1.5, 1.5, 0;
  auto t = fit_alignment(x, y);
  Matrix<double> expected(2, 2);
  expected << 0, 1, 1, 0;
  CHECK((t.weights() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random rotation is recovered and W is orthogonal") {
  for (Index d : {10, 50}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(d));
    Matrix<double> q = random_orthogonal(d, rng);
    Matrix<double> x = gaussian(3 * d, d, rng);
    auto t = fit_alignment(x, x * q.transpose());
    CHECK(t.rank() == d);
    CHECK((t.weights() - q).cwiseAbs().maxCoeff() < 1e-6);
    Matrix<double> w = t.weights();
    CHECK((w.transpose() * w - Matrix<double>::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-6);
    for (Index i = 1; i < t.singular_values().size(); ++i)
      CHECK(t.singular_values()(i) <= t.singular_values()(i - 1));
  }
}

TEST_CASE("fit is scale covariant") {
  std::mt19937_64 rng(4);
  Matrix<double> q = random_orthogonal(8, rng);
  Matrix<double> x = gaussian(40, 8, rng);
  Matrix<double> y = x * q.transpose() + 0.05 * gaussian(40, 8, rng);
  auto a = fit_alignment(x, y, 1e-9);
  auto b = fit_alignment(3.0 * x, y, 1e-9);
  CHECK((a.weights() - b.weights()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fit rejects bad input") {
  Matrix<double> x = Matrix<double>::Identity(3, 3);
  CHECK_THROWS(fit_alignment(x, Matrix<double>::Identity(4, 4)));
  Matrix<double> bad = x;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(fit_alignment(bad, x));
}

TEST_CASE("reduce_dimensions keeps components at or above the threshold") {
  Vector<double> sv(4);
  sv << 3.2, 1.5, 0.8, 0.2;
  AlignmentTransform t(Matrix<double>::Identity(4, 4), sv, Matrix<double>::Identity(4, 4), 1e-9, "de", "en");
  CHECK(t.rank() == 4);
  auto r = reduce_dimensions(t, 1.0);
  CHECK(r.rank() == 2);
  CHECK(r.weights().rows() == 2);
  CHECK(r.weights().cols() == 4);
  CHECK(reduce_dimensions(t, 0.2).rank() == 4);
  CHECK((reduce_dimensions(t, 0.2).weights() - t.weights()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(reduce_dimensions(t, 5.0));
  CHECK_THROWS(reduce_dimensions(t, 0.0));
  CHECK(fit_alignment(Matrix<double>::Identity(4, 4) * 2.0, Matrix<double>::Identity(4, 4) * 2.0).threshold() == 1.0);
}

TEST_CASE("transform rejects increasing singular values") {
  Vector<double> sv(2);
  sv << 1.0, 2.0;
  CHECK_THROWS(AlignmentTransform(Matrix<double>::Identity(2, 2), sv, Matrix<double>::Identity(2, 2), 0.5, "de", "en"));
}

TEST_CASE("apply_alignment maps rows and checks the language") {
  auto f = make_rotation_fixture(12, 300, 0.0, 7);
  auto m = build_dictionary_matrices(f.dictionary, DictionarySplit::Train, f.source, f.target);
  auto t = fit_alignment(m.source, m.target);
  REQUIRE(t.rank() == 12);
  auto aligned = apply_alignment(t, f.source);
  CHECK(aligned.language() == "de");
  CHECK(aligned.dim() == 12);
  for (Index i = 0; i < 20; ++i) {
    Vector<float> a = aligned.row(i).transpose();
    Vector<float> b = f.target.row(i).transpose();
    CHECK(a.dot(b) / (a.norm() * b.norm()) >= 0.999f);
  }
  CHECK_THROWS(apply_alignment(t, f.target));

  auto identity = fit_alignment(Matrix<double>::Identity(12, 12) * 2, Matrix<double>::Identity(12, 12) * 2);
  auto same = apply_alignment(identity, f.source);
  CHECK((same.matrix() - f.source.matrix()).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("reduced rank output dimension") {
  auto f = make_rotation_fixture(10, 200, 0.0, 2);
  auto m = build_dictionary_matrices(f.dictionary, DictionarySplit::Train, f.source, f.target);
  auto t = fit_alignment(m.source, m.target, 1.0);
  auto r = reduce_dimensions(t, t.singular_values()(5));
  CHECK(r.rank() == 6);
  CHECK(apply_alignment(r, f.source).dim() == 6);
  CHECK(project_target(r, f.target).dim() == 6);
}

TEST_CASE("full-rank alignment preserves cosine and nearest neighbours") {
  auto f = make_rotation_fixture(16, 200, 0.02, 9);
  auto m = build_dictionary_matrices(f.dictionary, DictionarySplit::Train, f.source, f.target);
  auto t = fit_alignment(m.source, m.target, 1e-9);
  REQUIRE(t.rank() == 16);
  auto aligned = apply_alignment(t, f.source);
  const auto& a = f.source.matrix();
  const auto& b = aligned.matrix();
  for (Index i = 0; i < 30; ++i) {
    double best_a = -2, best_b = -2;
    Index arg_a = -1, arg_b = -1;
    for (Index j = 0; j < a.rows(); ++j) {
      if (j == i) continue;
      const double ca = a.row(i).cast<double>().dot(a.row(j).cast<double>()) /
                        (a.row(i).cast<double>().norm() * a.row(j).cast<double>().norm());
      const double cb = b.row(i).cast<double>().dot(b.row(j).cast<double>()) /
                        (b.row(i).cast<double>().norm() * b.row(j).cast<double>().norm());
      CHECK(std::abs(ca - cb) < 1e-5);
      if (ca > best_a) best_a = ca, arg_a = j;
      if (cb > best_b) best_b = cb, arg_b = j;
    }
    CHECK(arg_a == arg_b);
  }
}

TEST_CASE("dictionary loading, splitting and matrices") {
  TempDir dir;
  write_file(dir / "d.tsv", "hallo\thello\ntschüss\tbye\nhallo\thello\nhund\tdog\nkatze\tcat\n");
  auto dict = load_dictionary(dir / "d.tsv", 3);
  CHECK(dict.pairs.size() == 4);
  CHECK(dict.train_split.size() + dict.test_split.size() == 4);
  std::vector<std::size_t> all = dict.train_split;
  all.insert(all.end(), dict.test_split.begin(), dict.test_split.end());
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3});
  auto again = load_dictionary(dir / "d.tsv", 3);
  CHECK(again.test_split == dict.test_split);

  write_file(dir / "bad.tsv", "hallo hello\n");
  CHECK_THROWS_AS(load_dictionary(dir / "bad.tsv"), ParseError);

  BilingualDictionary ten;
  for (int i = 0; i < 10; ++i) ten.pairs.emplace_back("s" + std::to_string(i), "t" + std::to_string(i));
  ten.train_split = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::string> sw, tw;
  for (int i = 0; i < 10; ++i) {
    if (i >= 3) sw.push_back("s" + std::to_string(i));
    tw.push_back("t" + std::to_string(i));
  }
  std::mt19937_64 rng(1);
  WordEmbeddings src("de", sw, gaussian(7, 4, rng).cast<float>());
  WordEmbeddings tgt("en", tw, gaussian(10, 4, rng).cast<float>());
  auto m = build_dictionary_matrices(ten, DictionarySplit::Train, src, tgt);
  CHECK(m.source.rows() == 7);
  CHECK(m.dropped == 3);
  for (Index i = 0; i < 7; ++i) CHECK(m.source.row(i).norm() == doctest::Approx(1.0));

  BilingualDictionary empty;
  CHECK_THROWS(build_dictionary_matrices(empty, DictionarySplit::Train, src, tgt));
}

TEST_CASE("translate ranks by cosine with index tie-break") {
  RowMatrix<float> m(4, 2);
  m << 1, 0, 0, 1, 1, 0, -1, 0;
  WordEmbeddings src("de", {"a", "b", "c", "d"}, m);
  WordEmbeddings tgt("en", {"a", "b", "c", "d"}, m);
  auto t = fit_alignment(Matrix<double>::Identity(2, 2) * 2, Matrix<double>::Identity(2, 2) * 2);
  CHECK(translate(t, src, tgt, "b", 1) == std::vector<std::string>{"b"});
  CHECK(translate(t, src, tgt, "a", 2) == std::vector<std::string>{"a", "c"});
  CHECK(translate(t, src, tgt, "a", 10).size() == 4);
  CHECK(translate(t, src, tgt, "a", 10).back() == "d");
  CHECK_THROWS(translate(t, src, tgt, "zzz", 1));
}

TEST_CASE("evaluate_alignment on rotation fixtures") {
  auto f = make_rotation_fixture(50, 2000, 0.0, 11);
  auto m = build_dictionary_matrices(f.dictionary, DictionarySplit::Train, f.source, f.target);
  auto t = fit_alignment(m.source, m.target);
  CHECK(evaluate_alignment(t, f.dictionary, f.source, f.target, 1) == 1.0);

  auto noisy = make_rotation_fixture(50, 2000, 0.01, 12);
  auto mn = build_dictionary_matrices(noisy.dictionary, DictionarySplit::Train, noisy.source, noisy.target);
  CHECK(evaluate_alignment(fit_alignment(mn.source, mn.target), noisy.dictionary, noisy.source,
                           noisy.target, 1) >= 0.9);

  BilingualDictionary no_test = f.dictionary;
  no_test.test_split.clear();
  CHECK_THROWS(evaluate_alignment(t, no_test, f.source, f.target, 1));

  RowMatrix<float> m2(2, 2);
  m2 << 1, 0, 0, 1;
  WordEmbeddings src("de", {"x", "y"}, m2), tgt("en", {"x", "y"}, m2);
  BilingualDictionary wrong;
  wrong.pairs = {{"x", "y"}, {"y", "x"}};
  wrong.test_split = {0, 1};
  auto id = fit_alignment(Matrix<double>::Identity(2, 2) * 2, Matrix<double>::Identity(2, 2) * 2);
  CHECK(evaluate_alignment(id, wrong, src, tgt, 1) == 0.0);
}

TEST_CASE("transform file round trip") {
  TempDir dir;
  auto f = make_rotation_fixture(8, 100, 0.0, 5);
  auto m = build_dictionary_matrices(f.dictionary, DictionarySplit::Train, f.source, f.target);
  auto t = fit_alignment(m.source, m.target, 1.0);
  save_transform(t, dir / "t.chk");
  auto back = load_transform(dir / "t.chk");
  CHECK(back.rank() == t.rank());
  CHECK(back.threshold() == t.threshold());
  CHECK(back.source_language() == "de");
  CHECK(back.target_language() == "en");
  CHECK((back.weights() - t.weights()).cwiseAbs().maxCoeff() < 1e-6);
}
