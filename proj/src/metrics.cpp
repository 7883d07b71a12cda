#include "churn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace churn {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

Prf macro_prf(std::span<const Label> predictions, std::span<const Label> golds) {
  if (predictions.size() != golds.size())
    throw DimensionError("macro_prf: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(golds.size()) + " golds");
  if (predictions.empty()) throw Error("macro_prf: empty input");

  // confusion[gold][pred]
  double confusion[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < golds.size(); ++i)
    confusion[class_index(golds[i])][class_index(predictions[i])] += 1;

  Prf out;
  for (int c = 0; c < 2; ++c) {
    const double tp = confusion[c][c];
    const double predicted = confusion[0][c] + confusion[1][c];
    const double actual = confusion[c][0] + confusion[c][1];
    const double p = ratio(tp, predicted);
    const double r = ratio(tp, actual);
    const double f = ratio(2 * p * r, p + r);
    out.precision += p / 2;
    out.recall += r / 2;
    out.f1 += f / 2;
  }
  return out;
}

std::vector<std::vector<std::size_t>> kfold_split(std::span<const Label> labels, std::size_t k,
                                                  std::uint64_t seed, bool stratified) {
  if (k < 2) throw Error("kfold_split: need at least 2 folds");
  if (labels.size() < k)
    throw Error("kfold_split: dataset of " + std::to_string(labels.size()) +
                " examples is smaller than k=" + std::to_string(k));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order;
  order.reserve(labels.size());
  if (stratified) {
    for (Label l : {Label::NonChurn, Label::Churn}) {
      std::vector<std::size_t> group;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == l) group.push_back(i);
      std::shuffle(group.begin(), group.end(), rng);
      order.insert(order.end(), group.begin(), group.end());
    }
  } else {
    order.resize(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

MeanStd aggregate(std::span<const double> values) {
  if (values.empty()) throw Error("aggregate: no values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

PrfSummary aggregate(std::span<const Prf> scores) {
  std::vector<double> p, r, f;
  for (const auto& s : scores) {
    p.push_back(s.precision);
    r.push_back(s.recall);
    f.push_back(s.f1);
  }
  return {aggregate(p), aggregate(r), aggregate(f)};
}

namespace {

Verdict paired_t(const std::vector<double>& d, double alpha) {
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1));
  Verdict v;
  if (sd == 0.0) {
    if (mean == 0.0) return v;
    v.degenerate = true;
    v.reject = true;
    v.p_value = 0.0;
    v.statistic = mean > 0 ? INFINITY : -INFINITY;
    return v;
  }
  v.statistic = mean / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1);
  v.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(v.statistic))));
  v.reject = v.p_value < alpha;
  return v;
}

/// Normal approximation with tie correction; zero differences are dropped.
Verdict wilcoxon(const std::vector<double>& d, double alpha) {
  std::vector<double> nz;
  for (double x : d)
    if (x != 0.0) nz.push_back(x);
  Verdict v;
  if (nz.empty()) return v;
  std::vector<std::size_t> order(nz.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  std::vector<double> rank(nz.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const double avg = (static_cast<double>(i + j) + 2.0) / 2.0;
    for (std::size_t q = i; q <= j; ++q) rank[order[q]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < nz.size(); ++i)
    if (nz[i] > 0) w_plus += rank[i];
  const double n = static_cast<double>(nz.size());
  const double mean = n * (n + 1) / 4.0;
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
  if (var <= 0) return v;
  v.statistic = (w_plus - mean) / std::sqrt(var);
  boost::math::normal dist;
  v.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(v.statistic))));
  v.reject = v.p_value < alpha;
  return v;
}

}  // namespace

Verdict significance_test(std::span<const double> runs_a, std::span<const double> runs_b,
                          double alpha, SignificanceTest test) {
  if (runs_a.size() != runs_b.size())
    throw DimensionError("significance_test: run lists differ in length (" +
                         std::to_string(runs_a.size()) + " vs " + std::to_string(runs_b.size()) + ")");
  if (runs_a.size() < 2) throw Error("significance_test: need at least 2 paired runs");
  if (!(alpha > 0 && alpha < 1)) throw Error("significance_test: alpha must be in (0, 1)");
  std::vector<double> d(runs_a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = runs_b[i] - runs_a[i];
  return test == SignificanceTest::PairedT ? paired_t(d, alpha) : wilcoxon(d, alpha);
}

}  // namespace churn
