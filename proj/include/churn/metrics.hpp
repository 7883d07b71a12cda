#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "churn/common.hpp"

namespace churn {

/// Macro-averaged precision, recall and F1 over the two classes.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class metrics with a zero convention for empty denominators,
/// averaged unweighted over {non_churn, churn}.
Prf macro_prf(std::span<const Label> predictions, std::span<const Label> golds);

/// k disjoint folds of indices 0..n-1 covering everything, sizes within 1.
/// Stratified mode deals each label's shuffled indices round-robin so the
/// per-fold count of every label also differs by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::span<const Label> labels, std::size_t k,
                                                  std::uint64_t seed, bool stratified = true);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd aggregate(std::span<const double> values);

struct PrfSummary {
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
};

PrfSummary aggregate(std::span<const Prf> scores);

enum class SignificanceTest { PairedT, Wilcoxon };

struct Verdict {
  bool reject = false;
  double p_value = 1.0;
  double statistic = 0.0;
  /// All paired differences are equal and nonzero: the t statistic is
  /// unbounded; reported as reject with p = 0.
  bool degenerate = false;
};

/// Two-sided paired test on per-run scores; rejects when p < alpha.
Verdict significance_test(std::span<const double> runs_a, std::span<const double> runs_b,
                          double alpha = 0.05, SignificanceTest test = SignificanceTest::PairedT);

}  // namespace churn
