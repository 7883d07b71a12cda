#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "churn/embeddings.hpp"
#include "churn/metrics.hpp"
#include "churn/model.hpp"
#include "churn/textprep.hpp"

namespace churn {

struct EvalConfig {
  std::size_t folds = 10;
  std::size_t runs = 20;
  double alpha = 0.05;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetRef {
  std::string name;  // e.g. "EN_T", "DE_C"
  std::vector<LabeledExample> examples;
};

enum class ExperimentMode {
  /// k-fold CV per training dataset; fold i of every dataset is held out
  /// together and each held-out dataset listed in `cv_test` is scored.
  CrossValidation,
  /// Train once per run on all training data, score the `transfer_test`
  /// sets with the converged model.
  Transfer,
};

struct ExperimentSpec {
  std::string name;
  ExperimentMode mode = ExperimentMode::CrossValidation;
  std::vector<DatasetRef> train;
  std::vector<std::string> cv_test;       // names from `train`
  std::vector<DatasetRef> transfer_test;  // Transfer mode only
  bool augment = true;
};

struct FoldScore {
  std::size_t run = 0;
  std::size_t fold = 0;
  std::string test_set;
  Prf best;  // max over epochs (CV) / converged model (Transfer)
  Prf last;
  int best_epoch = -1;
  int epochs = 0;
};

struct TestSummary {
  std::string test_set;
  PrfSummary summary;           // over every fold of every run
  std::vector<double> run_f1;   // per run, mean over folds
};

struct EvalReport {
  std::string name;
  EvalConfig config;
  ModelConfig model;
  std::vector<FoldScore> folds;
  std::vector<TestSummary> tests;

  const TestSummary& test(const std::string& name) const;
};

/// Called after every trained model with (run, fold, result).
using FoldCallback = std::function<void(std::size_t, std::size_t, const TrainResult&)>;

/// Seed for (base, run, fold) via splitmix64 mixing; independent streams
/// per job.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run, std::uint64_t fold);

EvalReport run_experiment(const ExperimentSpec& spec, const EmbeddingSpace& space,
                          const BrandLexicon& lexicon, const ModelConfig& model,
                          const EvalConfig& config, const FoldCallback& on_fold = {});

/// Paired test on the per-run F1 of `test_set` in two reports.
Verdict compare_reports(const EvalReport& a, const EvalReport& b, const std::string& test_set,
                        double alpha = 0.05, SignificanceTest test = SignificanceTest::PairedT);

nlohmann::json report_to_json(const EvalReport& r);
std::string format_report(const EvalReport& r);

}  // namespace churn
