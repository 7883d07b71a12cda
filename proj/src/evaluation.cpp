#include "churn/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace churn {

void EvalConfig::validate() const {
  if (folds < 2) throw Error("folds must be >= 2");
  if (runs < 1) throw Error("runs must be >= 1");
  if (!(alpha > 0 && alpha < 1)) throw Error("alpha must be in (0, 1)");
}

const TestSummary& EvalReport::test(const std::string& name) const {
  for (const auto& t : tests)
    if (t.test_set == name) return t;
  throw Error("report '" + this->name + "' has no test set '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run, std::uint64_t fold) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ run) ^ (fold * 0x632BE59BD9B4E019ull));
}

namespace {

std::vector<LabeledExample> augmented(const std::vector<LabeledExample>& in,
                                      const BrandLexicon& lexicon, bool enabled) {
  if (!enabled) return in;
  std::vector<LabeledExample> out;
  for (const auto& e : in) {
    auto more = augment(e, lexicon);
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

std::vector<Label> labels_of(const std::vector<LabeledExample>& xs) {
  std::vector<Label> out;
  for (const auto& x : xs) out.push_back(x.label);
  return out;
}

}  // namespace

EvalReport run_experiment(const ExperimentSpec& spec, const EmbeddingSpace& space,
                          const BrandLexicon& lexicon, const ModelConfig& model,
                          const EvalConfig& config, const FoldCallback& on_fold) {
  config.validate();
  if (spec.train.empty()) throw Error("experiment '" + spec.name + "' has no training data");

  EvalReport report;
  report.name = spec.name;
  report.config = config;
  report.model = model;

  std::vector<std::string> test_names;
  if (spec.mode == ExperimentMode::CrossValidation) {
    for (const auto& t : spec.cv_test) {
      bool found = false;
      for (const auto& d : spec.train) found = found || d.name == t;
      if (!found) throw Error("CV test set '" + t + "' is not among the training datasets");
      test_names.push_back(t);
    }
  } else {
    for (const auto& t : spec.transfer_test) test_names.push_back(t.name);
  }
  if (test_names.empty()) throw Error("experiment '" + spec.name + "' has no test set");

  std::map<std::string, std::vector<std::vector<double>>> per_run_f1;  // test -> run -> fold F1s

  for (std::size_t run = 0; run < config.runs; ++run) {
    if (spec.mode == ExperimentMode::Transfer) {
      std::vector<LabeledExample> train_set;
      for (const auto& d : spec.train) {
        auto a = augmented(d.examples, lexicon, spec.augment);
        train_set.insert(train_set.end(), a.begin(), a.end());
      }
      std::vector<EvalSet> evals;
      for (const auto& t : spec.transfer_test) evals.push_back({t.name, t.examples});
      ModelConfig mc = model;
      mc.seed = derive_seed(config.seed, run, 0);
      auto result = train(train_set, evals, space, lexicon, mc);
      for (std::size_t i = 0; i < evals.size(); ++i) {
        FoldScore fs{run, 0, evals[i].name, result.last_score(i), result.last_score(i),
                     result.last.best_epoch, static_cast<int>(result.history.size())};
        report.folds.push_back(fs);
        per_run_f1[fs.test_set].resize(config.runs);
        per_run_f1[fs.test_set][run].push_back(fs.best.f1);
      }
      if (on_fold) on_fold(run, 0, result);
      continue;
    }

    std::vector<std::vector<std::vector<std::size_t>>> folds;  // dataset -> fold -> indices
    for (std::size_t d = 0; d < spec.train.size(); ++d) {
      auto labels = labels_of(spec.train[d].examples);
      folds.push_back(
          kfold_split(labels, config.folds, derive_seed(config.seed, run, name_hash(spec.train[d].name)),
                      config.stratified));
    }
    for (std::size_t fold = 0; fold < config.folds; ++fold) {
      std::vector<LabeledExample> train_set;
      std::vector<EvalSet> evals;
      for (std::size_t d = 0; d < spec.train.size(); ++d) {
        const auto& ds = spec.train[d];
        std::vector<bool> held(ds.examples.size(), false);
        for (std::size_t i : folds[d][fold]) held[i] = true;
        std::vector<LabeledExample> tr, te;
        for (std::size_t i = 0; i < ds.examples.size(); ++i)
          (held[i] ? te : tr).push_back(ds.examples[i]);
        auto a = augmented(tr, lexicon, spec.augment);
        train_set.insert(train_set.end(), a.begin(), a.end());
        if (std::find(test_names.begin(), test_names.end(), ds.name) != test_names.end())
          evals.push_back({ds.name, std::move(te)});
      }
      ModelConfig mc = model;
      mc.seed = derive_seed(config.seed, run, fold);
      auto result = train(train_set, evals, space, lexicon, mc);
      for (std::size_t i = 0; i < evals.size(); ++i) {
        int best_epoch = -1;
        double best_f1 = -1;
        for (const auto& h : result.history)
          if (h.scores[i].f1 > best_f1) {
            best_f1 = h.scores[i].f1;
            best_epoch = h.epoch;
          }
        FoldScore fs{run, fold, evals[i].name, result.best_score(i), result.last_score(i),
                     best_epoch, static_cast<int>(result.history.size())};
        report.folds.push_back(fs);
        per_run_f1[fs.test_set].resize(config.runs);
        per_run_f1[fs.test_set][run].push_back(fs.best.f1);
      }
      if (on_fold) on_fold(run, fold, result);
    }
  }

  for (const auto& name : test_names) {
    TestSummary ts;
    ts.test_set = name;
    std::vector<Prf> scores;
    for (const auto& f : report.folds)
      if (f.test_set == name) scores.push_back(f.best);
    ts.summary = aggregate(scores);
    for (const auto& run : per_run_f1[name]) ts.run_f1.push_back(aggregate(run).mean);
    report.tests.push_back(std::move(ts));
  }
  return report;
}

Verdict compare_reports(const EvalReport& a, const EvalReport& b, const std::string& test_set,
                        double alpha, SignificanceTest test) {
  return significance_test(a.test(test_set).run_f1, b.test(test_set).run_f1, alpha, test);
}

nlohmann::json report_to_json(const EvalReport& r) {
  using nlohmann::json;
  auto prf = [](const Prf& p) { return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; };
  auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}}; };
  json j;
  j["name"] = r.name;
  j["eval_config"] = {{"folds", r.config.folds},
                      {"runs", r.config.runs},
                      {"alpha", r.config.alpha},
                      {"stratified", r.config.stratified},
                      {"seed", r.config.seed}};
  j["model_config"] = r.model;
  j["folds"] = json::array();
  for (const auto& f : r.folds)
    j["folds"].push_back({{"run", f.run},
                          {"fold", f.fold},
                          {"test_set", f.test_set},
                          {"best", prf(f.best)},
                          {"last", prf(f.last)},
                          {"best_epoch", f.best_epoch},
                          {"epochs", f.epochs}});
  j["tests"] = json::array();
  for (const auto& t : r.tests)
    j["tests"].push_back({{"test_set", t.test_set},
                          {"precision", ms(t.summary.precision)},
                          {"recall", ms(t.summary.recall)},
                          {"f1", ms(t.summary.f1)},
                          {"run_f1", t.run_f1}});
  return j;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "experiment: " << r.name << "  (folds=" << r.config.folds << ", runs=" << r.config.runs
      << ", seed=" << r.config.seed << ")\n";
  out << "test_set\tF1 (%)\tPrecision (%)\tRecall (%)\n";
  for (const auto& t : r.tests) {
    auto cell = [](const MeanStd& m) {
      std::ostringstream c;
      c << std::fixed << std::setprecision(2) << 100 * m.mean << " ± " << 100 * m.std;
      return c.str();
    };
    out << t.test_set << '\t' << cell(t.summary.f1) << '\t' << cell(t.summary.precision) << '\t'
        << cell(t.summary.recall) << '\n';
  }
  return out.str();
}

}  // namespace churn
