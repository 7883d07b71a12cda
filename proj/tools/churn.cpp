#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "churn/align.hpp"
#include "churn/datasets.hpp"
#include "churn/embeddings.hpp"
#include "churn/evaluation.hpp"
#include "churn/model.hpp"
#include "churn/service.hpp"
#include "churn/textprep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MissingFile : churn::Error {
  using churn::Error::Error;
};

const fs::path& require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingFile("no such file: " + p.string());
  return p;
}

void print_config(const std::string& command, const json& config) {
  std::cerr << "churn: " << command << ": config " << config.dump() << '\n';
}

/// "lang=path" or plain "path" (language from `fallback`).
std::pair<std::string, fs::path> split_spec(const std::string& spec, const std::string& fallback) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) return {fallback, spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

struct EmbeddingOptions {
  std::vector<std::string> tables;  // lang=path
  std::string align;
  std::size_t max_words = 0;
};

void add_embedding_options(CLI::App* cmd, EmbeddingOptions& o) {
  cmd->add_option("--emb", o.tables, "word vectors, lang=path (repeatable)")->required();
  cmd->add_option("--align", o.align, "alignment transform; maps its source-language table");
  cmd->add_option("--max-words", o.max_words, "read at most this many vectors per table");
}

json describe(const EmbeddingOptions& o) {
  return {{"emb", o.tables}, {"align", o.align}, {"max_words", o.max_words}};
}

churn::EmbeddingSpace build_space(const EmbeddingOptions& o) {
  std::optional<churn::AlignmentTransform> transform;
  if (!o.align.empty()) transform = churn::load_transform(require_file(o.align));
  churn::EmbeddingSpace space;
  for (const auto& spec : o.tables) {
    auto [lang, path] = split_spec(spec, "en");
    auto emb = churn::load_embeddings(require_file(path), lang,
                                      o.max_words ? std::optional<std::size_t>(o.max_words)
                                                  : std::nullopt);
    if (transform && lang == transform->source_language())
      emb = churn::apply_alignment(*transform, emb);
    else if (transform && lang == transform->target_language())
      emb = churn::project_target(*transform, emb);
    space.add(std::move(emb));
  }
  return space;
}

churn::BrandLexicon build_lexicon(const std::vector<std::string>& specs) {
  churn::BrandLexicon lexicon;
  for (const auto& spec : specs) {
    auto [lang, path] = split_spec(spec, "");
    churn::load_lexicon_into(lexicon, require_file(path), lang);
  }
  return lexicon;
}

struct ModelOptions {
  churn::ModelConfig config;
  void add(CLI::App* cmd) {
    cmd->add_option("--filters", config.filters, "convolution filters")->capture_default_str();
    cmd->add_option("--kernel", config.kernel, "convolution kernel size")->capture_default_str();
    cmd->add_option("--gru-units", config.gru_units, "GRU units per direction")->capture_default_str();
    cmd->add_option("--dropout", config.dropout, "embedding dropout rate")->capture_default_str();
    cmd->add_option("--max-len", config.max_len, "padded length, 0 = longest training text")
        ->capture_default_str();
    cmd->add_option("--max-epochs", config.max_epochs)->capture_default_str();
    cmd->add_option("--patience", config.patience)->capture_default_str();
    cmd->add_option("--min-loss-improvement", config.min_loss_improvement)->capture_default_str();
    cmd->add_option("--batch-size", config.batch_size)->capture_default_str();
    cmd->add_option("--lr", config.learning_rate)->capture_default_str();
    cmd->add_flag("--strip-target", config.strip_target, "remove source brand mentions from training text");
  }
};

/// DatasetRef from "name=path" or "path" (name = file stem).
churn::DatasetRef load_ref(const std::string& spec, double min_confidence) {
  auto [name, path] = split_spec(spec, "");
  if (name.empty()) name = path.stem().string();
  return {name, churn::load_dataset(require_file(path), min_confidence)};
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(require_file(path));
  if (!in) throw churn::Error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::unique_ptr<std::ostream> open_out(const std::string& path) {
  auto out = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*out) throw churn::Error("cannot write " + path);
  return out;
}

churn::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Churn intent detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value config file; flags override it");
  app.allow_config_extras(false);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();

  // align
  auto* align = app.add_subcommand("align", "fit a source->target embedding alignment");
  std::string src_emb, tgt_emb, dict_path, dict_test, align_out, src_lang = "de", tgt_lang = "en";
  double threshold = 1.0;
  std::size_t align_max_words = 0;
  bool mean_center = false;
  align->add_option("--src-emb", src_emb)->required();
  align->add_option("--tgt-emb", tgt_emb)->required();
  align->add_option("--dict", dict_path, "TAB-separated source/target pairs")->required();
  align->add_option("--dict-test", dict_test, "separate test pairs; otherwise a 90/10 split");
  align->add_option("--threshold", threshold, "singular value cutoff")->capture_default_str();
  align->add_option("--out", align_out)->required();
  align->add_option("--src-lang", src_lang)->capture_default_str();
  align->add_option("--tgt-lang", tgt_lang)->capture_default_str();
  align->add_option("--max-words", align_max_words);
  align->add_flag("--mean-center", mean_center);

  // train
  auto* train = app.add_subcommand("train", "train one model on all given data");
  std::vector<std::string> train_data, train_eval, lexicons;
  std::string train_out;
  double min_confidence = 0.0;
  bool no_augment = false;
  EmbeddingOptions train_emb;
  ModelOptions train_model;
  train->add_option("--data", train_data, "training dataset CSV (repeatable)")->required();
  train->add_option("--eval-data", train_eval, "held-out CSV for best-epoch selection");
  train->add_option("--lexicon", lexicons, "brand lexicon, lang=path (repeatable)");
  train->add_option("--min-confidence", min_confidence)->capture_default_str();
  train->add_flag("--no-augment", no_augment);
  train->add_option("--out", train_out, "checkpoint path")->required();
  add_embedding_options(train, train_emb);
  train_model.add(train);

  // eval
  auto* eval = app.add_subcommand("eval", "cross-validation or transfer experiment");
  std::vector<std::string> eval_data, eval_test, eval_transfer, eval_lexicons;
  std::string eval_name = "experiment", eval_out, checkpoint_dir;
  churn::EvalConfig eval_config;
  bool no_stratify = false, eval_no_augment = false;
  double eval_min_confidence = 0.0;
  EmbeddingOptions eval_emb;
  ModelOptions eval_model;
  eval->add_option("--data", eval_data, "training dataset, name=path (repeatable)")->required();
  eval->add_option("--test", eval_test, "CV test set names (default: all --data)");
  eval->add_option("--transfer", eval_transfer, "transfer test sets, name=path; switches mode");
  eval->add_option("--lexicon", eval_lexicons, "brand lexicon, lang=path (repeatable)");
  eval->add_option("--name", eval_name)->capture_default_str();
  eval->add_option("--folds", eval_config.folds)->capture_default_str();
  eval->add_option("--runs", eval_config.runs)->capture_default_str();
  eval->add_option("--alpha", eval_config.alpha)->capture_default_str();
  eval->add_flag("--no-stratify", no_stratify);
  eval->add_flag("--no-augment", eval_no_augment);
  eval->add_option("--min-confidence", eval_min_confidence)->capture_default_str();
  eval->add_option("--out", eval_out, "report JSON path");
  eval->add_option("--checkpoint-dir", checkpoint_dir, "write the best checkpoint of every fold");
  add_embedding_options(eval, eval_emb);
  eval_model.add(eval);

  // compare
  auto* compare = app.add_subcommand("compare", "significance test between two reports");
  std::string report_a, report_b, compare_set, compare_test = "t";
  double compare_alpha = 0.05;
  compare->add_option("report_a", report_a)->required();
  compare->add_option("report_b", report_b)->required();
  compare->add_option("--test-set", compare_set)->required();
  compare->add_option("--alpha", compare_alpha)->capture_default_str();
  compare->add_option("--method", compare_test, "t or wilcoxon")
      ->check(CLI::IsMember({"t", "wilcoxon"}))
      ->capture_default_str();

  // predict
  auto* predict = app.add_subcommand("predict", "classify text");
  std::string model_path, text, text_file, language, medium = "twitter", brand;
  std::vector<std::string> predict_lexicons;
  EmbeddingOptions predict_emb;
  predict->add_option("--model", model_path)->required();
  predict->add_option("--lexicon", predict_lexicons, "brand lexicon, lang=path (repeatable)");
  auto* text_opt = predict->add_option("--text", text);
  auto* file_opt = predict->add_option("--file", text_file, "one text per line");
  text_opt->excludes(file_opt);
  predict->add_option("--language", language, "en or de; detected when omitted")
      ->check(CLI::IsMember({"en", "de"}));
  predict->add_option("--medium", medium)->check(CLI::IsMember({"twitter", "chatbot"}))->capture_default_str();
  predict->add_option("--brand", brand, "source brand id");
  add_embedding_options(predict, predict_emb);

  // bootstrap
  auto* bootstrap = app.add_subcommand("bootstrap", "select annotation candidates from raw text");
  std::string boot_model, corpus_path, keywords_path, boot_out, boot_lang = "de";
  double confidence = 0.9;
  std::vector<std::string> boot_lexicons;
  EmbeddingOptions boot_emb;
  bootstrap->add_option("--model", boot_model, "checkpoint; enables model selection");
  bootstrap->add_option("--corpus", corpus_path, "one text per line")->required();
  bootstrap->add_option("--keywords", keywords_path, "keyword list; enables keyword filtering");
  bootstrap->add_option("--confidence", confidence)->capture_default_str();
  bootstrap->add_option("--language", boot_lang)->capture_default_str();
  bootstrap->add_option("--lexicon", boot_lexicons);
  bootstrap->add_option("--out", boot_out)->required();
  bootstrap->add_option("--emb", boot_emb.tables, "word vectors, lang=path (with --model)");
  bootstrap->add_option("--align", boot_emb.align);
  bootstrap->add_option("--max-words", boot_emb.max_words);

  // serve
  auto* serve = app.add_subcommand("serve", "run the annotation service");
  std::string serve_model, store = "feedback", host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> serve_lexicons;
  EmbeddingOptions serve_emb;
  serve->add_option("--model", serve_model, "checkpoint; without it /predict answers 503");
  serve->add_option("--store", store, "feedback store directory")->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--lexicon", serve_lexicons);
  serve->add_option("--emb", serve_emb.tables, "word vectors, lang=path (with --model)");
  serve->add_option("--align", serve_emb.align);
  serve->add_option("--max-words", serve_emb.max_words);

  // export
  auto* exporter = app.add_subcommand("export", "write confirmed feedback as dataset CSV");
  std::string export_store, export_out;
  exporter->add_option("--store", export_store)->required();
  exporter->add_option("--out", export_out)->required();

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "label counts of a dataset");
  std::string stats_data, group = "brand";
  std::size_t top_n = 3;
  double stats_min_confidence = 0.0;
  stats_cmd->add_option("--data", stats_data)->required();
  stats_cmd->add_option("--group", group)->check(CLI::IsMember({"brand", "language"}))->capture_default_str();
  stats_cmd->add_option("--top", top_n)->capture_default_str();
  stats_cmd->add_option("--min-confidence", stats_min_confidence)->capture_default_str();
  bool stats_json = false;
  stats_cmd->add_flag("--json", stats_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "churn: error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*align) {
      print_config("align", {{"src_emb", src_emb}, {"tgt_emb", tgt_emb}, {"dict", dict_path},
                             {"dict_test", dict_test}, {"threshold", threshold}, {"out", align_out},
                             {"src_lang", src_lang}, {"tgt_lang", tgt_lang},
                             {"mean_center", mean_center}, {"seed", seed}});
      auto dict = dict_test.empty() ? churn::load_dictionary(require_file(dict_path), seed)
                                    : churn::load_dictionary(require_file(dict_path),
                                                             require_file(dict_test));
      std::optional<std::size_t> limit;
      if (align_max_words) limit = align_max_words;
      auto src = churn::load_embeddings(require_file(src_emb), src_lang, limit);
      auto tgt = churn::load_embeddings(require_file(tgt_emb), tgt_lang, limit);
      auto m = churn::build_dictionary_matrices(dict, churn::DictionarySplit::Train, src, tgt);
      auto t = churn::fit_alignment(m.source, m.target, threshold,
                                    {src_lang, tgt_lang, mean_center});
      churn::save_transform(t, align_out);
      std::cout << "pairs\t" << m.kept_pairs.size() << "\ndropped\t" << m.dropped << "\nrank\t"
                << t.rank() << '/' << t.dim() << '\n';
      if (!dict.test_split.empty())
        std::cout << "precision@1\t" << churn::evaluate_alignment(t, dict, src, tgt, 1) << '\n';
      return 0;
    }

    if (*train) {
      auto config = train_model.config;
      config.seed = seed;
      print_config("train", {{"data", train_data}, {"eval_data", train_eval}, {"lexicon", lexicons},
                             {"min_confidence", min_confidence}, {"augment", !no_augment},
                             {"out", train_out}, {"embeddings", describe(train_emb)},
                             {"model", config}});
      auto lexicon = build_lexicon(lexicons);
      auto space = build_space(train_emb);
      config.embed_dim = space.dim();
      std::vector<churn::LabeledExample> examples;
      for (const auto& spec : train_data)
        for (const auto& e : load_ref(spec, min_confidence).examples) {
          auto more = no_augment ? std::vector<churn::LabeledExample>{e} : churn::augment(e, lexicon);
          examples.insert(examples.end(), more.begin(), more.end());
        }
      std::vector<churn::EvalSet> evals;
      for (const auto& spec : train_eval) {
        auto ref = load_ref(spec, min_confidence);
        evals.push_back({ref.name, std::move(ref.examples)});
      }
      churn::TrainOptions options;
      options.on_epoch = [&](const churn::EpochRecord& r) {
        std::cerr << "churn: train: epoch " << r.epoch << " loss " << r.train_loss;
        for (std::size_t i = 0; i < r.scores.size(); ++i)
          std::cerr << ' ' << evals[i].name << " f1 " << r.scores[i].f1;
        std::cerr << '\n';
        return true;
      };
      auto result = churn::train(examples, evals, space, lexicon, config, options);
      churn::save_checkpoint(result.best, train_out);
      std::cout << "examples\t" << examples.size() << "\nskipped_empty\t" << result.skipped_empty
                << "\nepochs\t" << result.history.size() << "\nbest_epoch\t"
                << result.best.best_epoch << '\n';
      return 0;
    }

    if (*eval) {
      auto config = eval_model.config;
      eval_config.seed = seed;
      eval_config.stratified = !no_stratify;
      churn::ExperimentSpec spec;
      spec.name = eval_name;
      spec.augment = !eval_no_augment;
      auto lexicon = build_lexicon(eval_lexicons);
      auto space = build_space(eval_emb);
      config.embed_dim = space.dim();
      for (const auto& d : eval_data) spec.train.push_back(load_ref(d, eval_min_confidence));
      if (!eval_transfer.empty()) {
        spec.mode = churn::ExperimentMode::Transfer;
        for (const auto& d : eval_transfer) spec.transfer_test.push_back(load_ref(d, 0.0));
      } else {
        spec.cv_test = eval_test;
        if (spec.cv_test.empty())
          for (const auto& d : spec.train) spec.cv_test.push_back(d.name);
      }
      print_config("eval", {{"name", eval_name}, {"data", eval_data}, {"test", spec.cv_test},
                            {"transfer", eval_transfer}, {"folds", eval_config.folds},
                            {"runs", eval_config.runs}, {"alpha", eval_config.alpha},
                            {"stratified", eval_config.stratified}, {"augment", spec.augment},
                            {"seed", seed}, {"out", eval_out}, {"checkpoint_dir", checkpoint_dir},
                            {"embeddings", describe(eval_emb)}, {"model", config}});
      if (!checkpoint_dir.empty()) fs::create_directories(checkpoint_dir);
      auto report = churn::run_experiment(
          spec, space, lexicon, config, eval_config,
          [&](std::size_t run, std::size_t fold, const churn::TrainResult& r) {
            std::cerr << "churn: eval: run " << run << " fold " << fold << " epochs "
                      << r.history.size() << '\n';
            if (!checkpoint_dir.empty())
              churn::save_checkpoint(r.best, fs::path(checkpoint_dir) /
                                                 ("run" + std::to_string(run) + "_fold" +
                                                  std::to_string(fold) + ".chk"));
          });
      if (!eval_out.empty()) *open_out(eval_out) << churn::report_to_json(report).dump(2) << '\n';
      std::cout << churn::format_report(report);
      return 0;
    }

    if (*compare) {
      print_config("compare", {{"a", report_a}, {"b", report_b}, {"test_set", compare_set},
                               {"alpha", compare_alpha}, {"method", compare_test}});
      auto run_f1 = [&](const std::string& path) {
        std::ifstream in(require_file(path));
        json j = json::parse(in);
        for (const auto& t : j.at("tests"))
          if (t.at("test_set") == compare_set) return t.at("run_f1").get<std::vector<double>>();
        throw churn::Error(path + " has no test set '" + compare_set + "'");
      };
      auto a = run_f1(report_a), b = run_f1(report_b);
      auto v = churn::significance_test(a, b, compare_alpha,
                                        compare_test == "t" ? churn::SignificanceTest::PairedT
                                                            : churn::SignificanceTest::Wilcoxon);
      std::cout << "statistic\t" << v.statistic << "\np_value\t" << v.p_value << "\nreject\t"
                << (v.reject ? "yes" : "no") << (v.degenerate ? "\ndegenerate\tyes" : "") << '\n';
      return 0;
    }

    if (*predict) {
      print_config("predict", {{"model", model_path}, {"text", text}, {"file", text_file},
                               {"language", language}, {"medium", medium}, {"brand", brand},
                               {"lexicon", predict_lexicons},
                               {"embeddings", describe(predict_emb)}});
      if (text_opt->count() == 0 && file_opt->count() == 0)
        throw churn::Error("predict needs --text or --file");
      auto params = churn::load_checkpoint(require_file(model_path));
      churn::Classifier classifier(std::move(params), build_space(predict_emb),
                                   build_lexicon(predict_lexicons));
      std::vector<std::string> inputs =
          text_opt->count() ? std::vector<std::string>{text} : read_lines(text_file);
      for (const auto& line : inputs) {
        churn::LabeledExample ex;
        ex.raw_text = line;
        ex.language = language.empty() ? churn::detect_language(line).language : language;
        ex.medium = *churn::parse_medium(medium);
        if (!brand.empty()) ex.source_brand = brand;
        auto p = classifier.predict(ex);
        std::cout << churn::to_string(p.label) << '\t' << p.confidence << '\n';
      }
      return 0;
    }

    if (*bootstrap) {
      print_config("bootstrap", {{"model", boot_model}, {"corpus", corpus_path},
                                 {"keywords", keywords_path}, {"confidence", confidence},
                                 {"language", boot_lang}, {"out", boot_out},
                                 {"embeddings", describe(boot_emb)}});
      if (boot_model.empty() && keywords_path.empty())
        throw churn::Error("bootstrap needs --keywords, --model or both");
      auto corpus = read_lines(corpus_path);
      if (corpus.empty()) throw churn::Error("corpus " + corpus_path + " is empty");
      std::vector<std::string> pool = corpus;
      if (!keywords_path.empty()) {
        auto keywords = churn::load_keywords(require_file(keywords_path));
        pool.clear();
        for (auto& hit : churn::keyword_filter(corpus, keywords)) pool.push_back(std::move(hit.text));
        std::cerr << "churn: bootstrap: keyword filter kept " << pool.size() << " of "
                  << corpus.size() << '\n';
      }
      std::vector<churn::LabeledExample> out;
      if (!boot_model.empty()) {
        if (boot_emb.tables.empty()) throw churn::Error("--model requires --emb");
        churn::Classifier classifier(churn::load_checkpoint(require_file(boot_model)),
                                     build_space(boot_emb), build_lexicon(boot_lexicons));
        for (const auto& c : churn::bootstrap_select(classifier, pool, confidence, boot_lang)) {
          churn::LabeledExample e;
          e.id = "cand-" + std::to_string(out.size() + 1);
          e.raw_text = c.text;
          e.label = churn::Label::Churn;
          e.confidence = c.churn_probability;
          e.language = boot_lang;
          out.push_back(std::move(e));
        }
      } else {
        for (const auto& t : pool) {
          churn::LabeledExample e;
          e.id = "cand-" + std::to_string(out.size() + 1);
          e.raw_text = t;
          e.language = boot_lang;
          e.confidence = 0.0;
          out.push_back(std::move(e));
        }
      }
      churn::save_dataset(out, boot_out);
      std::cout << "candidates\t" << out.size() << '\n';
      return 0;
    }

    if (*serve) {
      print_config("serve", {{"model", serve_model}, {"store", store}, {"host", host},
                             {"port", port}, {"lexicon", serve_lexicons},
                             {"embeddings", describe(serve_emb)}});
      std::shared_ptr<const churn::Classifier> model;
      if (!serve_model.empty()) {
        if (serve_emb.tables.empty()) throw churn::Error("--model requires --emb");
        model = std::make_shared<const churn::Classifier>(
            churn::load_checkpoint(require_file(serve_model)), build_space(serve_emb),
            build_lexicon(serve_lexicons));
      }
      churn::FeedbackStore feedback(store);
      churn::AnnotationService service(model, feedback);
      churn::HttpServer server(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "churn: serve: listening on " << host << ':' << bound << '\n';
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (*exporter) {
      print_config("export", {{"store", export_store}, {"out", export_out}});
      if (!fs::is_directory(export_store)) throw MissingFile("no such store: " + export_store);
      churn::FeedbackStore feedback(export_store);
      std::cout << "rows\t" << churn::export_confirmed(feedback, export_out) << '\n';
      return 0;
    }

    if (*stats_cmd) {
      print_config("stats", {{"data", stats_data}, {"group", group}, {"top", top_n},
                             {"min_confidence", stats_min_confidence}});
      churn::LoadReport report;
      auto data = churn::load_dataset(require_file(stats_data), stats_min_confidence, &report);
      auto s = churn::stats(data,
                            group == "brand" ? churn::StatsGrouping::Brand
                                             : churn::StatsGrouping::Language,
                            top_n);
      if (stats_json) {
        json j;
        for (const auto& g : s.groups)
          j["groups"].push_back({{"group", g.group}, {"churn", g.churn}, {"non_churn", g.non_churn}});
        j["churn"] = s.churn;
        j["non_churn"] = s.non_churn;
        j["dropped_low_confidence"] = report.dropped_low_confidence;
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << churn::format_stats(s);
      }
      return 0;
    }
  } catch (const MissingFile& e) {
    std::cerr << "churn: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "churn: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
