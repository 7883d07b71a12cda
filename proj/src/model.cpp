#include "churn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "churn/checkpoint.hpp"

namespace churn {

void ModelConfig::validate() const {
  if (embed_dim <= 0 || filters <= 0 || kernel <= 0 || gru_units <= 0)
    throw Error("model dimensions must be positive");
  if (num_classes != 2) throw Error("only binary classification is supported");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0, 1)");
  if (max_len != 0 && max_len < kernel)
    throw Error("max_len " + std::to_string(max_len) + " is shorter than kernel " +
                std::to_string(kernel));
  if (max_epochs <= 0 || patience <= 0 || batch_size <= 0)
    throw Error("max_epochs, patience and batch_size must be positive");
  if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"embed_dim", c.embed_dim},   {"filters", c.filters},
       {"kernel", c.kernel},         {"gru_units", c.gru_units},
       {"dropout", c.dropout},       {"max_len", c.max_len},
       {"num_classes", c.num_classes}, {"max_epochs", c.max_epochs},
       {"patience", c.patience},     {"min_loss_improvement", c.min_loss_improvement},
       {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"seed", c.seed},             {"strip_target", c.strip_target}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("filters").get_to(c.filters);
  j.at("kernel").get_to(c.kernel);
  j.at("gru_units").get_to(c.gru_units);
  j.at("dropout").get_to(c.dropout);
  j.at("max_len").get_to(c.max_len);
  j.at("num_classes").get_to(c.num_classes);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("patience").get_to(c.patience);
  j.at("min_loss_improvement").get_to(c.min_loss_improvement);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("seed").get_to(c.seed);
  j.at("strip_target").get_to(c.strip_target);
}

EncodedInput encode(const Utterance& u, const WordEmbeddings& emb, const ModelConfig& config) {
  if (u.tokens.empty())
    throw Error("utterance is empty after preprocessing: \"" + u.raw_text + "\"");
  if (emb.dim() != config.embed_dim)
    throw DimensionError("model expects embed_dim " + std::to_string(config.embed_dim) +
                         " but embeddings have dim " + std::to_string(emb.dim()));
  const Index n = config.max_len;
  EncodedInput out;
  out.truncated = static_cast<Index>(u.tokens.size()) > n;
  const auto used = std::min<std::size_t>(u.tokens.size(), static_cast<std::size_t>(n));
  out.matrix = Matrix<float>::Zero(n, config.embed_dim);
  out.matrix.topRows(static_cast<Index>(used)) =
      lookup(emb, std::span<const std::string>(u.tokens.data(), used));
  return out;
}

namespace {

const WordEmbeddings& select_table(const EmbeddingSpace& space, const std::string& language) {
  if (space.has(language)) return space.at(language);
  auto langs = space.languages();
  if (langs.size() == 1) return space.at(langs.front());
  throw Error("no embeddings for language '" + language + "'");
}

struct Encoded {
  std::vector<Matrix<float>> inputs;
  std::vector<Label> labels;
};

Encoded encode_all(std::span<const LabeledExample> examples, const EmbeddingSpace& space,
                   const BrandLexicon& lexicon, const ModelConfig& config, std::size_t& truncated,
                   std::size_t* skipped) {
  Encoded out;
  for (const auto& ex : examples) {
    Utterance u = prepare(ex, lexicon, config.strip_target);
    if (u.tokens.empty()) {
      if (!skipped) throw Error("example '" + ex.id + "' is empty after preprocessing");
      ++*skipped;
      continue;
    }
    auto enc = encode(u, select_table(space, ex.language), config);
    truncated += enc.truncated ? 1 : 0;
    out.inputs.push_back(std::move(enc.matrix));
    out.labels.push_back(ex.label);
  }
  return out;
}

Prf score(const Encoded& data, const ModelParams& params) {
  std::vector<Label> preds;
  preds.reserve(data.inputs.size());
  for (const auto& x : data.inputs) {
    auto r = forward(x, params);
    preds.push_back(r.probs[1] > r.probs[0] ? Label::Churn : Label::NonChurn);
  }
  return macro_prf(preds, data.labels);
}

}  // namespace

Prf TrainResult::best_score(std::size_t eval_index) const {
  Prf best;
  bool any = false;
  for (const auto& e : history) {
    if (eval_index >= e.scores.size()) continue;
    if (!any || e.scores[eval_index].f1 > best.f1) best = e.scores[eval_index];
    any = true;
  }
  return best;
}

Prf TrainResult::last_score(std::size_t eval_index) const {
  if (history.empty() || eval_index >= history.back().scores.size()) return {};
  return history.back().scores[eval_index];
}

TrainResult train(std::span<const LabeledExample> train_set, std::span<const EvalSet> eval_sets,
                  const EmbeddingSpace& space, const BrandLexicon& lexicon, ModelConfig config,
                  const TrainOptions& options) {
  if (train_set.empty()) throw Error("train: empty training set");
  if (config.embed_dim != space.dim())
    throw DimensionError("model expects embed_dim " + std::to_string(config.embed_dim) +
                         " but embeddings have dim " + std::to_string(space.dim()));

  TrainResult result;
  if (config.max_len == 0) {
    Index longest = 0;
    for (const auto& ex : train_set)
      longest = std::max<Index>(longest,
                                static_cast<Index>(prepare(ex, lexicon, config.strip_target).tokens.size()));
    config.max_len = std::max(longest, config.kernel);
  }
  config.validate();

  std::size_t train_truncated = 0;
  Encoded data = encode_all(train_set, space, lexicon, config, train_truncated, &result.skipped_empty);
  if (data.inputs.empty()) throw Error("train: every training example is empty after preprocessing");
  std::vector<Encoded> evals;
  for (const auto& set : eval_sets)
    evals.push_back(encode_all(set.examples, space, lexicon, config, result.truncated, nullptr));

  std::mt19937_64 rng(config.seed);
  ModelParams params = init_params<float>(config, rng);
  nn::AdamState<float> adam(params.layers);
  const nn::AdamOptions adam_options{config.learning_rate};
  nn::LayerParams<float> grads = nn::zeros_like(params.layers);

  std::vector<std::size_t> order(data.inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  double best_f1 = -1.0;
  double best_loss = INFINITY;
  int plateau = 0;
  result.best = params;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t end = std::min(order.size(), start + batch);
      nn::visit([](std::string_view, Matrix<float>& g) { g.setZero(); }, grads);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        nn::Tape<float> tape;
        auto vars = nn::bind(tape, params.layers, &grads);
        auto probs = forward_graph(tape, vars, data.inputs[idx], config, true, rng);
        auto loss = nn::cross_entropy(probs, class_index(data.labels[idx]));
        batch_loss += loss.value()(0, 0);
        tape.backward(loss);
      }
      if (!std::isfinite(batch_loss))
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b));
      const float scale = 1.0f / static_cast<float>(end - start);
      nn::visit([scale](std::string_view, Matrix<float>& g) { g *= scale; }, grads);
      nn::adam_step(params.layers, grads, adam, adam_options);
      total_loss += batch_loss;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = total_loss / static_cast<double>(order.size());
    for (const auto& e : evals) record.scores.push_back(score(e, params));
    result.history.push_back(record);

    if (!record.scores.empty() && record.scores.front().f1 > best_f1) {
      best_f1 = record.scores.front().f1;
      result.best = params;
      result.best.best_epoch = epoch;
    }

    if (best_loss - record.train_loss < config.min_loss_improvement) {
      ++plateau;
    } else {
      plateau = 0;
    }
    best_loss = std::min(best_loss, record.train_loss);

    if (options.on_epoch && !options.on_epoch(record)) break;
    if (plateau >= config.patience) break;
  }

  result.last = params;
  result.last.best_epoch = result.history.empty() ? -1 : result.history.back().epoch;
  if (evals.empty()) result.best = result.last;
  return result;
}

Classifier::Classifier(ModelParams params, EmbeddingSpace space, BrandLexicon lexicon)
    : params_(std::move(params)), space_(std::move(space)), lexicon_(std::move(lexicon)) {
  if (space_.dim() != params_.config.embed_dim)
    throw DimensionError("checkpoint expects embed_dim " + std::to_string(params_.config.embed_dim) +
                         " but embeddings have dim " + std::to_string(space_.dim()));
}

const WordEmbeddings& Classifier::table_for(const std::string& language) const {
  return select_table(space_, language);
}

Prediction Classifier::predict(const LabeledExample& input) const {
  Utterance u = prepare(input, lexicon_, params_.config.strip_target);
  auto enc = encode(u, table_for(input.language), params_.config);
  auto r = forward(enc.matrix, params_);
  Prediction p;
  p.churn_probability = r.probs[1];
  p.label = r.probs[1] > r.probs[0] ? Label::Churn : Label::NonChurn;
  p.confidence = std::max(r.probs[0], r.probs[1]);
  p.attention.assign(r.attention.data(), r.attention.data() + r.attention.size());
  p.tokens = std::move(u.tokens);
  p.truncated = enc.truncated;
  return p;
}

Prediction Classifier::predict(std::string_view text, const std::string& language,
                               Medium medium) const {
  LabeledExample ex;
  ex.raw_text = std::string(text);
  ex.language = language;
  ex.medium = medium;
  return predict(ex);
}

std::vector<Prediction> Classifier::predict(std::span<const LabeledExample> inputs) const {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(predict(in));
  return out;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  Container c;
  c.kind = "model";
  c.meta = {{"config", params.config}, {"best_epoch", params.best_epoch}};
  nn::visit([&c](std::string_view name, const Matrix<float>& m) { c.add_matrix(std::string(name), m); },
            params.layers);
  write_container(c, path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != "model") throw ParseError(path.string() + ": not a model checkpoint");
  ModelParams p;
  try {
    p.config = c.meta.at("config").get<ModelConfig>();
    p.best_epoch = c.meta.value("best_epoch", -1);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad model config in manifest: " + e.what());
  }
  p.config.validate();
  p.layers = nn::zero_params<float>(p.config.shape());
  nn::visit(
      [&](std::string_view name, Matrix<float>& m) {
        const auto& a = c.array(std::string(name));
        if (a.shape.size() != 2 || a.shape[0] != m.rows() || a.shape[1] != m.cols())
          throw DimensionError(path.string() + ": array '" + std::string(name) +
                               "' shape does not match the manifest config");
        m = c.matrix(std::string(name));
      },
      p.layers);
  return p;
}

}  // namespace churn
