#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "churn/common.hpp"
#include "churn/embeddings.hpp"
#include "churn/metrics.hpp"
#include "churn/nn/adam.hpp"
#include "churn/nn/layers.hpp"
#include "churn/textprep.hpp"

namespace churn {

/// Hyperparameters. Defaults are the published operating point: 256 filters
/// of width 2, 128 GRU units per direction, dropout 0.3 on the embeddings,
/// Adam with default settings.
struct ModelConfig {
  Index embed_dim = 300;
  Index filters = 256;
  Index kernel = 2;
  Index gru_units = 128;
  double dropout = 0.3;
  Index max_len = 0;  // 0: longest training utterance
  Index num_classes = 2;
  int max_epochs = 50;
  int patience = 5;
  double min_loss_improvement = 1e-4;
  int batch_size = 32;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
  /// Remove the source-brand mention ("target") from inputs, the chatbot
  /// transfer form.
  bool strip_target = false;

  void validate() const;
  nn::LayerShape shape() const { return {embed_dim, filters, kernel, gru_units}; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename S>
struct BasicModelParams {
  ModelConfig config;
  nn::LayerParams<S> layers;
  int best_epoch = -1;
};

using ModelParams = BasicModelParams<float>;

/// Glorot-initialised parameters drawn from `rng`.
template <typename S>
BasicModelParams<S> init_params(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  return {config, nn::glorot_params<S>(config.shape(), rng), -1};
}

struct EncodedInput {
  Matrix<float> matrix;  // max_len x embed_dim
  bool truncated = false;
};

/// Embedding rows right-padded with zero rows to config.max_len, or
/// truncated to it. Throws on an empty utterance.
EncodedInput encode(const Utterance& u, const WordEmbeddings& emb, const ModelConfig& config);

/// dropout -> conv1d(ReLU) -> BiGRU -> attention -> dense softmax, recorded
/// on `tape`. Returns the 1 x 2 probability row; `attention_out` receives
/// the T x 1 attention weights when given.
template <typename S>
nn::Var<S> forward_graph(nn::Tape<S>& tape, const nn::LayerVars<S>& vars, const Matrix<S>& input,
                         const ModelConfig& config, bool training, std::mt19937_64& rng,
                         nn::Var<S>* attention_out = nullptr) {
  if (input.cols() != config.embed_dim)
    throw DimensionError("input has " + std::to_string(input.cols()) +
                         " columns, model expects embed_dim " + std::to_string(config.embed_dim));
  nn::Var<S> x = nn::dropout(tape.constant(input), config.dropout, training, rng);
  nn::Var<S> features = nn::conv1d(x, vars.conv_kernel, vars.conv_bias, config.kernel);
  nn::Var<S> states = nn::bigru(features, vars.forward, vars.backward);
  auto att = nn::attention(states, vars.att_projection, vars.att_score);
  if (attention_out) *attention_out = att.weights;
  return nn::dense_softmax(att.context, vars.out_weights, vars.out_bias);
}

template <typename S>
struct ForwardResult {
  std::array<S, 2> probs{};
  Vector<S> attention;
};

/// Inference-mode (or seeded training-mode) forward pass without gradients.
template <typename S>
ForwardResult<S> forward(const Matrix<S>& input, const BasicModelParams<S>& params,
                         bool training = false, std::uint64_t dropout_seed = 0) {
  nn::Tape<S> tape;
  auto vars = nn::bind(tape, params.layers);
  std::mt19937_64 rng(dropout_seed);
  nn::Var<S> att;
  auto probs = forward_graph(tape, vars, input, params.config, training, rng, &att);
  ForwardResult<S> out;
  out.probs = {probs.value()(0), probs.value()(1)};
  out.attention = att.value().col(0);
  return out;
}

struct EvalSet {
  std::string name;
  std::vector<LabeledExample> examples;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::vector<Prf> scores;  // one per eval set
};

struct TrainOptions {
  /// Called after every epoch; returning false stops training.
  std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ModelParams best;  // parameters of the epoch with the highest first-eval-set F1
  ModelParams last;
  std::vector<EpochRecord> history;
  std::size_t truncated = 0;      // test utterances longer than max_len
  std::size_t skipped_empty = 0;  // training utterances empty after preprocessing

  /// Max over epochs of eval set `i`'s scores, taken at its best-F1 epoch.
  Prf best_score(std::size_t eval_index = 0) const;
  Prf last_score(std::size_t eval_index = 0) const;
};

/// Mini-batch Adam on frozen embeddings. Stops at max_epochs or once the
/// mean train loss has improved by less than min_loss_improvement for
/// `patience` consecutive epochs.
TrainResult train(std::span<const LabeledExample> train_set, std::span<const EvalSet> eval_sets,
                  const EmbeddingSpace& space, const BrandLexicon& lexicon, ModelConfig config,
                  const TrainOptions& options = {});

struct Prediction {
  Label label = Label::NonChurn;
  double confidence = 0.5;         // probability of the predicted class
  double churn_probability = 0.5;
  std::vector<double> attention;   // per padded position
  std::vector<std::string> tokens;
  bool truncated = false;
};

/// Immutable trained model plus the embeddings and lexicon it reads.
/// predict() is safe for concurrent calls.
class Classifier {
 public:
  Classifier(ModelParams params, EmbeddingSpace space, BrandLexicon lexicon);

  Prediction predict(const LabeledExample& input) const;
  Prediction predict(std::string_view text, const std::string& language, Medium medium) const;
  std::vector<Prediction> predict(std::span<const LabeledExample> inputs) const;

  const ModelParams& params() const { return params_; }
  const EmbeddingSpace& space() const { return space_; }
  const BrandLexicon& lexicon() const { return lexicon_; }

  /// Embedding table used for `language`; a single-table space serves all.
  const WordEmbeddings& table_for(const std::string& language) const;

 private:
  ModelParams params_;
  EmbeddingSpace space_;
  BrandLexicon lexicon_;
};

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace churn
