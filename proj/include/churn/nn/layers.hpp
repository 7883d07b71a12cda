#pragma once

#include <cmath>
#include <random>
#include <string_view>

#include "churn/nn/tape.hpp"

namespace churn::nn {

/// Weights of one GRU direction. Gate order inside the 3H blocks is
/// (update z, reset r, candidate).
template <typename T>
struct GruSet {
  T input;      // f x 3H
  T recurrent;  // H x 2H, update and reset gates
  T candidate;  // H x H, applied to (r ⊙ h)
  T bias;       // 1 x 3H
};

/// Every trainable array of the classifier. `T` is a matrix type for
/// parameter storage, or Var<S> for the same parameters bound to a tape.
///
/// The convolution kernel bank of shape f x k x m is stored as a (k*m) x f
/// matrix: column j is filter j, rows [o*m, (o+1)*m) its window offset o.
template <typename T>
struct LayerSet {
  T conv_kernel;  // (k*m) x f
  T conv_bias;    // 1 x f
  GruSet<T> forward;
  GruSet<T> backward;
  T att_projection;  // 2H x H
  T att_score;       // H x 1
  T out_weights;     // 2H x 2
  T out_bias;        // 1 x 2
};

/// Calls f(name, field_of_s0, field_of_s1, ...) for every array, in a fixed
/// order shared by checkpoints and the optimizer.
template <typename F, typename... Sets>
void visit(F&& f, Sets&&... s) {
  f(std::string_view("conv.kernel"), s.conv_kernel...);
  f(std::string_view("conv.bias"), s.conv_bias...);
  f(std::string_view("gru.fwd.input"), s.forward.input...);
  f(std::string_view("gru.fwd.recurrent"), s.forward.recurrent...);
  f(std::string_view("gru.fwd.candidate"), s.forward.candidate...);
  f(std::string_view("gru.fwd.bias"), s.forward.bias...);
  f(std::string_view("gru.bwd.input"), s.backward.input...);
  f(std::string_view("gru.bwd.recurrent"), s.backward.recurrent...);
  f(std::string_view("gru.bwd.candidate"), s.backward.candidate...);
  f(std::string_view("gru.bwd.bias"), s.backward.bias...);
  f(std::string_view("att.projection"), s.att_projection...);
  f(std::string_view("att.score"), s.att_score...);
  f(std::string_view("out.weights"), s.out_weights...);
  f(std::string_view("out.bias"), s.out_bias...);
}

template <typename S>
using LayerParams = LayerSet<Matrix<S>>;
template <typename S>
using LayerVars = LayerSet<Var<S>>;

struct LayerShape {
  Index embed_dim;
  Index filters;
  Index kernel;
  Index hidden;
};

template <typename S>
LayerParams<S> zero_params(const LayerShape& s) {
  const Index H = s.hidden;
  auto gru = [&] {
    return GruSet<Matrix<S>>{Matrix<S>::Zero(s.filters, 3 * H), Matrix<S>::Zero(H, 2 * H),
                             Matrix<S>::Zero(H, H), Matrix<S>::Zero(1, 3 * H)};
  };
  return LayerParams<S>{Matrix<S>::Zero(s.kernel * s.embed_dim, s.filters),
                        Matrix<S>::Zero(1, s.filters),
                        gru(),
                        gru(),
                        Matrix<S>::Zero(2 * H, H),
                        Matrix<S>::Zero(H, 1),
                        Matrix<S>::Zero(2 * H, 2),
                        Matrix<S>::Zero(1, 2)};
}

template <typename S>
LayerParams<S> zeros_like(const LayerParams<S>& p) {
  LayerParams<S> out = p;
  visit([](std::string_view, Matrix<S>& m) { m.setZero(); }, out);
  return out;
}

/// Glorot-uniform matrices, zero biases. GRU gate blocks are initialised
/// per gate with fan_out H.
template <typename S>
LayerParams<S> glorot_params(const LayerShape& s, std::mt19937_64& rng) {
  LayerParams<S> p = zero_params<S>(s);
  auto fill = [&rng](auto&& block, Index fan_in, Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index j = 0; j < block.cols(); ++j)
      for (Index i = 0; i < block.rows(); ++i) block(i, j) = static_cast<S>(dist(rng));
  };
  const Index H = s.hidden;
  fill(p.conv_kernel, s.kernel * s.embed_dim, s.filters);
  for (auto* g : {&p.forward, &p.backward}) {
    for (Index gate = 0; gate < 3; ++gate) fill(g->input.middleCols(gate * H, H), s.filters, H);
    for (Index gate = 0; gate < 2; ++gate) fill(g->recurrent.middleCols(gate * H, H), H, H);
    fill(g->candidate, H, H);
  }
  fill(p.att_projection, 2 * H, H);
  fill(p.att_score, H, 1);
  fill(p.out_weights, 2 * H, 2);
  return p;
}

/// Binds stored parameters to a tape. With `grads`, each parameter's
/// gradient accumulates into the matching entry of `grads`.
template <typename S>
LayerVars<S> bind(Tape<S>& tape, const LayerParams<S>& params, LayerParams<S>* grads = nullptr) {
  LayerVars<S> vars;
  if (grads) {
    visit([&](std::string_view, const Matrix<S>& p, Matrix<S>& g,
              Var<S>& v) { v = tape.parameter(p, &g); },
          params, *grads, vars);
  } else {
    visit([&](std::string_view, const Matrix<S>& p, Var<S>& v) { v = tape.parameter(p, nullptr); },
          params, vars);
  }
  return vars;
}

// ---------------------------------------------------------------------------
// Layers

/// Valid convolution along the token axis without activation:
/// (n x m) -> (n-k+1) x f.
template <typename S>
Var<S> conv1d_linear(Var<S> input, Var<S> kernels, Var<S> bias, Index kernel_size) {
  if (kernels.rows() != kernel_size * input.cols())
    throw DimensionError("conv1d: kernel bank expects width " +
                         std::to_string(kernels.rows() / std::max<Index>(kernel_size, 1)) +
                         ", input has " + std::to_string(input.cols()));
  if (input.rows() < kernel_size)
    throw DimensionError("conv1d: sequence length " + std::to_string(input.rows()) +
                         " shorter than kernel " + std::to_string(kernel_size));
  return add_row(matmul(im2col(input, kernel_size), kernels), bias);
}

/// conv1d_linear followed by ReLU.
template <typename S>
Var<S> conv1d(Var<S> input, Var<S> kernels, Var<S> bias, Index kernel_size) {
  return relu(conv1d_linear(input, kernels, bias, kernel_size));
}

/// One direction of a GRU over the rows of `seq` (T x f), zero initial
/// state. Returns T x H, row t the state after step t in traversal order.
template <typename S>
Var<S> gru(Var<S> seq, const GruSet<Var<S>>& w) {
  Tape<S>& tape = *seq.tape;
  const Index T = seq.rows();
  const Index H = w.candidate.rows();
  if (T < 1) throw DimensionError("gru: empty sequence");
  Var<S> projected = add_row(matmul(seq, w.input), w.bias);  // T x 3H
  Var<S> h = tape.constant(Matrix<S>::Zero(1, H));
  std::vector<Var<S>> states;
  states.reserve(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    Var<S> x = slice_rows(projected, t, 1);
    Var<S> hr = matmul(h, w.recurrent);
    Var<S> z = sigmoid(add(slice_cols(x, 0, H), slice_cols(hr, 0, H)));
    Var<S> r = sigmoid(add(slice_cols(x, H, H), slice_cols(hr, H, H)));
    Var<S> c = tanh(add(slice_cols(x, 2 * H, H), matmul(mul(r, h), w.candidate)));
    h = add(mul(z, h), mul(one_minus(z), c));
    states.push_back(h);
  }
  return stack_rows(states);
}

/// Forward GRU and a GRU over the reversed sequence; the backward states are
/// re-reversed so row t holds [h_fwd(t), h_bwd(t)]. Output T x 2H.
template <typename S>
Var<S> bigru(Var<S> seq, const GruSet<Var<S>>& fwd, const GruSet<Var<S>>& bwd) {
  Var<S> f = gru(seq, fwd);
  Var<S> b = reverse_rows(gru(reverse_rows(seq), bwd));
  return concat_cols(f, b);
}

template <typename S>
struct AttentionOutput {
  Var<S> context;  // 1 x 2H
  Var<S> weights;  // T x 1
};

/// Additive attention: e_t = vᵀ tanh(P h_t), α = softmax(e), context = Σ α_t h_t.
template <typename S>
AttentionOutput<S> attention(Var<S> states, Var<S> projection, Var<S> score) {
  Var<S> energies = matmul(tanh(matmul(states, projection)), score);  // T x 1
  Var<S> weights = softmax(energies);
  Var<S> context = matmul(transpose(weights), states);
  return {context, weights};
}

/// softmax(x W + b) for a 1 x 2H row.
template <typename S>
Var<S> dense_softmax(Var<S> x, Var<S> weights, Var<S> bias) {
  return softmax(add(matmul(x, weights), bias));
}

/// Inverted dropout: in training each entry is zeroed with probability
/// `rate` and survivors scaled by 1/(1-rate). Identity at inference.
template <typename S>
Var<S> dropout(Var<S> x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const S scale = static_cast<S>(1.0 / (1.0 - rate));
  Matrix<S> mask(x.rows(), x.cols());
  for (Index j = 0; j < mask.cols(); ++j)
    for (Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(rng) ? scale : S(0);
  return mul(x, x.tape->constant(std::move(mask)));
}

}  // namespace churn::nn
