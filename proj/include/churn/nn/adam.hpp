#pragma once

#include <cmath>

#include "churn/nn/layers.hpp"

namespace churn::nn {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
struct AdamState {
  LayerParams<S> first_moment;
  LayerParams<S> second_moment;
  long step = 0;

  explicit AdamState(const LayerParams<S>& like)
      : first_moment(zeros_like(like)), second_moment(zeros_like(like)) {}
};

/// One bias-corrected Adam update of a single array. `step` is 1-based.
template <typename S>
void adam_update(Matrix<S>& param, const Matrix<S>& grad, Matrix<S>& m, Matrix<S>& v, long step,
                 const AdamOptions& o) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || m.rows() != param.rows() ||
      m.cols() != param.cols() || v.rows() != param.rows() || v.cols() != param.cols())
    throw DimensionError("adam: gradient/state shape does not match parameter");
  const S b1 = static_cast<S>(o.beta1), b2 = static_cast<S>(o.beta2);
  m = b1 * m + (S(1) - b1) * grad;
  v = b2 * v + (S(1) - b2) * grad.cwiseAbs2();
  const S c1 = static_cast<S>(1.0 - std::pow(o.beta1, static_cast<double>(step)));
  const S c2 = static_cast<S>(1.0 - std::pow(o.beta2, static_cast<double>(step)));
  const S lr = static_cast<S>(o.learning_rate);
  const S eps = static_cast<S>(o.epsilon);
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

template <typename S>
void adam_step(LayerParams<S>& params, const LayerParams<S>& grads, AdamState<S>& state,
               const AdamOptions& options = {}) {
  ++state.step;
  visit([&](std::string_view, Matrix<S>& p, const Matrix<S>& g, Matrix<S>& m, Matrix<S>& v) {
    adam_update(p, g, m, v, state.step, options);
  }, params, grads, state.first_moment, state.second_moment);
}

}  // namespace churn::nn
