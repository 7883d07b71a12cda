#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "churn/common.hpp"

namespace churn::nn {

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Matrix<Scalar>& value() const { return tape->value(*this); }
  const Matrix<Scalar>& grad() const { return tape->grad(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

/// Reverse-mode autodiff over dense matrices. Every operation records its
/// value and a closure that pushes the node's upstream gradient to its
/// parents. Single-threaded; one tape per forward/backward pass.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, {}); }
  Var<Scalar> variable(Mat value) { return push(std::move(value), true, {}); }

  /// Leaf that reads `value` in place and accumulates its gradient into
  /// `grad_sink` (sized like `value`). Both must outlive the tape.
  Var<Scalar> parameter(const Mat& value, Mat* grad_sink) {
    Node n;
    n.ref = &value;
    n.sink = grad_sink;
    n.requires_grad = grad_sink != nullptr;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  /// Records an operation result. The backward closure runs only if some
  /// parent requires a gradient.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> parents, Backward backward) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || nodes_[p.id].requires_grad;
    return push(std::move(value), rg, rg ? std::move(backward) : Backward{});
  }
  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& parents, Backward backward) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || nodes_[p.id].requires_grad;
    return push(std::move(value), rg, rg ? std::move(backward) : Backward{});
  }

  const Mat& value(Var<Scalar> v) const { return value(v.id); }
  const Mat& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }

  bool requires_grad(Var<Scalar> v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of the last backward() target w.r.t. `v`; zeros if untouched.
  const Mat& grad(Var<Scalar> v) const {
    const Node& n = nodes_[v.id];
    if (n.sink) return *n.sink;
    if (n.grad.size() == 0) {
      const Mat& val = value(v.id);
      n.grad = Mat::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  /// Upstream gradient of node `id` while its backward closure runs.
  const Mat& upstream(std::size_t id) const { return nodes_[id].grad; }

  template <typename Derived>
  void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    Mat& target = n.sink ? *n.sink : n.grad;
    if (target.size() == 0) {
      const Mat& val = value(v.id);
      target = Mat::Zero(val.rows(), val.cols());
    }
    target += g;
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  void backward(Var<Scalar> loss) {
    const Mat& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) throw DimensionError("backward() needs a scalar loss");
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Mat::Ones(1, 1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;
    mutable Mat grad;
    Mat* sink = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Mat value, bool requires_grad, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementary operations

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix<S> v = a.value() * b.value();
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("add: shapes differ");
  Matrix<S> v = a.value() + b.value();
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self));
    t.accumulate(b, t.upstream(self));
  });
}

/// a (r x c) plus a 1 x c row broadcast over every row.
template <typename S>
Var<S> add_row(Var<S> a, Var<S> row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionError("add_row: bias shape");
  Matrix<S> v = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(v), {a, row}, [a, row](Tape<S>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self));
    t.accumulate(row, t.upstream(self).colwise().sum());
  });
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("mul: shapes differ");
  Matrix<S> v = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <typename S>
Var<S> one_minus(Var<S> a) {
  Matrix<S> v = (S(1) - a.value().array()).matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    t.accumulate(a, -t.upstream(self));
  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Matrix<S> v = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    const auto& y = t.value(self).array();
    t.accumulate(a, (t.upstream(self).array() * y * (S(1) - y)).matrix());
  });
}

template <typename S>
Var<S> tanh(Var<S> a) {
  Matrix<S> v = a.value().array().tanh().matrix();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    const auto& y = t.value(self).array();
    t.accumulate(a, (t.upstream(self).array() * (S(1) - y.square())).matrix());
  });
}

template <typename S>
Var<S> relu(Var<S> a) {
  Matrix<S> v = a.value().cwiseMax(S(0));
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    t.accumulate(a, (a.value().array() > S(0)).select(t.upstream(self).array(), S(0)).matrix());
  });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  Matrix<S> v = a.value().transpose();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self).transpose());
  });
}

template <typename S>
Var<S> slice_rows(Var<S> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw DimensionError("slice_rows");
  Matrix<S> v = a.value().middleRows(start, count);
  return a.tape->record(std::move(v), {a}, [a, start, count](Tape<S>& t, std::size_t self) {
    Matrix<S> g = Matrix<S>::Zero(a.rows(), a.cols());
    g.middleRows(start, count) = t.upstream(self);
    t.accumulate(a, g);
  });
}

template <typename S>
Var<S> slice_cols(Var<S> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("slice_cols");
  Matrix<S> v = a.value().middleCols(start, count);
  return a.tape->record(std::move(v), {a}, [a, start, count](Tape<S>& t, std::size_t self) {
    Matrix<S> g = Matrix<S>::Zero(a.rows(), a.cols());
    g.middleCols(start, count) = t.upstream(self);
    t.accumulate(a, g);
  });
}

template <typename S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
  Matrix<S> v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  return a.tape->record(std::move(v), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    t.accumulate(a, g.leftCols(a.cols()));
    t.accumulate(b, g.rightCols(b.cols()));
  });
}

/// Stacks 1 x c rows into an n x c matrix.
template <typename S>
Var<S> stack_rows(const std::vector<Var<S>>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const Index c = rows.front().cols();
  Matrix<S> v(static_cast<Index>(rows.size()), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rows() != 1 || rows[i].cols() != c) throw DimensionError("stack_rows: row shape");
    v.row(static_cast<Index>(i)) = rows[i].value();
  }
  return rows.front().tape->record(std::move(v), rows, [rows](Tape<S>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    for (std::size_t i = 0; i < rows.size(); ++i) t.accumulate(rows[i], g.row(static_cast<Index>(i)));
  });
}

template <typename S>
Var<S> reverse_rows(Var<S> a) {
  Matrix<S> v = a.value().colwise().reverse();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self).colwise().reverse());
  });
}

template <typename S>
Var<S> sum(Var<S> a) {
  Matrix<S> v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    t.accumulate(a, Matrix<S>::Constant(a.rows(), a.cols(), t.upstream(self)(0, 0)));
  });
}

/// Softmax over all entries (the operand is treated as one vector),
/// stabilised by subtracting the maximum.
template <typename S>
Var<S> softmax(Var<S> a) {
  Matrix<S> e = (a.value().array() - a.value().maxCoeff()).exp().matrix();
  Matrix<S> v = e / e.sum();
  return a.tape->record(std::move(v), {a}, [a](Tape<S>& t, std::size_t self) {
    const auto& y = t.value(self);
    const auto& g = t.upstream(self);
    const S dot = g.cwiseProduct(y).sum();
    t.accumulate(a, (y.array() * (g.array() - dot)).matrix());
  });
}

/// Unfolds an n x m matrix into (n-k+1) x (k*m) windows; window row t holds
/// input rows t..t+k-1 laid side by side.
template <typename S>
Var<S> im2col(Var<S> a, Index k) {
  const Index n = a.rows(), m = a.cols();
  if (k < 1 || n < k) throw DimensionError("im2col: sequence shorter than kernel");
  const Index out_rows = n - k + 1;
  Matrix<S> v(out_rows, k * m);
  for (Index j = 0; j < k; ++j) v.middleCols(j * m, m) = a.value().middleRows(j, out_rows);
  return a.tape->record(std::move(v), {a}, [a, k, n, m, out_rows](Tape<S>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    Matrix<S> ga = Matrix<S>::Zero(n, m);
    for (Index j = 0; j < k; ++j) ga.middleRows(j, out_rows) += g.middleCols(j * m, m);
    t.accumulate(a, ga);
  });
}

/// -log(p[gold]) for a probability row; p is clamped below at 1e-12.
template <typename S>
Var<S> cross_entropy(Var<S> probs, int gold) {
  if (gold < 0 || gold >= probs.value().size()) throw DimensionError("cross_entropy: class index");
  constexpr S kFloor = S(1e-12);
  const S p = probs.value()(gold);
  Matrix<S> v(1, 1);
  v(0, 0) = -std::log(std::max(p, kFloor));
  return probs.tape->record(std::move(v), {probs}, [probs, gold, p](Tape<S>& t, std::size_t self) {
    if (p < kFloor) return;
    Matrix<S> g = Matrix<S>::Zero(probs.rows(), probs.cols());
    g(gold) = -t.upstream(self)(0, 0) / p;
    t.accumulate(probs, g);
  });
}

}  // namespace churn::nn
