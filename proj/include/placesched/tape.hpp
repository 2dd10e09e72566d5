// Copyright 2026 The placesched Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode differentiation over dense row-major batches. Every
// value is a matrix whose rows are items (nodes, edges) and whose columns are
// features. Only the handful of ops the graph network needs are provided.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "placesched/common.hpp"

namespace placesched {

template <typename S>
using MatrixOf = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = MatrixOf<double>;
using RowVector = Eigen::RowVectorXd;

/// `S` is double for training; wider types serve numerical checks.
template <typename S>
class BasicTape {
 public:
  using Var = int;
  using Matrix = MatrixOf<S>;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  /// A leaf that receives gradients; `param` is an index into the caller's
  /// parameter list, or -1 for inputs that need no gradient.
  Var leaf(Matrix value, int param = -1) {
    Var v = push(std::move(value), nullptr);
    nodes_[v].param = param;
    return v;
  }

  const Matrix& value(Var v) const { return nodes_[v].value; }
  const Matrix& grad(Var v) const { return nodes_[v].grad; }
  int param_of(Var v) const { return nodes_[v].param; }
  int size() const { return static_cast<int>(nodes_.size()); }

  Var matmul(Var a, Var w) {
    return push(value(a) * value(w), [a, w](BasicTape& t, const Matrix& g) {
      t.accumulate(a, g * t.value(w).transpose());
      t.accumulate(w, t.value(a).transpose() * g);
    });
  }

  /// a + bias, bias a 1 x cols row broadcast over rows.
  Var add_bias(Var a, Var bias) {
    Matrix out = value(a);
    out.rowwise() += value(bias).row(0);
    return push(std::move(out), [a, bias](BasicTape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(bias, g.colwise().sum());
    });
  }

  Var add(Var a, Var b) {
    return push(value(a) + value(b), [a, b](BasicTape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var mul(Var a, Var b) {
    return push(value(a).cwiseProduct(value(b)), [a, b](BasicTape& t, const Matrix& g) {
      t.accumulate(a, g.cwiseProduct(t.value(b)));
      t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
  }

  /// scale * a + shift, elementwise.
  Var affine(Var a, S scale, S shift) {
    Matrix out = (value(a).array() * scale + shift).matrix();
    return push(std::move(out), [a, scale](BasicTape& t, const Matrix& g) { t.accumulate(a, g * scale); });
  }

  Var relu(Var a) {
    return push(value(a).cwiseMax(S(0)), [a](BasicTape& t, const Matrix& g) {
      t.accumulate(a, (t.value(a).array() > S(0)).select(g, S(0)));
    });
  }

  Var sigmoid(Var a) {
    Matrix out = (S(1) / (S(1) + (-value(a).array()).exp())).matrix();
    Var v = push(std::move(out), nullptr);
    nodes_[v].backward = [a, v](BasicTape& t, const Matrix& g) {
      const auto& y = t.value(v).array();
      t.accumulate(a, (g.array() * y * (S(1) - y)).matrix());
    };
    return v;
  }

  Var tanh(Var a) {
    Matrix out = value(a).array().tanh().matrix();
    Var v = push(std::move(out), nullptr);
    nodes_[v].backward = [a, v](BasicTape& t, const Matrix& g) {
      const auto& y = t.value(v).array();
      t.accumulate(a, (g.array() * (S(1) - y * y)).matrix());
    };
    return v;
  }

  Var concat_cols(std::vector<Var> parts) {
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) cols += value(p).cols();
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    return push(std::move(out), [parts](BasicTape& t, const Matrix& g) {
      Eigen::Index at = 0;
      for (Var p : parts) {
        const Eigen::Index c = t.value(p).cols();
        t.accumulate(p, g.middleCols(at, c));
        at += c;
      }
    });
  }

  /// out[i] = a[index[i]].
  Var gather_rows(Var a, std::vector<int> index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), value(a).cols());
    for (std::size_t i = 0; i < index.size(); ++i) out.row(i) = value(a).row(index[i]);
    return push(std::move(out), [a, index](BasicTape& t, const Matrix& g) {
      Matrix acc = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
      for (std::size_t i = 0; i < index.size(); ++i) acc.row(index[i]) += g.row(i);
      t.accumulate(a, acc);
    });
  }

  /// out[index[i]] += a[i] over `rows` output rows.
  Var scatter_add_rows(Var a, std::vector<int> index, int rows) {
    Matrix out = Matrix::Zero(rows, value(a).cols());
    for (std::size_t i = 0; i < index.size(); ++i) out.row(index[i]) += value(a).row(i);
    return push(std::move(out), [a, index](BasicTape& t, const Matrix& g) {
      Matrix acc(static_cast<Eigen::Index>(index.size()), g.cols());
      for (std::size_t i = 0; i < index.size(); ++i) acc.row(i) = g.row(index[i]);
      t.accumulate(a, acc);
    });
  }

  /// Multiplies row i by the constant factor[i].
  Var scale_rows(Var a, Vector factor) {
    Matrix out = factor.asDiagonal() * value(a);
    return push(std::move(out), [a, factor](BasicTape& t, const Matrix& g) { t.accumulate(a, factor.asDiagonal() * g); });
  }

  /// 1 x cols mean over rows.
  Var mean_rows(Var a) {
    const S n = static_cast<S>(value(a).rows());
    Matrix out = value(a).colwise().sum() / n;
    return push(std::move(out), [a, n](BasicTape& t, const Matrix& g) {
      Matrix acc = g.replicate(t.value(a).rows(), 1) / n;
      t.accumulate(a, acc);
    });
  }

  /// Row-wise log-softmax applied independently to consecutive column blocks
  /// of width blocks[j].
  Var log_softmax_blocks(Var a, std::vector<int> blocks) {
    const Matrix& x = value(a);
    Matrix out(x.rows(), x.cols());
    int at = 0;
    for (int w : blocks) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        auto seg = x.row(r).segment(at, w);
        const S m = seg.maxCoeff();
        const S lse = m + std::log((seg.array() - m).exp().sum());
        out.row(r).segment(at, w) = (seg.array() - lse).matrix();
      }
      at += w;
    }
    Var v = push(std::move(out), nullptr);
    nodes_[v].backward = [a, v, blocks](BasicTape& t, const Matrix& g) {
      const Matrix& y = t.value(v);
      Matrix acc(g.rows(), g.cols());
      int at = 0;
      for (int w : blocks) {
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const S s = g.row(r).segment(at, w).sum();
          acc.row(r).segment(at, w) =
              g.row(r).segment(at, w) - (y.row(r).segment(at, w).array().exp() * s).matrix();
        }
        at += w;
      }
      t.accumulate(a, acc);
    };
    return v;
  }

  /// 1 x 1 sum of the selected (row, col) entries.
  Var pick_sum(Var a, std::vector<std::pair<int, int>> cells) {
    S s = 0;
    for (auto [r, c] : cells) s += value(a)(r, c);
    Matrix out(1, 1);
    out(0, 0) = s;
    return push(std::move(out), [a, cells](BasicTape& t, const Matrix& g) {
      Matrix acc = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
      for (auto [r, c] : cells) acc(r, c) += g(0, 0);
      t.accumulate(a, acc);
    });
  }

  /// Back-propagates from the given (node, upstream gradient) seeds.
  void backward(const std::vector<std::pair<Var, Matrix>>& seeds) {
    for (auto& n : nodes_) n.grad.resize(0, 0);
    for (const auto& [v, g] : seeds) accumulate(v, g);
    for (int v = size() - 1; v >= 0; --v) {
      Node& n = nodes_[v];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(BasicTape&, const Matrix&)> backward;
    int param = -1;
  };

  Var push(Matrix value, std::function<void(BasicTape&, const Matrix&)> backward) {
    nodes_.push_back({std::move(value), Matrix(), std::move(backward), -1});
    return size() - 1;
  }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v];
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  std::vector<Node> nodes_;
};

using Tape = BasicTape<double>;

}  // namespace placesched
