#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "coopbc/approx/param.hpp"
#include "coopbc/common.hpp"

namespace coopbc::approx {

// Reverse-mode differentiation over matrix-valued nodes. A Tape records one
// forward computation (per batch; discarded afterwards) and plays it
// backwards to accumulate parameter gradients.
//
// Supported ops: affine maps, tanh, sigmoid, exp, log, softmax/log-softmax
// over columns, elementwise arithmetic, row concat/slice, grouped column
// summation, row sums, means, per-column gathers, clamping and elementwise
// min. Values are dense column batches: one column per sample.
class Tape {
 public:
  enum class Op {
    kLeaf,
    kAffine,     // a = W (param), b = bias (param), c = X
    kAdd,
    kSub,
    kMul,
    kScale,      // scalar * A
    kAddScalar,  // A + scalar
    kTanh,
    kSigmoid,
    kExp,
    kLog,
    kSoftmaxCols,
    kLogSoftmaxCols,
    kConcatRows,
    kConcatCols,
    kSliceRows,      // rows [i0, i0+n)
    kSumColGroups,   // d x (K*B) -> d x B, groups of K adjacent columns
    kRowSum,         // d x B -> 1 x B
    kMeanAll,        // d x B -> 1 x 1
    kGatherRows,     // out(0,j) = A(idx[j], j)
    kClamp,
    kMin,
  };

  struct Expr {
    int id = -1;
  };

  void reset() {
    nodes_.clear();
    param_bindings_.clear();
  }

  // ---- leaves ----

  Expr constant(Mat value) { return push(Op::kLeaf, -1, -1, std::move(value)); }

  Expr constant(double value) { return constant(Mat::Constant(1, 1, value)); }

  // Leaf bound to params.records()[record_index]; its gradient is exported by
  // grads().
  Expr param(const ParamSet& params, int record_index) {
    Expr e = push(Op::kLeaf, -1, -1, params.records()[record_index].value);
    param_bindings_.push_back({e.id, record_index});
    return e;
  }

  Expr param(const ParamSet& params, const std::string& name) {
    return param(params, params.index(name));
  }

  // ---- ops ----

  // W X + b 1^T. W: out x in, b: out x 1, X: in x B.
  Expr affine(Expr w, Expr b, Expr x) {
    const Mat& W = val(w);
    const Mat& B = val(b);
    const Mat& X = val(x);
    if (W.cols() != X.rows())
      throw ConfigError("affine: weight cols " + std::to_string(W.cols()) + " != input rows " +
                        std::to_string(X.rows()));
    if (B.rows() != W.rows() || B.cols() != 1) throw ConfigError("affine: bias shape mismatch");
    Mat out = W * X;
    out.colwise() += B.col(0);
    Expr e = push(Op::kAffine, w.id, b.id, std::move(out));
    nodes_[e.id].c = x.id;
    return e;
  }

  Expr add(Expr a, Expr b) {
    check_same_shape(a, b, "add");
    return push(Op::kAdd, a.id, b.id, val(a) + val(b));
  }

  Expr sub(Expr a, Expr b) {
    check_same_shape(a, b, "sub");
    return push(Op::kSub, a.id, b.id, val(a) - val(b));
  }

  Expr mul(Expr a, Expr b) {
    check_same_shape(a, b, "mul");
    return push(Op::kMul, a.id, b.id, val(a).cwiseProduct(val(b)));
  }

  Expr scale(Expr a, double s) {
    Expr e = push(Op::kScale, a.id, -1, s * val(a));
    nodes_[e.id].scalar = s;
    return e;
  }

  Expr add_scalar(Expr a, double s) {
    Expr e = push(Op::kAddScalar, a.id, -1, val(a).array() + s);
    nodes_[e.id].scalar = s;
    return e;
  }

  Expr tanh(Expr a) { return push(Op::kTanh, a.id, -1, val(a).array().tanh()); }

  Expr sigmoid(Expr a) {
    return push(Op::kSigmoid, a.id, -1, (0.5 * (0.5 * val(a).array()).tanh() + 0.5).matrix());
  }

  Expr exp(Expr a) { return push(Op::kExp, a.id, -1, val(a).array().exp()); }

  Expr log(Expr a) { return push(Op::kLog, a.id, -1, val(a).array().log()); }

  // Column-wise softmax with max-shift.
  Expr softmax_cols(Expr a) { return push(Op::kSoftmaxCols, a.id, -1, softmax_of(val(a))); }

  Expr log_softmax_cols(Expr a) {
    const Mat& Z = val(a);
    Mat out(Z.rows(), Z.cols());
    for (int j = 0; j < Z.cols(); ++j) {
      const double m = Z.col(j).maxCoeff();
      const double lse = m + std::log((Z.col(j).array() - m).exp().sum());
      out.col(j) = Z.col(j).array() - lse;
    }
    return push(Op::kLogSoftmaxCols, a.id, -1, std::move(out));
  }

  Expr concat_rows(Expr a, Expr b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (A.cols() != B.cols()) throw ConfigError("concat_rows: column count mismatch");
    Mat out(A.rows() + B.rows(), A.cols());
    out.topRows(A.rows()) = A;
    out.bottomRows(B.rows()) = B;
    return push(Op::kConcatRows, a.id, b.id, std::move(out));
  }

  Expr concat_cols(Expr a, Expr b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (A.rows() != B.rows()) throw ConfigError("concat_cols: row count mismatch");
    Mat out(A.rows(), A.cols() + B.cols());
    out.leftCols(A.cols()) = A;
    out.rightCols(B.cols()) = B;
    return push(Op::kConcatCols, a.id, b.id, std::move(out));
  }

  Expr slice_rows(Expr a, int first, int count) {
    const Mat& A = val(a);
    if (first < 0 || count <= 0 || first + count > A.rows())
      throw ConfigError("slice_rows: range out of bounds");
    Expr e = push(Op::kSliceRows, a.id, -1, A.middleRows(first, count));
    nodes_[e.id].i0 = first;
    return e;
  }

  // Left-to-right column concatenation of a step sequence.
  Expr concat_cols_all(const std::vector<Expr>& xs) {
    if (xs.empty()) throw ConfigError("concat_cols_all: empty list");
    Expr out = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) out = concat_cols(out, xs[i]);
    return out;
  }

  // d x (K*B) -> d x B by summing each group of K adjacent columns.
  Expr sum_col_groups(Expr a, int group) {
    const Mat& A = val(a);
    if (group <= 0 || A.cols() % group != 0)
      throw ConfigError("sum_col_groups: columns not divisible by group size");
    const int b = static_cast<int>(A.cols()) / group;
    Mat out = Mat::Zero(A.rows(), b);
    for (int j = 0; j < b; ++j)
      for (int k = 0; k < group; ++k) out.col(j) += A.col(j * group + k);
    Expr e = push(Op::kSumColGroups, a.id, -1, std::move(out));
    nodes_[e.id].i0 = group;
    return e;
  }

  Expr row_sum(Expr a) { return push(Op::kRowSum, a.id, -1, val(a).colwise().sum()); }

  Expr mean_all(Expr a) {
    return push(Op::kMeanAll, a.id, -1, Mat::Constant(1, 1, val(a).mean()));
  }

  // out(0, j) = A(idx[j], j).
  Expr gather_rows(Expr a, std::vector<int> idx) {
    const Mat& A = val(a);
    if (static_cast<int>(idx.size()) != A.cols())
      throw ConfigError("gather_rows: index count != column count");
    Mat out(1, A.cols());
    for (int j = 0; j < A.cols(); ++j) {
      if (idx[j] < 0 || idx[j] >= A.rows()) throw ConfigError("gather_rows: index out of range");
      out(0, j) = A(idx[j], j);
    }
    Expr e = push(Op::kGatherRows, a.id, -1, std::move(out));
    nodes_[e.id].indices = std::move(idx);
    return e;
  }

  Expr clamp(Expr a, double lo, double hi) {
    Expr e = push(Op::kClamp, a.id, -1, val(a).array().max(lo).min(hi));
    nodes_[e.id].scalar = lo;
    nodes_[e.id].scalar2 = hi;
    return e;
  }

  Expr min_elem(Expr a, Expr b) {
    check_same_shape(a, b, "min_elem");
    return push(Op::kMin, a.id, b.id, val(a).cwiseMin(val(b)));
  }

  // ---- access ----

  const Mat& val(Expr e) const { return nodes_[e.id].value; }
  const Mat& grad_of(Expr e) const { return nodes_[e.id].grad; }

  // ---- backward ----

  // Seeds d(loss)/d(loss) = 1 at a 1x1 node and accumulates gradients into
  // every reachable leaf.
  void backward(Expr loss) {
    Node& top = nodes_[loss.id];
    if (top.value.rows() != 1 || top.value.cols() != 1)
      throw ConfigError("backward: loss must be a 1x1 node");
    if (!std::isfinite(top.value(0, 0))) throw NumericError("backward: loss is not finite");
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    top.grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i) backprop_node(i);
  }

  // Parameter gradients, shaped like `params`. Records that never entered the
  // graph get zero gradients.
  ParamSet grads(const ParamSet& params) const {
    ParamSet g = params.zeros_like();
    for (const auto& [node_id, rec] : param_bindings_) g.records()[rec].value += nodes_[node_id].grad;
    return g;
  }

  static Mat softmax_of(const Mat& z) {
    Mat out(z.rows(), z.cols());
    for (int j = 0; j < z.cols(); ++j) {
      Vec e = (z.col(j).array() - z.col(j).maxCoeff()).exp();
      out.col(j) = e / e.sum();
    }
    return out;
  }

 private:
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double scalar = 0.0, scalar2 = 0.0;
    int i0 = 0;
    std::vector<int> indices;
    Mat value;
    Mat grad;
  };

  Expr push(Op op, int a, int b, Mat value) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Expr{static_cast<int>(nodes_.size()) - 1};
  }

  void check_same_shape(Expr a, Expr b, const char* what) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ConfigError(std::string(what) + ": shape mismatch");
  }

  void backprop_node(int i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || n.op == Op::kLeaf) return;
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::kAffine: {
        const Mat& X = nodes_[n.c].value;
        const Mat& W = nodes_[n.a].value;
        nodes_[n.a].grad.noalias() += g * X.transpose();
        nodes_[n.b].grad.col(0) += g.rowwise().sum();
        nodes_[n.c].grad.noalias() += W.transpose() * g;
        break;
      }
      case Op::kAdd:
        nodes_[n.a].grad += g;
        nodes_[n.b].grad += g;
        break;
      case Op::kSub:
        nodes_[n.a].grad += g;
        nodes_[n.b].grad -= g;
        break;
      case Op::kMul:
        nodes_[n.a].grad += g.cwiseProduct(nodes_[n.b].value);
        nodes_[n.b].grad += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kScale:
        nodes_[n.a].grad += n.scalar * g;
        break;
      case Op::kAddScalar:
        nodes_[n.a].grad += g;
        break;
      case Op::kTanh:
        nodes_[n.a].grad.array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kSigmoid:
        nodes_[n.a].grad.array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::kExp:
        nodes_[n.a].grad.array() += g.array() * n.value.array();
        break;
      case Op::kLog:
        nodes_[n.a].grad.array() += g.array() / nodes_[n.a].value.array();
        break;
      case Op::kSoftmaxCols: {
        Mat& da = nodes_[n.a].grad;
        for (int j = 0; j < g.cols(); ++j) {
          const double dot = n.value.col(j).dot(g.col(j));
          da.col(j).array() += n.value.col(j).array() * (g.col(j).array() - dot);
        }
        break;
      }
      case Op::kLogSoftmaxCols: {
        Mat& da = nodes_[n.a].grad;
        for (int j = 0; j < g.cols(); ++j) {
          const double gsum = g.col(j).sum();
          da.col(j).array() += g.col(j).array() - n.value.col(j).array().exp() * gsum;
        }
        break;
      }
      case Op::kConcatRows: {
        const auto top = nodes_[n.a].value.rows();
        nodes_[n.a].grad += g.topRows(top);
        nodes_[n.b].grad += g.bottomRows(nodes_[n.b].value.rows());
        break;
      }
      case Op::kConcatCols: {
        const auto left = nodes_[n.a].value.cols();
        nodes_[n.a].grad += g.leftCols(left);
        nodes_[n.b].grad += g.rightCols(nodes_[n.b].value.cols());
        break;
      }
      case Op::kSliceRows:
        nodes_[n.a].grad.middleRows(n.i0, n.value.rows()) += g;
        break;
      case Op::kSumColGroups: {
        Mat& da = nodes_[n.a].grad;
        const int group = n.i0;
        for (int j = 0; j < g.cols(); ++j)
          for (int k = 0; k < group; ++k) da.col(j * group + k) += g.col(j);
        break;
      }
      case Op::kRowSum:
        nodes_[n.a].grad.array().rowwise() += g.row(0).array();
        break;
      case Op::kMeanAll:
        nodes_[n.a].grad.array() += g(0, 0) / static_cast<double>(nodes_[n.a].value.size());
        break;
      case Op::kGatherRows:
        for (int j = 0; j < g.cols(); ++j) nodes_[n.a].grad(n.indices[j], j) += g(0, j);
        break;
      case Op::kClamp: {
        const Mat& A = nodes_[n.a].value;
        nodes_[n.a].grad.array() +=
            g.array() * ((A.array() > n.scalar) && (A.array() < n.scalar2)).cast<double>();
        break;
      }
      case Op::kMin: {
        const Mat& A = nodes_[n.a].value;
        const Mat& B = nodes_[n.b].value;
        const auto pick_a = (A.array() <= B.array()).cast<double>();
        nodes_[n.a].grad.array() += g.array() * pick_a;
        nodes_[n.b].grad.array() += g.array() * (1.0 - pick_a);
        break;
      }
      case Op::kLeaf:
        break;
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> param_bindings_;
};

using Expr = Tape::Expr;

}  // namespace coopbc::approx
