#pragma once

#include "eusim/common.hpp"

#include <cstdint>
#include <vector>

namespace eusim {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; invalidated by Tape::reset().
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode automatic differentiation over dense double matrices.
/// Nodes are recorded in creation order, which is a valid topological order
/// (an op's inputs always exist before the op); backward() walks it in
/// reverse. The tape is rebuilt per forward pass and is single-threaded.
class Tape {
 public:
  /// Leaf referencing external storage. The storage must outlive the tape
  /// contents; used for model parameters so they are never copied per pass.
  Var leaf(const Matrix& external);

  /// Leaf owning its value (step inputs, positional encodings, ...).
  /// Rejects non-finite entries: external data enters tapes through here.
  Var constant(Matrix v);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double k);
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var transpose(Var a);
  Var sum(Var a);  // 1x1 total of all entries

  /// Numerically stable softmax of a column vector (max subtraction).
  Var softmax(Var a);

  /// Stack a on top of b (column counts must agree).
  Var vconcat(Var a, Var b);

  Var rows(Var a, Eigen::Index first, Eigen::Index count);

  /// Add column vector v to every column of m.
  Var add_colwise(Var m, Var v);

  /// Column gather: out.col(j) = table.col(ids[j]). Backward scatter-adds,
  /// so repeated ids accumulate.
  Var gather_cols(Var table, std::vector<int> ids);

  /// Per-row softmax over the columns where mask is nonzero; masked columns
  /// get exactly 0. Requires at least one unmasked column.
  Var masked_softmax_rows(Var s, std::vector<std::uint8_t> mask);

  /// Mean of the unmasked columns of m, as a column vector.
  Var masked_mean_cols(Var m, std::vector<std::uint8_t> mask);

  /// Fused softmax + cross-entropy of a column logit vector against a
  /// target index; yields a 1x1 loss. Fusing keeps the backward pass the
  /// exact (p - onehot) form.
  Var cross_entropy_softmax(Var logits, int target);

  /// Accumulate gradients of `loss` (must be 1x1) into every node.
  void backward(Var loss);

  void reset();
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  enum class Op : std::uint8_t {
    kLeaf,
    kConst,
    kMatMul,
    kAdd,
    kHadamard,
    kScale,
    kOneMinus,
    kSigmoid,
    kTanh,
    kRelu,
    kTranspose,
    kSum,
    kSoftmax,
    kVConcat,
    kRows,
    kAddColwise,
    kGatherCols,
    kMaskedSoftmaxRows,
    kMaskedMeanCols,
    kCrossEntropySoftmax,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double k = 0.0;
    int target = -1;
    Eigen::Index first = 0;
    Eigen::Index count = 0;
    const Matrix* external = nullptr;  // kLeaf only
    Matrix value;                      // unused for kLeaf
    Matrix grad;
    Matrix aux;                   // cached probs for kCrossEntropySoftmax
    std::vector<int> ids;         // kGatherCols
    std::vector<std::uint8_t> mask;  // masked ops
  };

  const Matrix& val(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.op == Op::kLeaf ? *n.external : n.value;
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace eusim
