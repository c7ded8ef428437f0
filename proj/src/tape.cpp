#include "eusim/tape.hpp"

#include <cmath>

namespace eusim {

const Matrix& Var::value() const {
  require(tape_ != nullptr, "Var: empty handle");
  return tape_->val(id_);
}

const Matrix& Var::grad() const {
  require(tape_ != nullptr, "Var: empty handle");
  return tape_->nodes_[static_cast<std::size_t>(id_)].grad;
}

Var Tape::leaf(const Matrix& external) {
  Node n;
  n.op = Op::kLeaf;
  n.external = &external;
  return push(std::move(n));
}

Var Tape::constant(Matrix v) {
  require(v.allFinite(), "constant: non-finite value rejected");
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  require(a.value().cols() == b.value().rows(),
          "matmul: dimension mismatch (" + shape_str(a.value()) + " * " +
              shape_str(b.value()) + ")");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id_;
  n.b = b.id_;
  n.value = a.value() * b.value();
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "add: shape mismatch (" + shape_str(a.value()) + " vs " +
              shape_str(b.value()) + ")");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id_;
  n.b = b.id_;
  n.value = a.value() + b.value();
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "hadamard: shape mismatch (" + shape_str(a.value()) + " vs " +
              shape_str(b.value()) + ")");
  Node n;
  n.op = Op::kHadamard;
  n.a = a.id_;
  n.b = b.id_;
  n.value = a.value().cwiseProduct(b.value());
  return push(std::move(n));
}

Var Tape::scale(Var a, double k) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id_;
  n.k = k;
  n.value = k * a.value();
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  Node n;
  n.op = Op::kOneMinus;
  n.a = a.id_;
  n.value = (1.0 - a.value().array()).matrix();
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id_;
  n.value = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a.id_;
  n.value = a.value().array().tanh().matrix();
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a.id_;
  n.value = a.value().cwiseMax(0.0);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id_;
  n.value = a.value().transpose();
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id_;
  n.value = Matrix::Constant(1, 1, a.value().sum());
  return push(std::move(n));
}

Var Tape::softmax(Var a) {
  require(a.cols() == 1 && a.rows() >= 1,
          "softmax: expected nonempty column vector, got " +
              shape_str(a.value()));
  Node n;
  n.op = Op::kSoftmax;
  n.a = a.id_;
  const double m = a.value().maxCoeff();
  Eigen::ArrayXd e = (a.value().col(0).array() - m).exp();
  n.value = (e / e.sum()).matrix();
  return push(std::move(n));
}

Var Tape::vconcat(Var a, Var b) {
  require(a.cols() == b.cols(),
          "vconcat: column mismatch (" + shape_str(a.value()) + " vs " +
              shape_str(b.value()) + ")");
  Node n;
  n.op = Op::kVConcat;
  n.a = a.id_;
  n.b = b.id_;
  n.value.resize(a.rows() + b.rows(), a.cols());
  n.value.topRows(a.rows()) = a.value();
  n.value.bottomRows(b.rows()) = b.value();
  return push(std::move(n));
}

Var Tape::rows(Var a, Eigen::Index first, Eigen::Index count) {
  require(first >= 0 && count >= 0 && first + count <= a.rows(),
          "rows: slice out of range");
  Node n;
  n.op = Op::kRows;
  n.a = a.id_;
  n.first = first;
  n.count = count;
  n.value = a.value().middleRows(first, count);
  return push(std::move(n));
}

Var Tape::add_colwise(Var m, Var v) {
  require(v.cols() == 1 && v.rows() == m.rows(),
          "add_colwise: need " + std::to_string(m.rows()) +
              "x1 vector, got " + shape_str(v.value()));
  Node n;
  n.op = Op::kAddColwise;
  n.a = m.id_;
  n.b = v.id_;
  n.value = m.value().colwise() + v.value().col(0);
  return push(std::move(n));
}

Var Tape::gather_cols(Var table, std::vector<int> ids) {
  for (int id : ids)
    require(id >= 0 && id < table.cols(), "gather_cols: id out of range");
  Node n;
  n.op = Op::kGatherCols;
  n.a = table.id_;
  n.value.resize(table.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j)
    n.value.col(static_cast<Eigen::Index>(j)) = table.value().col(ids[j]);
  n.ids = std::move(ids);
  return push(std::move(n));
}

Var Tape::masked_softmax_rows(Var s, std::vector<std::uint8_t> mask) {
  require(static_cast<Eigen::Index>(mask.size()) == s.cols(),
          "masked_softmax_rows: mask length != column count");
  Eigen::Index live = 0;
  for (auto m : mask) live += (m != 0);
  require(live >= 1, "masked_softmax_rows: all positions masked");
  Node n;
  n.op = Op::kMaskedSoftmaxRows;
  n.a = s.id_;
  n.value = Matrix::Zero(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (mask[static_cast<std::size_t>(j)]) mx = std::max(mx, s.value()(i, j));
    double denom = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (mask[static_cast<std::size_t>(j)]) {
        n.value(i, j) = std::exp(s.value()(i, j) - mx);
        denom += n.value(i, j);
      }
    n.value.row(i) /= denom;
  }
  n.mask = std::move(mask);
  return push(std::move(n));
}

Var Tape::masked_mean_cols(Var m, std::vector<std::uint8_t> mask) {
  require(static_cast<Eigen::Index>(mask.size()) == m.cols(),
          "masked_mean_cols: mask length != column count");
  Eigen::Index live = 0;
  for (auto b : mask) live += (b != 0);
  require(live >= 1, "masked_mean_cols: all positions masked");
  Node n;
  n.op = Op::kMaskedMeanCols;
  n.a = m.id_;
  n.k = static_cast<double>(live);
  Vector acc = Vector::Zero(m.rows());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (mask[static_cast<std::size_t>(j)]) acc += m.value().col(j);
  n.value = acc / n.k;
  n.mask = std::move(mask);
  return push(std::move(n));
}

Var Tape::cross_entropy_softmax(Var logits, int target) {
  require(logits.cols() == 1 && logits.rows() >= 1,
          "cross_entropy_softmax: expected column logits, got " +
              shape_str(logits.value()));
  require(target >= 0 && target < logits.rows(),
          "cross_entropy_softmax: target out of range");
  Node n;
  n.op = Op::kCrossEntropySoftmax;
  n.a = logits.id_;
  n.target = target;
  const double m = logits.value().maxCoeff();
  Eigen::ArrayXd e = (logits.value().col(0).array() - m).exp();
  n.aux = (e / e.sum()).matrix();
  n.value = Matrix::Constant(1, 1, -std::log(n.aux(target, 0)));
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  require(loss.tape_ == this, "backward: var from a different tape");
  const Node& ln = nodes_[static_cast<std::size_t>(loss.id_)];
  const Matrix& lv = ln.op == Op::kLeaf ? *ln.external : ln.value;
  require(lv.rows() == 1 && lv.cols() == 1,
          "backward: loss must be scalar, got " + shape_str(lv));

  for (Node& n : nodes_) {
    const Matrix& v = n.op == Op::kLeaf ? *n.external : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  nodes_[static_cast<std::size_t>(loss.id_)].grad(0, 0) = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kMatMul:
        nodes_[n.a].grad.noalias() += g * val(n.b).transpose();
        nodes_[n.b].grad.noalias() += val(n.a).transpose() * g;
        break;
      case Op::kAdd:
        nodes_[n.a].grad += g;
        nodes_[n.b].grad += g;
        break;
      case Op::kHadamard:
        nodes_[n.a].grad += g.cwiseProduct(val(n.b));
        nodes_[n.b].grad += g.cwiseProduct(val(n.a));
        break;
      case Op::kScale:
        nodes_[n.a].grad += n.k * g;
        break;
      case Op::kOneMinus:
        nodes_[n.a].grad -= g;
        break;
      case Op::kSigmoid:
        nodes_[n.a].grad +=
            g.cwiseProduct(n.value.cwiseProduct((1.0 - n.value.array()).matrix()));
        break;
      case Op::kTanh:
        nodes_[n.a].grad +=
            g.cwiseProduct((1.0 - n.value.array().square()).matrix());
        break;
      case Op::kRelu:
        nodes_[n.a].grad +=
            g.cwiseProduct((val(n.a).array() > 0.0).cast<double>().matrix());
        break;
      case Op::kTranspose:
        nodes_[n.a].grad += g.transpose();
        break;
      case Op::kSum:
        nodes_[n.a].grad.array() += g(0, 0);
        break;
      case Op::kSoftmax: {
        const Matrix& y = n.value;
        const double dot = y.col(0).dot(g.col(0));
        nodes_[n.a].grad.col(0) +=
            y.col(0).cwiseProduct(g.col(0)) - dot * y.col(0);
        break;
      }
      case Op::kVConcat: {
        const Eigen::Index ra = val(n.a).rows();
        nodes_[n.a].grad += g.topRows(ra);
        nodes_[n.b].grad += g.bottomRows(g.rows() - ra);
        break;
      }
      case Op::kRows:
        nodes_[n.a].grad.middleRows(n.first, n.count) += g;
        break;
      case Op::kAddColwise:
        nodes_[n.a].grad += g;
        nodes_[n.b].grad.col(0) += g.rowwise().sum();
        break;
      case Op::kGatherCols:
        for (std::size_t j = 0; j < n.ids.size(); ++j)
          nodes_[n.a].grad.col(n.ids[j]) +=
              g.col(static_cast<Eigen::Index>(j));
        break;
      case Op::kMaskedSoftmaxRows: {
        Matrix& da = nodes_[n.a].grad;
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
          double dot = 0.0;
          for (Eigen::Index c = 0; c < n.value.cols(); ++c)
            if (n.mask[static_cast<std::size_t>(c)])
              dot += n.value(r, c) * g(r, c);
          for (Eigen::Index c = 0; c < n.value.cols(); ++c)
            if (n.mask[static_cast<std::size_t>(c)])
              da(r, c) += n.value(r, c) * (g(r, c) - dot);
        }
        break;
      }
      case Op::kMaskedMeanCols: {
        Matrix& da = nodes_[n.a].grad;
        for (Eigen::Index c = 0; c < da.cols(); ++c)
          if (n.mask[static_cast<std::size_t>(c)]) da.col(c) += g.col(0) / n.k;
        break;
      }
      case Op::kCrossEntropySoftmax: {
        Matrix delta = n.aux;
        delta(n.target, 0) -= 1.0;
        nodes_[n.a].grad.col(0) += g(0, 0) * delta.col(0);
        break;
      }
    }
  }
}

void Tape::reset() { nodes_.clear(); }

}  // namespace eusim
