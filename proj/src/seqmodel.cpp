#include "eusim/seqmodel.hpp"

#include <cmath>

namespace eusim {

void GruParams::validate() const {
  int h = hidden();
  require(h > 0, "gru: hidden size must be positive");
  require(w_reset.cols() > h, "gru: weight matrix narrower than state");
  auto check = [h, this](const Matrix& w, const Matrix& b, const char* name) {
    require(w.rows() == h && w.cols() == w_reset.cols(),
            std::string("gru: bad shape for ") + name);
    require(b.rows() == h && b.cols() == 1,
            std::string("gru: bad bias shape for ") + name);
    require(w.allFinite() && b.allFinite(),
            std::string("gru: non-finite values in ") + name);
  };
  check(w_reset, b_reset, "reset");
  check(w_update, b_update, "update");
  check(w_cand, b_cand, "candidate");
}

GruParams init_gru(int hidden, int input_dim, std::uint64_t seed) {
  require(hidden > 0 && input_dim > 0, "init_gru: sizes must be positive");
  Rng rng(seed);
  double s = 1.0 / std::sqrt(static_cast<double>(hidden + input_dim));

  auto draw = [&rng, s](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-s, s);
    return m;
  };

  GruParams p;
  p.w_reset = draw(hidden, hidden + input_dim);
  p.w_update = draw(hidden, hidden + input_dim);
  p.w_cand = draw(hidden, hidden + input_dim);
  p.b_reset = Matrix::Zero(hidden, 1);
  p.b_update = Matrix::Zero(hidden, 1);
  p.b_cand = Matrix::Zero(hidden, 1);
  p.validate();
  return p;
}

namespace {

Vector affine(const Matrix& w, const Vector& top, const Vector& bottom,
              const Matrix& b) {
  Vector cat(top.size() + bottom.size());
  cat << top, bottom;
  return w * cat + b.col(0);
}

}  // namespace

GruStep gru_step(const GruParams& p, const Vector& c_prev, const Vector& x) {
  require(c_prev.size() == p.hidden(), "gru_step: state size mismatch");
  require(x.size() == p.input_dim(), "gru_step: input size mismatch");

  auto sigmoid = [](const Vector& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix().eval();
  };

  GruStep s;
  s.reset_gate = sigmoid(affine(p.w_reset, c_prev, x, p.b_reset));
  s.update_gate = sigmoid(affine(p.w_update, c_prev, x, p.b_update));
  Vector gated = s.reset_gate.cwiseProduct(c_prev);
  s.candidate = affine(p.w_cand, gated, x, p.b_cand).array().tanh().matrix();
  s.state = s.update_gate.cwiseProduct(s.candidate) +
            (Vector::Ones(p.hidden()) - s.update_gate).cwiseProduct(c_prev);
  return s;
}

std::vector<Vector> unroll(const GruParams& p,
                           const std::vector<Vector>& inputs) {
  std::vector<Vector> states;
  states.reserve(inputs.size());
  Vector c = Vector::Zero(p.hidden());
  for (const auto& x : inputs) {
    c = gru_step(p, c, x).state;
    states.push_back(c);
  }
  return states;
}

GruVars load_gru(Tape& tape, const GruParams& p) {
  p.validate();
  return GruVars{tape.leaf(p.w_reset),  tape.leaf(p.w_update),
                 tape.leaf(p.w_cand),   tape.leaf(p.b_reset),
                 tape.leaf(p.b_update), tape.leaf(p.b_cand)};
}

Var gru_step_tape(Tape& tape, const GruVars& v, Var c_prev, Var x) {
  Var cat = tape.vconcat(c_prev, x);
  Var r = tape.sigmoid(tape.add(tape.matmul(v.w_reset, cat), v.b_reset));
  Var g = tape.sigmoid(tape.add(tape.matmul(v.w_update, cat), v.b_update));
  Var gated = tape.vconcat(tape.hadamard(r, c_prev), x);
  Var cand = tape.tanh(tape.add(tape.matmul(v.w_cand, gated), v.b_cand));
  Var keep = tape.hadamard(tape.one_minus(g), c_prev);
  return tape.add(tape.hadamard(g, cand), keep);
}

}  // namespace eusim
