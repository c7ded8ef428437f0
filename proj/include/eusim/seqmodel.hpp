#pragma once

#include "eusim/common.hpp"
#include "eusim/tape.hpp"

#include <cstdint>
#include <vector>

namespace eusim {

/// Gated recurrent cell over 12-dimensional influence inputs. Weight matrices
/// act on [state; input], so they are h x (h + 12); biases are h x 1.
struct GruParams {
  Matrix w_reset;
  Matrix w_update;
  Matrix w_cand;
  Matrix b_reset;
  Matrix b_update;
  Matrix b_cand;

  int hidden() const { return static_cast<int>(w_reset.rows()); }
  int input_dim() const {
    return static_cast<int>(w_reset.cols() - w_reset.rows());
  }
  void validate() const;
};

/// Weights uniform in (-s, s) with s = 1/sqrt(h + input_dim), biases zero.
GruParams init_gru(int hidden, int input_dim, std::uint64_t seed);

struct GruStep {
  Vector reset_gate;
  Vector update_gate;
  Vector candidate;
  Vector state;
};

/// One recurrence:
///   r = sigmoid(W_r [c; x] + b_r)
///   g = sigmoid(W_g [c; x] + b_g)
///   cand = tanh(W_c [r .* c; x] + b_c)
///   c' = g .* cand + (1 - g) .* c
GruStep gru_step(const GruParams& p, const Vector& c_prev, const Vector& x);

/// States after each input, starting from the zero state.
std::vector<Vector> unroll(const GruParams& p,
                           const std::vector<Vector>& inputs);

struct GruVars {
  Var w_reset, w_update, w_cand;
  Var b_reset, b_update, b_cand;
};

GruVars load_gru(Tape& tape, const GruParams& p);

/// Tape twin of gru_step; returns the new state.
Var gru_step_tape(Tape& tape, const GruVars& v, Var c_prev, Var x);

}  // namespace eusim
