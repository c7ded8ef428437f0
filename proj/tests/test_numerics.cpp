#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eusim/common.hpp"
#include "eusim/tape.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <set>

using namespace eusim;
using eusim::testing::fd_gradient;
using eusim::testing::max_rel_err;
using eusim::testing::oracle_matmul;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("matmul identity and projector") {
  Tape t;
  Matrix id2 = Matrix::Identity(2, 2);
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  Var prod = t.matmul(t.leaf(id2), t.leaf(m));
  CHECK(prod.value().isApprox(m));

  Matrix proj(2, 2);
  proj << 1, 0, 0, 0;
  Matrix v(2, 1);
  v << 5, 7;
  Var pv = t.matmul(t.leaf(proj), t.leaf(v));
  CHECK(pv.value()(0, 0) == 5.0);
  CHECK(pv.value()(1, 0) == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(11);
  Matrix a = random_matrix(rng, 3, 4);
  Matrix b = random_matrix(rng, 4, 2);
  Tape t;
  Matrix got = t.matmul(t.leaf(a), t.leaf(b)).value();
  CHECK(max_rel_err(got, oracle_matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape t;
  Matrix a = Matrix::Zero(2, 3);
  Matrix b = Matrix::Zero(2, 2);
  CHECK_THROWS_WITH_AS(t.matmul(t.leaf(a), t.leaf(b)),
                       doctest::Contains("2x3"), std::invalid_argument);
}

TEST_CASE("matmul associativity") {
  Rng rng(12);
  Matrix a = random_matrix(rng, 3, 4);
  Matrix b = random_matrix(rng, 4, 5);
  Matrix c = random_matrix(rng, 5, 2);
  Tape t;
  Matrix ab_c =
      t.matmul(t.matmul(t.leaf(a), t.leaf(b)), t.leaf(c)).value();
  Matrix a_bc =
      t.matmul(t.leaf(a), t.matmul(t.leaf(b), t.leaf(c))).value();
  CHECK((ab_c - a_bc).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("elementwise values at fixed points") {
  Tape t;
  Matrix zero = Matrix::Zero(1, 1);
  CHECK(t.sigmoid(t.leaf(zero)).value()(0, 0) == doctest::Approx(0.5));
  CHECK(t.tanh(t.leaf(zero)).value()(0, 0) == 0.0);
  Matrix neg(1, 1);
  neg << -3.2;
  CHECK(t.relu(t.leaf(neg)).value()(0, 0) == 0.0);
}

TEST_CASE("softmax closed forms") {
  Tape t;
  Matrix zeros = Matrix::Zero(4, 1);
  Matrix uniform = t.softmax(t.leaf(zeros)).value();
  for (int i = 0; i < 4; ++i) CHECK(uniform(i, 0) == doctest::Approx(0.25));

  Matrix big(2, 1);
  big << 1000, 0;
  Matrix stable = t.softmax(t.leaf(big)).value();
  CHECK(stable.allFinite());
  CHECK(stable(0, 0) > 0.999);
  CHECK(stable(1, 0) < 1e-9);

  Matrix logs(3, 1);
  logs << std::log(1.0), std::log(2.0), std::log(3.0);
  Matrix p = t.softmax(t.leaf(logs)).value();
  CHECK(p(0, 0) == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p(1, 0) == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(p(2, 0) == doctest::Approx(3.0 / 6).epsilon(1e-12));
}

TEST_CASE("softmax output is a simplex element") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = random_matrix(rng, 6, 1) * 10.0;
    Tape t;
    Matrix p = t.softmax(t.leaf(x)).value();
    CHECK(p.minCoeff() >= 0.0);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("backward of x*x at x=3") {
  Matrix x(1, 1);
  x << 3;
  Tape t;
  Var vx = t.leaf(x);
  Var loss = t.sum(t.hadamard(vx, vx));
  t.backward(loss);
  CHECK(vx.grad()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("cross-entropy gradient is p minus onehot") {
  Matrix logits = Matrix::Zero(4, 1);
  Tape t;
  Var vl = t.leaf(logits);
  Var loss = t.cross_entropy_softmax(vl, 0);
  CHECK(loss.value()(0, 0) == doctest::Approx(std::log(4.0)));
  t.backward(loss);
  CHECK(vl.grad()(0, 0) == doctest::Approx(-0.75));
  for (int i = 1; i < 4; ++i) CHECK(vl.grad()(i, 0) == doctest::Approx(0.25));
}

TEST_CASE("backward rejects non-scalar loss") {
  Matrix x = Matrix::Zero(2, 2);
  Tape t;
  Var vx = t.leaf(x);
  CHECK_THROWS_WITH_AS(t.backward(vx), doctest::Contains("scalar"),
                       std::invalid_argument);
}

TEST_CASE("constant rejects non-finite values") {
  Tape t;
  Matrix bad(1, 2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(t.constant(bad), std::invalid_argument);
  Matrix inf(1, 1);
  inf << INFINITY;
  CHECK_THROWS_AS(t.constant(inf), std::invalid_argument);
}

namespace {

/// Gradient check of a single tape op against central finite differences,
/// with a fixed random weighting to make the output scalar.
template <typename Build>
void gradcheck_op(const char* name, std::vector<Matrix> inputs, Build build) {
  Rng rng(fnv1a64(name));
  std::vector<Matrix> weights;

  auto forward = [&](Tape& t, std::vector<Var>& vars) {
    vars.clear();
    for (Matrix& m : inputs) vars.push_back(t.leaf(m));
    Var out = build(t, vars);
    if (weights.empty()) {
      weights.push_back(random_matrix(rng, out.rows(), out.cols()));
    }
    return t.sum(t.hadamard(out, t.constant(weights[0])));
  };

  Tape t;
  std::vector<Var> vars;
  Var loss = forward(t, vars);
  t.backward(loss);

  auto eval = [&]() {
    Tape t2;
    std::vector<Var> v2;
    return forward(t2, v2).value()(0, 0);
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Matrix numeric = fd_gradient(inputs[i], eval);
    INFO(name, " input ", i);
    CHECK(max_rel_err(vars[i].grad(), numeric) < 1e-4);
  }
}

}  // namespace

TEST_CASE("per-op gradients match finite differences") {
  Rng rng(17);

  gradcheck_op("matmul",
               {random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.matmul(v[0], v[1]);
               });
  gradcheck_op("add", {random_matrix(rng, 3, 3), random_matrix(rng, 3, 3)},
               [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[1]); });
  gradcheck_op("hadamard",
               {random_matrix(rng, 3, 3), random_matrix(rng, 3, 3)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.hadamard(v[0], v[1]);
               });
  gradcheck_op("scale", {random_matrix(rng, 2, 5)},
               [](Tape& t, std::vector<Var>& v) { return t.scale(v[0], 2.5); });
  gradcheck_op("one_minus", {random_matrix(rng, 2, 3)},
               [](Tape& t, std::vector<Var>& v) { return t.one_minus(v[0]); });
  gradcheck_op("sigmoid", {random_matrix(rng, 3, 3)},
               [](Tape& t, std::vector<Var>& v) { return t.sigmoid(v[0]); });
  gradcheck_op("tanh", {random_matrix(rng, 3, 3)},
               [](Tape& t, std::vector<Var>& v) { return t.tanh(v[0]); });

  Matrix away = random_matrix(rng, 3, 3);
  for (Eigen::Index i = 0; i < away.size(); ++i)
    away(i) += away(i) >= 0 ? 0.5 : -0.5;  // keep clear of the relu kink
  gradcheck_op("relu", {away},
               [](Tape& t, std::vector<Var>& v) { return t.relu(v[0]); });

  gradcheck_op("transpose", {random_matrix(rng, 2, 4)},
               [](Tape& t, std::vector<Var>& v) { return t.transpose(v[0]); });
  gradcheck_op("sum", {random_matrix(rng, 3, 4)},
               [](Tape& t, std::vector<Var>& v) { return t.sum(v[0]); });
  gradcheck_op("softmax", {random_matrix(rng, 5, 1)},
               [](Tape& t, std::vector<Var>& v) { return t.softmax(v[0]); });
  gradcheck_op("vconcat",
               {random_matrix(rng, 2, 3), random_matrix(rng, 4, 3)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.vconcat(v[0], v[1]);
               });
  gradcheck_op("rows", {random_matrix(rng, 6, 2)},
               [](Tape& t, std::vector<Var>& v) { return t.rows(v[0], 1, 3); });
  gradcheck_op("add_colwise",
               {random_matrix(rng, 3, 4), random_matrix(rng, 3, 1)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.add_colwise(v[0], v[1]);
               });
  gradcheck_op("gather_cols", {random_matrix(rng, 3, 8)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.gather_cols(v[0], {2, 2, 5, 0});
               });
  gradcheck_op("masked_softmax_rows", {random_matrix(rng, 3, 6)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.masked_softmax_rows(v[0], {1, 0, 1, 1, 0, 1});
               });
  gradcheck_op("masked_mean_cols", {random_matrix(rng, 4, 5)},
               [](Tape& t, std::vector<Var>& v) {
                 return t.masked_mean_cols(v[0], {1, 0, 1, 0, 1});
               });

  // Fused loss is already scalar; weight trick unnecessary.
  Matrix logits = random_matrix(rng, 4, 1);
  Tape t;
  Var vl = t.leaf(logits);
  Var loss = t.cross_entropy_softmax(vl, 2);
  t.backward(loss);
  auto eval = [&]() {
    Tape t2;
    return t2.cross_entropy_softmax(t2.leaf(logits), 2).value()(0, 0);
  };
  Matrix numeric = fd_gradient(logits, eval);
  CHECK(max_rel_err(vl.grad(), numeric) < 1e-4);
}

TEST_CASE("gather_cols accumulates repeated ids") {
  Matrix table = Matrix::Zero(2, 3);
  Tape t;
  Var vt = t.leaf(table);
  Var gathered = t.gather_cols(vt, {1, 1});
  Var loss = t.sum(gathered);
  t.backward(loss);
  CHECK(vt.grad()(0, 1) == doctest::Approx(2.0));
  CHECK(vt.grad()(0, 0) == 0.0);
}

TEST_CASE("masked softmax zeroes masked columns") {
  Rng rng(19);
  Matrix s = random_matrix(rng, 2, 4);
  Tape t;
  Matrix a = t.masked_softmax_rows(t.leaf(s), {1, 0, 1, 0}).value();
  for (Eigen::Index r = 0; r < 2; ++r) {
    CHECK(a(r, 1) == 0.0);
    CHECK(a(r, 3) == 0.0);
    CHECK(a.row(r).sum() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(t.masked_softmax_rows(t.leaf(s), {0, 0, 0, 0}),
                  std::invalid_argument);
}

TEST_CASE("rng determinism and bounds") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_differ = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    all_equal = all_equal && x == b.uniform();
    any_differ = any_differ || x != c.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_differ);

  Rng d(7);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t v = d.uniform_int(3, 7);
    CHECK(v >= 3);
    CHECK(v <= 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(d.uniform_int(5, 4), std::invalid_argument);
}

TEST_CASE("categorical draws follow the weights") {
  Rng rng(5);
  Vector w(4);
  w << 0, 0, 1, 0;
  for (int i = 0; i < 50; ++i) CHECK(rng.categorical(w) == 2);
  Vector zero = Vector::Zero(3);
  CHECK_THROWS_AS(rng.categorical(zero), std::invalid_argument);
}

TEST_CASE("hash and mixer reference values") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafull);
}

TEST_CASE("fixed-decimal formatting") {
  CHECK(format_fixed(0.25, 4) == "0.2500");
  CHECK(format_fixed(-1.0 / 3.0, 6) == "-0.333333");
  CHECK(format_fixed(2.0, 0) == "2");
}
