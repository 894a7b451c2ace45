#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <vector>

#include "gmcop/tape.hpp"
#include "gmcop/rng.hpp"
#include "oracles.hpp"

using namespace gmcop;

namespace {

using Builder = std::function<Tape::Var(Tape&, const std::vector<Tape::Var>&)>;

double eval_scalar(const Builder& build, const std::vector<Eigen::MatrixXd>& values) {
  Tape tape;
  std::vector<Tape::Var> leaves;
  for (const auto& v : values) leaves.push_back(tape.leaf(v));
  return tape.value(build(tape, leaves))(0, 0);
}

/// Backward vs central finite differences on every leaf entry.
void check_gradients(const Builder& build, std::vector<Eigen::MatrixXd> values,
                     double tol = 2e-6, double h = 1e-6) {
  Tape tape;
  std::vector<Tape::Var> leaves;
  for (const auto& v : values) leaves.push_back(tape.leaf(v));
  Tape::Var loss = build(tape, leaves);
  tape.backward(loss);
  for (std::size_t l = 0; l < values.size(); ++l) {
    const Eigen::MatrixXd analytic = tape.grad(leaves[l]);
    for (int r = 0; r < values[l].rows(); ++r)
      for (int c = 0; c < values[l].cols(); ++c) {
        std::vector<Eigen::MatrixXd> probe = values;
        probe[l](r, c) += h;
        const double up = eval_scalar(build, probe);
        probe[l](r, c) -= 2.0 * h;
        const double down = eval_scalar(build, probe);
        const double fd = (up - down) / (2.0 * h);
        CAPTURE(l);
        CAPTURE(r);
        CAPTURE(c);
        CHECK(oracles::relative_error(analytic(r, c), fd, 1e-4) < tol * 1e4);
      }
  }
}

Eigen::MatrixXd random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("gradient of a constant subgraph is zero and leaves accumulate") {
  Tape tape;
  Tape::Var x = tape.leaf(Eigen::MatrixXd::Constant(1, 1, 3.0));
  Tape::Var c = tape.constant(Eigen::MatrixXd::Constant(1, 1, 2.0));
  Tape::Var y = tape.mul(x, c);
  Tape::Var loss = tape.add(y, tape.mul(x, c));  // 2 * (2x)
  tape.backward(loss);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(4.0));
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(12.0));

  // A pure constant expression exposes a zero gradient.
  CHECK(tape.grad(c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward requires a scalar and finite graphs stay finite") {
  Tape tape;
  Tape::Var x = tape.leaf(Eigen::MatrixXd::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
  Tape::Var s = tape.sum(tape.exp(x));
  tape.backward(s);
  CHECK(tape.grad(x).allFinite());
}

TEST_CASE("arithmetic op gradients") {
  Rng rng(3);
  auto a = random_matrix(rng, 3, 2);
  auto b = random_matrix(rng, 3, 2, 0.5, 2.0);
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.mul(t.add(v[0], v[1]), t.sub(v[0], v[1])));
      },
      {a, b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.div(v[0], v[1])); },
      {a, b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.add_scalar(t.scale(t.neg(v[0]), 1.7), 0.3));
      },
      {a});
}

TEST_CASE("matmul transpose dot gradients") {
  Rng rng(5);
  auto a = random_matrix(rng, 3, 4);
  auto b = random_matrix(rng, 4, 2);
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.matmul(v[0], v[1])); },
      {a, b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.dot(t.transpose(v[0]), t.transpose(v[0]));
      },
      {a});
}

TEST_CASE("elementwise function gradients") {
  Rng rng(7);
  auto a = random_matrix(rng, 2, 3, 0.2, 2.0);
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.log(v[0])); }, {a});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.sqrt(v[0])); }, {a});
  auto b = random_matrix(rng, 2, 3, -1.5, 1.5);
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.exp(v[0])); }, {b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.tanh(v[0])); }, {b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.sigmoid(v[0])); }, {b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.sum(t.softplus(v[0])); }, {b});
}

TEST_CASE("reduction and broadcast gradients") {
  Rng rng(11);
  auto a = random_matrix(rng, 3, 4);
  auto row = random_matrix(rng, 1, 4);
  auto col = random_matrix(rng, 3, 1, 0.5, 1.5);
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.mul(t.row_sum(v[0]), t.row_sum(v[0])));
      },
      {a});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.mul(t.col_mean(v[0]), t.col_mean(v[0])));
      },
      {a});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.add_row_broadcast(v[0], v[1])));
      },
      {a, row});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.mul_col_broadcast(v[0], v[1])));
      },
      {a, col});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.sub_col_broadcast(v[1], v[0])));
      },
      {a, col});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.sub_scalar_var(v[0], t.sum(v[1]))));
      },
      {a, col});
}

TEST_CASE("softmax and logsumexp gradients") {
  Rng rng(13);
  auto a = random_matrix(rng, 3, 5, -2.0, 2.0);
  auto w = random_matrix(rng, 3, 5, 0.1, 1.0);
  check_gradients(
      [&](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.mul(t.softmax_rows(v[0]), v[1]));
      },
      {a, w});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) { return t.logsumexp(v[0]); }, {a});
  check_gradients(
      [&](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.mul(t.logsumexp_rows(v[0]), t.row_sum(v[1])));
      },
      {a, w});

  // softmax rows sum to one
  Tape tape;
  Tape::Var s = tape.softmax_rows(tape.leaf(a));
  CHECK((tape.value(s).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("structure op gradients") {
  Rng rng(17);
  auto a = random_matrix(rng, 2, 3);
  auto b = random_matrix(rng, 1, 3);
  auto c = random_matrix(rng, 2, 2);
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        Tape::Var stacked = t.vstack({v[0], v[1]});
        return t.sum(t.mul(stacked, stacked));
      },
      {a, b});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        Tape::Var h = t.hstack({v[0], v[2]});
        return t.sum(t.mul(h, h));
      },
      {a, b, c});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.slice_rows(v[0], 1, 1)));
      },
      {a});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.slice_cols(v[0], 1, 2)));
      },
      {a});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        Tape::Var f = t.flatten_to_row(v[0]);
        return t.sum(t.mul(f, f));
      },
      {a});
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        return t.sum(t.exp(t.repeat_row(v[0], 3)));
      },
      {b});
}

TEST_CASE("flatten_to_row is row-major") {
  Tape tape;
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  Tape::Var f = tape.flatten_to_row(tape.constant(m));
  CHECK(tape.value(f)(0, 0) == 1);
  CHECK(tape.value(f)(0, 1) == 2);
  CHECK(tape.value(f)(0, 2) == 3);
  CHECK(tape.value(f)(0, 3) == 4);
}

TEST_CASE("SPD solve and logdet gradients") {
  Rng rng(19);
  auto u = random_matrix(rng, 4, 2);
  auto w = random_matrix(rng, 4, 1);
  // C = I + U^T U keeps the probe SPD under perturbation.
  check_gradients(
      [](Tape& t, const std::vector<Tape::Var>& v) {
        Tape::Var cap = t.add(t.matmul(t.transpose(v[0]), v[0]),
                              t.constant(Eigen::MatrixXd::Identity(2, 2)));
        Tape::Var w2 = t.matmul(t.transpose(v[0]), v[1]);
        return t.add(t.solve_quad(cap, w2), t.logdet_spd(cap));
      },
      {u, w});
}

TEST_CASE("inverse-CDF node reproduces the solver and its analytic gradients") {
  Rng rng(23);
  const int n = 3, k = 3;
  Eigen::MatrixXd pi = random_matrix(rng, k, 1, 0.2, 1.0);
  pi /= pi.sum();
  Eigen::MatrixXd means = random_matrix(rng, n, k, -2.0, 2.0);
  Eigen::MatrixXd stds = random_matrix(rng, n, k, 0.4, 1.5);
  Eigen::VectorXd u(n);
  u << 0.2, 0.55, 0.9;

  // Forward agrees with the scalar solver per coordinate.
  {
    Tape tape;
    Tape::Var z = tape.gmm_icdf_node(tape.constant(pi), tape.constant(means),
                                     tape.constant(stds), u, 60, 1e-12);
    for (int i = 0; i < n; ++i) {
      Gmm1dParams p1{pi.col(0), means.row(i).transpose(), stds.row(i).transpose()};
      CHECK(tape.value(z)(i, 0) ==
            doctest::Approx(gmm_icdf(p1, u[i], 60, 1e-12).z).epsilon(1e-12));
    }
  }

  // Gradients of sum(z^2) against finite differences (solver re-run at 1e-13).
  check_gradients(
      [&](Tape& t, const std::vector<Tape::Var>& v) {
        Tape::Var z = t.gmm_icdf_node(v[0], v[1], v[2], u, 80, 1e-13);
        return t.dot(z, z);
      },
      {pi, means, stds}, 1e-4, 1e-5);
}

TEST_CASE("inverse-CDF node failure names the coordinate") {
  Tape tape;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Ones(1, 1);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd stds = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd u(2);
  u << 0.5, 0.9;
  // Budget 1 solves the exact median (coordinate 0) but not 0.9.
  try {
    tape.gmm_icdf_node(tape.constant(pi), tape.constant(means), tape.constant(stds), u, 1,
                       1e-12);
    FAIL("expected IcdfFailure");
  } catch (const IcdfFailure& e) {
    CHECK(e.coordinate == 1);
    CHECK(std::isfinite(e.best_z));
  }
}
