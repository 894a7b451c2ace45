#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#define GMCOP_SOLVER_CHECKS
#include <doctest.h>

#include "gmcop/univariate_gmm.hpp"
#include "oracles.hpp"

using namespace gmcop;

namespace {

Gmm1dParams single(double mu, double sigma) {
  Gmm1dParams p;
  p.weights = Eigen::VectorXd::Ones(1);
  p.means = Eigen::VectorXd::Constant(1, mu);
  p.stddevs = Eigen::VectorXd::Constant(1, sigma);
  return p;
}

}  // namespace

TEST_CASE("cdf matches hand values") {
  CHECK(gmm_cdf(single(0, 1), 0.0) == doctest::Approx(0.5).epsilon(1e-12));

  Gmm1dParams sym;
  sym.weights = Eigen::Vector2d(0.5, 0.5);
  sym.means = Eigen::Vector2d(-1.0, 1.0);
  sym.stddevs = Eigen::Vector2d(1.0, 1.0);
  CHECK(gmm_cdf(sym, 0.0) == doctest::Approx(0.5).epsilon(1e-12));

  // Tail mass below -10 sigma: Phi(-10), about 7.6e-24.
  CHECK(gmm_cdf(single(0, 1), -10.0) == doctest::Approx(kTailMass).epsilon(1e-12));
  CHECK(gmm_cdf(single(0, 1), -10.0) < 7.7e-24);
  CHECK(gmm_cdf(single(0, 1), -10.0) > 0.0);
}

TEST_CASE("pdf closed forms and positivity") {
  CHECK(gmm_pdf(single(0, 1), 0.0) == doctest::Approx(kInvSqrt2Pi).epsilon(1e-12));

  Gmm1dParams p;
  p.weights = Eigen::Vector2d(0.3, 0.7);
  p.means = Eigen::Vector2d(0.0, 0.0);
  p.stddevs = Eigen::Vector2d(1.0, 2.0);
  const double want = 0.3 * normal_pdf(0.0) + 0.7 * normal_pdf(0.0) / 2.0;
  CHECK(gmm_pdf(p, 0.0) == doctest::Approx(want).epsilon(1e-12));

  CHECK(gmm_log_pdf(single(0, 1), 38.0) > -std::numeric_limits<double>::infinity());
}

TEST_CASE("pdf equals derivative of cdf") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Gmm1dParams p = oracles::random_gmm1d(rng, 1 + static_cast<int>(4 * rng.uniform()));
    const double z = 8.0 * rng.uniform() - 4.0;
    const double fd =
        oracles::central_diff([&](double x) { return gmm_cdf(p, x); }, z, 1e-6);
    CHECK(gmm_pdf(p, z) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("cdf rejects non-finite input, validate rejects bad params") {
  CHECK_THROWS_AS(gmm_cdf(single(0, 1), std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  Gmm1dParams bad = single(0, 1);
  bad.stddevs[0] = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = single(0, 1);
  bad.weights[0] = 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  CHECK_NOTHROW(validate(single(0, 1)));
}

TEST_CASE("icdf solves the median and affine cases") {
  const IcdfSolveResult r = gmm_icdf(single(0, 1), 0.5);
  CHECK(r.converged);
  CHECK(std::abs(r.z) < 1e-9);

  // z = mu + sigma * Phi^{-1}(u): u = Phi(1) gives mu + sigma.
  const IcdfSolveResult r2 = gmm_icdf(single(3, 2), normal_cdf(1.0));
  CHECK(r2.converged);
  CHECK(r2.z == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("icdf matches pure bisection oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Gmm1dParams p = oracles::random_gmm1d(rng, 3);
    const double u = trial == 0 ? 0.25 : rng.uniform();
    const IcdfSolveResult r = gmm_icdf(p, u, 50, 1e-12);
    CHECK(r.converged);
    CHECK(std::abs(r.z - oracles::bisect_icdf(p, u)) < 1e-8);
  }
}

TEST_CASE("icdf residual meets tolerance across the unit interval") {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Gmm1dParams p = oracles::random_gmm1d(rng, 1 + static_cast<int>(5 * rng.uniform()));
    for (double u : {1e-6, 1e-3, 0.1, 0.5, 0.9, 1.0 - 1e-3, 1.0 - 1e-6}) {
      const IcdfSolveResult r = gmm_icdf(p, u, 50, 1e-10);
      CHECK(r.converged);
      CHECK(r.residual <= 1e-10);
      CHECK(r.iterations_used <= 50);
      // Returned iterate stays in the initial bracket.
      auto [lo, hi] = gmm_icdf_bracket(p);
      CHECK(r.z >= lo);
      CHECK(r.z <= hi);
    }
  }
}

TEST_CASE("icdf rejects bad arguments and clamps sub-tail probabilities") {
  CHECK_THROWS_AS(gmm_icdf(single(0, 1), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gmm_icdf(single(0, 1), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gmm_icdf(single(0, 1), 0.5, 0), std::invalid_argument);
  const IcdfSolveResult r = gmm_icdf(single(0, 1), 1e-30);
  CHECK(r.clamped);
  CHECK(r.converged);
}

TEST_CASE("icdf failure signal carries best iterate") {
  // One iteration cannot converge from the bracket midpoint.
  const IcdfSolveResult r = gmm_icdf(single(0, 1), 0.9, 1, 1e-14);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations_used == 1);
  CHECK(std::isfinite(r.z));
  CHECK(r.residual > 1e-14);
}

TEST_CASE("round trip cdf(icdf(u)) = u on a grid") {
  Rng rng(17);
  const Gmm1dParams p = oracles::random_gmm1d(rng, 4);
  for (double u = 1e-6; u < 1.0; u += 0.037) {
    const IcdfSolveResult r = gmm_icdf(p, u, 50, 1e-10);
    CHECK(r.converged);
    CHECK(std::abs(gmm_cdf(p, r.z) - u) <= 1e-10);
  }
  const IcdfSolveResult r = gmm_icdf(p, 1.0 - 1e-6, 50, 1e-10);
  CHECK(std::abs(gmm_cdf(p, r.z) - (1.0 - 1e-6)) <= 1e-10);
}

TEST_CASE("cdf is strictly monotone on random draws") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const Gmm1dParams p = oracles::random_gmm1d(rng, 1 + static_cast<int>(4 * rng.uniform()));
    // Probe where the CDF increments are representable; in the far plateaus
    // consecutive doubles coincide.
    const double lo = p.means.minCoeff() - 1.0;
    const double hi = p.means.maxCoeff() + 1.0;
    const double z1 = lo + (hi - lo) * rng.uniform();
    const double z2 = z1 + 0.01 + rng.uniform();
    CHECK(gmm_cdf(p, z1) < gmm_cdf(p, z2));
  }
}

TEST_CASE("single-component inverse-CDF gradients have closed forms") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const double mu = 4.0 * rng.uniform() - 2.0;
    const double sigma = 0.3 + rng.uniform();
    const Gmm1dParams p = single(mu, sigma);
    const double u = 0.05 + 0.9 * rng.uniform();
    const double z = gmm_icdf(p, u, 50, 1e-13).z;
    const IcdfGrads g = gmm_icdf_grads(p, z, u);
    // Location equivariance: z = mu + sigma Phi^{-1}(u).
    CHECK(g.d_z_d_mean[0] == doctest::Approx(1.0).epsilon(1e-8));
  }
  // At the median of a single Gaussian the variance gradient vanishes.
  const Gmm1dParams p = single(1.7, 0.8);
  const double z = gmm_icdf(p, 0.5, 50, 1e-13).z;
  const IcdfGrads g = gmm_icdf_grads(p, z, 0.5);
  CHECK(std::abs(g.d_z_d_var[0]) < 1e-8);
}

TEST_CASE("inverse-CDF gradients match finite differences") {
  Rng rng(29);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const int k = 1 + static_cast<int>(5 * rng.uniform());
    const Gmm1dParams p = oracles::random_gmm1d(rng, k);
    const double u = trial % 3 == 0 ? 0.7 : 0.02 + 0.96 * rng.uniform();
    const double z = oracles::polished_icdf(p, u);
    const IcdfGrads g = gmm_icdf_grads(p, z, u);
    const double h = 1e-5;
    for (int j = 0; j < k; ++j) {
      // Weights are free scalars here; the perturbed vector leaves the simplex.
      const double fd_w = oracles::central_diff(
          [&](double w) {
            Gmm1dParams q = p;
            q.weights[j] = w;
            return oracles::polished_icdf(q, u);
          },
          p.weights[j], h);
      CHECK(oracles::relative_error(g.d_z_d_weight[j], fd_w) < 1e-4);

      const double fd_m = oracles::central_diff(
          [&](double m) {
            Gmm1dParams q = p;
            q.means[j] = m;
            return oracles::polished_icdf(q, u);
          },
          p.means[j], h);
      CHECK(oracles::relative_error(g.d_z_d_mean[j], fd_m) < 1e-4);

      const double var = p.stddevs[j] * p.stddevs[j];
      const double fd_v = oracles::central_diff(
          [&](double v) {
            Gmm1dParams q = p;
            q.stddevs[j] = std::sqrt(v);
            return oracles::polished_icdf(q, u);
          },
          var, h);
      CHECK(oracles::relative_error(g.d_z_d_var[j], fd_v) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 100);
}
