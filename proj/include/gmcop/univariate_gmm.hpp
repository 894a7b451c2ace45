#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "gmcop/special_functions.hpp"

// One-dimensional Gaussian mixture: CDF, PDF, safeguarded Newton-bisection
// inverse CDF, and the analytic gradients of the inverse CDF with respect to
// the mixture parameters (implicit differentiation of F(z) = u).
//
// Define GMCOP_SOLVER_CHECKS before including to assert the bracketing
// invariant on every solver iteration (test builds).

namespace gmcop {

/// Mass of a standard normal below -10; probability outside the solver
/// bracket is below this for every mixture.
inline constexpr double kTailMass = 7.6198530241605260e-24;  // Phi(-10)

/// Floor applied to the PDF when it appears as a denominator.
inline constexpr double kPdfFloor = 1e-8;

struct Gmm1dParams {
  Eigen::VectorXd weights;   // probability vector, length K
  Eigen::VectorXd means;     // length K
  Eigen::VectorXd stddevs;   // positive, length K

  int components() const { return static_cast<int>(weights.size()); }
};

/// Throws std::invalid_argument unless weights lie on the simplex (1e-12),
/// stddevs are strictly positive and all sizes agree. Evaluation functions
/// below intentionally accept unnormalized positive weights: the inverse-CDF
/// gradients are defined with respect to free weights, and finite-difference
/// probes perturb one weight at a time.
inline void validate(const Gmm1dParams& p) {
  const auto k = p.weights.size();
  if (k < 1 || p.means.size() != k || p.stddevs.size() != k)
    throw std::invalid_argument("Gmm1dParams: size mismatch");
  if (!p.weights.allFinite() || !p.means.allFinite() || !p.stddevs.allFinite())
    throw std::invalid_argument("Gmm1dParams: non-finite entry");
  if ((p.weights.array() < 0.0).any())
    throw std::invalid_argument("Gmm1dParams: negative weight");
  if (std::abs(p.weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("Gmm1dParams: weights do not sum to 1");
  if ((p.stddevs.array() <= 0.0).any())
    throw std::invalid_argument("Gmm1dParams: non-positive stddev");
}

/// F(z) = sum_j pi_j Phi((z - mu_j) / sigma_j). Strictly increasing in z.
inline double gmm_cdf(const Gmm1dParams& p, double z) {
  if (!std::isfinite(z)) throw std::invalid_argument("gmm_cdf: non-finite z");
  double acc = 0.0;
  for (int j = 0; j < p.components(); ++j)
    acc += p.weights[j] * normal_cdf((z - p.means[j]) / p.stddevs[j]);
  return acc;
}

/// log f(z) with f = dF/dz, via logsumexp over components.
inline double gmm_log_pdf(const Gmm1dParams& p, double z) {
  if (!std::isfinite(z)) throw std::invalid_argument("gmm_log_pdf: non-finite z");
  const int k = p.components();
  double m = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd lt(k);
  for (int j = 0; j < k; ++j) {
    const double t = (z - p.means[j]) / p.stddevs[j];
    lt[j] = std::log(p.weights[j]) - std::log(p.stddevs[j]) + log_normal_pdf(t);
    m = std::max(m, lt[j]);
  }
  if (!std::isfinite(m)) return m;  // all components vanished
  double s = 0.0;
  for (int j = 0; j < k; ++j) s += std::exp(lt[j] - m);
  return m + std::log(s);
}

inline double gmm_pdf(const Gmm1dParams& p, double z) {
  return std::exp(gmm_log_pdf(p, z));
}

struct IcdfSolveResult {
  double z = 0.0;
  double residual = 0.0;   // |F(z) - u|
  int iterations_used = 0;
  bool converged = false;
  bool clamped = false;    // u was pulled into the representable tail range
};

struct IcdfBracket {
  double low;
  double high;
};

/// Initial bracket [min_j mu_j - 10 max_j sigma_j, max_j mu_j + 10 max_j sigma_j];
/// the mixture mass outside it is below kTailMass.
inline IcdfBracket gmm_icdf_bracket(const Gmm1dParams& p) {
  const double s = 10.0 * p.stddevs.maxCoeff();
  return {p.means.minCoeff() - s, p.means.maxCoeff() + s};
}

/// Solves F(z) = u by safeguarded Newton-bisection. The iterate starts at the
/// bracket midpoint; a Newton step is accepted only if it lands strictly
/// inside the current bracket, otherwise the step bisects. The invariant
/// F(low) <= u <= F(high) holds throughout. u is clamped into
/// [kTailMass, 1 - kTailMass] (and into the bracket's reachable CDF range,
/// which differs only below floating-point precision).
inline IcdfSolveResult gmm_icdf(const Gmm1dParams& p, double u, int budget = 50,
                                double tol = 1e-10) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("gmm_icdf: u outside (0,1)");
  if (budget < 1) throw std::invalid_argument("gmm_icdf: budget < 1");

  IcdfSolveResult out;
  auto [low, high] = gmm_icdf_bracket(p);
  const double f_low = gmm_cdf(p, low);
  const double f_high = gmm_cdf(p, high);
  double ue = std::min(std::max(u, kTailMass), 1.0 - kTailMass);
  ue = std::min(std::max(ue, f_low), f_high);
  out.clamped = (ue != u);

  double x = 0.5 * (low + high);
  for (int it = 1; it <= budget; ++it) {
    const double r = gmm_cdf(p, x) - ue;
    if (std::abs(r) <= tol) {
      out.z = x;
      out.residual = std::abs(r);
      out.iterations_used = it;
      out.converged = true;
      return out;
    }
    if (r < 0.0)
      low = x;
    else
      high = x;
#ifdef GMCOP_SOLVER_CHECKS
    assert(gmm_cdf(p, low) <= ue && ue <= gmm_cdf(p, high));
#endif
    const double f = std::max(gmm_pdf(p, x), kPdfFloor);
    const double xn = x - r / f;
    x = (xn > low && xn < high) ? xn : 0.5 * (low + high);
  }
  out.z = x;
  out.residual = std::abs(gmm_cdf(p, x) - ue);
  out.iterations_used = budget;
  out.converged = out.residual <= tol;
  return out;
}

struct IcdfGrads {
  Eigen::VectorXd d_z_d_weight;  // dz/dpi_j, weights treated as free scalars
  Eigen::VectorXd d_z_d_mean;    // dz/dmu_j
  Eigen::VectorXd d_z_d_var;     // dz/dsigma_j^2
};

/// Analytic gradients of z = F^{-1}(u) at a solved root, by implicit
/// differentiation of F(z) = u. The simplex constraint on the weights is
/// handled by the caller's parameterization, not here.
inline IcdfGrads gmm_icdf_grads(const Gmm1dParams& p, double z, double u) {
  if (!std::isfinite(z) || !std::isfinite(u))
    throw std::invalid_argument("gmm_icdf_grads: non-finite input");
#ifdef GMCOP_SOLVER_CHECKS
  assert(std::abs(gmm_cdf(p, z) - u) < 1e-6);
#else
  (void)u;
#endif
  const int k = p.components();
  const double f = std::max(gmm_pdf(p, z), kPdfFloor);
  IcdfGrads g;
  g.d_z_d_weight.resize(k);
  g.d_z_d_mean.resize(k);
  g.d_z_d_var.resize(k);
  for (int j = 0; j < k; ++j) {
    const double sig = p.stddevs[j];
    const double t = (z - p.means[j]) / sig;
    const double phi = normal_pdf(t);
    g.d_z_d_weight[j] = -normal_cdf(t) / f;
    g.d_z_d_mean[j] = p.weights[j] * phi / (sig * f);
    g.d_z_d_var[j] = p.weights[j] * phi * (z - p.means[j]) / (2.0 * sig * sig * sig * f);
  }
  return g;
}

}  // namespace gmcop
