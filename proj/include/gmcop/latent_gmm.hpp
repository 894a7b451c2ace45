#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "gmcop/rng.hpp"
#include "gmcop/special_functions.hpp"
#include "gmcop/univariate_gmm.hpp"

// N-dimensional latent Gaussian mixture with low-rank-plus-diagonal
// covariance structure. Each component's covariance is
//
//   Sigma = D R D,  R = diag(G)^{-1/2} G diag(G)^{-1/2},  G = U U^T + I,
//
// with D = diag(sigma). Sigma is never materialized: writing
// s_n = sigma_n / sqrt(1 + |U_n|^2) gives Sigma = S (U U^T + I) S with
// S = diag(s), so solves and determinants reduce to the H x H capacitance
// I + U^T U. The diagonal of Sigma equals sigma^2 exactly by construction.

namespace gmcop {

struct LatentGmmParams {
  Eigen::VectorXd weights;               // K
  std::vector<Eigen::VectorXd> means;    // K vectors of length N
  std::vector<Eigen::VectorXd> stddevs;  // K positive vectors of length N
  std::vector<Eigen::MatrixXd> factors;  // K matrices N x H

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
  int rank() const { return factors.empty() ? 0 : static_cast<int>(factors[0].cols()); }
};

inline void validate(const LatentGmmParams& p) {
  const int k = p.components();
  if (k < 1) throw std::invalid_argument("LatentGmmParams: K < 1");
  if (static_cast<int>(p.means.size()) != k || static_cast<int>(p.stddevs.size()) != k ||
      static_cast<int>(p.factors.size()) != k)
    throw std::invalid_argument("LatentGmmParams: component count mismatch");
  if ((p.weights.array() < 0.0).any() || std::abs(p.weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("LatentGmmParams: weights not on the simplex");
  const int n = p.dim();
  const int h = p.rank();
  if (n < 1 || h < 1) throw std::invalid_argument("LatentGmmParams: N and H must be >= 1");
  for (int j = 0; j < k; ++j) {
    if (p.means[j].size() != n || p.stddevs[j].size() != n || p.factors[j].rows() != n ||
        p.factors[j].cols() != h)
      throw std::invalid_argument("LatentGmmParams: shape mismatch");
    if ((p.stddevs[j].array() <= 0.0).any())
      throw std::invalid_argument("LatentGmmParams: non-positive stddev");
    if (!p.factors[j].allFinite())
      throw std::invalid_argument("LatentGmmParams: non-finite factor");
  }
}

/// One mixture component with cached capacitance factorization.
struct LowRankGaussian {
  Eigen::VectorXd mean;        // N
  Eigen::VectorXd diag_scale;  // N, s_n = sigma_n / sqrt(1 + |U_n|^2)
  Eigen::MatrixXd factor;      // N x H, rows U_n
  Eigen::LLT<Eigen::MatrixXd> capacitance_llt;  // of I + U^T U
  double capacitance_logdet = 0.0;

  int dim() const { return static_cast<int>(mean.size()); }
};

inline LowRankGaussian build_component(const Eigen::VectorXd& mean,
                                       const Eigen::VectorXd& stddevs,
                                       const Eigen::MatrixXd& factor) {
  const auto n = mean.size();
  if (stddevs.size() != n || factor.rows() != n)
    throw std::invalid_argument("build_component: dimension mismatch");
  if ((stddevs.array() <= 0.0).any())
    throw std::invalid_argument("build_component: non-positive stddev");
  if (!factor.allFinite() || !mean.allFinite())
    throw std::invalid_argument("build_component: non-finite input");

  LowRankGaussian g;
  g.mean = mean;
  g.factor = factor;
  const Eigen::ArrayXd gram_diag = 1.0 + factor.rowwise().squaredNorm().array();
  g.diag_scale = (stddevs.array() / gram_diag.sqrt()).matrix();

  const auto h = factor.cols();
  Eigen::MatrixXd cap = Eigen::MatrixXd::Identity(h, h);
  cap.noalias() += factor.transpose() * factor;
  g.capacitance_llt.compute(cap);
  if (g.capacitance_llt.info() != Eigen::Success)
    throw std::runtime_error("build_component: capacitance factorization failed");
  g.capacitance_logdet =
      2.0 * g.capacitance_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return g;
}

/// log N(z; mean, Sigma) in O(NH^2 + H^3) via the Woodbury identity and the
/// matrix determinant lemma.
inline double component_logpdf(const LowRankGaussian& g, const Eigen::VectorXd& z) {
  if (z.size() != g.mean.size())
    throw std::invalid_argument("component_logpdf: dimension mismatch");
  if (!z.allFinite()) throw std::invalid_argument("component_logpdf: non-finite z");
  const Eigen::VectorXd v = ((z - g.mean).array() / g.diag_scale.array()).matrix();
  const Eigen::VectorXd w = g.factor.transpose() * v;
  const double quad = v.squaredNorm() - w.dot(g.capacitance_llt.solve(w));
  const double logdet =
      g.capacitance_logdet + 2.0 * g.diag_scale.array().log().sum();
  return -0.5 * (g.mean.size() * kLog2Pi + logdet + quad);
}

/// Mixture with components prebuilt for repeated evaluation.
struct LatentMixture {
  Eigen::VectorXd weights;
  std::vector<LowRankGaussian> comps;
};

inline LatentMixture build_mixture(const LatentGmmParams& p) {
  LatentMixture m;
  m.weights = p.weights;
  m.comps.reserve(p.components());
  for (int j = 0; j < p.components(); ++j)
    m.comps.push_back(build_component(p.means[j], p.stddevs[j], p.factors[j]));
  return m;
}

inline double mixture_logpdf(const LatentMixture& m, const Eigen::VectorXd& z) {
  const int k = static_cast<int>(m.comps.size());
  Eigen::VectorXd lt(k);
  for (int j = 0; j < k; ++j)
    lt[j] = std::log(m.weights[j]) + component_logpdf(m.comps[j], z);
  const double mx = lt.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((lt.array() - mx).exp().sum());
}

inline double mixture_logpdf(const LatentGmmParams& p, const Eigen::VectorXd& z) {
  return mixture_logpdf(build_mixture(p), z);
}

/// Restricts the mixture to the coordinates in `keep` (in the given order).
/// Row restriction of U followed by re-normalization reproduces exactly the
/// corresponding submatrix of Sigma, because diag(G) and the entries of R
/// depend only on the kept rows.
inline LatentGmmParams marginalize(const LatentGmmParams& p, const std::vector<int>& keep) {
  if (keep.empty()) throw std::invalid_argument("marginalize: empty index set");
  const int n = p.dim();
  for (int idx : keep)
    if (idx < 0 || idx >= n) throw std::invalid_argument("marginalize: index out of range");
  LatentGmmParams out;
  out.weights = p.weights;
  const int m = static_cast<int>(keep.size());
  for (int j = 0; j < p.components(); ++j) {
    Eigen::VectorXd mu(m), sd(m);
    Eigen::MatrixXd u(m, p.rank());
    for (int i = 0; i < m; ++i) {
      mu[i] = p.means[j][keep[i]];
      sd[i] = p.stddevs[j][keep[i]];
      u.row(i) = p.factors[j].row(keep[i]);
    }
    out.means.push_back(std::move(mu));
    out.stddevs.push_back(std::move(sd));
    out.factors.push_back(std::move(u));
  }
  return out;
}

/// The n-th univariate marginal: a 1-D Gaussian mixture with the same
/// weights; Sigma_nn = sigma_n^2 exactly, so the stddevs carry over.
inline Gmm1dParams marginal_1d(const LatentGmmParams& p, int n) {
  if (n < 0 || n >= p.dim()) throw std::invalid_argument("marginal_1d: index out of range");
  const int k = p.components();
  Gmm1dParams out;
  out.weights = p.weights;
  out.means.resize(k);
  out.stddevs.resize(k);
  for (int j = 0; j < k; ++j) {
    out.means[j] = p.means[j][n];
    out.stddevs[j] = p.stddevs[j][n];
  }
  return out;
}

/// Draws `count` samples; each row is one draw. Component index from
/// Categorical(weights), then x = mean + S (eps_std + U eps_low), whose
/// covariance is S (I + U U^T) S = Sigma exactly.
inline Eigen::MatrixXd sample_latent(const LatentGmmParams& p, int count, Rng& rng) {
  const int n = p.dim();
  const int h = p.rank();
  LatentMixture mix = build_mixture(p);
  Eigen::MatrixXd out(count, n);
  for (int s = 0; s < count; ++s) {
    const int j = rng.categorical(p.weights);
    const Eigen::VectorXd eps_std = rng.normal_vector(n);
    const Eigen::VectorXd eps_low = rng.normal_vector(h);
    const LowRankGaussian& g = mix.comps[j];
    out.row(s) = (g.mean.array() +
                  g.diag_scale.array() *
                      (eps_std + g.factor * eps_low).array())
                     .transpose();
  }
  return out;
}

}  // namespace gmcop
