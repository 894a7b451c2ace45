#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gmcop/special_functions.hpp"

// Deep sigmoidal flow: a strictly monotone map T: R -> (0,1) built from L
// blocks s(x) = logit(sum_m w_m sigmoid(a_m x + b_m)) followed by a final
// sigmoid. T serves as a learnable univariate CDF; log|dT/dy| is the
// log-density of the implied distribution.

namespace gmcop {

struct DsfBlock {
  Eigen::VectorXd slopes;   // a, positive, length M
  Eigen::VectorXd offsets;  // b, length M
  Eigen::VectorXd mix;      // w, simplex, length M
};

struct DsfParams {
  std::vector<DsfBlock> blocks;

  int layers() const { return static_cast<int>(blocks.size()); }
  int width() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].slopes.size()); }
};

inline void validate(const DsfParams& p) {
  if (p.blocks.empty()) throw std::invalid_argument("DsfParams: no blocks");
  for (const auto& b : p.blocks) {
    const auto m = b.slopes.size();
    if (m < 1 || b.offsets.size() != m || b.mix.size() != m)
      throw std::invalid_argument("DsfParams: size mismatch");
    if ((b.slopes.array() <= 0.0).any())
      throw std::invalid_argument("DsfParams: non-positive slope");
    if ((b.mix.array() < 0.0).any() || std::abs(b.mix.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("DsfParams: mix not on the simplex");
  }
}

struct DsfForwardResult {
  double u = 0.0;        // T(y) in (0,1)
  double log_jac = 0.0;  // log dT/dy
};

inline DsfForwardResult dsf_forward(const DsfParams& p, double y) {
  if (!std::isfinite(y)) throw std::invalid_argument("dsf_forward: non-finite y");
  double x = y;
  double log_jac = 0.0;
  for (const auto& blk : p.blocks) {
    const int m = static_cast<int>(blk.slopes.size());
    double p_pos = 0.0, p_neg = 0.0, deriv = 0.0;
    for (int i = 0; i < m; ++i) {
      const double pre = blk.slopes[i] * x + blk.offsets[i];
      const double sp = stable_sigmoid(pre);
      const double sn = stable_sigmoid(-pre);
      p_pos += blk.mix[i] * sp;
      p_neg += blk.mix[i] * sn;  // equals 1 - p_pos without cancellation
      deriv += blk.mix[i] * blk.slopes[i] * sp * sn;
    }
    // d logit(p)/dp = 1/(p (1-p))
    log_jac += std::log(deriv) - std::log(p_pos) - std::log(p_neg);
    x = std::log(p_pos) - std::log(p_neg);
  }
  log_jac += -stable_softplus(x) - stable_softplus(-x);  // log sigmoid'(x)
  return {stable_sigmoid(x), log_jac};
}

/// log f(y) for the flow-implied density; the uniform base contributes
/// nothing, so this is the accumulated log-Jacobian.
inline double marginal_loglik(const DsfParams& p, double y) {
  return dsf_forward(p, y).log_jac;
}

/// Inverts T by safeguarded Newton-bisection after expanding an initial
/// bracket [-1,1] by doubling. Throws if 60 doublings per side do not
/// bracket u (pathological parameters).
inline double dsf_inverse(const DsfParams& p, double u, double tol = 1e-12) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("dsf_inverse: u outside (0,1)");
  double lo = -1.0, hi = 1.0;
  int doublings = 0;
  while (dsf_forward(p, lo).u >= u) {
    lo *= 2.0;
    if (++doublings > 60) throw std::runtime_error("dsf_inverse: bracket expansion failed (low side)");
  }
  doublings = 0;
  while (dsf_forward(p, hi).u <= u) {
    hi *= 2.0;
    if (++doublings > 60) throw std::runtime_error("dsf_inverse: bracket expansion failed (high side)");
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const DsfForwardResult r = dsf_forward(p, x);
    const double resid = r.u - u;
    if (std::abs(resid) <= tol) return x;
    if (resid < 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= 1e-15 * (1.0 + std::abs(lo) + std::abs(hi))) return 0.5 * (lo + hi);
    const double xn = x - resid / std::exp(r.log_jac);
    x = (xn > lo && xn < hi) ? xn : 0.5 * (lo + hi);
  }
  return x;
}

}  // namespace gmcop
