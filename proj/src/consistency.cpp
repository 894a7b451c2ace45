#include "gmcop/consistency.hpp"

#include <cmath>
#include <stdexcept>

#include "gmcop/metrics.hpp"
#include "gmcop/quadrature.hpp"

namespace gmcop {

DensityConsistencyReport density_consistency_check(const JointModel& model,
                                                   const ImtsInstance& instance, int probes,
                                                   std::uint64_t seed, double quad_tol) {
  if (!model.has_copula)
    throw std::logic_error("density_consistency_check: model has no copula");
  if (instance.query_count() < 3)
    throw std::invalid_argument("density_consistency_check: need at least 3 queries");

  const ImtsInstance inst3 = with_queries(instance, {0, 1, 2});
  const ImtsInstance inst2 = with_queries(instance, {0, 1});

  const LatentGmmParams latent3 = infer_latent_params(model, inst3);
  const LatentGmmParams latent2 = infer_latent_params(model, inst2);
  const std::vector<DsfParams> flows3 = infer_dsf_params(model, inst3);
  const std::vector<DsfParams> flows2 = infer_dsf_params(model, inst2);
  const LatentMixture mix3 = build_mixture(latent3);
  const LatentMixture mix2 = build_mixture(latent2);
  std::vector<Gmm1dParams> marg3, marg2;
  for (int i = 0; i < 3; ++i) marg3.push_back(marginal_1d(latent3, i));
  for (int i = 0; i < 2; ++i) marg2.push_back(marginal_1d(latent2, i));

  const double icdf_tol = 1e-12;
  auto latent_coord = [&](const Gmm1dParams& m1, double u) {
    const IcdfSolveResult r = gmm_icdf(m1, u, 100, icdf_tol);
    if (!r.converged) throw IcdfFailure(0, r.z, r.residual);
    return r.z;
  };
  auto clamp_u = [](double u) {
    return std::min(std::max(u, kPseudoObsClamp), 1.0 - kPseudoObsClamp);
  };

  auto density2 = [&](double y0, double y1) {
    const DsfForwardResult f0 = dsf_forward(flows2[0], y0);
    const DsfForwardResult f1 = dsf_forward(flows2[1], y1);
    Eigen::VectorXd z(2);
    z[0] = latent_coord(marg2[0], clamp_u(f0.u));
    z[1] = latent_coord(marg2[1], clamp_u(f1.u));
    const double logc = model.cop.mix_gc
                            ? mixgc_log_copula_density(latent2, Eigen::Vector2d(
                                                                    clamp_u(f0.u), clamp_u(f1.u)))
                            : mixture_logpdf(mix2, z) - gmm_log_pdf(marg2[0], z[0]) -
                                  gmm_log_pdf(marg2[1], z[1]);
    return std::exp(logc + f0.log_jac + f1.log_jac);
  };

  // y0, y1 enter every integrand evaluation unchanged; precompute their part.
  auto density3_factory = [&](double y0, double y1) {
    const DsfForwardResult f0 = dsf_forward(flows3[0], y0);
    const DsfForwardResult f1 = dsf_forward(flows3[1], y1);
    const double u0 = clamp_u(f0.u);
    const double u1 = clamp_u(f1.u);
    const double z0 = latent_coord(marg3[0], u0);
    const double z1 = latent_coord(marg3[1], u1);
    const double fixed_logjac = f0.log_jac + f1.log_jac;
    const double fixed_marg = gmm_log_pdf(marg3[0], z0) + gmm_log_pdf(marg3[1], z1);
    return [&, u0, u1, z0, z1, fixed_logjac, fixed_marg](double y2) {
      const DsfForwardResult f2 = dsf_forward(flows3[2], y2);
      const double u2 = clamp_u(f2.u);
      double logc;
      if (model.cop.mix_gc) {
        logc = mixgc_log_copula_density(latent3, Eigen::Vector3d(u0, u1, u2));
      } else {
        Eigen::VectorXd z(3);
        z[0] = z0;
        z[1] = z1;
        z[2] = latent_coord(marg3[2], u2);
        logc = mixture_logpdf(mix3, z) - fixed_marg - gmm_log_pdf(marg3[2], z[2]);
      }
      return std::exp(logc + fixed_logjac + f2.log_jac);
    };
  };

  const double lo = dsf_inverse(flows3[2], 1e-9);
  const double hi = dsf_inverse(flows3[2], 1.0 - 1e-9);

  Rng rng(seed);
  const Eigen::MatrixXd probe_points = sample_joint(model, inst2, probes, rng);

  DensityConsistencyReport report;
  report.probes = probes;
  for (int i = 0; i < probes; ++i) {
    const double y0 = probe_points(i, 0);
    const double y1 = probe_points(i, 1);
    const double direct = density2(y0, y1);
    auto integrand = density3_factory(y0, y1);
    const double marginal =
        integrate(integrand, lo, hi, std::max(quad_tol, 1e-7 * direct));
    const double rel = std::abs(marginal - direct) / direct;
    report.max_rel_err = std::max(report.max_rel_err, rel);
    report.mean_rel_err += rel / probes;
  }
  return report;
}

SamplingConsistencyReport sampling_consistency_check(const JointModel& model,
                                                     const ImtsInstance& instance,
                                                     int sample_count, std::uint64_t seed) {
  if (instance.query_count() < 2)
    throw std::invalid_argument("sampling_consistency_check: need at least 2 queries");
  std::vector<int> keep;
  for (int i = 0; i < std::min(2, instance.query_count() - 1); ++i) keep.push_back(i);
  const ImtsInstance direct_inst = with_queries(instance, keep);

  std::vector<int> all(instance.query_count());
  for (int i = 0; i < instance.query_count(); ++i) all[i] = i;

  Rng rng_a(seed);
  Rng rng_b(seed ^ 0x5bf03635);
  Rng rng_c(seed ^ 0x9cc2f1b3);
  Rng rng_d(seed ^ 0x3a1f0de5);

  const Eigen::MatrixXd direct = sample_joint(model, direct_inst, sample_count, rng_a);
  const Eigen::MatrixXd full = sample_joint(model, instance, sample_count, rng_b);
  const Eigen::MatrixXd control_a = sample_joint(model, direct_inst, sample_count, rng_c);
  const Eigen::MatrixXd control_b = sample_joint(model, direct_inst, sample_count, rng_d);

  SamplingConsistencyReport report;
  report.sample_count = sample_count;
  const int dims = static_cast<int>(keep.size());
  for (int d = 0; d < dims; ++d) {
    report.w1_direct_vs_marginalized += empirical_w1(direct.col(d), full.col(d)) / dims;
    report.w1_control += empirical_w1(control_a.col(d), control_b.col(d)) / dims;
  }
  return report;
}

}  // namespace gmcop
