#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gmcop/dsf.hpp"
#include "gmcop/encoder.hpp"
#include "gmcop/imts.hpp"
#include "gmcop/latent_gmm.hpp"
#include "gmcop/nn.hpp"
#include "gmcop/tape.hpp"

// Joint forecasting model: per-query sigmoidal-flow marginals plus a latent
// Gaussian-mixture copula. The copula's mixture weights come from a pooled
// history summary only; means, stddevs and low-rank factor rows come from the
// per-query embeddings, which is what makes removing a query delete exactly
// one row of each parameter block.

namespace gmcop {

struct MarginalConfig {
  EncoderConfig enc;     // prefix "marginal/enc"
  int flow_layers = 2;   // L
  int flow_width = 10;   // M
  int cond_layers = 2;
  int cond_hidden = 32;

  MlpSpec conditioner_spec() const {
    return {"marginal/cond", enc.embed_dim, cond_hidden, 3 * flow_layers * flow_width,
            cond_layers};
  }
};

struct CopulaConfig {
  EncoderConfig enc;     // prefix "copula/enc", global_summary = true
  int components = 5;    // K
  int corr_rank = 2;     // H
  int head_hidden = 32;
  bool mix_gc = false;   // ablation: zero-mean, unit-variance latent components

  MlpSpec pi_spec() const { return {"copula/head_pi", enc.pool_dim, head_hidden, components, 2}; }
  MlpSpec mu_spec() const { return {"copula/head_mu", enc.embed_dim, head_hidden, components, 2}; }
  MlpSpec sigma_spec() const {
    return {"copula/head_sigma", enc.embed_dim, head_hidden, components, 2};
  }
  MlpSpec corr_spec() const {
    return {"copula/head_corr", enc.embed_dim, head_hidden, components * corr_rank, 2};
  }
};

struct JointModel {
  MarginalConfig marg;
  CopulaConfig cop;
  ParamStore params;
  bool has_copula = false;
};

void init_marginal_params(ParamStore& store, const MarginalConfig& cfg, Rng& rng);
void init_copula_params(ParamStore& store, const CopulaConfig& cfg, Rng& rng);

/// Fresh marginal-only model (independence mode until copula params exist).
JointModel make_marginal_model(const MarginalConfig& cfg, std::uint64_t seed);
/// Adds a freshly initialized copula head stack to an existing model.
void attach_copula(JointModel& model, const CopulaConfig& cfg, std::uint64_t seed);

// --- graph builders (training / gradients) ----------------------------------

struct MarginalGraph {
  Tape::Var embeddings;  // N x D
  Tape::Var loglik;      // N x 1, log f_n(y_n)
  Tape::Var u;           // N x 1, T_n(y_n)
};

/// Marginal flow over all queries of an instance: conditioner emits per-query
/// DSF parameters (softplus slopes, softmax mixtures); the flow runs
/// vectorized over queries.
MarginalGraph build_marginal_graph(Tape& tape, const ParamBinding& params,
                                   const MarginalConfig& cfg, const ImtsInstance& instance);

struct HeadsGraph {
  Tape::Var pi;     // K x 1
  Tape::Var means;  // N x K
  Tape::Var stds;   // N x K
  Tape::Var ufeat;  // N x (K*H)
};

HeadsGraph build_heads_graph(Tape& tape, const ParamBinding& params, const CopulaConfig& cfg,
                             const ImtsInstance& instance);

/// log copula density at fixed pseudo-observations u. For the mixture copula
/// route the latent coordinates are solved by the gradient-free inverse-CDF
/// node; the ablation route shares the Gram construction but pins means to
/// zero and variances to one, so its latent coordinates are plain probit
/// transforms.
Tape::Var build_copula_term(Tape& tape, const HeadsGraph& heads, const CopulaConfig& cfg,
                            const Eigen::VectorXd& u, int icdf_budget, double icdf_tol);

// --- parameter extraction (evaluation / sampling) ----------------------------

std::vector<DsfParams> infer_dsf_params(const JointModel& model, const ImtsInstance& instance);
LatentGmmParams infer_latent_params(const JointModel& model, const ImtsInstance& instance);

struct PseudoObservations {
  Eigen::VectorXd u;                 // strictly inside (0,1)
  double marginal_loglik_sum = 0.0;  // sum_n log f_n(y_n)
};

/// Pseudo-observations are clamped to [1e-7, 1 - 1e-7] before any latent
/// inverse-CDF solve.
PseudoObservations pseudo_observations(const JointModel& model, const ImtsInstance& instance);
inline constexpr double kPseudoObsClamp = 1e-7;

// --- plain-arithmetic densities ----------------------------------------------

/// log c(u) = log g(z) - sum_n log g_n(z_n) with z_n solved per coordinate
/// from the mixture's own marginals.
double gmc_log_copula_density(const LatentGmmParams& p, const Eigen::VectorXd& u,
                              int icdf_budget = 50, double icdf_tol = 1e-10);

/// Convex combination of zero-mean Gaussian copulas sharing z = probit(u).
double mixgc_log_copula_density(const LatentGmmParams& p, const Eigen::VectorXd& u);

/// log p(y | instance) under the model; reduces to the marginal sum when the
/// model has no copula attached.
double joint_loglik(const JointModel& model, const ImtsInstance& instance,
                    int icdf_budget = 50, double icdf_tol = 1e-10);

// --- sampling -----------------------------------------------------------------

/// Latent draw -> unit cube through the latent mixture's own marginal CDFs ->
/// per-coordinate flow inversion. Rows are samples.
Eigen::MatrixXd sample_joint(const JointModel& model, const ImtsInstance& instance, int count,
                             Rng& rng, double inverse_tol = 1e-10);

/// Independent per-coordinate sampling from the marginal flows alone.
Eigen::MatrixXd sample_marginals(const JointModel& model, const ImtsInstance& instance,
                                 int count, Rng& rng, double inverse_tol = 1e-10);

/// Instance restricted to a subset of queries (same history).
ImtsInstance with_queries(const ImtsInstance& instance, const std::vector<int>& keep);

}  // namespace gmcop
