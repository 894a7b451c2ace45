#include "gmcop/model.hpp"

#include <cmath>
#include <stdexcept>

namespace gmcop {

void init_marginal_params(ParamStore& store, const MarginalConfig& cfg, Rng& rng) {
  init_encoder(store, cfg.enc, rng);
  init_mlp(store, cfg.conditioner_spec(), rng);
}

void init_copula_params(ParamStore& store, const CopulaConfig& cfg, Rng& rng) {
  init_encoder(store, cfg.enc, rng);
  init_mlp(store, cfg.pi_spec(), rng);
  if (!cfg.mix_gc) {
    init_mlp(store, cfg.mu_spec(), rng);
    init_mlp(store, cfg.sigma_spec(), rng);
  }
  init_mlp(store, cfg.corr_spec(), rng);
}

JointModel make_marginal_model(const MarginalConfig& cfg, std::uint64_t seed) {
  JointModel m;
  m.marg = cfg;
  Rng rng(seed);
  init_marginal_params(m.params, cfg, rng);
  return m;
}

void attach_copula(JointModel& model, const CopulaConfig& cfg, std::uint64_t seed) {
  model.cop = cfg;
  Rng rng(seed);
  init_copula_params(model.params, cfg, rng);
  model.has_copula = true;
}

namespace {

/// Row-wise MLP application. gemm kernels pick different micro-panel
/// arrangements for different batch heights, so a batched product would let
/// one query's output depend (in the last ulp) on how many other queries are
/// present; applying the MLP per row keeps each query's bits independent of
/// the batch.
Tape::Var mlp_per_row(Tape& tape, const ParamBinding& params, const MlpSpec& spec,
                      Tape::Var rows) {
  const int n = static_cast<int>(tape.value(rows).rows());
  if (n == 1) return mlp_apply(tape, params, spec, rows);
  std::vector<Tape::Var> outs;
  outs.reserve(n);
  for (int i = 0; i < n; ++i)
    outs.push_back(mlp_apply(tape, params, spec, tape.slice_rows(rows, i, 1)));
  return tape.vstack(outs);
}

}  // namespace

// ---------------------------------------------------------------------------
// marginal flow graph

MarginalGraph build_marginal_graph(Tape& tape, const ParamBinding& params,
                                   const MarginalConfig& cfg, const ImtsInstance& instance) {
  const int n = instance.query_count();
  if (n < 1) throw std::invalid_argument("build_marginal_graph: empty query set");
  EncodeOutput enc = encode_queries(tape, params, cfg.enc, instance);
  Tape::Var raw = mlp_per_row(tape, params, cfg.conditioner_spec(), enc.embeddings);

  const int m = cfg.flow_width;
  Tape::Var x = tape.constant(instance.targets);
  Tape::Var loglik;
  for (int l = 0; l < cfg.flow_layers; ++l) {
    Tape::Var slopes = tape.softplus(tape.slice_cols(raw, 3 * m * l, m));
    Tape::Var offsets = tape.slice_cols(raw, 3 * m * l + m, m);
    Tape::Var mix = tape.softmax_rows(tape.slice_cols(raw, 3 * m * l + 2 * m, m));

    Tape::Var pre = tape.add(tape.mul_col_broadcast(slopes, x), offsets);
    Tape::Var sp = tape.sigmoid(pre);
    Tape::Var sn = tape.sigmoid(tape.neg(pre));
    Tape::Var p_pos = tape.row_sum(tape.mul(mix, sp));
    Tape::Var p_neg = tape.row_sum(tape.mul(mix, sn));
    Tape::Var deriv = tape.row_sum(tape.mul(tape.mul(mix, slopes), tape.mul(sp, sn)));
    Tape::Var term =
        tape.sub(tape.sub(tape.log(deriv), tape.log(p_pos)), tape.log(p_neg));
    loglik = loglik.valid() ? tape.add(loglik, term) : term;
    x = tape.sub(tape.log(p_pos), tape.log(p_neg));
  }
  // log sigmoid'(x) = -softplus(x) - softplus(-x)
  Tape::Var squash = tape.neg(tape.add(tape.softplus(x), tape.softplus(tape.neg(x))));
  MarginalGraph out;
  out.embeddings = enc.embeddings;
  out.loglik = tape.add(loglik, squash);
  out.u = tape.sigmoid(x);
  return out;
}

// ---------------------------------------------------------------------------
// copula heads and density graph

HeadsGraph build_heads_graph(Tape& tape, const ParamBinding& params, const CopulaConfig& cfg,
                             const ImtsInstance& instance) {
  if (instance.query_count() < 1)
    throw std::invalid_argument("build_heads_graph: empty query set");
  if (!cfg.enc.global_summary)
    throw std::logic_error("build_heads_graph: copula encoder needs global_summary");
  EncodeOutput enc = encode_queries(tape, params, cfg.enc, instance);
  HeadsGraph heads;
  heads.pi = tape.transpose(
      tape.softmax_rows(mlp_apply(tape, params, cfg.pi_spec(), enc.pooled)));
  if (!cfg.mix_gc) {
    heads.means = mlp_per_row(tape, params, cfg.mu_spec(), enc.embeddings);
    heads.stds = tape.softplus(mlp_per_row(tape, params, cfg.sigma_spec(), enc.embeddings));
  }
  heads.ufeat = mlp_per_row(tape, params, cfg.corr_spec(), enc.embeddings);
  return heads;
}

namespace {

/// log N(z; mu, Sigma) for one low-rank component, as a graph. mu and sd may
/// be invalid Vars, meaning zero mean and unit variance (the ablation route).
Tape::Var component_logpdf_graph(Tape& tape, Tape::Var z, Tape::Var mu, Tape::Var sd,
                                 Tape::Var u_slice, int n) {
  Tape::Var gdiag = tape.add_scalar(tape.row_sum(tape.mul(u_slice, u_slice)), 1.0);
  Tape::Var sqrt_g = tape.sqrt(gdiag);
  Tape::Var scale =
      sd.valid() ? tape.div(sd, sqrt_g)
                 : tape.div(tape.constant(Eigen::MatrixXd::Ones(n, 1)), sqrt_g);
  Tape::Var centered = mu.valid() ? tape.sub(z, mu) : z;
  Tape::Var v = tape.div(centered, scale);
  const int h = static_cast<int>(tape.value(u_slice).cols());
  Tape::Var cap = tape.add(tape.matmul(tape.transpose(u_slice), u_slice),
                           tape.constant(Eigen::MatrixXd::Identity(h, h)));
  Tape::Var w = tape.matmul(tape.transpose(u_slice), v);
  Tape::Var quad = tape.sub(tape.dot(v, v), tape.solve_quad(cap, w));
  Tape::Var logdet =
      tape.add(tape.logdet_spd(cap), tape.scale(tape.sum(tape.log(scale)), 2.0));
  return tape.scale(tape.add_scalar(tape.add(logdet, quad), n * kLog2Pi), -0.5);
}

}  // namespace

Tape::Var build_copula_term(Tape& tape, const HeadsGraph& heads, const CopulaConfig& cfg,
                            const Eigen::VectorXd& u, int icdf_budget, double icdf_tol) {
  const int n = static_cast<int>(u.size());
  const int k = cfg.components;
  const int h = cfg.corr_rank;

  Tape::Var z;
  if (cfg.mix_gc) {
    Eigen::MatrixXd zv(n, 1);
    for (int i = 0; i < n; ++i) zv(i, 0) = normal_icdf(u[i]);
    z = tape.constant(zv);
  } else {
    z = tape.gmm_icdf_node(heads.pi, heads.means, heads.stds, u, icdf_budget, icdf_tol);
  }

  std::vector<Tape::Var> comp_terms;
  comp_terms.reserve(k);
  for (int j = 0; j < k; ++j) {
    Tape::Var u_j = tape.slice_cols(heads.ufeat, j * h, h);
    Tape::Var mu_j, sd_j;
    if (!cfg.mix_gc) {
      mu_j = tape.slice_cols(heads.means, j, 1);
      sd_j = tape.slice_cols(heads.stds, j, 1);
    }
    comp_terms.push_back(component_logpdf_graph(tape, z, mu_j, sd_j, u_j, n));
  }
  Tape::Var joint = tape.logsumexp(tape.add(tape.vstack(comp_terms), tape.log(heads.pi)));

  Tape::Var marg_sum;
  if (cfg.mix_gc) {
    // Component marginals are standard normal regardless of the parameters.
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += log_normal_pdf(tape.value(z)(i, 0));
    Eigen::MatrixXd sv(1, 1);
    sv(0, 0) = s;
    marg_sum = tape.constant(sv);
  } else {
    // sum_n log g_n(z_n) over the mixture's own univariate marginals.
    Tape::Var t_std = tape.div(tape.sub_col_broadcast(z, heads.means), heads.stds);
    Tape::Var lognorm = tape.add_scalar(
        tape.sub(tape.scale(tape.mul(t_std, t_std), -0.5), tape.log(heads.stds)),
        -0.5 * kLog2Pi);
    Tape::Var with_pi = tape.add_row_broadcast(lognorm, tape.transpose(tape.log(heads.pi)));
    marg_sum = tape.sum(tape.logsumexp_rows(with_pi));
  }
  return tape.sub(joint, marg_sum);
}

// ---------------------------------------------------------------------------
// extraction

namespace {

ParamBinding bind_all_constants(Tape& tape, const ParamStore& store, const std::string& prefix) {
  ParamBinding b;
  b.bind_constants(tape, store, store.names_with_prefix(prefix));
  return b;
}

}  // namespace

std::vector<DsfParams> infer_dsf_params(const JointModel& model, const ImtsInstance& instance) {
  Tape tape;
  ParamBinding binding = bind_all_constants(tape, model.params, "marginal/");
  EncodeOutput enc = encode_queries(tape, binding, model.marg.enc, instance);
  Tape::Var raw = mlp_per_row(tape, binding, model.marg.conditioner_spec(), enc.embeddings);
  const Eigen::MatrixXd& rv = tape.value(raw);
  const int n = instance.query_count();
  const int m = model.marg.flow_width;
  std::vector<DsfParams> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].blocks.resize(model.marg.flow_layers);
    for (int l = 0; l < model.marg.flow_layers; ++l) {
      DsfBlock& blk = out[i].blocks[l];
      blk.slopes.resize(m);
      blk.offsets.resize(m);
      blk.mix.resize(m);
      for (int c = 0; c < m; ++c) {
        blk.slopes[c] = stable_softplus(rv(i, 3 * m * l + c));
        blk.offsets[c] = rv(i, 3 * m * l + m + c);
        blk.mix[c] = rv(i, 3 * m * l + 2 * m + c);
      }
      // softmax over the mix logits
      const double mx = blk.mix.maxCoeff();
      blk.mix = (blk.mix.array() - mx).exp();
      blk.mix /= blk.mix.sum();
    }
  }
  return out;
}

LatentGmmParams infer_latent_params(const JointModel& model, const ImtsInstance& instance) {
  if (!model.has_copula)
    throw std::logic_error("infer_latent_params: model has no copula attached");
  if (instance.query_count() < 1)
    throw std::invalid_argument("infer_latent_params: empty query set");
  Tape tape;
  ParamBinding binding = bind_all_constants(tape, model.params, "copula/");
  HeadsGraph heads = build_heads_graph(tape, binding, model.cop, instance);
  const int n = instance.query_count();
  const int k = model.cop.components;
  const int h = model.cop.corr_rank;
  LatentGmmParams p;
  p.weights = tape.value(heads.pi).col(0);
  const Eigen::MatrixXd& uf = tape.value(heads.ufeat);
  for (int j = 0; j < k; ++j) {
    if (model.cop.mix_gc) {
      p.means.push_back(Eigen::VectorXd::Zero(n));
      p.stddevs.push_back(Eigen::VectorXd::Ones(n));
    } else {
      p.means.push_back(tape.value(heads.means).col(j));
      p.stddevs.push_back(tape.value(heads.stds).col(j));
    }
    p.factors.push_back(uf.middleCols(j * h, h));
  }
  return p;
}

PseudoObservations pseudo_observations(const JointModel& model, const ImtsInstance& instance) {
  const std::vector<DsfParams> flows = infer_dsf_params(model, instance);
  const int n = instance.query_count();
  PseudoObservations out;
  out.u.resize(n);
  for (int i = 0; i < n; ++i) {
    const DsfForwardResult r = dsf_forward(flows[i], instance.targets[i]);
    out.u[i] = std::min(std::max(r.u, kPseudoObsClamp), 1.0 - kPseudoObsClamp);
    out.marginal_loglik_sum += r.log_jac;
  }
  return out;
}

// ---------------------------------------------------------------------------
// plain densities

double gmc_log_copula_density(const LatentGmmParams& p, const Eigen::VectorXd& u,
                              int icdf_budget, double icdf_tol) {
  const int n = p.dim();
  if (u.size() != n) throw std::invalid_argument("gmc_log_copula_density: size mismatch");
  Eigen::VectorXd z(n);
  double marg = 0.0;
  for (int i = 0; i < n; ++i) {
    const Gmm1dParams m1 = marginal_1d(p, i);
    const IcdfSolveResult r = gmm_icdf(m1, u[i], icdf_budget, icdf_tol);
    if (!r.converged) throw IcdfFailure(i, r.z, r.residual);
    z[i] = r.z;
    marg += gmm_log_pdf(m1, z[i]);
  }
  return mixture_logpdf(p, z) - marg;
}

double mixgc_log_copula_density(const LatentGmmParams& p, const Eigen::VectorXd& u) {
  const int n = p.dim();
  if (u.size() != n) throw std::invalid_argument("mixgc_log_copula_density: size mismatch");
  Eigen::VectorXd z(n);
  double marg = 0.0;
  for (int i = 0; i < n; ++i) {
    z[i] = normal_icdf(u[i]);
    marg += log_normal_pdf(z[i]);
  }
  const int k = p.components();
  Eigen::VectorXd lt(k);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
  for (int j = 0; j < k; ++j) {
    const LowRankGaussian comp = build_component(zero, one, p.factors[j]);
    lt[j] = std::log(p.weights[j]) + component_logpdf(comp, z);
  }
  const double mx = lt.maxCoeff();
  return mx + std::log((lt.array() - mx).exp().sum()) - marg;
}

double joint_loglik(const JointModel& model, const ImtsInstance& instance, int icdf_budget,
                    double icdf_tol) {
  if (instance.query_count() < 1)
    throw std::invalid_argument("joint_loglik: no queries");
  if (instance.targets.size() != instance.query_count())
    throw std::invalid_argument("joint_loglik: targets missing");
  PseudoObservations obs = pseudo_observations(model, instance);
  if (!model.has_copula) return obs.marginal_loglik_sum;
  const LatentGmmParams p = infer_latent_params(model, instance);
  const double logc = model.cop.mix_gc
                          ? mixgc_log_copula_density(p, obs.u)
                          : gmc_log_copula_density(p, obs.u, icdf_budget, icdf_tol);
  return logc + obs.marginal_loglik_sum;
}

// ---------------------------------------------------------------------------
// sampling

Eigen::MatrixXd sample_joint(const JointModel& model, const ImtsInstance& instance, int count,
                             Rng& rng, double inverse_tol) {
  if (!model.has_copula)
    throw std::logic_error("sample_joint: model has no copula attached");
  const int n = instance.query_count();
  const LatentGmmParams p = infer_latent_params(model, instance);
  const std::vector<DsfParams> flows = infer_dsf_params(model, instance);
  std::vector<Gmm1dParams> marginals;
  marginals.reserve(n);
  for (int i = 0; i < n; ++i) marginals.push_back(marginal_1d(p, i));
  const Eigen::MatrixXd z = sample_latent(p, count, rng);
  Eigen::MatrixXd out(count, n);
  for (int s = 0; s < count; ++s)
    for (int i = 0; i < n; ++i) {
      double u = gmm_cdf(marginals[i], z(s, i));
      u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
      out(s, i) = dsf_inverse(flows[i], u, inverse_tol);
    }
  return out;
}

Eigen::MatrixXd sample_marginals(const JointModel& model, const ImtsInstance& instance,
                                 int count, Rng& rng, double inverse_tol) {
  const int n = instance.query_count();
  const std::vector<DsfParams> flows = infer_dsf_params(model, instance);
  Eigen::MatrixXd out(count, n);
  for (int s = 0; s < count; ++s)
    for (int i = 0; i < n; ++i) out(s, i) = dsf_inverse(flows[i], rng.uniform(), inverse_tol);
  return out;
}

ImtsInstance with_queries(const ImtsInstance& instance, const std::vector<int>& keep) {
  ImtsInstance out;
  out.history = instance.history;
  out.queries.reserve(keep.size());
  out.targets.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.queries.push_back(instance.queries.at(keep[i]));
    out.targets[i] = instance.targets[keep[i]];
  }
  return out;
}

}  // namespace gmcop
