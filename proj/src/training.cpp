#include "gmcop/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace gmcop {

namespace {

std::vector<std::string> trainable_names(const JointModel& model, Stage stage) {
  switch (stage) {
    case Stage::marginal:
      return model.params.names_with_prefix("marginal/");
    case Stage::copula:
      return model.params.names_with_prefix("copula/");
    case Stage::joint_ablation: {
      auto names = model.params.names_with_prefix("marginal/");
      auto cop = model.params.names_with_prefix("copula/");
      names.insert(names.end(), cop.begin(), cop.end());
      return names;
    }
  }
  return {};
}

Eigen::VectorXd clamped_u(const Eigen::MatrixXd& u_col) {
  Eigen::VectorXd u = u_col.col(0);
  for (int i = 0; i < u.size(); ++i)
    u[i] = std::min(std::max(u[i], kPseudoObsClamp), 1.0 - kPseudoObsClamp);
  return u;
}

/// -(1/N) log p(y) for one instance, as a graph. `obs` supplies frozen
/// pseudo-observations for the copula stage; the joint-ablation stage reads
/// them off its own marginal forward pass without tracking gradients.
Tape::Var build_instance_loss(Tape& tape, const ParamBinding& binding, const JointModel& model,
                              const ImtsInstance& inst, Stage stage,
                              const PseudoObservations* obs, const TrainConfig& cfg) {
  const double inv_n = 1.0 / inst.query_count();
  switch (stage) {
    case Stage::marginal: {
      MarginalGraph g = build_marginal_graph(tape, binding, model.marg, inst);
      return tape.scale(tape.sum(g.loglik), -inv_n);
    }
    case Stage::copula: {
      HeadsGraph heads = build_heads_graph(tape, binding, model.cop, inst);
      Tape::Var logc =
          build_copula_term(tape, heads, model.cop, obs->u, cfg.icdf_budget, cfg.icdf_tol);
      return tape.add_scalar(tape.scale(logc, -inv_n), -inv_n * obs->marginal_loglik_sum);
    }
    case Stage::joint_ablation: {
      MarginalGraph g = build_marginal_graph(tape, binding, model.marg, inst);
      HeadsGraph heads = build_heads_graph(tape, binding, model.cop, inst);
      // u comes from the current marginal forward pass as a plain value; the
      // fixed `obs` override exists for finite-difference checks.
      const Eigen::VectorXd u = obs ? obs->u : clamped_u(tape.value(g.u));
      Tape::Var logc = build_copula_term(tape, heads, model.cop, u, cfg.icdf_budget,
                                         cfg.icdf_tol);
      return tape.scale(tape.add(logc, tape.sum(g.loglik)), -inv_n);
    }
  }
  throw std::logic_error("build_instance_loss: bad stage");
}

struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::map<std::string, Eigen::MatrixXd> m, v;

  void step(ParamStore& params, const std::vector<std::string>& names,
            const std::map<std::string, Eigen::MatrixXd>& grads, double lr,
            double weight_decay) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (const auto& name : names) {
      const Eigen::MatrixXd& g = grads.at(name);
      Eigen::MatrixXd& mm = m.try_emplace(name, Eigen::MatrixXd::Zero(g.rows(), g.cols()))
                                .first->second;
      Eigen::MatrixXd& vv = v.try_emplace(name, Eigen::MatrixXd::Zero(g.rows(), g.cols()))
                                .first->second;
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
      Eigen::MatrixXd& theta = params.at(name);
      const Eigen::ArrayXXd mhat = mm.array() / bc1;
      const Eigen::ArrayXXd vhat = vv.array() / bc2;
      theta.array() -= lr * (mhat / (vhat.sqrt() + eps) + weight_decay * theta.array());
    }
  }
};

using Snapshot = std::map<std::string, Eigen::MatrixXd>;

Snapshot take_snapshot(const ParamStore& params, const std::vector<std::string>& names) {
  Snapshot s;
  for (const auto& n : names) s[n] = params.at(n);
  return s;
}

void restore_snapshot(ParamStore& params, const Snapshot& s) {
  for (const auto& [name, value] : s) params.at(name) = value;
}

double validation_loss(const JointModel& model, const Dataset& val, Stage stage,
                       const std::vector<PseudoObservations>& val_obs, const TrainConfig& cfg) {
  if (stage == Stage::copula) {
    // Marginals are frozen; reuse the cached pseudo-observations.
    double acc = 0.0;
    for (std::size_t i = 0; i < val.instances.size(); ++i) {
      const auto& inst = val.instances[i];
      const LatentGmmParams p = infer_latent_params(model, inst);
      const double logc = model.cop.mix_gc
                              ? mixgc_log_copula_density(p, val_obs[i].u)
                              : gmc_log_copula_density(p, val_obs[i].u, cfg.icdf_budget,
                                                       cfg.icdf_tol);
      acc += -(logc + val_obs[i].marginal_loglik_sum) / inst.query_count();
    }
    return acc / static_cast<double>(val.instances.size());
  }
  JointModel eval_view = model;
  if (stage == Stage::marginal) eval_view.has_copula = false;
  return njnll_loss(eval_view, val.instances, cfg.icdf_budget, cfg.icdf_tol);
}

}  // namespace

double njnll_loss(const JointModel& model, const std::vector<ImtsInstance>& batch,
                  int icdf_budget, double icdf_tol) {
  if (batch.empty()) throw std::invalid_argument("njnll_loss: empty batch");
  double acc = 0.0;
  for (const auto& inst : batch) {
    if (inst.query_count() < 1) throw std::invalid_argument("njnll_loss: instance without queries");
    acc += -joint_loglik(model, inst, icdf_budget, icdf_tol) / inst.query_count();
  }
  return acc / static_cast<double>(batch.size());
}

TrainResult train_model(JointModel& model, const Dataset& train, const Dataset& val,
                        const TrainConfig& cfg) {
  if (train.instances.empty() || val.instances.empty())
    throw std::invalid_argument("train_model: empty split");
  if (cfg.stage != Stage::marginal && !model.has_copula)
    throw std::logic_error("train_model: stage requires an attached copula");

  const std::vector<std::string> trainables = trainable_names(model, cfg.stage);
  std::vector<PseudoObservations> train_obs, val_obs;
  if (cfg.stage == Stage::copula) {
    train_obs.reserve(train.instances.size());
    for (const auto& inst : train.instances) train_obs.push_back(pseudo_observations(model, inst));
    val_obs.reserve(val.instances.size());
    for (const auto& inst : val.instances) val_obs.push_back(pseudo_observations(model, inst));
  }

  Rng rng(cfg.seed);
  AdamW adam;
  TrainResult result;
  double lr = cfg.learning_rate;
  int epochs_since_best = 0;
  int epochs_since_plateau = 0;
  Snapshot best = take_snapshot(model.params, trainables);
  Snapshot last_finite = best;

  std::vector<int> order(train.instances.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = std::min(static_cast<int>(rng.uniform() * (i + 1)), i);
      std::swap(order[i], order[j]);
    }

    double loss_acc = 0.0;
    int counted = 0;
    bool non_finite = false;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      ParamBinding binding;
      binding.bind_leaves(tape, model.params, trainables);
      Tape::Var loss;
      for (std::size_t b = start; b < stop; ++b) {
        const int idx = order[b];
        const PseudoObservations* obs =
            cfg.stage == Stage::copula ? &train_obs[idx] : nullptr;
        Tape::Var term =
            build_instance_loss(tape, binding, model, train.instances[idx], cfg.stage, obs, cfg);
        loss = loss.valid() ? tape.add(loss, term) : term;
      }
      loss = tape.scale(loss, 1.0 / static_cast<double>(stop - start));
      const double loss_value = tape.value(loss)(0, 0);
      if (!std::isfinite(loss_value)) {
        non_finite = true;
        break;
      }
      tape.backward(loss);
      std::map<std::string, Eigen::MatrixXd> grads;
      for (const auto& name : trainables) grads[name] = tape.grad(binding[name]);
      adam.step(model.params, trainables, grads, lr, cfg.weight_decay);
      loss_acc += loss_value * static_cast<double>(stop - start);
      counted += static_cast<int>(stop - start);
    }

    if (non_finite) {
      restore_snapshot(model.params, last_finite);
      result.aborted_non_finite = true;
      break;
    }

    const double train_loss = loss_acc / counted;
    const double val_loss = validation_loss(model, val, cfg.stage, val_obs, cfg);
    if (!std::isfinite(val_loss)) {
      restore_snapshot(model.params, last_finite);
      result.aborted_non_finite = true;
      break;
    }
    result.history.push_back({epoch, train_loss, val_loss, lr});
    last_finite = take_snapshot(model.params, trainables);

    if (val_loss < result.best_val) {
      result.best_val = val_loss;
      result.best_epoch = epoch;
      best = last_finite;
      epochs_since_best = 0;
      epochs_since_plateau = 0;
    } else {
      ++epochs_since_best;
      ++epochs_since_plateau;
    }
    if (epochs_since_plateau >= cfg.plateau_patience) {
      lr *= cfg.plateau_factor;
      epochs_since_plateau = 0;
    }
    if (epochs_since_best >= cfg.early_stop_patience) break;
  }

  if (result.best_epoch >= 0) restore_snapshot(model.params, best);
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
  out << "epoch,train_loss,val_loss,lr\n";
  out.precision(17);
  for (const auto& r : history)
    out << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.lr << "\n";
}

GradCheckReport grad_check(const JointModel& model, const ImtsInstance& instance, Stage stage,
                           double eps, double icdf_tol) {
  if (eps < 1e-6 || eps > 1e-4) throw std::invalid_argument("grad_check: eps outside [1e-6, 1e-4]");
  JointModel work = model;
  TrainConfig cfg;
  cfg.stage = stage;
  cfg.icdf_tol = icdf_tol;
  PseudoObservations obs;
  const bool fixed_obs = stage != Stage::marginal;
  if (fixed_obs) obs = pseudo_observations(work, instance);
  const std::vector<std::string> trainables = trainable_names(work, stage);

  // Analytic gradients.
  std::map<std::string, Eigen::MatrixXd> analytic;
  {
    Tape tape;
    ParamBinding binding;
    binding.bind_leaves(tape, work.params, trainables);
    Tape::Var loss = build_instance_loss(tape, binding, work, instance, stage,
                                         fixed_obs ? &obs : nullptr, cfg);
    tape.backward(loss);
    for (const auto& name : trainables) analytic[name] = tape.grad(binding[name]);
  }

  auto loss_at = [&](const ParamStore& store) {
    Tape tape;
    ParamBinding binding;
    binding.bind_constants(tape, store, trainables);
    Tape::Var loss = build_instance_loss(tape, binding, work, instance, stage,
                                         fixed_obs ? &obs : nullptr, cfg);
    return tape.value(loss)(0, 0);
  };

  GradCheckReport report;
  for (const auto& name : trainables) {
    Eigen::MatrixXd& theta = work.params.at(name);
    const Eigen::MatrixXd& an = analytic.at(name);
    GradCheckGroup group{name, 0.0, an.cwiseAbs().maxCoeff()};
    for (int r = 0; r < theta.rows(); ++r)
      for (int c = 0; c < theta.cols(); ++c) {
        const double saved = theta(r, c);
        theta(r, c) = saved + eps;
        const double up = loss_at(work.params);
        theta(r, c) = saved - eps;
        const double down = loss_at(work.params);
        theta(r, c) = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double a = an(r, c);
        const double rel = std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-6});
        group.max_rel_err = std::max(group.max_rel_err, rel);
      }
    report.groups.push_back(group);
    if (group.max_rel_err > report.max_rel_err) {
      report.max_rel_err = group.max_rel_err;
      report.worst_group = name;
    }
  }
  // Frozen groups report zero gradients by construction.
  if (stage == Stage::copula) {
    for (const auto& name : work.params.names_with_prefix("marginal/"))
      report.groups.push_back({name, 0.0, 0.0});
  }
  return report;
}

}  // namespace gmcop
