#pragma once

#include "gmcop/model.hpp"

// Small model configurations shared by the model/training test suites.

namespace helpers {

inline gmcop::MarginalConfig tiny_marginal(int channels, double horizon = 1.0) {
  gmcop::MarginalConfig cfg;
  cfg.enc.prefix = "marginal/enc";
  cfg.enc.channels = channels;
  cfg.enc.channel_embed_dim = 4;
  cfg.enc.obs_hidden = 8;
  cfg.enc.pool_dim = 6;
  cfg.enc.final_hidden = 12;
  cfg.enc.embed_dim = 8;
  cfg.enc.time_freqs = 4;
  cfg.enc.horizon = horizon;
  cfg.flow_layers = 2;
  cfg.flow_width = 5;
  cfg.cond_layers = 2;
  cfg.cond_hidden = 12;
  return cfg;
}

inline gmcop::CopulaConfig tiny_copula(int channels, int k, int h, bool mix_gc = false,
                                       double horizon = 1.0) {
  gmcop::CopulaConfig cfg;
  cfg.enc.prefix = "copula/enc";
  cfg.enc.channels = channels;
  cfg.enc.channel_embed_dim = 4;
  cfg.enc.obs_hidden = 8;
  cfg.enc.pool_dim = 6;
  cfg.enc.final_hidden = 12;
  cfg.enc.embed_dim = 8;
  cfg.enc.time_freqs = 4;
  cfg.enc.horizon = horizon;
  cfg.enc.global_summary = true;
  cfg.components = k;
  cfg.corr_rank = h;
  cfg.head_hidden = 12;
  cfg.mix_gc = mix_gc;
  return cfg;
}

inline gmcop::JointModel tiny_joint(int channels, int k, int h, std::uint64_t seed,
                                    bool mix_gc = false) {
  gmcop::JointModel model = gmcop::make_marginal_model(tiny_marginal(channels), seed);
  gmcop::attach_copula(model, tiny_copula(channels, k, h, mix_gc), seed + 1);
  return model;
}

inline gmcop::ImtsInstance history_free_instance(const Eigen::VectorXd& targets) {
  gmcop::ImtsInstance inst;
  for (int c = 0; c < targets.size(); ++c) inst.queries.push_back({0.5, c});
  inst.targets = targets;
  return inst;
}

}  // namespace helpers
