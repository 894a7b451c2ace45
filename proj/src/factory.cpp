#include "gmcop/factory.hpp"

namespace gmcop {

namespace {

EncoderConfig encoder_config_from(const Config& cfg, int channels, const std::string& prefix,
                                  bool global_summary) {
  EncoderConfig enc;
  enc.prefix = prefix;
  enc.channels = channels;
  enc.channel_embed_dim = cfg.get_int("channel_embed_dim", 8);
  enc.obs_hidden = cfg.get_int("encoder_hidden", 32);
  enc.pool_dim = cfg.get_int("pool_dim", 16);
  enc.final_hidden = cfg.get_int("encoder_hidden", 32);
  enc.embed_dim = cfg.get_int("embed_dim", 32);
  enc.time_freqs = cfg.get_int("time_freqs", 8);
  enc.horizon = cfg.get_double("horizon", 1.0);
  enc.global_summary = global_summary;
  return enc;
}

}  // namespace

MarginalConfig marginal_config_from(const Config& cfg, int channels) {
  MarginalConfig m;
  m.enc = encoder_config_from(cfg, channels, "marginal/enc", false);
  m.flow_layers = cfg.get_int("flow_layers", 2);
  m.flow_width = cfg.get_int("flow_hidden", 10);
  m.cond_layers = cfg.get_int("flow_mlp_layers", 2);
  m.cond_hidden = cfg.get_int("flow_mlp_dim", 32);
  return m;
}

CopulaConfig copula_config_from(const Config& cfg, int channels, bool mix_gc) {
  CopulaConfig c;
  c.enc = encoder_config_from(cfg, channels, "copula/enc", true);
  c.components = cfg.get_int("components", 5);
  c.corr_rank = cfg.get_int("corr_rank", 2);
  c.head_hidden = cfg.get_int("corr_net_hidden_dim", 32);
  c.mix_gc = mix_gc;
  return c;
}

TrainConfig train_config_from(const Config& cfg, Stage stage) {
  TrainConfig t;
  t.stage = stage;
  t.learning_rate = cfg.get_double("lr", 1e-3);
  t.weight_decay = cfg.get_double("weight_decay", 1e-3);
  t.batch_size = cfg.get_int("batch_size", 64);
  t.plateau_factor = cfg.get_double("plateau_factor", 0.5);
  t.plateau_patience = cfg.get_int("plateau_patience", 5);
  t.early_stop_patience = cfg.get_int("early_stop_patience", 30);
  t.max_epochs = cfg.get_int("max_epochs", 2000);
  t.icdf_budget = cfg.get_int("icdf_budget", 50);
  t.icdf_tol = cfg.get_double("icdf_tol", 1e-10);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  return t;
}

}  // namespace gmcop
