#include "gmcop/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace gmcop {

namespace {

MlpSpec obs_mlp_spec(const EncoderConfig& cfg) {
  return {cfg.prefix + "/obs", 2 + cfg.channel_embed_dim, cfg.obs_hidden, cfg.pool_dim, 2};
}

MlpSpec global_obs_mlp_spec(const EncoderConfig& cfg) {
  return {cfg.prefix + "/gobs", 1 + 2 * cfg.time_freqs + cfg.channel_embed_dim,
          cfg.obs_hidden, cfg.pool_dim, 2};
}

MlpSpec final_mlp_spec(const EncoderConfig& cfg) {
  return {cfg.prefix + "/fin", cfg.query_feature_dim(), cfg.final_hidden, cfg.embed_dim, 2};
}

/// History indices sorted by (channel, t, value) so pooling sums in a
/// canonical order regardless of input permutation.
std::vector<int> canonical_order(const ImtsInstance& inst) {
  std::vector<int> idx(inst.history.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const auto& oa = inst.history[a];
    const auto& ob = inst.history[b];
    if (oa.channel != ob.channel) return oa.channel < ob.channel;
    if (oa.t != ob.t) return oa.t < ob.t;
    return oa.value < ob.value;
  });
  return idx;
}

}  // namespace

Eigen::RowVectorXd time_features(double t, int freqs, double horizon) {
  Eigen::RowVectorXd out(2 * freqs);
  for (int k = 0; k < freqs; ++k) {
    const double frac = freqs > 1 ? static_cast<double>(k) / (freqs - 1) : 0.0;
    const double period = horizon * std::pow(100.0, -frac);
    const double w = 6.283185307179586477 / period;
    out[2 * k] = std::sin(w * t);
    out[2 * k + 1] = std::cos(w * t);
  }
  return out;
}

void init_encoder(ParamStore& store, const EncoderConfig& cfg, Rng& rng) {
  Eigen::MatrixXd emb(cfg.channels, cfg.channel_embed_dim);
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.channel_embed_dim));
  for (int i = 0; i < emb.rows(); ++i)
    for (int j = 0; j < emb.cols(); ++j) emb(i, j) = s * rng.normal();
  store.add(cfg.prefix + "/chan_emb", std::move(emb));
  init_mlp(store, obs_mlp_spec(cfg), rng);
  Eigen::MatrixXd unobs(1, cfg.pool_dim);
  for (int j = 0; j < unobs.cols(); ++j) unobs(0, j) = s * rng.normal();
  store.add(cfg.prefix + "/unobs", std::move(unobs));
  init_mlp(store, final_mlp_spec(cfg), rng);
  if (cfg.global_summary) {
    init_mlp(store, global_obs_mlp_spec(cfg), rng);
    Eigen::MatrixXd gunobs(1, cfg.pool_dim);
    for (int j = 0; j < gunobs.cols(); ++j) gunobs(0, j) = s * rng.normal();
    store.add(cfg.prefix + "/gunobs", std::move(gunobs));
    Eigen::MatrixXd q(cfg.pool_dim, 1);
    for (int i = 0; i < q.rows(); ++i) q(i, 0) = s * rng.normal();
    store.add(cfg.prefix + "/attn_q", std::move(q));
  }
}

EncodeOutput encode_queries(Tape& tape, const ParamBinding& params,
                            const EncoderConfig& cfg, const ImtsInstance& instance) {
  for (const auto& q : instance.queries)
    if (q.channel < 0 || q.channel >= cfg.channels)
      throw std::invalid_argument("encode_queries: unknown channel");
  for (const auto& o : instance.history)
    if (o.channel < 0 || o.channel >= cfg.channels)
      throw std::invalid_argument("encode_queries: unknown channel");

  const std::vector<int> order = canonical_order(instance);
  // Per-channel contiguous ranges in the canonical order.
  std::vector<std::vector<int>> per_channel(cfg.channels);
  for (int i : order) per_channel[instance.history[i].channel].push_back(i);

  const Tape::Var chan_emb = params[cfg.prefix + "/chan_emb"];
  const MlpSpec obs_spec = obs_mlp_spec(cfg);
  const MlpSpec fin_spec = final_mlp_spec(cfg);

  std::vector<Tape::Var> embedding_rows;
  embedding_rows.reserve(instance.queries.size());
  for (const auto& q : instance.queries) {
    std::vector<Tape::Var> pooled_rows;
    pooled_rows.reserve(cfg.channels);
    for (int c = 0; c < cfg.channels; ++c) {
      const auto& obs = per_channel[c];
      if (obs.empty()) {
        pooled_rows.push_back(params[cfg.prefix + "/unobs"]);
        continue;
      }
      Eigen::MatrixXd feats(obs.size(), 2);
      for (std::size_t r = 0; r < obs.size(); ++r) {
        feats(r, 0) = instance.history[obs[r]].value;
        feats(r, 1) = instance.history[obs[r]].t - q.t;
      }
      Tape::Var rows = tape.hstack(
          {tape.constant(feats),
           tape.repeat_row(tape.slice_rows(chan_emb, c, 1), static_cast<int>(obs.size()))});
      pooled_rows.push_back(tape.col_mean(mlp_apply(tape, params, obs_spec, rows)));
    }
    Tape::Var summary = tape.flatten_to_row(tape.vstack(pooled_rows));
    Tape::Var qfeat =
        tape.hstack({summary, tape.slice_rows(chan_emb, q.channel, 1),
                     tape.constant(time_features(q.t, cfg.time_freqs, cfg.horizon))});
    embedding_rows.push_back(mlp_apply(tape, params, fin_spec, qfeat));
  }

  EncodeOutput out;
  out.embeddings = tape.vstack(embedding_rows);

  if (cfg.global_summary) {
    const MlpSpec gobs_spec = global_obs_mlp_spec(cfg);
    std::vector<Tape::Var> rows;
    rows.reserve(cfg.channels);
    for (int c = 0; c < cfg.channels; ++c) {
      const auto& obs = per_channel[c];
      if (obs.empty()) {
        rows.push_back(params[cfg.prefix + "/gunobs"]);
        continue;
      }
      Eigen::MatrixXd feats(obs.size(), 1 + 2 * cfg.time_freqs);
      for (std::size_t r = 0; r < obs.size(); ++r) {
        feats(r, 0) = instance.history[obs[r]].value;
        feats.block(r, 1, 1, 2 * cfg.time_freqs) =
            time_features(instance.history[obs[r]].t, cfg.time_freqs, cfg.horizon);
      }
      Tape::Var x = tape.hstack(
          {tape.constant(feats),
           tape.repeat_row(tape.slice_rows(chan_emb, c, 1), static_cast<int>(obs.size()))});
      rows.push_back(tape.col_mean(mlp_apply(tape, params, gobs_spec, x)));
    }
    Tape::Var summary = tape.vstack(rows);  // C x P
    Tape::Var scores = tape.matmul(summary, params[cfg.prefix + "/attn_q"]);  // C x 1
    Tape::Var attn = tape.transpose(tape.softmax_rows(tape.transpose(scores)));
    out.pooled = tape.matmul(tape.transpose(attn), summary);  // 1 x P
  }
  return out;
}

Eigen::VectorXd encode_single(const ParamStore& store, const EncoderConfig& cfg,
                              const ImtsInstance& instance, int query_index) {
  ImtsInstance one;
  one.history = instance.history;
  one.queries = {instance.queries.at(query_index)};
  one.targets = Eigen::VectorXd::Zero(1);
  Tape tape;
  ParamBinding binding;
  binding.bind_constants(tape, store, store.names_with_prefix(cfg.prefix));
  EncodeOutput enc = encode_queries(tape, binding, cfg, one);
  return tape.value(enc.embeddings).row(0).transpose();
}

}  // namespace gmcop
