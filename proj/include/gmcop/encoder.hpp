#pragma once

#include <Eigen/Dense>
#include <string>

#include "gmcop/imts.hpp"
#include "gmcop/nn.hpp"
#include "gmcop/tape.hpp"

// Query-separable history encoder. Each query point gets an embedding that
// depends only on the observation history and that single query: per-channel
// observation features (value, time offset to the query, channel embedding)
// are mean-pooled after a canonical sort, concatenated with query features
// and passed through a final MLP. Channels with no observations contribute a
// learned placeholder row.
//
// The copula-side instance additionally exposes a query-independent global
// history summary, pooled over channels by softmax attention with a single
// learned attention query; the mixture-weight head reads only this summary.

namespace gmcop {

struct EncoderConfig {
  std::string prefix;  // parameter namespace, e.g. "marginal/enc"
  int channels = 2;
  int channel_embed_dim = 8;
  int obs_hidden = 32;
  int pool_dim = 16;
  int final_hidden = 32;
  int embed_dim = 32;   // D
  int time_freqs = 8;   // sinusoidal feature pairs
  double horizon = 1.0; // longest sinusoidal period
  bool global_summary = false;

  int query_feature_dim() const { return channels * pool_dim + channel_embed_dim + 2 * time_freqs; }
};

void init_encoder(ParamStore& store, const EncoderConfig& cfg, Rng& rng);

/// Sinusoidal features with time_freqs geometrically spaced periods in
/// [horizon/100, horizon].
Eigen::RowVectorXd time_features(double t, int freqs, double horizon);

struct EncodeOutput {
  Tape::Var embeddings;          // N x D, row n depends only on history + query n
  Tape::Var pooled;              // 1 x pool_dim; valid only with global_summary
};

EncodeOutput encode_queries(Tape& tape, const ParamBinding& params,
                            const EncoderConfig& cfg, const ImtsInstance& instance);

/// Convenience single-query evaluation on a scratch tape.
Eigen::VectorXd encode_single(const ParamStore& store, const EncoderConfig& cfg,
                              const ImtsInstance& instance, int query_index);

}  // namespace gmcop
