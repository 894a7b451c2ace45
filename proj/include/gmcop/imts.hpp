#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gmcop/rng.hpp"

// Irregular multivariate time-series instances: history triplets (t, c, y),
// query pairs (t, c), and target values aligned with the queries. History
// and queries carry no intrinsic ordering.

namespace gmcop {

struct Observation {
  double t = 0.0;
  int channel = 0;
  double value = 0.0;
};

struct QueryPoint {
  double t = 0.0;
  int channel = 0;
};

struct ImtsInstance {
  std::vector<Observation> history;
  std::vector<QueryPoint> queries;
  Eigen::VectorXd targets;

  int query_count() const { return static_cast<int>(queries.size()); }
};

struct Dataset {
  int channels = 0;
  std::vector<ImtsInstance> instances;
};

void validate(const Dataset& d);

// --- toy distributions -----------------------------------------------------

enum class ToyKind { x_shape, ring, cluster3d };

struct ToySpec {
  ToyKind kind = ToyKind::ring;
  int count = 1000;
  double noise = 0.0;  // 0 picks the per-kind default
  std::uint64_t seed = 0;
};

/// Two anti-/co-correlated Gaussian ridges forming an X. `noise` is the
/// off-ridge scatter; the default reproduces per-ridge |correlation| 0.95.
/// If labels is non-null it receives the ridge index per sample.
Eigen::MatrixXd gen_x_shape(const ToySpec& spec, std::vector<int>* labels = nullptr);

/// Radius N(2, noise) with uniform angle; default noise 0.15.
Eigen::MatrixXd gen_ring(const ToySpec& spec);

/// Two equal-weight Gaussian clusters at (-2.5, -2, +2.5) and
/// (+2.5, +2, -2.5); `noise` is the isotropic stddev (default 0.3) and the
/// second coordinate is quasi-discrete with a third of that spread.
Eigen::MatrixXd gen_cluster3d(const ToySpec& spec, std::vector<int>* labels = nullptr);

/// Wraps toy samples as history-free instances: one channel per coordinate,
/// queried at a fixed pseudo-time.
Dataset toy_dataset(const ToySpec& spec);

// --- synthetic irregular series ---------------------------------------------

struct ImtsGenSpec {
  int channels = 5;
  int count = 200;
  double horizon = 1.0;
  int grid = 100;           // latent time grid per series
  double sparsity = 0.1;    // keep probability per grid point, in (0, 1]
  double dependence = 0.5;  // in [0, 1]; 0 gives independent channels
  double obs_noise = 0.05;
  std::uint64_t seed = 0;
};

/// Smooth latent multi-channel process: per-channel private sinusoids mixed
/// with a shared component according to `dependence`.
struct ImtsLatent {
  Eigen::MatrixXd own_amp, own_freq, own_phase;  // channels x 3
  Eigen::VectorXd shared_amp, shared_freq, shared_phase;  // 3
  double dependence = 0.0;

  double eval(int channel, double t) const;
};

/// Poisson-thinned observations of the latent process; the last fifth of the
/// horizon becomes the query window.
Dataset gen_imts(const ImtsGenSpec& spec, std::vector<ImtsLatent>* latents = nullptr);

// --- on-disk format ----------------------------------------------------------

/// Line-delimited JSON. The header line carries {"channels": C, "version": 1};
/// each record has fields history [[t,c,y],...], queries [[t,c],...], and
/// targets [y,...]. Reals round-trip exactly.
void save_imts(const Dataset& d, const std::string& path);
Dataset load_imts(const std::string& path);

// --- splits ------------------------------------------------------------------

struct SplitIndices {
  std::vector<int> train, val, test;
};

/// Disjoint, exhaustive index partition by seeded shuffle.
SplitIndices split_indices(int count, double train_frac, double val_frac,
                           std::uint64_t seed);

Dataset subset(const Dataset& d, const std::vector<int>& indices);

}  // namespace gmcop
