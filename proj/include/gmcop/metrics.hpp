#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gmcop/model.hpp"

namespace gmcop {

/// -(1/N) sum_n log p(y_n | (t_n, c_n), X), each term evaluated through a
/// fresh single-query instance so the score probes per-coordinate
/// conditioning instead of assuming it equals the batched marginal.
double mnll(const JointModel& model, const ImtsInstance& instance);

/// Mean absolute gap between order statistics of two equal-length samples.
double empirical_w1(Eigen::VectorXd a, Eigen::VectorXd b);

/// Unbiased sample energy score: mean distance to the target minus half the
/// mean pairwise distance.
double energy_score(const Eigen::MatrixXd& samples, const Eigen::VectorXd& target);

/// Coordinate-wise unbiased CRPS estimator averaged over coordinates.
double crps(const Eigen::MatrixXd& samples, const Eigen::VectorXd& target);

/// Squared error of the per-coordinate sample mean, averaged over coordinates.
double mse(const Eigen::MatrixXd& samples, const Eigen::VectorXd& target);

/// Kolmogorov-Smirnov statistic of a sample against Uniform(0,1).
double ks_uniform_statistic(Eigen::VectorXd u);
/// Asymptotic critical value at the 1% level.
inline double ks_critical_1pct(int n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

struct MetricReport {
  std::vector<std::string> metric_names;
  Eigen::MatrixXd per_instance;  // instances x metrics
  Eigen::VectorXd means;
  Eigen::VectorXd stddevs;
  int sample_count = 0;
};

inline const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> names = {"njnll", "mnll", "mse", "es", "crps", "w1"};
  return names;
}

/// Per-instance metrics plus dataset mean/stddev. Sample-based metrics draw
/// `sample_count` joint samples per instance; the w1 column is the per-
/// dimension gap between joint-model samples and marginal-only samples (two
/// independently seeded marginal sample sets when no copula is attached,
/// i.e. the irreducible re-sampling gap). Unknown metric names throw with
/// the list of valid ones. `threads` > 1 evaluates instances concurrently;
/// per-instance seeds are fixed in advance so results do not depend on
/// scheduling.
MetricReport evaluate_model(const JointModel& model, const Dataset& data,
                            const std::vector<std::string>& metrics, int sample_count,
                            std::uint64_t seed, int threads = 1);

void write_metric_csv(const std::string& path, const MetricReport& report);
std::string format_metric_table(const MetricReport& report);

}  // namespace gmcop
