#pragma once

#include <cstdint>

#include "gmcop/model.hpp"

// Marginalization-consistency probes. Density level: the quadrature marginal
// of the joint density over one coordinate must match the density the model
// assigns when that coordinate is never queried. Sampling level: samples of a
// query subset drawn directly must be statistically indistinguishable from
// samples of a superset projected down, relative to the re-sampling noise
// floor (the two-seed control).

namespace gmcop {

struct DensityConsistencyReport {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  int probes = 0;
};

/// Integrates the joint density of the first `keep+1` queries over the last
/// coordinate and compares against the direct `keep`-query density at probe
/// points drawn from the model. The integration range spans the dropped
/// coordinate's marginal quantiles at 1e-9 mass.
DensityConsistencyReport density_consistency_check(const JointModel& model,
                                                   const ImtsInstance& instance, int probes,
                                                   std::uint64_t seed, double quad_tol = 1e-10);

struct SamplingConsistencyReport {
  double w1_direct_vs_marginalized = 0.0;  // mean over kept dimensions
  double w1_control = 0.0;                 // two-seed re-sampling gap
  int sample_count = 0;
};

/// Direct route: sample the first two queries alone. Marginalized route:
/// sample all queries and drop the rest. Control: the direct route sampled
/// twice with different seeds.
SamplingConsistencyReport sampling_consistency_check(const JointModel& model,
                                                     const ImtsInstance& instance,
                                                     int sample_count, std::uint64_t seed);

}  // namespace gmcop
