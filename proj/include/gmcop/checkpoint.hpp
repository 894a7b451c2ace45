#pragma once

#include <string>

#include "gmcop/model.hpp"
#include "gmcop/nn.hpp"

// Flat binary container of named real tensors.
//
//   magic "GMCK" | u32 version (=1) | u64 tensor count |
//   per tensor: u32 name length | name bytes | u64 rows | u64 cols |
//               rows*cols doubles, row-major, little-endian
//
// Identical bytes imply identical models. Model hyperparameters ride along
// as 1x1 tensors under the "meta/" namespace; marginal and copula parameters
// keep their own prefixes.

namespace gmcop {

void save_store(const std::string& path, const ParamStore& store);
ParamStore load_store(const std::string& path);

void save_model(const std::string& path, const JointModel& model);
JointModel load_model(const std::string& path);

}  // namespace gmcop
