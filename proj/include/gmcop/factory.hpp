#pragma once

#include "gmcop/config.hpp"
#include "gmcop/model.hpp"
#include "gmcop/training.hpp"

// Config-key bindings for model and training construction. Every key has the
// library default; configuration files and --set overrides replace them.

namespace gmcop {

MarginalConfig marginal_config_from(const Config& cfg, int channels);
CopulaConfig copula_config_from(const Config& cfg, int channels, bool mix_gc);
TrainConfig train_config_from(const Config& cfg, Stage stage);

}  // namespace gmcop
