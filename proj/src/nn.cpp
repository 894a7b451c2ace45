#include "gmcop/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gmcop {

void ParamStore::add(const std::string& name, Eigen::MatrixXd value) {
  if (has(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  index_[name] = static_cast<int>(values_.size());
  names_.push_back(name);
  values_.push_back(std::move(value));
}

Eigen::MatrixXd& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
  return values_[it->second];
}

const Eigen::MatrixXd& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
  return values_[it->second];
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& n : names_)
    if (n.rfind(prefix, 0) == 0) out.push_back(n);
  return out;
}

void ParamBinding::bind_leaves(Tape& tape, const ParamStore& store,
                               const std::vector<std::string>& names) {
  for (const auto& n : names) {
    vars_[n] = tape.leaf(store.at(n));
    leaf_names_.push_back(n);
  }
}

void ParamBinding::bind_constants(Tape& tape, const ParamStore& store,
                                  const std::vector<std::string>& names) {
  for (const auto& n : names) vars_[n] = tape.constant(store.at(n));
}

Tape::Var ParamBinding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::invalid_argument("ParamBinding: unbound name " + name);
  return it->second;
}

void init_mlp(ParamStore& store, const MlpSpec& spec, Rng& rng) {
  int in = spec.in;
  for (int l = 1; l <= spec.layers; ++l) {
    const int out = (l == spec.layers) ? spec.out : spec.hidden;
    Eigen::MatrixXd w(in, out);
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = s * rng.normal();
    store.add(spec.prefix + "/w" + std::to_string(l), std::move(w));
    store.add(spec.prefix + "/b" + std::to_string(l), Eigen::MatrixXd::Zero(1, out));
    in = out;
  }
}

Tape::Var mlp_apply(Tape& tape, const ParamBinding& params, const MlpSpec& spec,
                    Tape::Var x) {
  Tape::Var h = x;
  for (int l = 1; l <= spec.layers; ++l) {
    const std::string w = spec.prefix + "/w" + std::to_string(l);
    const std::string b = spec.prefix + "/b" + std::to_string(l);
    h = tape.add_row_broadcast(tape.matmul(h, params[w]), params[b]);
    if (l != spec.layers) h = tape.tanh(h);
  }
  return h;
}

}  // namespace gmcop
