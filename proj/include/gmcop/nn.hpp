#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "gmcop/rng.hpp"
#include "gmcop/tape.hpp"

namespace gmcop {

/// Ordered collection of named parameter tensors. Iteration order is
/// insertion order, which fixes the optimizer's traversal and makes
/// training runs reproducible.
class ParamStore {
 public:
  void add(const std::string& name, Eigen::MatrixXd value);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  /// Names starting with `prefix`, in insertion order.
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
  std::vector<Eigen::MatrixXd> values_;
};

/// Tape handles for a subset of a ParamStore's tensors, bound either as
/// differentiable leaves (trainable) or constants (frozen).
class ParamBinding {
 public:
  void bind_leaves(Tape& tape, const ParamStore& store, const std::vector<std::string>& names);
  void bind_constants(Tape& tape, const ParamStore& store,
                      const std::vector<std::string>& names);
  Tape::Var operator[](const std::string& name) const;
  const std::vector<std::string>& leaf_names() const { return leaf_names_; }

 private:
  std::map<std::string, Tape::Var> vars_;
  std::vector<std::string> leaf_names_;
};

struct MlpSpec {
  std::string prefix;
  int in = 0;
  int hidden = 0;
  int out = 0;
  int layers = 2;  // number of linear maps; tanh between them
};

/// Registers weight matrices prefix/w{i}, biases prefix/b{i}. Weights are
/// N(0, 1/fan_in); biases start at zero.
void init_mlp(ParamStore& store, const MlpSpec& spec, Rng& rng);

/// Applies the MLP row-wise to x (rows x in) -> (rows x out).
Tape::Var mlp_apply(Tape& tape, const ParamBinding& params, const MlpSpec& spec,
                    Tape::Var x);

}  // namespace gmcop
