#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "gmcop/univariate_gmm.hpp"

// Reverse-mode differentiation over matrix-valued expressions. A Tape owns a
// growing list of nodes; every op appends one node whose closure knows how to
// push gradients to its inputs. Graphs are built per evaluation and discarded.
//
// The inverse CDF of a univariate Gaussian mixture is the one op whose
// forward pass is an iterative solve; its backward applies the analytic
// implicit-function gradients instead of unrolling the iterations.

namespace gmcop {

class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Tape() { nodes_.reserve(1024); }

  /// Value known to the graph but not differentiated.
  Var constant(Eigen::MatrixXd v);
  /// Differentiable input; gradients accumulate here.
  Var leaf(Eigen::MatrixXd v);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated by the last backward(); zeros if the node was
  /// never reached.
  Eigen::MatrixXd grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must
  /// be 1x1. Gradients from a previous backward on the same tape are cleared.
  void backward(Var loss);

  // --- arithmetic ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var dot(Var a, Var b);  // sum(a .* b) -> 1x1

  // --- elementwise functions ---
  Var log(Var a);
  Var exp(Var a);
  Var sqrt(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);

  // --- reductions / broadcasts ---
  Var sum(Var a);                         // 1x1
  Var row_sum(Var a);                     // R x 1
  Var col_mean(Var a);                    // 1 x C
  Var add_row_broadcast(Var a, Var row);  // a + ones * row
  Var mul_col_broadcast(Var a, Var col);  // a .* (col * ones^T)
  Var sub_col_broadcast(Var col, Var a);  // col * ones^T - a
  Var sub_scalar_var(Var a, Var s);       // a - s(0,0)
  Var softmax_rows(Var a);
  Var logsumexp(Var a);       // 1x1 over all entries
  Var logsumexp_rows(Var a);  // R x 1

  // --- structure ---
  Var vstack(const std::vector<Var>& rows);
  Var hstack(const std::vector<Var>& parts);
  Var slice_rows(Var a, int start, int count);
  Var slice_cols(Var a, int start, int count);
  Var flatten_to_row(Var a);  // row-major flatten to 1 x (R*C)
  Var repeat_row(Var row, int n);

  // --- linear algebra on SPD matrices ---
  Var solve_quad(Var spd, Var w);  // w^T C^{-1} w -> 1x1
  Var logdet_spd(Var spd);         // 1x1

  /// Coordinate-wise inverse CDF of univariate Gaussian mixtures. pi is
  /// K x 1; means/stds are N x K (row n parameterizes coordinate n); u has
  /// length N. Forward runs the safeguarded solver outside the graph; the
  /// backward pass applies the analytic gradients with respect to the
  /// weights, means, and stddevs. No gradient flows to u. Throws
  /// IcdfFailure with the offending coordinate if a solve does not converge.
  Var gmm_icdf_node(Var pi, Var means, Var stds, const Eigen::VectorXd& u,
                    int budget = 50, double tol = 1e-10);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // empty until touched
    std::function<void(Tape&)> backward;
    bool requires_grad = false;
  };

  Var push(Eigen::MatrixXd value, bool requires_grad, std::function<void(Tape&)> back);
  void accumulate(int id, const Eigen::MatrixXd& g);
  const Eigen::MatrixXd& val(int id) const { return nodes_[id].value; }
  Eigen::MatrixXd& gradref(int id) { return nodes_[id].grad; }
  bool needs(Var a) const { return nodes_[a.id].requires_grad; }
  bool needs(Var a, Var b) const { return needs(a) || needs(b); }

  std::vector<Node> nodes_;
};

struct IcdfFailure : std::runtime_error {
  IcdfFailure(int coordinate_, double best_z_, double residual_);
  int coordinate;
  double best_z;
  double residual;
};

}  // namespace gmcop
