#include "gmcop/tape.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gmcop {

namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << op << ": shape mismatch (" << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols() << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

IcdfFailure::IcdfFailure(int coordinate_, double best_z_, double residual_)
    : std::runtime_error("gmm_icdf_node: coordinate " + std::to_string(coordinate_) +
                         " failed to converge (residual " + std::to_string(residual_) + ")"),
      coordinate(coordinate_),
      best_z(best_z_),
      residual(residual_) {}

Tape::Var Tape::push(Eigen::MatrixXd value, bool requires_grad,
                     std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(back);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::constant(Eigen::MatrixXd v) { return push(std::move(v), false, nullptr); }

Tape::Var Tape::leaf(Eigen::MatrixXd v) { return push(std::move(v), true, nullptr); }

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Eigen::MatrixXd& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var loss) {
  if (!loss.valid()) throw std::invalid_argument("backward: invalid var");
  const Node& ln = nodes_[loss.id];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  if (!ln.requires_grad) throw std::invalid_argument("backward: loss does not require grad");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = Eigen::MatrixXd::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this);
  }
}

// ---------------------------------------------------------------------------
// arithmetic

Tape::Var Tape::add(Var a, Var b) {
  check_same_shape(val(a.id), val(b.id), "add");
  Eigen::MatrixXd out = val(a.id) + val(b.id);
  const int ia = a.id, ib = b.id;
  Var v = push(std::move(out), needs(a, b), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ib, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  };
  return v;
}

Tape::Var Tape::sub(Var a, Var b) {
  check_same_shape(val(a.id), val(b.id), "sub");
  Eigen::MatrixXd out = val(a.id) - val(b.id);
  const int ia = a.id, ib = b.id;
  Var v = push(std::move(out), needs(a, b), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ib, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  };
  return v;
}

Tape::Var Tape::mul(Var a, Var b) {
  check_same_shape(val(a.id), val(b.id), "mul");
  Eigen::MatrixXd out = val(a.id).cwiseProduct(val(b.id));
  const int ia = a.id, ib = b.id;
  Var v = push(std::move(out), needs(a, b), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ib, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g.cwiseProduct(t.val(ib)));
    t.accumulate(ib, g.cwiseProduct(t.val(ia)));
  };
  return v;
}

Tape::Var Tape::div(Var a, Var b) {
  check_same_shape(val(a.id), val(b.id), "div");
  Eigen::MatrixXd out = val(a.id).cwiseQuotient(val(b.id));
  const int ia = a.id, ib = b.id;
  Var v = push(std::move(out), needs(a, b), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ib, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g.cwiseQuotient(t.val(ib)));
    t.accumulate(ib, -g.cwiseProduct(t.val(self)).cwiseQuotient(t.val(ib)));
  };
  return v;
}

Tape::Var Tape::neg(Var a) {
  Eigen::MatrixXd out = -val(a.id);
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) { t.accumulate(ia, -t.gradref(self)); };
  return v;
}

Tape::Var Tape::scale(Var a, double c) {
  Eigen::MatrixXd out = c * val(a.id);
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self, c](Tape& t) { t.accumulate(ia, c * t.gradref(self)); };
  return v;
}

Tape::Var Tape::add_scalar(Var a, double c) {
  Eigen::MatrixXd out = val(a.id).array() + c;
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) { t.accumulate(ia, t.gradref(self)); };
  return v;
}

Tape::Var Tape::matmul(Var a, Var b) {
  if (val(a.id).cols() != val(b.id).rows())
    throw std::invalid_argument("matmul: inner dimension mismatch");
  Eigen::MatrixXd out = val(a.id) * val(b.id);
  const int ia = a.id, ib = b.id;
  Var v = push(std::move(out), needs(a, b), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ib, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g * t.val(ib).transpose());
    t.accumulate(ib, t.val(ia).transpose() * g);
  };
  return v;
}

Tape::Var Tape::transpose(Var a) {
  Eigen::MatrixXd out = val(a.id).transpose();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    t.accumulate(ia, t.gradref(self).transpose());
  };
  return v;
}

Tape::Var Tape::dot(Var a, Var b) {
  check_same_shape(val(a.id), val(b.id), "dot");
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = val(a.id).cwiseProduct(val(b.id)).sum();
  const int ia = a.id, ib = b.id;
  Var v = push(std::move(out), needs(a, b), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ib, self](Tape& t) {
    const double g = t.gradref(self)(0, 0);
    t.accumulate(ia, g * t.val(ib));
    t.accumulate(ib, g * t.val(ia));
  };
  return v;
}

// ---------------------------------------------------------------------------
// elementwise functions

Tape::Var Tape::log(Var a) {
  Eigen::MatrixXd out = val(a.id).array().log();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    t.accumulate(ia, t.gradref(self).cwiseQuotient(t.val(ia)));
  };
  return v;
}

Tape::Var Tape::exp(Var a) {
  Eigen::MatrixXd out = val(a.id).array().exp();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    t.accumulate(ia, t.gradref(self).cwiseProduct(t.val(self)));
  };
  return v;
}

Tape::Var Tape::sqrt(Var a) {
  Eigen::MatrixXd out = val(a.id).array().sqrt();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    t.accumulate(ia, (t.gradref(self).array() * 0.5 / t.val(self).array()).matrix());
  };
  return v;
}

Tape::Var Tape::tanh(Var a) {
  Eigen::MatrixXd out = val(a.id).array().tanh();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    t.accumulate(ia,
                 (t.gradref(self).array() * (1.0 - t.val(self).array().square())).matrix());
  };
  return v;
}

Tape::Var Tape::sigmoid(Var a) {
  Eigen::MatrixXd out = val(a.id).unaryExpr([](double x) { return stable_sigmoid(x); });
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const auto& s = t.val(self).array();
    t.accumulate(ia, (t.gradref(self).array() * s * (1.0 - s)).matrix());
  };
  return v;
}

Tape::Var Tape::softplus(Var a) {
  Eigen::MatrixXd out = val(a.id).unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const Eigen::MatrixXd s = t.val(ia).unaryExpr([](double x) { return stable_sigmoid(x); });
    t.accumulate(ia, t.gradref(self).cwiseProduct(s));
  };
  return v;
}

// ---------------------------------------------------------------------------
// reductions / broadcasts

Tape::Var Tape::sum(Var a) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = val(a.id).sum();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const double g = t.gradref(self)(0, 0);
    t.accumulate(ia, Eigen::MatrixXd::Constant(t.val(ia).rows(), t.val(ia).cols(), g));
  };
  return v;
}

Tape::Var Tape::row_sum(Var a) {
  Eigen::MatrixXd out = val(a.id).rowwise().sum();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    t.accumulate(ia, t.gradref(self).replicate(1, t.val(ia).cols()));
  };
  return v;
}

Tape::Var Tape::col_mean(Var a) {
  const double n = static_cast<double>(val(a.id).rows());
  Eigen::MatrixXd out = val(a.id).colwise().mean();
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self, n](Tape& t) {
    t.accumulate(ia, t.gradref(self).replicate(t.val(ia).rows(), 1) / n);
  };
  return v;
}

Tape::Var Tape::add_row_broadcast(Var a, Var row) {
  if (val(row.id).rows() != 1 || val(row.id).cols() != val(a.id).cols())
    throw std::invalid_argument("add_row_broadcast: row shape mismatch");
  Eigen::MatrixXd out = val(a.id).rowwise() + val(row.id).row(0);
  const int ia = a.id, ir = row.id;
  Var v = push(std::move(out), needs(a, row), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ir, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g);
    t.accumulate(ir, g.colwise().sum());
  };
  return v;
}

Tape::Var Tape::mul_col_broadcast(Var a, Var col) {
  if (val(col.id).cols() != 1 || val(col.id).rows() != val(a.id).rows())
    throw std::invalid_argument("mul_col_broadcast: col shape mismatch");
  Eigen::MatrixXd out = val(a.id).array().colwise() * val(col.id).col(0).array();
  const int ia = a.id, ic = col.id;
  Var v = push(std::move(out), needs(a, col), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ic, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, (g.array().colwise() * t.val(ic).col(0).array()).matrix());
    t.accumulate(ic, g.cwiseProduct(t.val(ia)).rowwise().sum());
  };
  return v;
}

Tape::Var Tape::sub_col_broadcast(Var col, Var a) {
  if (val(col.id).cols() != 1 || val(col.id).rows() != val(a.id).rows())
    throw std::invalid_argument("sub_col_broadcast: col shape mismatch");
  Eigen::MatrixXd out = (-val(a.id)).array().colwise() + val(col.id).col(0).array();
  const int ia = a.id, ic = col.id;
  Var v = push(std::move(out), needs(a, col), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, ic, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ic, g.rowwise().sum());
    t.accumulate(ia, -g);
  };
  return v;
}

Tape::Var Tape::sub_scalar_var(Var a, Var s) {
  if (val(s.id).size() != 1) throw std::invalid_argument("sub_scalar_var: s must be 1x1");
  Eigen::MatrixXd out = val(a.id).array() - val(s.id)(0, 0);
  const int ia = a.id, is = s.id;
  Var v = push(std::move(out), needs(a, s), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, is, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    t.accumulate(ia, g);
    Eigen::MatrixXd gs(1, 1);
    gs(0, 0) = -g.sum();
    t.accumulate(is, gs);
  };
  return v;
}

Tape::Var Tape::softmax_rows(Var a) {
  Eigen::MatrixXd out = val(a.id);
  for (int r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const Eigen::MatrixXd& s = t.val(self);
    const Eigen::MatrixXd& g = t.gradref(self);
    Eigen::MatrixXd ga(s.rows(), s.cols());
    for (int r = 0; r < s.rows(); ++r) {
      const double inner = g.row(r).dot(s.row(r));
      ga.row(r) = s.row(r).cwiseProduct(g.row(r).array().matrix() -
                                        Eigen::RowVectorXd::Constant(s.cols(), inner));
    }
    t.accumulate(ia, ga);
  };
  return v;
}

Tape::Var Tape::logsumexp(Var a) {
  const double m = val(a.id).maxCoeff();
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = m + std::log((val(a.id).array() - m).exp().sum());
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const double g = t.gradref(self)(0, 0);
    const double lse = t.val(self)(0, 0);
    t.accumulate(ia, (g * (t.val(ia).array() - lse).exp()).matrix());
  };
  return v;
}

Tape::Var Tape::logsumexp_rows(Var a) {
  const Eigen::MatrixXd& x = val(a.id);
  Eigen::MatrixXd out(x.rows(), 1);
  for (int r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const Eigen::MatrixXd& x2 = t.val(ia);
    const Eigen::MatrixXd& lse = t.val(self);
    const Eigen::MatrixXd& g = t.gradref(self);
    Eigen::MatrixXd ga(x2.rows(), x2.cols());
    for (int r = 0; r < x2.rows(); ++r)
      ga.row(r) = g(r, 0) * (x2.row(r).array() - lse(r, 0)).exp();
    t.accumulate(ia, ga);
  };
  return v;
}

// ---------------------------------------------------------------------------
// structure

Tape::Var Tape::vstack(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("vstack: empty");
  const auto cols = val(rows[0].id).cols();
  Eigen::Index total = 0;
  bool rg = false;
  for (Var r : rows) {
    if (val(r.id).cols() != cols) throw std::invalid_argument("vstack: column mismatch");
    total += val(r.id).rows();
    rg = rg || needs(r);
  }
  Eigen::MatrixXd out(total, cols);
  std::vector<std::pair<int, Eigen::Index>> offsets;  // (node, row offset)
  Eigen::Index at = 0;
  for (Var r : rows) {
    out.middleRows(at, val(r.id).rows()) = val(r.id);
    offsets.emplace_back(r.id, at);
    at += val(r.id).rows();
  }
  Var v = push(std::move(out), rg, nullptr);
  const int self = v.id;
  nodes_[self].backward = [offsets, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    for (auto [id, off] : offsets)
      t.accumulate(id, g.middleRows(off, t.val(id).rows()));
  };
  return v;
}

Tape::Var Tape::hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: empty");
  const auto rows = val(parts[0].id).rows();
  Eigen::Index total = 0;
  bool rg = false;
  for (Var p : parts) {
    if (val(p.id).rows() != rows) throw std::invalid_argument("hstack: row mismatch");
    total += val(p.id).cols();
    rg = rg || needs(p);
  }
  Eigen::MatrixXd out(rows, total);
  std::vector<std::pair<int, Eigen::Index>> offsets;
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, val(p.id).cols()) = val(p.id);
    offsets.emplace_back(p.id, at);
    at += val(p.id).cols();
  }
  Var v = push(std::move(out), rg, nullptr);
  const int self = v.id;
  nodes_[self].backward = [offsets, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    for (auto [id, off] : offsets)
      t.accumulate(id, g.middleCols(off, t.val(id).cols()));
  };
  return v;
}

Tape::Var Tape::slice_rows(Var a, int start, int count) {
  if (start < 0 || count < 1 || start + count > val(a.id).rows())
    throw std::invalid_argument("slice_rows: out of range");
  Eigen::MatrixXd out = val(a.id).middleRows(start, count);
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self, start, count](Tape& t) {
    Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(t.val(ia).rows(), t.val(ia).cols());
    ga.middleRows(start, count) = t.gradref(self);
    t.accumulate(ia, ga);
  };
  return v;
}

Tape::Var Tape::slice_cols(Var a, int start, int count) {
  if (start < 0 || count < 1 || start + count > val(a.id).cols())
    throw std::invalid_argument("slice_cols: out of range");
  Eigen::MatrixXd out = val(a.id).middleCols(start, count);
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self, start, count](Tape& t) {
    Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(t.val(ia).rows(), t.val(ia).cols());
    ga.middleCols(start, count) = t.gradref(self);
    t.accumulate(ia, ga);
  };
  return v;
}

Tape::Var Tape::flatten_to_row(Var a) {
  const Eigen::MatrixXd& x = val(a.id);
  Eigen::MatrixXd out(1, x.size());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(0, r * x.cols() + c) = x(r, c);
  const int ia = a.id;
  Var v = push(std::move(out), needs(a), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ia, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    const Eigen::MatrixXd& x2 = t.val(ia);
    Eigen::MatrixXd ga(x2.rows(), x2.cols());
    for (Eigen::Index r = 0; r < x2.rows(); ++r)
      for (Eigen::Index c = 0; c < x2.cols(); ++c) ga(r, c) = g(0, r * x2.cols() + c);
    t.accumulate(ia, ga);
  };
  return v;
}

Tape::Var Tape::repeat_row(Var row, int n) {
  if (val(row.id).rows() != 1) throw std::invalid_argument("repeat_row: input must be 1xC");
  Eigen::MatrixXd out = val(row.id).replicate(n, 1);
  const int ir = row.id;
  Var v = push(std::move(out), needs(row), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ir, self](Tape& t) {
    t.accumulate(ir, t.gradref(self).colwise().sum());
  };
  return v;
}

// ---------------------------------------------------------------------------
// SPD linear algebra

Tape::Var Tape::solve_quad(Var spd, Var w) {
  const Eigen::MatrixXd& c = val(spd.id);
  if (c.rows() != c.cols() || val(w.id).cols() != 1 || val(w.id).rows() != c.rows())
    throw std::invalid_argument("solve_quad: shape mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("solve_quad: matrix not positive definite");
  Eigen::VectorXd y = llt.solve(val(w.id).col(0));
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = val(w.id).col(0).dot(y);
  const int ic = spd.id, iw = w.id;
  Var v = push(std::move(out), needs(spd, w), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ic, iw, self, y](Tape& t) {
    const double g = t.gradref(self)(0, 0);
    t.accumulate(iw, (2.0 * g) * y);
    t.accumulate(ic, (-g) * (y * y.transpose()));
  };
  return v;
}

Tape::Var Tape::logdet_spd(Var spd) {
  const Eigen::MatrixXd& c = val(spd.id);
  if (c.rows() != c.cols()) throw std::invalid_argument("logdet_spd: not square");
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("logdet_spd: matrix not positive definite");
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const int ic = spd.id;
  Var v = push(std::move(out), needs(spd), nullptr);
  const int self = v.id;
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(c.rows(), c.cols()));
  nodes_[self].backward = [ic, self, inv](Tape& t) {
    t.accumulate(ic, t.gradref(self)(0, 0) * inv);
  };
  return v;
}

// ---------------------------------------------------------------------------
// inverse CDF with analytic implicit gradients

Tape::Var Tape::gmm_icdf_node(Var pi, Var means, Var stds, const Eigen::VectorXd& u,
                              int budget, double tol) {
  const Eigen::MatrixXd& pv = val(pi.id);
  const Eigen::MatrixXd& mv = val(means.id);
  const Eigen::MatrixXd& sv = val(stds.id);
  const int n = static_cast<int>(mv.rows());
  const int k = static_cast<int>(mv.cols());
  if (pv.cols() != 1 || pv.rows() != k || sv.rows() != n || sv.cols() != k ||
      u.size() != n)
    throw std::invalid_argument("gmm_icdf_node: shape mismatch");

  Eigen::MatrixXd z(n, 1);
  for (int i = 0; i < n; ++i) {
    Gmm1dParams p1{pv.col(0), mv.row(i).transpose(), sv.row(i).transpose()};
    IcdfSolveResult r = gmm_icdf(p1, u[i], budget, tol);
    if (!r.converged) throw IcdfFailure(i, r.z, r.residual);
    z(i, 0) = r.z;
  }
  const int ip = pi.id, im = means.id, is = stds.id;
  Var v = push(std::move(z), needs(pi) || needs(means) || needs(stds), nullptr);
  const int self = v.id;
  nodes_[self].backward = [ip, im, is, self](Tape& t) {
    const Eigen::MatrixXd& g = t.gradref(self);
    const Eigen::MatrixXd& zv = t.val(self);
    const Eigen::MatrixXd& pv2 = t.val(ip);
    const Eigen::MatrixXd& mv2 = t.val(im);
    const Eigen::MatrixXd& sv2 = t.val(is);
    const int n2 = static_cast<int>(mv2.rows());
    const int k2 = static_cast<int>(mv2.cols());
    Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(k2, 1);
    Eigen::MatrixXd gm = Eigen::MatrixXd::Zero(n2, k2);
    Eigen::MatrixXd gs = Eigen::MatrixXd::Zero(n2, k2);
    for (int i = 0; i < n2; ++i) {
      Gmm1dParams p1{pv2.col(0), mv2.row(i).transpose(), sv2.row(i).transpose()};
      const double f = std::max(gmm_pdf(p1, zv(i, 0)), kPdfFloor);
      for (int j = 0; j < k2; ++j) {
        const double sig = sv2(i, j);
        const double tt = (zv(i, 0) - mv2(i, j)) / sig;
        const double phi = normal_pdf(tt);
        gp(j, 0) += g(i, 0) * (-normal_cdf(tt) / f);
        gm(i, j) = g(i, 0) * pv2(j, 0) * phi / (sig * f);
        // d z / d sigma = (d z / d sigma^2) * 2 sigma
        gs(i, j) = g(i, 0) * pv2(j, 0) * phi * (zv(i, 0) - mv2(i, j)) / (sig * sig * f);
      }
    }
    t.accumulate(ip, gp);
    t.accumulate(im, gm);
    t.accumulate(is, gs);
  };
  return v;
}

}  // namespace gmcop
