#pragma once

#include <array>
#include <cmath>
#include <utility>

// Adaptive Gauss-Kronrod (7-15) quadrature. Used by the marginalization
// consistency checks and by test oracles; not a general-purpose integrator.

namespace gmcop {

namespace detail {
// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights on the shared nodes.
inline constexpr std::array<double, 8> kKronrodX = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr std::array<double, 8> kKronrodW = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr std::array<double, 4> kGaussW = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

template <typename F>
inline std::pair<double, double> gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double kron = 0.0, gauss = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double dx = h * kKronrodX[i];
    const double fv = (i == 7) ? f(c) : f(c - dx) + f(c + dx);
    kron += kKronrodW[i] * fv;
    // Odd Kronrod indices (including the center) carry the embedded Gauss rule.
    if (i % 2 == 1) gauss += kGaussW[i / 2] * fv;
  }
  return {kron * h, std::abs(kron - gauss) * h};
}
}  // namespace detail

/// Integrates f over [a, b] by adaptive bisection of GK15 panels until the
/// local error estimate drops below tol (split between halves) or the depth
/// limit is hit. Smooth integrands converge in a handful of panels.
template <typename F>
inline double integrate(const F& f, double a, double b, double tol = 1e-10,
                        int max_depth = 28) {
  struct Seg {
    double a, b, tol;
    int depth;
  };
  double total = 0.0;
  std::array<Seg, 256> stack;
  int top = 0;
  stack[top++] = {a, b, tol, 0};
  while (top > 0) {
    const Seg s = stack[--top];
    auto [val, err] = detail::gk15(f, s.a, s.b);
    if (err <= s.tol || s.depth >= max_depth || top + 2 >= static_cast<int>(stack.size())) {
      total += val;
      continue;
    }
    const double m = 0.5 * (s.a + s.b);
    stack[top++] = {s.a, m, 0.5 * s.tol, s.depth + 1};
    stack[top++] = {m, s.b, 0.5 * s.tol, s.depth + 1};
  }
  return total;
}

}  // namespace gmcop
