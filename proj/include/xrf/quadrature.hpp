#pragma once

// Adaptive Gauss-Legendre quadrature on geometric panels, used for radial
// integrals of bound-state products.

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace xrf {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
  bool converged = true;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

namespace detail {

template <int N>
struct GaussLegendreRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};

  GaussLegendreRule() {
    for (int i = 0; i < (N + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (N + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = N * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-16) break;
      }
      // recompute derivative at the converged node
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= N; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = N * (x * p1 - p0) / (x * x - 1.0);
      nodes[i] = -x;
      nodes[N - 1 - i] = x;
      weights[i] = weights[N - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

inline const GaussLegendreRule<20>& gauss_legendre_20() {
  static const GaussLegendreRule<20> rule;
  return rule;
}

struct PanelSum {
  double value;
  double magnitude;  // integral of |f|, sets the round-off floor
};

template <class F>
PanelSum gauss_legendre_panel(F&& f, double a, double b) {
  const auto& rule = gauss_legendre_20();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s = 0.0, m = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double v = rule.weights[i] * f(mid + half * rule.nodes[i]);
    s += v;
    m += std::fabs(v);
  }
  return {s * half, m * std::fabs(half)};
}

template <class F>
void adaptive_panel(F& f, double a, double b, double whole, double abs_tol, int depth,
                    QuadratureResult& out) {
  const double mid = 0.5 * (a + b);
  const PanelSum left = gauss_legendre_panel(f, a, mid);
  const PanelSum right = gauss_legendre_panel(f, mid, b);
  const double diff = std::fabs(left.value + right.value - whole);
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (left.magnitude + right.magnitude);
  if (diff <= std::max(abs_tol, noise) || depth <= 0) {
    if (diff > std::max(abs_tol, noise)) out.converged = false;
    out.value += left.value + right.value;
    out.error += diff;
    return;
  }
  adaptive_panel(f, a, mid, left.value, 0.5 * abs_tol, depth - 1, out);
  adaptive_panel(f, mid, b, right.value, 0.5 * abs_tol, depth - 1, out);
}

}  // namespace detail

/// Integrate f on [a, b] by recursive bisection with a 20-point
/// Gauss-Legendre rule until the panel estimate changes by less than abs_tol.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double abs_tol, int max_depth = 40) {
  QuadratureResult out;
  out.value = 0.0;
  const double whole = detail::gauss_legendre_panel(f, a, b).value;
  detail::adaptive_panel(f, a, b, whole, abs_tol, max_depth, out);
  return out;
}

/// Integrate f on [0, r_max] over geometric panels [r_max 2^-(k+1), r_max 2^-k]
/// down to r_max * 2^-panels, plus the innermost interval. rel_tol is relative
/// to the integral of |f|, so cancellation in the integrand does not drive the
/// refinement forever.
template <class F>
QuadratureResult integrate_radial(F&& f, double r_max, double rel_tol, int panels = 48) {
  std::vector<double> edges;
  edges.reserve(panels + 2);
  edges.push_back(0.0);
  for (int k = panels; k >= 0; --k) edges.push_back(std::ldexp(r_max, -k));

  // coarse pass on |f| sets the absolute scale of the tolerance
  double scale = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    scale += detail::gauss_legendre_panel(f, edges[i], edges[i + 1]).magnitude;
  if (scale == 0.0) return {};

  const double abs_tol = rel_tol * scale;
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    auto piece = integrate_adaptive(f, edges[i], edges[i + 1], abs_tol / (edges.size() - 1));
    total.value += piece.value;
    total.error += piece.error;
    total.converged = total.converged && piece.converged;
  }
  return total;
}

}  // namespace xrf
