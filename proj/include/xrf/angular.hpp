#pragma once

// Angular-momentum coupling coefficients and spherical Bessel functions.
//
// Half-integer quantum numbers are passed doubled (twice_j = 2j) so that every
// selection rule is an integer comparison.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace xrf {

struct AngularMomentum {
  int twice_j = 0;
  int twice_m = 0;

  constexpr AngularMomentum() = default;
  constexpr AngularMomentum(int tj, int tm) : twice_j(tj), twice_m(tm) {
    if (!valid(tj, tm)) throw std::invalid_argument("AngularMomentum: invalid (2j, 2m) pair");
  }

  static constexpr bool valid(int tj, int tm) {
    return tj >= 0 && (tm < 0 ? -tm : tm) <= tj && ((tj - tm) % 2 == 0);
  }

  constexpr double j() const { return 0.5 * twice_j; }
  constexpr double m() const { return 0.5 * twice_m; }
};

namespace detail {

inline constexpr int max_factorial = 300;

inline const std::array<long double, max_factorial + 1>& factorial_table() {
  static const auto table = [] {
    std::array<long double, max_factorial + 1> t{};
    t[0] = 1.0L;
    for (int i = 1; i <= max_factorial; ++i) t[i] = t[i - 1] * static_cast<long double>(i);
    return t;
  }();
  return table;
}

inline long double factorial(int n) {
  if (n < 0 || n > max_factorial) throw std::out_of_range("factorial argument out of table range");
  return factorial_table()[n];
}

// Neumaier-compensated accumulator; the Racah sums alternate in sign and lose
// digits under plain summation.
struct CompensatedSum {
  long double sum = 0.0L;
  long double carry = 0.0L;

  void add(long double x) {
    long double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  long double value() const { return sum + carry; }
};

// Triangle rule on doubled arguments, including integer perimeter.
constexpr bool triangle(int ta, int tb, int tc) {
  if (ta < 0 || tb < 0 || tc < 0) return false;
  if ((ta + tb + tc) % 2 != 0) return false;
  return tc <= ta + tb && tc >= (ta > tb ? ta - tb : tb - ta);
}

// Delta(abc)^2 = (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!, doubled arguments.
inline long double triangle_coefficient_sq(int ta, int tb, int tc) {
  return factorial((ta + tb - tc) / 2) * factorial((ta - tb + tc) / 2) *
         factorial((-ta + tb + tc) / 2) / factorial((ta + tb + tc) / 2 + 1);
}

constexpr int parity_sign(int n) { return (n % 2 == 0) ? 1 : -1; }

}  // namespace detail

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) from doubled arguments. Returns 0
/// whenever a triangle, projection or parity rule fails.
inline double wigner3j(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  using detail::factorial;
  if (tm1 + tm2 + tm3 != 0) return 0.0;
  if (!AngularMomentum::valid(tj1, tm1) || !AngularMomentum::valid(tj2, tm2) ||
      !AngularMomentum::valid(tj3, tm3))
    return 0.0;
  if (!detail::triangle(tj1, tj2, tj3)) return 0.0;

  // All combinations below are integers once the checks above pass.
  const int a1 = (tj1 + tj2 - tj3) / 2;
  const int a2 = (tj1 - tm1) / 2;
  const int a3 = (tj2 + tm2) / 2;
  const int b1 = (tj3 - tj2 + tm1) / 2;
  const int b2 = (tj3 - tj1 - tm2) / 2;

  const int kmin = std::max({0, -b1, -b2});
  const int kmax = std::min({a1, a2, a3});
  if (kmin > kmax) return 0.0;

  detail::CompensatedSum sum;
  for (int k = kmin; k <= kmax; ++k) {
    const long double denom = factorial(k) * factorial(b1 + k) * factorial(b2 + k) *
                              factorial(a1 - k) * factorial(a2 - k) * factorial(a3 - k);
    sum.add(detail::parity_sign(k) / denom);
  }

  const long double projections =
      factorial((tj1 + tm1) / 2) * factorial((tj1 - tm1) / 2) * factorial((tj2 + tm2) / 2) *
      factorial((tj2 - tm2) / 2) * factorial((tj3 + tm3) / 2) * factorial((tj3 - tm3) / 2);
  const long double prefactor =
      std::sqrt(detail::triangle_coefficient_sq(tj1, tj2, tj3) * projections);
  const int phase = detail::parity_sign(std::abs(tj1 - tj2 - tm3) / 2);
  return static_cast<double>(phase * prefactor * sum.value());
}

inline double wigner3j(const AngularMomentum& a, const AngularMomentum& b, const AngularMomentum& c) {
  return wigner3j(a.twice_j, b.twice_j, c.twice_j, a.twice_m, b.twice_m, c.twice_m);
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} from doubled arguments. Returns 0 if
/// any of the four triads violates the triangle rule.
inline double wigner6j(int tj1, int tj2, int tj3, int tj4, int tj5, int tj6) {
  using detail::factorial;
  using detail::triangle;
  if (!triangle(tj1, tj2, tj3) || !triangle(tj1, tj5, tj6) || !triangle(tj4, tj2, tj6) ||
      !triangle(tj4, tj5, tj3))
    return 0.0;

  const int t1 = (tj1 + tj2 + tj3) / 2;
  const int t2 = (tj1 + tj5 + tj6) / 2;
  const int t3 = (tj4 + tj2 + tj6) / 2;
  const int t4 = (tj4 + tj5 + tj3) / 2;
  const int u1 = (tj1 + tj2 + tj4 + tj5) / 2;
  const int u2 = (tj2 + tj3 + tj5 + tj6) / 2;
  const int u3 = (tj3 + tj1 + tj6 + tj4) / 2;

  const int tmin = std::max({t1, t2, t3, t4});
  const int tmax = std::min({u1, u2, u3});
  if (tmin > tmax) return 0.0;

  detail::CompensatedSum sum;
  for (int t = tmin; t <= tmax; ++t) {
    const long double denom = factorial(t - t1) * factorial(t - t2) * factorial(t - t3) *
                              factorial(t - t4) * factorial(u1 - t) * factorial(u2 - t) *
                              factorial(u3 - t);
    sum.add(detail::parity_sign(t) * factorial(t + 1) / denom);
  }
  const long double deltas = detail::triangle_coefficient_sq(tj1, tj2, tj3) *
                             detail::triangle_coefficient_sq(tj1, tj5, tj6) *
                             detail::triangle_coefficient_sq(tj4, tj2, tj6) *
                             detail::triangle_coefficient_sq(tj4, tj5, tj3);
  return static_cast<double>(std::sqrt(deltas) * sum.value());
}

/// Spherical Bessel function j_L(x) for x >= 0.
///
/// Power series for x <= 1, upward recurrence for x >= L, and Miller's
/// downward recurrence normalized to j_0 or j_1 in between.
inline double spherical_bessel(int L, double x) {
  if (L < 0) throw std::invalid_argument("spherical_bessel: L must be non-negative");
  if (!std::isfinite(x)) throw std::invalid_argument("spherical_bessel: x must be finite");
  x = std::fabs(x);  // j_L(-x) = (-1)^L j_L(x); callers only pass radii
  if (x == 0.0) return L == 0 ? 1.0 : 0.0;

  if (x <= 1.0) {
    double lead = 1.0;
    for (int i = 1; i <= L; ++i) lead *= x / (2 * i + 1);
    const double y = -0.5 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 60; ++k) {
      term *= y / (k * (2.0 * L + 2.0 * k + 1.0));
      sum += term;
      if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
    }
    return lead * sum;
  }

  const double j0 = std::sin(x) / x;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  if (L == 0) return j0;
  if (L == 1) return j1;

  if (x >= L) {
    double prev = j0, cur = j1;
    for (int l = 1; l < L; ++l) {
      const double next = (2.0 * l + 1.0) / x * cur - prev;
      prev = cur;
      cur = next;
    }
    return cur;
  }

  const int start = L + 20 + static_cast<int>(std::sqrt(40.0 * L));
  double upper = 0.0, cur = 1e-300, at_L = 0.0, at_0 = 0.0, at_1 = 0.0;
  for (int l = start; l >= 1; --l) {
    const double lower = (2.0 * l + 1.0) / x * cur - upper;
    upper = cur;
    cur = lower;  // now holds j_{l-1} (unnormalized)
    if (l - 1 == L) at_L = cur;
    if (l - 1 == 1) at_1 = cur;
    if (std::fabs(cur) > 1e250) {
      upper *= 1e-250;
      cur *= 1e-250;
      at_L *= 1e-250;
      at_1 *= 1e-250;
    }
  }
  at_0 = cur;
  if (std::fabs(j0) > std::fabs(j1)) return at_L * (j0 / at_0);
  return at_L * (j1 / at_1);
}

/// Derivative dj_L/dx.
inline double spherical_bessel_derivative(int L, double x) {
  if (L == 0) return -spherical_bessel(1, x);
  return spherical_bessel(L - 1, x) - (L + 1) / x * spherical_bessel(L, x);
}

/// Orbital angular momentum l of a Dirac state with quantum number kappa.
constexpr int kappa_to_l(int kappa) { return kappa > 0 ? kappa : -kappa - 1; }

/// Doubled total angular momentum 2j = 2|kappa| - 1.
constexpr int kappa_to_twice_j(int kappa) { return 2 * (kappa < 0 ? -kappa : kappa) - 1; }

/// Reduced matrix element <kappa_a || C_K || kappa_b> of the normalized
/// spherical harmonic tensor, including the orbital parity selection rule.
inline double reduced_c_tensor(int kappa_a, int K, int kappa_b) {
  const int la = kappa_to_l(kappa_a), lb = kappa_to_l(kappa_b);
  if ((la + lb + K) % 2 != 0) return 0.0;
  const int tja = kappa_to_twice_j(kappa_a), tjb = kappa_to_twice_j(kappa_b);
  const double phase = detail::parity_sign((tja + 1) / 2);
  return phase * std::sqrt(static_cast<double>((tja + 1) * (tjb + 1))) *
         wigner3j(tja, tjb, 2 * K, -1, 1, 0);
}

}  // namespace xrf
