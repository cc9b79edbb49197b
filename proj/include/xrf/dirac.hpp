#pragma once

// Bound states of the Dirac equation in a point-nucleus Coulomb potential.
//
// Radial functions follow the convention
//   psi = (1/r) ( G(r) Omega_{kappa m}, i F(r) Omega_{-kappa m} ),
// with G, F in atomic units, normalized as int (G^2 + F^2) dr = 1 and
// satisfying
//   (d/dr + kappa/r) G = (2c + (W - V)/c) F,
//   (d/dr - kappa/r) F = -((W - V)/c) G,
// where W is the energy without rest mass and V = -Z/r.

#include <cmath>
#include <stdexcept>
#include <string>

#include "xrf/angular.hpp"
#include "xrf/constants.hpp"

namespace xrf {

struct BoundStateLabel {
  int Z = 1;
  int n = 1;
  int kappa = -1;
  int twice_m = 1;

  int l() const { return kappa_to_l(kappa); }
  int twice_j() const { return kappa_to_twice_j(kappa); }

  /// Spectroscopic name such as "2p3/2".
  std::string name() const {
    static constexpr char letters[] = "spdfghiklmnoqrtuv";
    const int ll = l();
    std::string s = std::to_string(n);
    s += ll < 17 ? letters[ll] : '?';
    s += std::to_string(twice_j()) + "/2";
    return s;
  }

  friend bool operator==(const BoundStateLabel&, const BoundStateLabel&) = default;
};

/// Throws std::invalid_argument if the quantum numbers do not describe a
/// bound Dirac-Coulomb state.
inline void validate(const BoundStateLabel& s) {
  if (s.Z < 1 || s.Z > 137) throw std::invalid_argument("nuclear charge must lie in 1..137");
  if (s.n < 1) throw std::invalid_argument("principal quantum number must be >= 1");
  const int ak = std::abs(s.kappa);
  if (s.kappa == 0 || ak > s.n) throw std::invalid_argument("kappa must satisfy 0 < |kappa| <= n");
  if (ak == s.n && s.kappa > 0) throw std::invalid_argument("kappa = +n is not a bound state");
  if (!AngularMomentum::valid(s.twice_j(), s.twice_m))
    throw std::invalid_argument("projection m incompatible with j");
  const double za = s.Z * constants::fine_structure;
  if (za >= ak) throw std::invalid_argument("supercritical point charge: Z alpha >= |kappa|");
}

namespace detail {

struct DiracCoulombParameters {
  double gamma;       // sqrt(kappa^2 - (Z alpha)^2)
  int n_r;            // radial quantum number n - |kappa|
  double apparent_n;  // N = sqrt(n^2 - 2 n_r (|kappa| - gamma))
  double eps;         // E / (m c^2)
  double one_minus_eps;
  double lambda;      // decay constant in 1/bohr, Z / N
};

inline DiracCoulombParameters dirac_coulomb_parameters(int Z, int n, int kappa) {
  validate(BoundStateLabel{Z, n, kappa, kappa_to_twice_j(kappa)});
  const double za = Z * constants::fine_structure;
  const int ak = std::abs(kappa);
  DiracCoulombParameters p{};
  p.gamma = std::sqrt(static_cast<double>(kappa) * kappa - za * za);
  p.n_r = n - ak;
  // |kappa| - gamma = (Z alpha)^2 / (|kappa| + gamma), free of cancellation
  p.apparent_n = std::sqrt(static_cast<double>(n) * n - 2.0 * p.n_r * za * za / (ak + p.gamma));
  p.eps = (p.n_r + p.gamma) / p.apparent_n;
  const double s2 = (za / p.apparent_n) * (za / p.apparent_n);  // 1 - eps^2
  p.one_minus_eps = s2 / (1.0 + p.eps);
  p.lambda = Z / p.apparent_n;
  return p;
}

// Terminating confluent hypergeometric series M(-k, b, x), k >= 0.
inline double hypergeometric_terminating(int k, double b, double x) {
  double term = 1.0, sum = 1.0;
  for (int s = 0; s < k; ++s) {
    term *= (s - k) * x / ((b + s) * (s + 1.0));
    sum += term;
  }
  return sum;
}

}  // namespace detail

/// Energy relative to the rest mass (negative for bound states), in eV.
inline double binding_energy(int Z, int n, int kappa) {
  const auto p = detail::dirac_coulomb_parameters(Z, n, kappa);
  return -constants::electron_rest_energy_eV * p.one_minus_eps;
}

/// Total Dirac-Coulomb energy including the rest mass, in eV.
inline double dirac_energy(int Z, int n, int kappa) {
  const auto p = detail::dirac_coulomb_parameters(Z, n, kappa);
  return constants::electron_rest_energy_eV * p.eps;
}

/// Analytic Dirac-Coulomb radial orbital. Immutable after construction.
class RadialOrbital {
 public:
  explicit RadialOrbital(const BoundStateLabel& label) : label_(label) {
    validate(label);
    p_ = detail::dirac_coulomb_parameters(label.Z, label.n, label.kappa);
    const double N = p_.apparent_n;
    const double log_norm = 0.5 * std::log(2.0 * p_.lambda) - std::lgamma(2.0 * p_.gamma + 1.0) +
                            0.5 * (std::lgamma(2.0 * p_.gamma + p_.n_r + 1.0) -
                                   std::log(4.0 * N * (N - label.kappa)) - std::lgamma(p_.n_r + 1.0));
    norm_ = std::exp(log_norm);
    upper_weight_ = std::sqrt(1.0 + p_.eps);
    lower_weight_ = std::sqrt(p_.one_minus_eps);
    extent_ = find_extent();
  }

  const BoundStateLabel& label() const { return label_; }
  double energy_eV() const { return constants::electron_rest_energy_eV * p_.eps; }
  double binding_energy_eV() const { return -constants::electron_rest_energy_eV * p_.one_minus_eps; }
  double normalization() const { return norm_; }
  double gamma() const { return p_.gamma; }

  /// Radius (bohr) beyond which |G| + |F| stays below 1e-18 of its peak.
  double extent() const { return extent_; }

  /// Large component G(r), r in bohr.
  double large(double r) const {
    const auto [m0, m1, base] = pieces(r);
    return norm_ * upper_weight_ * base * ((p_.apparent_n - label_.kappa) * m0 - p_.n_r * m1);
  }

  /// Small component F(r), r in bohr.
  double small(double r) const {
    const auto [m0, m1, base] = pieces(r);
    return -norm_ * lower_weight_ * base * ((p_.apparent_n - label_.kappa) * m0 + p_.n_r * m1);
  }

  struct Components {
    double G, F;
  };

  /// Both components at once; shares the polynomial evaluation.
  Components evaluate(double r) const {
    const auto [m0, m1, base] = pieces(r);
    const double lead = (p_.apparent_n - label_.kappa) * m0;
    const double tail = p_.n_r * m1;
    return {norm_ * upper_weight_ * base * (lead - tail), -norm_ * lower_weight_ * base * (lead + tail)};
  }

 private:
  struct Pieces {
    double m0, m1, base;
  };

  Pieces pieces(double r) const {
    const double x = 2.0 * p_.lambda * r;
    const double b = 2.0 * p_.gamma + 1.0;
    const double m0 = detail::hypergeometric_terminating(p_.n_r, b, x);
    const double m1 = p_.n_r > 0 ? detail::hypergeometric_terminating(p_.n_r - 1, b, x) : 0.0;
    const double base = x > 0.0 ? std::exp(p_.gamma * std::log(x) - 0.5 * x) : 0.0;
    return {m0, m1, base};
  }

  double find_extent() const {
    double peak = 0.0;
    const double r_scale = 1.0 / p_.lambda;
    for (double r = 1e-3 * r_scale; r < 200.0 * r_scale; r *= 1.05)
      peak = std::max(peak, std::fabs(large(r)) + std::fabs(small(r)));
    double r = r_scale;
    // step past the outermost node region, then out until the tail is negligible
    while (r < 2.0 * (label_.n + 2) * r_scale ||
           std::fabs(large(r)) + std::fabs(small(r)) > 1e-18 * peak)
      r *= 1.02;
    return r;
  }

  BoundStateLabel label_;
  detail::DiracCoulombParameters p_{};
  double norm_ = 0.0;
  double upper_weight_ = 0.0;
  double lower_weight_ = 0.0;
  double extent_ = 0.0;
};

inline RadialOrbital radial_orbital(int Z, int n, int kappa) {
  return RadialOrbital(BoundStateLabel{Z, n, kappa, kappa_to_twice_j(kappa)});
}

/// Number of sign changes of G on (0, extent), i.e. radial nodes.
inline int count_large_component_nodes(const RadialOrbital& orb) {
  int nodes = 0;
  double prev = orb.large(1e-6 * orb.extent());
  for (int i = 1; i <= 20000; ++i) {
    const double r = orb.extent() * i / 20000.0;
    const double v = orb.large(r);
    if (v != 0.0 && prev != 0.0 && (v > 0) != (prev > 0)) ++nodes;
    if (v != 0.0) prev = v;
  }
  return nodes;
}

}  // namespace xrf
