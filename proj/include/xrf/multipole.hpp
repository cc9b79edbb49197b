#pragma once

// Relativistic multipole transition amplitudes between Dirac-Coulomb states,
// radiative widths, hyperfine geometry and field-strength conversions.
//
// Reduced matrix elements are normalized so that the long-wavelength limit of
// the electric J-pole amplitude is <a|| r^J C_J ||b> (atomic units). The
// transverse gauge is the relativistic velocity form, the Babushkin gauge the
// relativistic length form.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "xrf/angular.hpp"
#include "xrf/constants.hpp"
#include "xrf/dirac.hpp"
#include "xrf/quadrature.hpp"

namespace xrf {

enum class Gauge { transverse, babushkin };

inline const char* to_string(Gauge g) { return g == Gauge::transverse ? "transverse" : "babushkin"; }

struct MultipoleAmplitude {
  int J = 1;
  int lambda = 1;  // 1 electric, 0 magnetic
  Gauge gauge = Gauge::transverse;
  double photon_energy = 0.0;  // eV
  double reduced_me = 0.0;     // atomic units
  BoundStateLabel a;
  BoundStateLabel b;
};

namespace detail {

inline double double_factorial(int n) {
  double r = 1.0;
  for (int i = n; i > 1; i -= 2) r *= i;
  return r;
}

// j_J(x) / x with the x -> 0 limit.
inline double bessel_over_x(int J, double x) {
  if (x == 0.0) return J == 1 ? 1.0 / 3.0 : 0.0;
  return spherical_bessel(J, x) / x;
}

inline bool multipole_allowed(int kappa_a, int kappa_b, int J, int lambda) {
  if (J < 1) return false;
  if (!triangle(kappa_to_twice_j(kappa_a), kappa_to_twice_j(kappa_b), 2 * J)) return false;
  const int parity = kappa_to_l(kappa_a) + kappa_to_l(kappa_b) + J;
  return lambda == 1 ? parity % 2 == 0 : parity % 2 == 1;
}

// Amplitude with the lower state on the left, so the photon is absorbed.
inline double oriented_me(const RadialOrbital& a, const RadialOrbital& b, int J, int lambda, Gauge gauge,
                          double k) {
  const int ka = a.label().kappa, kb = b.label().kappa;
  const double r_max = std::max(a.extent(), b.extent());
  const double dk = static_cast<double>(ka - kb) / (J + 1);

  auto radial = [&](auto&& f) {
    const QuadratureResult res = integrate_radial(f, r_max, 1e-10);
    if (!res.converged) {
      const double achieved = res.value != 0.0 ? res.error / std::fabs(res.value) : res.error;
      throw QuadratureError("multipole radial integral did not converge", achieved);
    }
    return res.value;
  };

  double angular = 0.0, integral = 0.0;
  if (lambda == 0) {
    angular = static_cast<double>(ka + kb) / (J + 1) * reduced_c_tensor(-ka, J, kb);
    if (angular == 0.0) return 0.0;
    integral = radial([&](double r) {
      const auto pa = a.evaluate(r), pb = b.evaluate(r);
      return spherical_bessel(J, k * r) * (pa.G * pb.F + pa.F * pb.G);
    });
  } else {
    angular = reduced_c_tensor(ka, J, kb);
    if (angular == 0.0) return 0.0;
    if (gauge == Gauge::babushkin) {
      integral = radial([&](double r) {
        const auto pa = a.evaluate(r), pb = b.evaluate(r);
        const double x = k * r;
        return spherical_bessel(J, x) * (pa.G * pb.G + pa.F * pb.F) +
               spherical_bessel(J + 1, x) *
                   (dk * (pa.G * pb.F + pa.F * pb.G) + (pa.G * pb.F - pa.F * pb.G));
      });
    } else {
      integral = radial([&](double r) {
        const auto pa = a.evaluate(r), pb = b.evaluate(r);
        const double x = k * r;
        const double over_x = bessel_over_x(J, x);
        // j_J' + j_J / x = j_{J-1} - J j_J / x
        const double combo = spherical_bessel(J - 1, x) - J * over_x;
        return -dk * combo * (pa.G * pb.F + pa.F * pb.G) + J * over_x * (pa.G * pb.F - pa.F * pb.G);
      });
    }
  }
  return double_factorial(2 * J + 1) / std::pow(k, J) * angular * integral;
}

}  // namespace detail

/// Reduced matrix element <a || T(J, lambda) || b> at photon energy omega
/// (eV). Returns a zero amplitude when a selection rule forbids the
/// multipole. Throws QuadratureError if the radial integral stalls.
inline MultipoleAmplitude multipole_reduced_me(const RadialOrbital& a, const RadialOrbital& b, int J,
                                               int lambda, Gauge gauge, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("photon energy must be positive");
  if (lambda != 0 && lambda != 1) throw std::invalid_argument("lambda must be 0 (magnetic) or 1 (electric)");
  if (a.label().Z != b.label().Z) throw std::invalid_argument("states belong to different nuclei");

  MultipoleAmplitude out;
  out.J = J;
  out.lambda = lambda;
  out.gauge = gauge;
  out.photon_energy = omega;
  out.a = a.label();
  out.b = b.label();
  if (!detail::multipole_allowed(a.label().kappa, b.label().kappa, J, lambda)) return out;

  const double k = constants::eV_to_hartree(omega) / constants::c_au;
  if (a.binding_energy_eV() <= b.binding_energy_eV()) {
    out.reduced_me = detail::oriented_me(a, b, J, lambda, gauge, k);
  } else {
    // <a||T||b> = (-1)^(ja - jb) <b||T||a> for a real hermitian tensor
    const int phase = detail::parity_sign(std::abs(a.label().twice_j() - b.label().twice_j()) / 2);
    out.reduced_me = phase * detail::oriented_me(b, a, J, lambda, gauge, k);
  }
  return out;
}

/// Einstein coefficient in atomic units of rate for upper -> lower emission,
/// averaged over the upper-state projections.
inline double einstein_a_au(double reduced_me, int J, double omega_eV, int twice_j_upper) {
  const double k = constants::eV_to_hartree(omega_eV) / constants::c_au;
  const double df = detail::double_factorial(2 * J + 1);
  return 2.0 * (2 * J + 1) * (J + 1) / (J * df * df) * std::pow(k, 2 * J + 1) * reduced_me * reduced_me /
         (twice_j_upper + 1);
}

/// Partial radiative width (eV) of the upper state a decaying to b.
inline double radiative_rate(const RadialOrbital& a, const RadialOrbital& b, int J, int lambda, double omega,
                             Gauge gauge = Gauge::babushkin) {
  if (a.energy_eV() <= b.energy_eV()) throw std::invalid_argument("radiative_rate: initial state must lie above final state");
  const auto amp = multipole_reduced_me(a, b, J, lambda, gauge, omega);
  return constants::hartree_to_eV(einstein_a_au(amp.reduced_me, J, omega, a.label().twice_j()));
}

struct HyperfineState {
  int twice_I = 0;
  int twice_j = 1;
  int twice_F = 1;
  int twice_M = 1;
  BoundStateLabel electronic{};
};

inline bool valid(const HyperfineState& s) {
  return s.twice_I >= 0 && s.twice_j >= 0 && detail::triangle(s.twice_I, s.twice_j, s.twice_F) &&
         AngularMomentum::valid(s.twice_F, s.twice_M);
}

/// Amplitude factor taking the fine-structure reduced matrix element to the
/// |F_i M_i> -> |F_f M_f> component driven by photon polarization q. The
/// nuclear spin is a spectator. Normalized so that the sum of factor^2 over
/// all final (F_f, M_f) and q equals 1.
inline double hyperfine_geometry(const HyperfineState& initial, const HyperfineState& final_state, int J, int q) {
  if (!valid(initial) || !valid(final_state) || initial.twice_I != final_state.twice_I) return 0.0;
  if (final_state.twice_M != initial.twice_M + 2 * q) return 0.0;
  const int tI = initial.twice_I, tji = initial.twice_j, tjf = final_state.twice_j;
  const int tFi = initial.twice_F, tFf = final_state.twice_F;
  const double three_j = wigner3j(tFf, 2 * J, tFi, -final_state.twice_M, 2 * q, initial.twice_M);
  if (three_j == 0.0) return 0.0;
  const double six_j = wigner6j(tjf, tFf, tI, tFi, tji, 2 * J);
  const int phase = detail::parity_sign((tFf - final_state.twice_M) / 2) *
                    detail::parity_sign((tI + tjf + tFi + 2 * J) / 2);
  return std::sqrt((tji + 1.0) * (tFf + 1.0) * (tFi + 1.0)) * phase * three_j * six_j;
}

/// Peak field amplitude (atomic units) of a plane wave of intensity I (W/cm^2).
inline double field_amplitude_au(double intensity_W_cm2) {
  if (!(intensity_W_cm2 >= 0.0)) throw std::invalid_argument("intensity must be non-negative");
  const double si = std::sqrt(2.0 * intensity_W_cm2 * 1e4 /
                              (constants::vacuum_permittivity * constants::speed_of_light_m_s));
  return si / constants::atomic_field_V_m;
}

/// Rabi frequency g = mu * E (eV) for coupling mu (atomic units).
inline double rabi_frequency(double mu_au, double intensity_W_cm2) {
  return constants::hartree_to_eV(mu_au * field_amplitude_au(intensity_W_cm2));
}

/// Coupling (atomic units) that yields Rabi frequency g (eV) at intensity I.
inline double coupling_from_rabi(double g_eV, double intensity_W_cm2) {
  const double e = field_amplitude_au(intensity_W_cm2);
  if (e == 0.0) throw std::invalid_argument("coupling undefined at zero intensity");
  return constants::eV_to_hartree(g_eV) / e;
}

}  // namespace xrf
