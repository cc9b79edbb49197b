#pragma once

// Fluorescence spectra of the three-level system.
//
// Frequencies on a spectrum grid are delta = omega_f - omega_drive (eV), the
// detuning of the emitted photon from the laser driving the observed band.
// The incoherent part is a sum of complex Lorentzians built from the
// eigen-decomposition of the Liouvillian; the elastic part is kept aside as
// a (weight, position) pair.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "xrf/dynamics.hpp"
#include "xrf/errors.hpp"

namespace xrf {

enum class EmissionBand { xray, optical };

inline const char* to_string(EmissionBand b) { return b == EmissionBand::xray ? "xray" : "optical"; }

struct DetectionGeometry {
  double eta = std::numbers::pi / 2;  // angle between dipole and observation axis
  double distance = 1.0;              // arbitrary length units
  EmissionBand band = EmissionBand::xray;
  bool apply_prefactor = false;       // multiply by (omega^2 sin(eta) / (4 pi r))^2
  double transition_moment = 1.0;     // |mu| of the observed transition, a.u.
};

inline void validate(const DetectionGeometry& g) {
  if (!(g.eta >= 0.0 && g.eta <= std::numbers::pi)) throw std::invalid_argument("eta must lie in [0, pi]");
  if (!(g.distance > 0.0)) throw std::invalid_argument("observation distance must be positive");
  if (!std::isfinite(g.transition_moment)) throw std::invalid_argument("transition moment must be finite");
}

/// Lowering operator of the observed band, without the moment.
inline Eigen::Matrix3cd band_lowering_operator(EmissionBand band) {
  return band == EmissionBand::xray ? transition_operator(1, 3) : transition_operator(1, 2);
}

/// Overall factor |mu|^2 times the optional far-field prefactor squared.
inline double detection_scale(const DetectionGeometry& g, const LevelScheme& s) {
  double scale = g.transition_moment * g.transition_moment;
  if (g.apply_prefactor) {
    const double omega = g.band == EmissionBand::xray ? s.omega31 : s.omega21;
    const double e = omega * omega * std::sin(g.eta) / (4.0 * std::numbers::pi * g.distance);
    scale *= e * e;
  }
  return scale;
}

struct SpectralMode {
  cplx amplitude;  // c_k
  cplx rate;       // lambda_k, Re <= 0
};

/// C(tau) = sum_k c_k exp(lambda_k tau) for the fluctuating field plus the
/// constant coherent plateau.
struct CorrelationFunction {
  std::vector<SpectralMode> modes;
  double coherent_weight = 0.0;  // |<D->|^2, scaled
  double equal_time = 0.0;       // <D+ D-> at tau = 0, scaled
  double drive_offset = 0.0;     // omega_drive - omega_transition, eV
  bool defective = false;        // eigenvectors too ill-conditioned to trust
  double eigenvector_condition = 1.0;

  cplx incoherent(double tau) const {
    cplx s = 0.0;
    for (const auto& m : modes) s += m.amplitude * std::exp(m.rate * tau);
    return s;
  }
  cplx operator()(double tau) const { return incoherent(tau) + coherent_weight; }
};

namespace detail {

struct RegressionSeed {
  SuperVector initial;  // vec(rho D+) minus its stationary part
  Eigen::Matrix<cplx, 1, 9> readout;  // X -> Tr(D- X)
  double coherent_weight;
  double equal_time;
};

inline RegressionSeed regression_seed(const Liouvillian& L, const DensityMatrix& rho, const DetectionGeometry& geometry) {
  validate(geometry);
  const double scale = detection_scale(geometry, L.scheme);
  const Eigen::Matrix3cd lower = band_lowering_operator(geometry.band);
  const Eigen::Matrix3cd raise = lower.adjoint();
  const Eigen::Matrix3cd start = rho * raise;
  const cplx mean_lower = (lower * rho).trace();

  RegressionSeed seed;
  seed.initial = std::sqrt(scale) * (vectorize(start) - start.trace() * vectorize(rho));
  const Eigen::Matrix3cd lt = std::sqrt(scale) * lower.transpose();
  seed.readout = vectorize(lt).transpose();
  seed.coherent_weight = scale * std::norm(mean_lower);
  seed.equal_time = scale * (lower * start).trace().real();
  return seed;
}

inline double drive_offset(const Liouvillian& L, EmissionBand band) {
  return band == EmissionBand::xray ? -L.drives.delta_x : -L.drives.delta_o;
}

}  // namespace detail

/// Quantum-regression correlation of the observed band in eigen-mode form.
inline CorrelationFunction correlation(const Liouvillian& L, const DensityMatrix& rho, const DetectionGeometry& geometry) {
  const auto seed = detail::regression_seed(L, rho, geometry);
  CorrelationFunction out;
  out.coherent_weight = seed.coherent_weight;
  out.equal_time = seed.equal_time;
  out.drive_offset = detail::drive_offset(L, geometry.band);

  Eigen::ComplexEigenSolver<SuperMatrix> es(L.matrix, true);
  if (es.info() != Eigen::Success) throw NumericalError("correlation", "eigen-decomposition failed");
  const SuperMatrix V = es.eigenvectors();
  const Eigen::PartialPivLU<SuperMatrix> lu(V);
  const auto sv = Eigen::JacobiSVD<SuperMatrix>(V).singularValues();
  out.eigenvector_condition = sv(0) / sv(8);
  out.defective = !(out.eigenvector_condition < 1e10);

  const SuperVector right = lu.solve(seed.initial);
  const Eigen::Matrix<cplx, 1, 9> left = seed.readout * V;

  // the stationary mode carries only the subtracted plateau
  int stationary = 0;
  for (int k = 1; k < 9; ++k)
    if (std::abs(es.eigenvalues()(k)) < std::abs(es.eigenvalues()(stationary))) stationary = k;

  for (int k = 0; k < 9; ++k) {
    if (k == stationary) continue;
    cplx rate = es.eigenvalues()(k);
    if (rate.real() > 0.0) rate.real(0.0);  // round-off on marginal modes
    out.modes.push_back({left(k) * right(k), rate});
  }
  return out;
}

struct SpectrumResult {
  std::vector<double> delta;    // omega_f - omega_drive, eV
  std::vector<double> density;  // incoherent S, 1/eV
  double coherent_weight = 0.0;
  double coherent_position = 0.0;  // delta of the elastic line
  double drive_offset = 0.0;       // omega_drive - omega_transition, eV

  /// Frequency axis relative to the transition, omega_f - omega_transition.
  double transition_offset(std::size_t i) const { return delta[i] + drive_offset; }
};

/// Incoherent spectral density of one mode set at detuning delta.
inline double spectral_density(const CorrelationFunction& corr, double delta) {
  cplx s = 0.0;
  for (const auto& m : corr.modes) s += m.amplitude / (-m.rate - cplx(0.0, delta));
  return s.real() / std::numbers::pi;
}

inline SpectrumResult power_spectrum(const CorrelationFunction& corr, const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("power_spectrum: grid must be strictly increasing");
  SpectrumResult out;
  out.delta = grid;
  out.density.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out.density[i] = spectral_density(corr, grid[i]);
  out.coherent_weight = corr.coherent_weight;
  out.coherent_position = 0.0;
  out.drive_offset = corr.drive_offset;
  return out;
}

/// Half-width of the default window: 1.5 (2G + 5 Gamma31).
inline double default_half_span(const LevelScheme& s, const DriveSpec& d) {
  const double G = std::hypot(d.g31, d.g21);
  const double half = 1.5 * (2.0 * G + 5.0 * s.gamma31);
  return half > 0.0 ? half : 1.0;
}

/// Uniform grid of n points on [-half, half] around the drive frequency.
inline std::vector<double> uniform_grid(double half, int n) {
  if (n < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = -half + 2.0 * half * i / (n - 1);
  return g;
}

struct GridOptions {
  int base_points = 4001;
  int points_per_fwhm = 32;  // spacing at a line centre
  double grading = 0.006;    // spacing grows as grading * distance from the centre
};

/// Uniform base grid plus graded clusters around every line narrower than 16
/// base spacings. Near a centre the spacing is FWHM / points_per_fwhm, and it
/// grows geometrically until it meets the base spacing, which keeps the
/// trapezoid rule accurate on the Lorentzian flanks.
inline std::vector<double> refined_grid(const CorrelationFunction& corr, double half, const GridOptions& opt = {}) {
  std::vector<double> g = uniform_grid(half, opt.base_points);
  const double base = 2.0 * half / (opt.base_points - 1);
  for (const auto& m : corr.modes) {
    const double fwhm = -2.0 * m.rate.real();
    if (!(fwhm > 0.0) || fwhm >= 16.0 * base) continue;
    const double centre = -m.rate.imag();
    if (std::fabs(centre) > half) continue;
    const double fine = fwhm / opt.points_per_fwhm;
    g.push_back(centre);
    for (int side : {-1, 1}) {
      double s = 0.0;
      while (true) {
        const double h = std::max(fine, opt.grading * s);
        if (h >= base) break;
        s += h;
        const double x = centre + side * s;
        if (std::fabs(x) > half) break;
        g.push_back(x);
      }
    }
  }
  std::sort(g.begin(), g.end());
  // drop near-duplicates so the grid stays strictly increasing
  std::vector<double> out;
  out.reserve(g.size());
  for (double x : g)
    if (out.empty() || x - out.back() > 1e-9 * base) out.push_back(x);
  return out;
}

/// Exact integral of the incoherent density over [lo, hi].
inline double window_integral(const CorrelationFunction& corr, double lo, double hi) {
  cplx s = 0.0;
  for (const auto& m : corr.modes) {
    const cplx a = -m.rate;
    s += cplx(0.0, 1.0) * m.amplitude * (std::log(a - cplx(0.0, hi)) - std::log(a - cplx(0.0, lo)));
  }
  return s.real() / std::numbers::pi;
}

/// Integral of the incoherent density over the whole line, which equals the
/// incoherent part of C(0).
inline double total_integral(const CorrelationFunction& corr) {
  double s = 0.0;
  for (const auto& m : corr.modes) s += m.amplitude.real();
  return s;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

// ---------------------------------------------------------------------------
// Time-domain route

/// Samples C_inc(n dt), n = 0..count-1, by repeated application of exp(L dt).
inline std::vector<cplx> sample_correlation(const Liouvillian& L, const DensityMatrix& rho,
                                            const DetectionGeometry& geometry, double dt, std::size_t count) {
  const auto seed = detail::regression_seed(L, rho, geometry);
  const SuperMatrix step = (L.matrix * dt).exp();
  std::vector<cplx> out;
  out.reserve(count);
  SuperVector x = seed.initial;
  for (std::size_t n = 0; n < count; ++n) {
    out.push_back((seed.readout * x)(0));
    x = step * x;
  }
  return out;
}

struct TimeGridPlan {
  double dt = 0.0;
  int doublings = 0;  // N = 2^doublings samples
};

struct TimeDomainOptions {
  double decay_tolerance = 1e-13;  // stop once |exp(L T) y0| falls below this fraction
  int max_doublings = 62;
};

namespace detail {

struct DoublingTable {
  std::vector<SuperMatrix> powers;  // P^(2^k) with the stationary part projected out
  SuperVector initial;
  Eigen::Matrix<cplx, 1, 9> readout;
  SuperMatrix generator_step;  // L dt
  double dt;
};

inline DoublingTable build_doubling_table(const Liouvillian& L, const DensityMatrix& rho,
                                          const DetectionGeometry& geometry, double omega_max,
                                          const TimeDomainOptions& opt) {
  const auto seed = detail::regression_seed(L, rho, geometry);
  DoublingTable t;
  t.initial = seed.initial;
  t.readout = seed.readout;
  const double norm_l = L.matrix.cwiseAbs().rowwise().sum().maxCoeff();
  t.dt = 1.0 / (norm_l + omega_max);
  t.generator_step = L.matrix * t.dt;

  // projector removing the stationary component, so round-off in high powers
  // cannot leave a non-decaying remainder
  SuperMatrix proj = SuperMatrix::Identity();
  const SuperVector v_ss = vectorize(rho);
  Eigen::Matrix<cplx, 1, 9> trace_row = Eigen::Matrix<cplx, 1, 9>::Zero();
  for (int i = 0; i < 3; ++i) trace_row(vec_index(i, i)) = 1.0;
  proj -= v_ss * trace_row;

  const double y0 = t.initial.norm();
  SuperMatrix p = proj * t.generator_step.exp();
  t.powers.push_back(p);
  if (y0 == 0.0) return t;
  for (int k = 1; k <= opt.max_doublings; ++k) {
    if ((p * t.initial).norm() < opt.decay_tolerance * y0) return t;
    p = (proj * (p * p)).eval();
    t.powers.push_back(p);
  }
  throw NumericalError("time_domain", "correlation did not decay within the maximum time window");
}

// Bernoulli numbers B_2 .. B_20 divided by (2j)!
inline constexpr double bernoulli_over_factorial[] = {
    1.0 / 12.0,                       // B2 / 2!
    -1.0 / 720.0,                     // B4 / 4!
    1.0 / 30240.0,                    // B6 / 6!
    -1.0 / 1209600.0,                 // B8 / 8!
    1.0 / 47900160.0,                 // B10 / 10!
    -691.0 / 1307674368000.0,         // B12 / 12!
    1.0 / 74724249600.0,              // B14 / 14!
    -3617.0 / 10670622842880000.0,    // B16 / 16!
    43867.0 / 5109094217170944000.0,  // B18 / 18!
    -174611.0 / 802857662698291200000.0,  // B20 / 20!
};

}  // namespace detail

/// Chooses dt and the number of samples for the time-domain oracle.
inline TimeGridPlan plan_time_grid(const Liouvillian& L, const DensityMatrix& rho, const DetectionGeometry& geometry,
                                   double omega_max, const TimeDomainOptions& opt = {}) {
  const auto t = detail::build_doubling_table(L, rho, geometry, omega_max, opt);
  return {t.dt, static_cast<int>(t.powers.size()) - 1};
}

/// Spectrum from the sampled correlation: trapezoidal one-sided Fourier sum
/// over N = 2^K samples with Euler-Maclaurin end corrections. Independent of
/// the eigen-decomposition.
inline SpectrumResult time_domain_spectrum(const Liouvillian& L, const DensityMatrix& rho,
                                           const DetectionGeometry& geometry, const std::vector<double>& grid,
                                           const TimeDomainOptions& opt = {}) {
  double omega_max = 0.0;
  for (double d : grid) omega_max = std::max(omega_max, std::fabs(d));
  const auto table = detail::build_doubling_table(L, rho, geometry, omega_max, opt);
  const auto seed = detail::regression_seed(L, rho, geometry);
  const int K = static_cast<int>(table.powers.size()) - 1;
  const double dt = table.dt;
  const double samples = std::ldexp(1.0, K);

  // end-point state x_N = P^N y0 for the right-hand corrections
  const SuperVector x_end = table.powers[K] * table.initial;

  SpectrumResult out;
  out.delta = grid;
  out.density.resize(grid.size());
  out.coherent_weight = seed.coherent_weight;
  out.drive_offset = detail::drive_offset(L, geometry.band);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double delta = grid[i];
    SuperVector v = table.initial;
    for (int k = 0; k < K; ++k) {
      const cplx z = std::polar(1.0, delta * dt * std::ldexp(1.0, k));
      v += z * (table.powers[k] * v);
    }
    const cplx z_end = std::polar(1.0, std::fmod(delta * dt * samples, 2.0 * std::numbers::pi));
    const cplx g0 = (table.readout * table.initial)(0);
    const cplx gN = z_end * (table.readout * x_end)(0);
    cplx integral = dt * ((table.readout * v)(0) - 0.5 * g0 + 0.5 * gN);

    // derivatives g^(m) dt^m = readout (s dt)^m y, s = L + i delta
    const SuperMatrix s_dt = table.generator_step + cplx(0.0, delta * dt) * SuperMatrix::Identity();
    SuperVector d0 = s_dt * table.initial, dN = s_dt * x_end;
    for (double b : detail::bernoulli_over_factorial) {
      const cplx diff = z_end * (table.readout * dN)(0) - (table.readout * d0)(0);
      integral -= b * dt * diff;
      d0 = s_dt * (s_dt * d0).eval();
      dN = s_dt * (s_dt * dN).eval();
    }
    out.density[i] = integral.real() / std::numbers::pi;
  }
  return out;
}

/// L2 relative difference between two spectra on the same grid.
inline double relative_l2_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spectra on different grids");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---------------------------------------------------------------------------
// Observables

struct AnalyticLinewidths {
  double R = 0.0;                      // g31^2 / (g31^2 + g21^2)
  double gamma_c = 0.0;                // central peak FWHM
  double gamma_sb = 0.0;               // outer sideband FWHM
  double sideband_distance = 0.0;      // 4G at zero detuning
  double quadratic_coefficient = 0.0;  // (G/2)(4R - 3R^2), D = 4G + coeff (Delta/G)^2
  double generalized_rabi = 0.0;       // G
};

inline AnalyticLinewidths analytic_linewidths(const LevelScheme& s, double g31, double g21) {
  const double G2 = g31 * g31 + g21 * g21;
  if (!(G2 > 0.0)) throw std::invalid_argument("analytic_linewidths: both Rabi frequencies vanish");
  AnalyticLinewidths a;
  a.generalized_rabi = std::sqrt(G2);
  a.R = g31 * g31 / G2;
  const double R = a.R;
  a.gamma_c = (s.gamma31 + s.gamma32 + s.dephasing) * R + s.gamma21 * (1.0 - R);
  a.gamma_sb = std::fabs(1.5 * (s.gamma31 - s.dephasing / 3.0) * R + 0.5 * s.gamma32 * (R + R * R) +
                         1.5 * s.gamma21 * (1.0 - R));
  a.sideband_distance = 4.0 * a.generalized_rabi;
  a.quadratic_coefficient = 0.5 * a.generalized_rabi * (4.0 * R - 3.0 * R * R);
  return a;
}

/// Sideband distance predicted at x-ray detuning Delta to second order.
inline double sideband_distance(const AnalyticLinewidths& a, double delta) {
  const double x = delta / a.generalized_rabi;
  return a.sideband_distance + a.quadratic_coefficient * x * x;
}

struct PeakEstimate {
  double center = 0.0;  // eV, on the spectrum's delta axis
  double fwhm = 0.0;    // eV
  double height = 0.0;  // 1/eV
  bool resolved = true;  // FWHM covered by at least 8 grid points
};

struct PeakSearchOptions {
  double relative_floor = 1e-6;
  int min_points_per_fwhm = 8;
};

inline std::vector<PeakEstimate> find_peaks(const SpectrumResult& spec, const PeakSearchOptions& opt = {}) {
  const auto& x = spec.delta;
  const auto& y = spec.density;
  std::vector<PeakEstimate> peaks;
  if (x.size() < 3) return peaks;
  const double top = *std::max_element(y.begin(), y.end());
  if (!(top > 0.0)) return peaks;
  const double floor = opt.relative_floor * top;

  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > floor)) continue;
    PeakEstimate p;
    // vertex of the parabola through 1/S, exact for a Lorentzian
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double u0 = 1.0 / y[i - 1], u1 = 1.0 / y[i], u2 = 1.0 / y[i + 1];
    const double d01 = (u1 - u0) / (x1 - x0), d12 = (u2 - u1) / (x2 - x1);
    const double curv = (d12 - d01) / (x2 - x0);
    if (curv > 0.0) {
      p.center = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
      p.center = std::clamp(p.center, x0, x2);
      const double um = u0 + (p.center - x0) * (d01 + curv * (p.center - x1));
      p.height = um > 0.0 ? 1.0 / std::min(um, u1) : y[i];
    } else {
      p.center = x1;
      p.height = y[i];
    }
    const double half = 0.5 * p.height;

    auto crossing = [&](bool right, double& pos) {
      std::size_t j = i;
      while (true) {
        if (right ? j + 1 >= x.size() : j == 0) return false;
        const std::size_t k = right ? j + 1 : j - 1;
        if (y[k] < half) {
          // interpolate 1/S, linear in x^2 for a Lorentzian flank
          const double a = 1.0 / y[j], b = 1.0 / y[k], t = (1.0 / half - a) / (b - a);
          pos = x[j] + t * (x[k] - x[j]);
          return true;
        }
        if (y[k] > y[j]) return false;  // valley before half height
        j = k;
      }
    };
    double left = 0.0, right = 0.0;
    const bool has_left = crossing(false, left), has_right = crossing(true, right);
    if (has_left && has_right)
      p.fwhm = right - left;
    else if (has_left)
      p.fwhm = 2.0 * (p.center - left);
    else if (has_right)
      p.fwhm = 2.0 * (right - p.center);
    else
      p.fwhm = x.back() - x.front();

    const double step = 0.5 * (x2 - x0);
    p.resolved = has_left && has_right && p.fwhm >= opt.min_points_per_fwhm * step;
    peaks.push_back(p);
  }
  return peaks;
}

/// Distance between the outermost peaks; 0 with fewer than two peaks.
inline double outer_sideband_distance(const std::vector<PeakEstimate>& peaks) {
  if (peaks.size() < 2) return 0.0;
  return peaks.back().center - peaks.front().center;
}

}  // namespace xrf
