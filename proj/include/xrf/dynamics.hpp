#pragma once

// Driven three-level system (1 ground, 2 metastable partner, 3 upper) in the
// frame rotating with both drives. Energies, rates and Rabi frequencies are
// in eV with hbar = 1, so times are in units of hbar/eV.
//
// Density matrices are vectorized column-major: rho(i, j) -> v[i + 3 j].

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "xrf/errors.hpp"

namespace xrf {

using cplx = std::complex<double>;
using DensityMatrix = Eigen::Matrix3cd;
using SuperMatrix = Eigen::Matrix<cplx, 9, 9>;
using SuperVector = Eigen::Matrix<cplx, 9, 1>;

struct LevelScheme {
  double omega21 = 0.0;  // eV
  double omega31 = 0.0;  // eV
  double gamma31 = 0.0;  // partial widths, eV
  double gamma32 = 0.0;
  double gamma21 = 0.0;
  double dephasing = 0.0;  // extra decay of the 1-3 coherence, eV
};

struct DriveSpec {
  double g31 = 0.0;  // eV
  double g21 = 0.0;
  double delta_x = 0.0;  // omega31 - omega_x
  double delta_o = 0.0;  // omega21 - omega_o
};

inline void validate(const LevelScheme& s) {
  for (double w : {s.gamma31, s.gamma32, s.gamma21, s.dephasing})
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("widths must be finite and non-negative");
  if (!(s.omega21 > 0.0) || !(s.omega31 > s.omega21) || !std::isfinite(s.omega31))
    throw std::invalid_argument("level energies must satisfy omega31 > omega21 > 0");
}

inline void validate(const DriveSpec& d) {
  for (double v : {d.g31, d.g21, d.delta_x, d.delta_o})
    if (!std::isfinite(v)) throw std::invalid_argument("drive parameters must be finite");
}

constexpr int vec_index(int i, int j) { return i + 3 * j; }

inline SuperVector vectorize(const DensityMatrix& rho) {
  return Eigen::Map<const SuperVector>(rho.data());
}

inline DensityMatrix unvectorize(const SuperVector& v) {
  return Eigen::Map<const DensityMatrix>(v.data());
}

/// |i><j| with 1-based level labels.
inline Eigen::Matrix3cd transition_operator(int i, int j) {
  Eigen::Matrix3cd m = Eigen::Matrix3cd::Zero();
  m(i - 1, j - 1) = 1.0;
  return m;
}

struct Liouvillian {
  SuperMatrix matrix = SuperMatrix::Zero();
  LevelScheme scheme;
  DriveSpec drives;

  SuperVector apply(const SuperVector& v) const { return matrix * v; }
  DensityMatrix apply(const DensityMatrix& rho) const { return unvectorize(matrix * vectorize(rho)); }

  Eigen::Matrix<cplx, 9, 1> eigenvalues() const {
    Eigen::ComplexEigenSolver<SuperMatrix> es(matrix, false);
    return es.eigenvalues();
  }
};

/// Rotating-frame Hamiltonian.
inline Eigen::Matrix3cd rotating_frame_hamiltonian(const DriveSpec& d) {
  Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
  h(2, 2) = d.delta_x;
  h(1, 1) = d.delta_o;
  h(2, 0) = h(0, 2) = d.g31;
  h(1, 0) = h(0, 1) = d.g21;
  return h;
}

inline Liouvillian build_liouvillian(const LevelScheme& scheme, const DriveSpec& drives) {
  validate(scheme);
  validate(drives);
  using M3 = Eigen::Matrix3cd;
  const M3 id = M3::Identity();
  // vec(A X B) = (B^T kron A) vec(X)
  auto kron = [](const M3& a, const M3& b) {
    SuperMatrix k;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) k.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
    return k;
  };

  const M3 h = rotating_frame_hamiltonian(drives);
  Liouvillian out{};
  out.scheme = scheme;
  out.drives = drives;
  out.matrix = cplx(0.0, -1.0) * (kron(id, h) - kron(h.transpose(), id));

  const struct {
    double rate;
    int to, from;
  } jumps[] = {{scheme.gamma31, 1, 3}, {scheme.gamma32, 2, 3}, {scheme.gamma21, 1, 2}};
  for (const auto& j : jumps) {
    if (j.rate == 0.0) continue;
    const M3 c = std::sqrt(j.rate) * transition_operator(j.to, j.from);
    const M3 cdc = c.adjoint() * c;
    out.matrix += kron(c.conjugate(), c) - 0.5 * kron(id, cdc) - 0.5 * kron(cdc.transpose(), id);
  }
  out.matrix(vec_index(0, 2), vec_index(0, 2)) -= scheme.dephasing;
  out.matrix(vec_index(2, 0), vec_index(2, 0)) -= scheme.dephasing;
  return out;
}

struct DensityMatrixCheck {
  double hermiticity = 0.0;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
  bool ok(double herm_tol = 1e-12, double trace_tol = 1e-10, double eig_tol = 1e-10) const {
    return hermiticity <= herm_tol && trace_error <= trace_tol && min_eigenvalue >= -eig_tol;
  }
};

inline DensityMatrixCheck check_density_matrix(const DensityMatrix& rho) {
  DensityMatrixCheck c;
  c.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  c.trace_error = std::abs(rho.trace() - cplx(1.0, 0.0));
  const Eigen::Matrix3cd herm = 0.5 * (rho + rho.adjoint());
  c.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd>(herm, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return c;
}

/// Unique stationary state of L, normalized to unit trace. Throws
/// NumericalError("steady_state", ...) when the null space is degenerate.
inline DensityMatrix steady_state(const Liouvillian& L) {
  using cld = std::complex<long double>;
  using SuperLD = Eigen::Matrix<cld, 9, 9>;
  using VecLD = Eigen::Matrix<cld, 9, 1>;
  const SuperLD base = L.matrix.cast<cld>();
  const long double scale = base.cwiseAbs().maxCoeff();
  if (scale == 0.0L) throw NumericalError("steady_state", "Liouvillian vanishes; every state is stationary");

  // one population equation is redundant; swap it for the trace condition
  VecLD best;
  long double best_pivot = -1.0L;
  for (int p : {0, 4, 8}) {
    SuperLD m = base / scale;
    VecLD rhs = VecLD::Zero();
    m.row(p).setZero();
    for (int i = 0; i < 3; ++i) m(p, vec_index(i, i)) = 1.0L;
    rhs(p) = 1.0L;
    Eigen::FullPivLU<SuperLD> lu(m);
    const auto diag = lu.matrixLU().diagonal().cwiseAbs();
    const long double pivot_ratio = diag.minCoeff() / diag.maxCoeff();
    if (pivot_ratio > best_pivot) {
      best_pivot = pivot_ratio;
      best = lu.solve(rhs);
      best += lu.solve(rhs - m * best);  // one refinement step
    }
  }
  if (!(best_pivot > 1e-17L))
    throw NumericalError("steady_state", "stationary state is not unique (degenerate null space)");

  DensityMatrix rho;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      const cld v = best(vec_index(i, j));
      rho(i, j) = cplx(static_cast<double>(v.real()), static_cast<double>(v.imag()));
    }
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return rho;
}

/// rho(t) = exp(L t) rho0 on each requested time (hbar/eV units).
inline std::vector<DensityMatrix> evolve(const Liouvillian& L, const DensityMatrix& rho0, const std::vector<double>& times) {
  std::vector<DensityMatrix> out;
  out.reserve(times.size());
  const SuperVector v0 = vectorize(rho0);
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("evolve: times must be finite and non-negative");
    if (t == 0.0) {
      out.push_back(rho0);
      continue;
    }
    const SuperMatrix prop = (L.matrix * t).exp();
    if (!prop.allFinite()) throw NumericalError("evolve", "matrix exponential overflowed");
    out.push_back(unvectorize(prop * v0));
  }
  return out;
}

/// Upper-state population left when only the x-ray drive acts:
/// Gamma21 / (Gamma32 + 2 Gamma21).
inline double trapped_population(const LevelScheme& s) {
  const double denom = s.gamma32 + 2.0 * s.gamma21;
  if (!(denom > 0.0)) throw std::invalid_argument("trapped_population: Gamma32 + 2 Gamma21 must be positive");
  return s.gamma21 / denom;
}

}  // namespace xrf
