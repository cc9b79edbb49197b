#pragma once

// Physical constants (CODATA 2018) and unit conversions. Every number that
// leaves or enters the library passes through this table so that outputs are
// reproducible bit for bit.

#include <numbers>

namespace xrf::constants {

inline constexpr double fine_structure = 1.0 / 137.035999084;
inline constexpr double hbar_c_eV_nm = 197.3269804;
inline constexpr double electron_rest_energy_eV = 510998.95;
inline constexpr double bohr_radius_angstrom = 0.529177210903;

// exact SI definitions
inline constexpr double speed_of_light_m_s = 299792458.0;
inline constexpr double elementary_charge_C = 1.602176634e-19;

/// Speed of light in atomic units.
inline constexpr double c_au = 1.0 / fine_structure;

/// Hartree energy m_e c^2 alpha^2 in eV.
inline constexpr double hartree_eV = electron_rest_energy_eV * fine_structure * fine_structure;

inline constexpr double hbar_eV_s = hbar_c_eV_nm * 1e-9 / speed_of_light_m_s;

/// Atomic unit of time hbar / E_h in seconds.
inline constexpr double atomic_time_s = hbar_eV_s / hartree_eV;

inline constexpr double bohr_radius_m = bohr_radius_angstrom * 1e-10;

/// Atomic unit of electric field E_h / (e a0) in V/m.
inline constexpr double atomic_field_V_m = hartree_eV / bohr_radius_m;

/// Vacuum permittivity e^2 / (4 pi alpha hbar c) in F/m.
inline constexpr double vacuum_permittivity =
    elementary_charge_C / (4.0 * std::numbers::pi * fine_structure * hbar_c_eV_nm * 1e-9);

inline constexpr double meV = 1e-3;  // eV

inline constexpr double eV_to_hartree(double e) { return e / hartree_eV; }
inline constexpr double hartree_to_eV(double e) { return e * hartree_eV; }

/// Rate in s^-1 of a width given in eV.
inline constexpr double width_eV_to_rate_s(double w) { return w / hbar_eV_s; }

}  // namespace xrf::constants
