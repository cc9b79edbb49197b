#pragma once

// Scenario files, the ion presets, and the batch drivers behind the
// command-line tool. Every table is written with 12 significant digits so
// that identical inputs give byte-identical files.
//
// Config grammar (one statement per line):
//   # comment             anywhere after a '#'
//   [section]             scheme | drive | detection | grid | scan | structure | output
//   key = value           value is a number, word, or comma-separated numbers
// Numbers accept the x(y) shorthand for x * 10^y. Energy keys carry a unit
// suffix (_eV or _meV), intensities _W_cm2, couplings _au.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "xrf/dynamics.hpp"
#include "xrf/errors.hpp"
#include "xrf/multipole.hpp"
#include "xrf/spectrum.hpp"

namespace xrf {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string key, const std::string& what)
      : std::runtime_error(format(line, key, what)), line_(line), key_(std::move(key)) {}
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(int line, const std::string& key, const std::string& what) {
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!key.empty()) s += "'" + key + "': ";
    return s + what;
  }
  int line_;
  std::string key_;
};

// ---------------------------------------------------------------------------
// Formatting

/// Fixed 12-significant-digit scientific notation.
inline std::string fmt(double v) {
  if (v == 0.0) v = 0.0;  // no negative zero in outputs
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.11e", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_plain_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses "2.9", "1e16", or the shorthand "7.7(-12)" for 7.7e-12.
inline std::optional<double> parse_number(const std::string& text) {
  const std::string s = detail::trim(text);
  double v = 0.0;
  const auto open = s.find('(');
  if (open == std::string::npos) {
    if (detail::parse_plain_double(s, v) && std::isfinite(v)) return v;
    return std::nullopt;
  }
  if (s.back() != ')') return std::nullopt;
  double mant = 0.0, expo = 0.0;
  if (!detail::parse_plain_double(detail::trim(s.substr(0, open)), mant)) return std::nullopt;
  if (!detail::parse_plain_double(detail::trim(s.substr(open + 1, s.size() - open - 2)), expo)) return std::nullopt;
  if (expo != std::floor(expo)) return std::nullopt;
  v = mant * std::pow(10.0, expo);
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

struct ConfigEntry {
  std::string value;
  int line = 0;
};

/// section -> key -> entry; keys before any section live in section "".
using ConfigTable = std::map<std::string, std::map<std::string, ConfigEntry>>;

inline ConfigTable parse_config_text(const std::string& text) {
  static const char* sections[] = {"", "scheme", "drive", "detection", "grid", "scan", "structure", "output"};
  ConfigTable table;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "", "unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (std::find(std::begin(sections), std::end(sections), section) == std::end(sections) || section.empty())
        throw ConfigError(line, section, "unknown section");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, s, "expected 'key = value'");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "", "missing key");
    if (value.empty()) throw ConfigError(line, key, "missing value");
    auto& sec = table[section];
    if (sec.count(key)) throw ConfigError(line, key, "duplicate key (first set on line " + std::to_string(sec[key].line) + ")");
    sec[key] = {value, line};
  }
  return table;
}

inline ConfigTable read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, path, "cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Presets

/// One row of the Li-like 2s <-> 2p3/2 parameter table. Energies in meV
/// except omega31 (eV); intensities in W/cm^2.
struct TableRow {
  const char* name;
  const char* ion;
  int Z;
  int twice_I;
  double omega31_eV;
  double omega21_meV;
  double gamma31_meV;
  double gamma_sb_meV;
  double gamma21_meV;
  double g31_meV;
  double g21_meV;
  double intensity_x;
  double intensity_o;
};

inline const std::vector<TableRow>& table_rows() {
  static const std::vector<TableRow> rows = {
      {"tl_row1", "203Tl78+", 81, 1, 2236.5, 499, 6.6, 7.1e-2, 1.1e-12, 1.8e2, 2.1e3, 1e12, 1e16},
      {"tl_row2", "203Tl78+", 81, 1, 2236.5, 499, 6.6, 7.2e-4, 1.1e-12, 1.8e2, 2.1e4, 1e12, 1e18},
      {"bi_fig1b", "209Bi80+", 83, 9, 2788.1, 797, 7.2e1, 9.7e-2, 7.7e-12, 8.3e1, 2.9e3, 5e11, 1e16},
      {"bi_row2", "209Bi80+", 83, 9, 2788.1, 797, 7.2e1, 1.9e-1, 7.7e-12, 1.2e3, 2.9e4, 1e14, 1e18},
      {"u_row1", "235U89+", 92, 7, 4459.4, 136, 2.4e1, 3.7e-2, 3.7e-14, 7.7e1, 2.8e3, 5e11, 1e16},
      {"u_row2", "235U89+", 92, 7, 4459.4, 136, 2.4e1, 1.3, 3.7e-14, 3.3e4, 1.9e5, 9e16, 5e19},
  };
  return rows;
}

/// Gamma_SB = A + B Gamma32 is linear in Gamma32; least squares in relative
/// residuals over all rows of one ion, clamped at zero. Result in meV.
inline double fitted_gamma32_meV(const std::string& ion) {
  double num = 0.0, den = 0.0;
  for (const auto& r : table_rows()) {
    if (ion != r.ion) continue;
    const double R = r.g31_meV * r.g31_meV / (r.g31_meV * r.g31_meV + r.g21_meV * r.g21_meV);
    const double a = 1.5 * r.gamma31_meV * R + 1.5 * r.gamma21_meV * (1.0 - R);
    const double b = 0.5 * (R + R * R);
    const double w = b / r.gamma_sb_meV;
    num += w * (r.gamma_sb_meV - a) / r.gamma_sb_meV;
    den += w * w;
  }
  if (den == 0.0) throw std::invalid_argument("no table rows for ion " + ion);
  return std::max(0.0, num / den);
}

struct Preset {
  std::string name;
  TableRow row;
  LevelScheme scheme;
  DriveSpec drive;
  double mu31_au;  // couplings implied by the tabulated (g, I) pairs
  double mu21_au;
};

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& r : table_rows()) names.push_back(r.name);
  names.push_back("bi_fig1a");
  return names;
}

inline std::optional<Preset> find_preset(const std::string& name) {
  const std::string key = name == "bi_row1" ? "bi_fig1b" : name == "bi_fig1a" ? "bi_fig1b" : name;
  for (const auto& r : table_rows()) {
    if (key != r.name) continue;
    Preset p;
    p.name = name;
    p.row = r;
    p.scheme.omega31 = r.omega31_eV;
    p.scheme.omega21 = r.omega21_meV * constants::meV;
    p.scheme.gamma31 = r.gamma31_meV * constants::meV;
    p.scheme.gamma32 = fitted_gamma32_meV(r.ion) * constants::meV;
    p.scheme.gamma21 = r.gamma21_meV * constants::meV;
    p.drive.g31 = r.g31_meV * constants::meV;
    p.drive.g21 = name == "bi_fig1a" ? 0.0 : r.g21_meV * constants::meV;
    p.mu31_au = coupling_from_rabi(r.g31_meV * constants::meV, r.intensity_x);
    p.mu21_au = coupling_from_rabi(r.g21_meV * constants::meV, r.intensity_o);
    return p;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scenario

struct GridSpec {
  int base_points = 4001;
  std::optional<double> half_span;  // eV
};

struct ScanSpec {
  double delta_min = -1.0;  // (omega_x - omega31) / Gamma31
  double delta_max = 1.0;
  int delta_steps = 11;
  std::vector<double> g21_values;  // eV
};

struct StructureSpec {
  int Z = 1;
  int n_max = 2;
  std::optional<int> twice_nuclear_spin;
};

struct Scenario {
  std::string name = "custom";
  std::optional<TableRow> table_row;
  LevelScheme scheme;
  DriveSpec drive;
  std::string x_drive_source = "explicit";  // or "intensity"
  std::string o_drive_source = "explicit";
  DetectionGeometry detection;
  GridSpec grid;
  ScanSpec scan;
  StructureSpec structure;
  std::string output_dir = ".";
};

namespace detail {

struct KeyReader {
  const ConfigTable& table;
  std::map<std::string, std::map<std::string, bool>> used;

  const ConfigEntry* find(const std::string& section, const std::string& key) {
    auto s = table.find(section);
    if (s == table.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used[section][key] = true;
    return &k->second;
  }

  double number(const ConfigEntry& e, const std::string& key) {
    const auto v = parse_number(e.value);
    if (!v) throw ConfigError(e.line, key, "not a number: '" + e.value + "'");
    return *v;
  }

  // energy in eV from key_eV or key_meV; error if both are given
  std::optional<double> energy(const std::string& section, const std::string& base) {
    const ConfigEntry* ev = find(section, base + "_eV");
    const ConfigEntry* mev = find(section, base + "_meV");
    if (ev && mev) throw ConfigError(mev->line, base + "_meV", "also set as " + base + "_eV");
    if (ev) return number(*ev, base + "_eV");
    if (mev) return number(*mev, base + "_meV") * constants::meV;
    return std::nullopt;
  }

  std::optional<double> plain(const std::string& section, const std::string& key) {
    const ConfigEntry* e = find(section, key);
    if (!e) return std::nullopt;
    return number(*e, key);
  }

  std::optional<int> integer(const std::string& section, const std::string& key) {
    const ConfigEntry* e = find(section, key);
    if (!e) return std::nullopt;
    const double v = number(*e, key);
    if (v != std::floor(v) || std::fabs(v) > 1e9) throw ConfigError(e->line, key, "expected an integer");
    return static_cast<int>(v);
  }

  std::optional<bool> boolean(const std::string& section, const std::string& key) {
    const ConfigEntry* e = find(section, key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
    if (e->value == "false" || e->value == "no" || e->value == "0") return false;
    throw ConfigError(e->line, key, "expected true or false");
  }

  std::optional<std::string> word(const std::string& section, const std::string& key) {
    const ConfigEntry* e = find(section, key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::vector<double> energy_list(const std::string& section, const std::string& base) {
    std::vector<double> out;
    for (const char* unit : {"_eV", "_meV"}) {
      const ConfigEntry* e = find(section, base + unit);
      if (!e) continue;
      if (!out.empty()) throw ConfigError(e->line, base + unit, "list given in two units");
      std::stringstream ss(e->value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto v = parse_number(item);
        if (!v) throw ConfigError(e->line, base + unit, "not a number: '" + trim(item) + "'");
        out.push_back(*v * (std::string(unit) == "_meV" ? constants::meV : 1.0));
      }
    }
    return out;
  }

  int line_of(const std::string& section, const std::string& key) const {
    auto s = table.find(section);
    if (s == table.end()) return 0;
    auto k = s->second.find(key);
    return k == s->second.end() ? 0 : k->second.line;
  }

  void reject_unknown() const {
    for (const auto& [section, keys] : table)
      for (const auto& [key, entry] : keys) {
        auto s = used.find(section);
        if (s == used.end() || !s->second.count(key))
          throw ConfigError(entry.line, key, "unknown key in section [" + section + "]");
      }
  }
};

}  // namespace detail

/// Resolves a parsed config (and an optional preset name from the command
/// line) into a complete scenario. Throws ConfigError on any inconsistency.
inline Scenario resolve_scenario(const ConfigTable& table, const std::optional<std::string>& preset_override = {}) {
  detail::KeyReader rd{table, {}};
  Scenario sc;

  std::optional<std::string> preset_name = preset_override;
  int preset_line = 0;
  for (const char* section : {"", "scheme"}) {
    if (const auto* e = rd.find(section, "preset")) {
      if (!preset_override) {
        if (preset_name) throw ConfigError(e->line, "preset", "preset given twice");
        preset_name = e->value;
        preset_line = e->line;
      }
    }
  }
  std::optional<Preset> preset;
  if (preset_name) {
    preset = find_preset(*preset_name);
    if (!preset) throw ConfigError(preset_line, "preset", "unknown preset '" + *preset_name + "'");
    sc.name = preset->name;
    sc.table_row = preset->row;
    sc.scheme = preset->scheme;
    sc.drive = preset->drive;
    sc.structure.Z = preset->row.Z;
    sc.structure.twice_nuclear_spin = preset->row.twice_I;
  }

  if (auto v = rd.word("", "name")) sc.name = *v;
  if (auto v = rd.energy("scheme", "omega31")) sc.scheme.omega31 = *v;
  if (auto v = rd.energy("scheme", "omega21")) sc.scheme.omega21 = *v;
  if (auto v = rd.energy("scheme", "gamma31")) sc.scheme.gamma31 = *v;
  if (auto v = rd.energy("scheme", "gamma32")) sc.scheme.gamma32 = *v;
  if (auto v = rd.energy("scheme", "gamma21")) sc.scheme.gamma21 = *v;
  if (auto v = rd.energy("scheme", "dephasing")) sc.scheme.dephasing = *v;

  // each drive: explicit Rabi frequency or intensity times coupling, never both
  auto resolve_drive = [&](const std::string& g_key, const std::string& i_key, const std::string& mu_key,
                           std::optional<double> preset_mu, double& g, std::string& source) {
    const auto explicit_g = rd.energy("drive", g_key);
    const auto intensity = rd.plain("drive", i_key + "_W_cm2");
    const auto mu = rd.plain("drive", mu_key + "_au");
    if (explicit_g && intensity) {
      const int line = std::max(rd.line_of("drive", g_key + "_meV"), rd.line_of("drive", g_key + "_eV"));
      throw ConfigError(std::max(line, rd.line_of("drive", i_key + "_W_cm2")), g_key,
                        "set both as a Rabi frequency and through " + i_key + "_W_cm2; give only one");
    }
    if (mu && !intensity)
      throw ConfigError(rd.line_of("drive", mu_key + "_au"), mu_key + "_au", "coupling given without " + i_key + "_W_cm2");
    if (explicit_g) {
      g = *explicit_g;
      source = "explicit";
    } else if (intensity) {
      if (*intensity < 0.0) throw ConfigError(rd.line_of("drive", i_key + "_W_cm2"), i_key + "_W_cm2", "negative intensity");
      const auto coupling = mu ? mu : preset_mu;
      if (!coupling)
        throw ConfigError(rd.line_of("drive", i_key + "_W_cm2"), i_key + "_W_cm2", "needs " + mu_key + "_au or a preset");
      g = rabi_frequency(*coupling, *intensity);
      source = "intensity";
    }
  };
  resolve_drive("g31", "I_x", "mu31", preset ? std::optional<double>(preset->mu31_au) : std::nullopt, sc.drive.g31,
                sc.x_drive_source);
  resolve_drive("g21", "I_o", "mu21", preset ? std::optional<double>(preset->mu21_au) : std::nullopt, sc.drive.g21,
                sc.o_drive_source);
  if (auto v = rd.energy("drive", "delta_x")) sc.drive.delta_x = *v;
  if (auto v = rd.energy("drive", "delta_o")) sc.drive.delta_o = *v;

  if (auto v = rd.word("detection", "band")) {
    if (*v == "xray")
      sc.detection.band = EmissionBand::xray;
    else if (*v == "optical")
      sc.detection.band = EmissionBand::optical;
    else
      throw ConfigError(rd.line_of("detection", "band"), "band", "expected xray or optical");
  }
  if (auto v = rd.plain("detection", "eta")) sc.detection.eta = *v;
  if (auto v = rd.plain("detection", "distance")) sc.detection.distance = *v;
  if (auto v = rd.boolean("detection", "prefactor")) sc.detection.apply_prefactor = *v;
  if (auto v = rd.plain("detection", "transition_moment_au")) sc.detection.transition_moment = *v;

  if (auto v = rd.integer("grid", "points")) {
    if (*v < 3) throw ConfigError(rd.line_of("grid", "points"), "points", "need at least 3 grid points");
    sc.grid.base_points = *v;
  }
  if (auto v = rd.energy("grid", "half_span")) {
    if (!(*v > 0.0)) throw ConfigError(0, "half_span", "must be positive");
    sc.grid.half_span = *v;
  }

  if (auto v = rd.plain("scan", "delta_min_over_gamma31")) sc.scan.delta_min = *v;
  if (auto v = rd.plain("scan", "delta_max_over_gamma31")) sc.scan.delta_max = *v;
  if (auto v = rd.integer("scan", "delta_steps")) {
    if (*v < 1) throw ConfigError(rd.line_of("scan", "delta_steps"), "delta_steps", "must be at least 1");
    sc.scan.delta_steps = *v;
  }
  if (sc.scan.delta_max < sc.scan.delta_min)
    throw ConfigError(rd.line_of("scan", "delta_max_over_gamma31"), "delta_max_over_gamma31", "below delta_min");
  sc.scan.g21_values = rd.energy_list("scan", "g21_values");

  if (auto v = rd.integer("structure", "Z")) {
    if (*v < 1 || *v > 137) throw ConfigError(rd.line_of("structure", "Z"), "Z", "must lie in 1..137");
    sc.structure.Z = *v;
  }
  if (auto v = rd.integer("structure", "n_max")) {
    if (*v < 1 || *v > 6) throw ConfigError(rd.line_of("structure", "n_max"), "n_max", "must lie in 1..6");
    sc.structure.n_max = *v;
  }
  if (auto v = rd.word("structure", "nuclear_spin")) {
    const auto slash = v->find('/');
    std::optional<double> spin;
    if (slash != std::string::npos) {
      const auto num = parse_number(v->substr(0, slash)), den = parse_number(v->substr(slash + 1));
      if (num && den && *den == 2.0) spin = *num / 2.0;
    } else {
      spin = parse_number(*v);
    }
    if (!spin || *spin < 0 || 2.0 * *spin != std::floor(2.0 * *spin))
      throw ConfigError(rd.line_of("structure", "nuclear_spin"), "nuclear_spin", "expected an integer or half-integer");
    sc.structure.twice_nuclear_spin = static_cast<int>(2.0 * *spin);
  }

  if (auto v = rd.word("output", "directory")) sc.output_dir = *v;

  rd.reject_unknown();
  try {
    validate(sc.detection);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "detection", e.what());
  }
  return sc;
}

/// Level scheme check for the subcommands that solve the dynamics.
inline void require_level_scheme(const Scenario& sc) {
  try {
    validate(sc.scheme);
    validate(sc.drive);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "scheme", e.what());
  }
}

inline Scenario load_scenario(const std::optional<std::string>& path, const std::optional<std::string>& preset) {
  const ConfigTable table = path ? read_config_file(*path) : ConfigTable{};
  return resolve_scenario(table, preset);
}

// ---------------------------------------------------------------------------
// Runs

struct SpectrumRun {
  DensityMatrix rho;
  CorrelationFunction corr;
  SpectrumResult spectrum;
  std::vector<PeakEstimate> peaks;
  std::optional<AnalyticLinewidths> analytic;
  std::string method = "eigenmodes";
};

inline SpectrumRun compute_spectrum(const LevelScheme& scheme, const DriveSpec& drive, const DetectionGeometry& detection,
                                    const GridSpec& grid) {
  SpectrumRun run;
  const Liouvillian L = build_liouvillian(scheme, drive);
  run.rho = steady_state(L);
  run.corr = correlation(L, run.rho, detection);
  const double half = grid.half_span ? *grid.half_span : default_half_span(scheme, drive);
  GridOptions opt;
  opt.base_points = grid.base_points;
  const std::vector<double> g = refined_grid(run.corr, half, opt);
  if (run.corr.defective) {
    run.spectrum = time_domain_spectrum(L, run.rho, detection, g);
    run.method = "time_domain";
  } else {
    run.spectrum = power_spectrum(run.corr, g);
  }
  run.peaks = find_peaks(run.spectrum);
  if (drive.g31 != 0.0 || drive.g21 != 0.0) run.analytic = analytic_linewidths(scheme, drive.g31, drive.g21);
  return run;
}

inline SpectrumRun compute_spectrum(const Scenario& sc) {
  return compute_spectrum(sc.scheme, sc.drive, sc.detection, sc.grid);
}

/// Detuning of the x-ray drive for a scan row, Delta = omega_x - omega31.
inline double scan_delta(const ScanSpec& s, int row) {
  if (s.delta_steps == 1) return s.delta_min;
  return s.delta_min + (s.delta_max - s.delta_min) * row / (s.delta_steps - 1);
}

inline int worker_count() {
  if (const char* env = std::getenv("XRF_THREADS")) {
    const auto v = parse_number(env);
    if (v && *v >= 1 && *v <= 256) return static_cast<int>(*v);
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs job(i) for i in [0, count) on up to `threads` workers. Results are
/// stored by index, so the output order never depends on scheduling.
template <class Result, class Job>
std::vector<Result> parallel_map(int count, int threads, Job job) {
  std::vector<Result> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

struct ScanRow {
  double delta_over_gamma31 = 0.0;
  SpectrumRun run;
};

inline std::vector<ScanRow> run_detuning_scan(const Scenario& sc, int threads = worker_count()) {
  return parallel_map<ScanRow>(sc.scan.delta_steps, threads, [&](int i) {
    ScanRow row;
    row.delta_over_gamma31 = scan_delta(sc.scan, i);
    DriveSpec d = sc.drive;
    d.delta_x = -row.delta_over_gamma31 * sc.scheme.gamma31;
    row.run = compute_spectrum(sc.scheme, d, sc.detection, sc.grid);
    return row;
  });
}

struct G21Row {
  double g21 = 0.0;
  AnalyticLinewidths analytic;
  double gamma_sb_extracted = 0.0;
  double distance_extracted = 0.0;
};

inline std::vector<G21Row> run_g21_scan(const Scenario& sc, int threads = worker_count()) {
  return parallel_map<G21Row>(static_cast<int>(sc.scan.g21_values.size()), threads, [&](int i) {
    G21Row row;
    row.g21 = sc.scan.g21_values[i];
    DriveSpec d = sc.drive;
    d.g21 = row.g21;
    const SpectrumRun run = compute_spectrum(sc.scheme, d, sc.detection, sc.grid);
    row.analytic = analytic_linewidths(sc.scheme, d.g31, d.g21);
    if (run.peaks.size() >= 2) {
      row.gamma_sb_extracted = 0.5 * (run.peaks.front().fwhm + run.peaks.back().fwhm);
      row.distance_extracted = outer_sideband_distance(run.peaks);
    }
    return row;
  });
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::ofstream open_output(const std::string& dir, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string path = (std::filesystem::path(dir) / file).string();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError(0, "output", "cannot write " + path);
  return f;
}

inline const char* transition_name(EmissionBand b) { return b == EmissionBand::xray ? "omega31" : "omega21"; }

}  // namespace detail

inline std::string spectrum_table(const SpectrumRun& run, EmissionBand band) {
  std::string s = std::string("# omega_f_minus_") + detail::transition_name(band) + "_eV,S_arb\n";
  for (std::size_t i = 0; i < run.spectrum.delta.size(); ++i)
    s += fmt(run.spectrum.transition_offset(i)) + "," + fmt(run.spectrum.density[i]) + "\n";
  return s;
}

inline std::string summary_text(const Scenario& sc, const SpectrumRun& run) {
  std::ostringstream o;
  auto kv = [&](const std::string& k, const std::string& v) { o << k << " = " << v << "\n"; };
  o << "# xrf spectrum summary (energies in eV)\n";
  kv("scenario", sc.name);
  kv("band", to_string(sc.detection.band));
  kv("spectrum_method", run.method);
  kv("omega31", fmt(sc.scheme.omega31));
  kv("omega21", fmt(sc.scheme.omega21));
  kv("gamma31", fmt(sc.scheme.gamma31));
  kv("gamma32", fmt(sc.scheme.gamma32) + (sc.table_row ? "  # assumed, fitted to the tabulated sideband widths" : ""));
  kv("gamma21", fmt(sc.scheme.gamma21));
  kv("dephasing", fmt(sc.scheme.dephasing));
  kv("g31", fmt(sc.drive.g31) + "  # " + sc.x_drive_source);
  kv("g21", fmt(sc.drive.g21) + "  # " + sc.o_drive_source);
  kv("delta_x", fmt(sc.drive.delta_x));
  kv("delta_o", fmt(sc.drive.delta_o));
  kv("rho11", fmt(run.rho(0, 0).real()));
  kv("rho22", fmt(run.rho(1, 1).real()));
  kv("rho33", fmt(run.rho(2, 2).real()));
  if (run.analytic) {
    kv("R", fmt(run.analytic->R));
    kv("Gamma_C", fmt(run.analytic->gamma_c));
    kv("Gamma_SB", fmt(run.analytic->gamma_sb));
    kv("four_G", fmt(run.analytic->sideband_distance));
    kv("D_quadratic_coefficient", fmt(run.analytic->quadratic_coefficient) + "  # per (Delta/G)^2");
    kv("D_curvature_per_eV2", fmt(run.analytic->quadratic_coefficient /
                                  (run.analytic->generalized_rabi * run.analytic->generalized_rabi)));
  } else {
    for (const char* k : {"R", "Gamma_C", "Gamma_SB", "four_G", "D_quadratic_coefficient", "D_curvature_per_eV2"}) kv(k, "undefined  # no drive");
  }
  kv("coherent_weight", fmt(run.spectrum.coherent_weight));
  kv(std::string("coherent_position_omega_f_minus_") + detail::transition_name(sc.detection.band),
     fmt(run.spectrum.coherent_position + run.spectrum.drive_offset));
  kv("incoherent_integral", fmt(total_integral(run.corr)));
  kv("grid_points", std::to_string(run.spectrum.delta.size()));
  kv("peak_count", std::to_string(run.peaks.size()));
  for (std::size_t i = 0; i < run.peaks.size(); ++i) {
    const auto& p = run.peaks[i];
    kv("peak_" + std::to_string(i + 1), fmt(p.center + run.spectrum.drive_offset) + " " + fmt(p.fwhm) + " " + fmt(p.height) +
                                             (p.resolved ? "" : " under_resolved"));
  }
  kv("sideband_distance", fmt(outer_sideband_distance(run.peaks)));
  return o.str();
}

inline void write_text(const std::string& dir, const std::string& file, const std::string& text) {
  auto f = detail::open_output(dir, file);
  f << text;
  if (!f) throw ConfigError(0, "output", "write failed for " + file);
}

/// Writes spectrum.csv and summary.txt into the scenario's output directory.
inline SpectrumRun run_scenario(const Scenario& sc) {
  require_level_scheme(sc);
  const SpectrumRun run = compute_spectrum(sc);
  write_text(sc.output_dir, "spectrum.csv", spectrum_table(run, sc.detection.band));
  write_text(sc.output_dir, "summary.txt", summary_text(sc, run));
  return run;
}

inline std::string linewidths_text(const Scenario& sc) {
  require_level_scheme(sc);
  const auto a = analytic_linewidths(sc.scheme, sc.drive.g31, sc.drive.g21);
  std::ostringstream o;
  o << "# analytic linewidths (eV)\n";
  o << "scenario = " << sc.name << "\n";
  o << "R = " << fmt(a.R) << "\n";
  o << "G = " << fmt(a.generalized_rabi) << "\n";
  o << "Gamma_C = " << fmt(a.gamma_c) << "\n";
  o << "Gamma_SB = " << fmt(a.gamma_sb) << "\n";
  o << "four_G = " << fmt(a.sideband_distance) << "\n";
  o << "D_quadratic_coefficient = " << fmt(a.quadratic_coefficient) << "  # per (Delta/G)^2\n";
  o << "D_curvature_per_eV2 = " << fmt(a.quadratic_coefficient / (a.generalized_rabi * a.generalized_rabi)) << "\n";
  o << "Gamma_SB_over_D = " << fmt(a.gamma_sb / a.sideband_distance) << "\n";
  if (sc.table_row) {
    const double tab = sc.table_row->gamma_sb_meV * constants::meV;
    o << "Gamma_SB_table = " << fmt(tab) << "\n";
    o << "Gamma_SB_relative_deviation = " << fmt(a.gamma_sb / tab - 1.0) << "\n";
  }
  return o.str();
}

inline void run_scan(const Scenario& sc, int threads = worker_count()) {
  require_level_scheme(sc);
  const double g31 = sc.scheme.gamma31;
  if (!(g31 > 0.0)) throw ConfigError(0, "gamma31", "scan axes are in units of Gamma31, which must be positive");
  const auto rows = run_detuning_scan(sc, threads);
  std::string map = "# Delta_over_Gamma31,omega_f_over_Gamma31,log10_S\n";
  std::string dist = "# Delta_over_Gamma31,D_eV,D_minus_D0_eV,D_predicted_eV\n";
  double d0 = 0.0;
  for (const auto& r : rows)
    if (r.delta_over_gamma31 == 0.0) d0 = outer_sideband_distance(r.run.peaks);
  for (const auto& r : rows) {
    const std::string delta = fmt(r.delta_over_gamma31);
    for (std::size_t i = 0; i < r.run.spectrum.delta.size(); ++i) {
      const double s = r.run.spectrum.density[i];
      map += delta + "," + fmt(r.run.spectrum.transition_offset(i) / g31) + "," +
             fmt(std::log10(std::max(s, std::numeric_limits<double>::min()))) + "\n";
    }
    const double d = outer_sideband_distance(r.run.peaks);
    const double pred = r.run.analytic ? sideband_distance(*r.run.analytic, r.delta_over_gamma31 * g31) : 0.0;
    dist += delta + "," + fmt(d) + "," + fmt(d - d0) + "," + fmt(pred) + "\n";
  }
  write_text(sc.output_dir, "scan_map.csv", map);
  write_text(sc.output_dir, "scan_distance.csv", dist);

  if (!sc.scan.g21_values.empty()) {
    std::string t = "# g21_eV,R,Gamma_SB_eV,D0_eV,Gamma_SB_over_D0,Gamma_SB_extracted_eV,D0_extracted_eV,ratio_extracted\n";
    for (const auto& r : run_g21_scan(sc, threads)) {
      const double ratio_x = r.distance_extracted > 0.0 ? r.gamma_sb_extracted / r.distance_extracted : 0.0;
      t += fmt(r.g21) + "," + fmt(r.analytic.R) + "," + fmt(r.analytic.gamma_sb) + "," + fmt(r.analytic.sideband_distance) +
           "," + fmt(r.analytic.gamma_sb / r.analytic.sideband_distance) + "," + fmt(r.gamma_sb_extracted) + "," +
           fmt(r.distance_extracted) + "," + fmt(ratio_x) + "\n";
    }
    write_text(sc.output_dir, "scan_g21.csv", t);
  }
}

// ---------------------------------------------------------------------------
// Structure tables

struct StructureTables {
  std::string levels;
  std::string transitions;
  std::string hyperfine;  // empty without a nuclear spin
};

inline StructureTables structure_tables(const StructureSpec& spec) {
  std::vector<RadialOrbital> states;
  for (int n = 1; n <= spec.n_max; ++n)
    for (int k = -n; k <= n - 1; ++k)
      if (k != 0) states.push_back(radial_orbital(spec.Z, n, k));

  StructureTables t;
  t.levels = "# n,kappa,label,energy_eV,binding_eV\n";
  for (const auto& s : states)
    t.levels += std::to_string(s.label().n) + "," + std::to_string(s.label().kappa) + "," + s.label().name() + "," +
                fmt(s.energy_eV()) + "," + fmt(s.binding_energy_eV()) + "\n";

  t.transitions = "# upper,lower,multipole,omega_eV,me_transverse_au,me_babushkin_au,rate_s\n";
  if (spec.twice_nuclear_spin)
    t.hyperfine = "# upper,lower,multipole,F_upper,M_upper,F_lower,M_lower,q,branching\n";
  const struct {
    const char* name;
    int J, lambda;
  } multipoles[] = {{"E1", 1, 1}, {"M1", 1, 0}, {"E2", 2, 1}};
  auto half = [](int twice) { return twice % 2 ? std::to_string(twice) + "/2" : std::to_string(twice / 2); };

  for (const auto& up : states)
    for (const auto& lo : states) {
      const double w = up.binding_energy_eV() - lo.binding_energy_eV();
      if (!(w > 0.0)) continue;
      for (const auto& m : multipoles) {
        if (!detail::multipole_allowed(up.label().kappa, lo.label().kappa, m.J, m.lambda)) continue;
        const double tr = multipole_reduced_me(up, lo, m.J, m.lambda, Gauge::transverse, w).reduced_me;
        const double bk = multipole_reduced_me(up, lo, m.J, m.lambda, Gauge::babushkin, w).reduced_me;
        const double rate = constants::width_eV_to_rate_s(
            constants::hartree_to_eV(einstein_a_au(bk, m.J, w, up.label().twice_j())));
        t.transitions += up.label().name() + "," + lo.label().name() + "," + m.name + "," + fmt(w) + "," + fmt(tr) +
                         "," + fmt(bk) + "," + fmt(rate) + "\n";
        if (!spec.twice_nuclear_spin) continue;
        // branching of the stretched upper hyperfine state
        const int tI = *spec.twice_nuclear_spin;
        const HyperfineState init{tI, up.label().twice_j(), tI + up.label().twice_j(), tI + up.label().twice_j(), up.label()};
        for (int tF = std::abs(tI - lo.label().twice_j()); tF <= tI + lo.label().twice_j(); tF += 2)
          for (int q = -m.J; q <= m.J; ++q) {
            const HyperfineState fin{tI, lo.label().twice_j(), tF, init.twice_M + 2 * q, lo.label()};
            if (!valid(fin)) continue;
            const double f = hyperfine_geometry(init, fin, m.J, q);
            if (f == 0.0) continue;
            t.hyperfine += up.label().name() + "," + lo.label().name() + "," + m.name + "," + half(init.twice_F) + "," +
                           half(init.twice_M) + "," + half(tF) + "," + half(fin.twice_M) + "," + std::to_string(q) + "," +
                           fmt(f * f) + "\n";
          }
      }
    }
  return t;
}

inline void run_structure(const Scenario& sc) {
  StructureTables t;
  try {
    t = structure_tables(sc.structure);
  } catch (const QuadratureError& e) {
    throw NumericalError("structure", std::string(e.what()) + " (achieved " + fmt(e.achieved_tolerance) + ")");
  }
  write_text(sc.output_dir, "levels.csv", t.levels);
  write_text(sc.output_dir, "transitions.csv", t.transitions);
  if (!t.hyperfine.empty()) write_text(sc.output_dir, "hyperfine.csv", t.hyperfine);
}

}  // namespace xrf
