// xrf: resonance-fluorescence spectra of two-color driven highly charged ions.
//
//   xrf structure  [config] [--preset NAME] [--out DIR]
//   xrf spectrum   [config] [--preset NAME] [--out DIR] [--grid-points N]
//   xrf linewidths [config] [--preset NAME]
//   xrf scan       [config] [--preset NAME] [--out DIR] [--grid-points N]
//
// Exit codes: 0 success, 2 bad input, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "xrf/scenario.hpp"

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string out;
  int grid_points = 0;
  long long seed = 0;
};

void add_common(CLI::App* sub, Options& o, bool grid) {
  sub->add_option("config", o.config, "scenario file");
  sub->add_option("--preset", o.preset, "named ion preset")
      ->check(CLI::IsMember(xrf::preset_names()));
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "reserved; all computations are deterministic");
  if (grid) sub->add_option("--grid-points", o.grid_points, "base grid points")->check(CLI::Range(3, 10000000));
}

xrf::Scenario load(const Options& o) {
  if (o.config.empty() && o.preset.empty())
    throw xrf::ConfigError(0, "", "give a config file or --preset");
  xrf::Scenario sc = xrf::load_scenario(o.config.empty() ? std::nullopt : std::optional<std::string>(o.config),
                                        o.preset.empty() ? std::nullopt : std::optional<std::string>(o.preset));
  if (!o.out.empty()) sc.output_dir = o.out;
  if (o.grid_points > 0) sc.grid.base_points = o.grid_points;
  return sc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resonance fluorescence of two-color driven highly charged ions"};
  app.require_subcommand(1);
  Options o;
  auto* structure = app.add_subcommand("structure", "Dirac-Coulomb levels and multipole rates");
  auto* spectrum = app.add_subcommand("spectrum", "steady state and x-ray or optical fluorescence spectrum");
  auto* linewidths = app.add_subcommand("linewidths", "analytic sideband widths and distances");
  auto* scan = app.add_subcommand("scan", "detuning and coupling scans");
  add_common(structure, o, false);
  add_common(spectrum, o, true);
  add_common(linewidths, o, false);
  add_common(scan, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const xrf::Scenario sc = load(o);
    if (structure->parsed()) {
      xrf::run_structure(sc);
      std::printf("wrote levels.csv and transitions.csv to %s\n", sc.output_dir.c_str());
    } else if (spectrum->parsed()) {
      const auto run = xrf::run_scenario(sc);
      std::printf("rho33 = %s  peaks = %zu  method = %s\n", xrf::fmt(run.rho(2, 2).real()).c_str(), run.peaks.size(),
                  run.method.c_str());
      std::printf("wrote spectrum.csv and summary.txt to %s\n", sc.output_dir.c_str());
    } else if (linewidths->parsed()) {
      if (sc.drive.g31 == 0.0 && sc.drive.g21 == 0.0)
        throw xrf::ConfigError(0, "drive", "linewidths are undefined without a drive");
      std::fputs(xrf::linewidths_text(sc).c_str(), stdout);
    } else if (scan->parsed()) {
      xrf::run_scan(sc);
      std::printf("wrote scan tables to %s\n", sc.output_dir.c_str());
    }
  } catch (const xrf::ConfigError& e) {
    std::fprintf(stderr, "xrf: config error: %s\n", e.what());
    return 2;
  } catch (const xrf::NumericalError& e) {
    std::fprintf(stderr, "xrf: numerical failure in %s\n", e.what());
    return 3;
  } catch (const xrf::QuadratureError& e) {
    std::fprintf(stderr, "xrf: numerical failure in quadrature: %s (achieved %g)\n", e.what(), e.achieved_tolerance);
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "xrf: invalid input: %s\n", e.what());
    return 2;
  }
  return 0;
}
