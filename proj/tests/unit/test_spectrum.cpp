#include <gtest/gtest.h>

#include "xrf/spectrum.hpp"

using namespace xrf;

namespace {

LevelScheme bismuth() {
  LevelScheme s;
  s.omega31 = 2788.1;
  s.omega21 = 0.797;
  s.gamma31 = 72e-3;
  s.gamma32 = 13.2e-3;
  s.gamma21 = 7.7e-15;
  return s;
}

struct Solved {
  Liouvillian L;
  DensityMatrix rho;
  CorrelationFunction corr;
  SpectrumResult spec;
};

Solved solve(const LevelScheme& s, const DriveSpec& d, const DetectionGeometry& geom = {}) {
  Solved out{build_liouvillian(s, d), {}, {}, {}};
  out.rho = steady_state(out.L);
  out.corr = correlation(out.L, out.rho, geom);
  out.spec = power_spectrum(out.corr, refined_grid(out.corr, default_half_span(s, d)));
  return out;
}

double max_density(const SpectrumResult& s) { return *std::max_element(s.density.begin(), s.density.end()); }

}  // namespace

TEST(Correlation, EqualTimeValueAndPlateau) {
  const Solved r = solve(bismuth(), {0.3, 0.5, 0.02, 0.0});
  EXPECT_NEAR(r.corr(0.0).real() / r.rho(2, 2).real(), 1.0, 1e-10);
  EXPECT_NEAR(r.corr.equal_time / r.rho(2, 2).real(), 1.0, 1e-12);
  EXPECT_NEAR(r.corr.coherent_weight / std::norm(r.rho(2, 0)), 1.0, 1e-12);
  EXPECT_NEAR(r.corr(1e5).real(), r.corr.coherent_weight, 1e-12 * r.corr.equal_time);
  EXPECT_FALSE(r.corr.defective);
}

TEST(Correlation, ModesAreEigenvaluesOfTheGenerator) {
  const Solved r = solve(bismuth(), {0.3, 0.5, 0.0, 0.0});
  const auto ev = r.L.eigenvalues();
  ASSERT_EQ(r.corr.modes.size(), 8u);
  for (const auto& m : r.corr.modes) {
    double nearest = 1e300;
    for (int k = 0; k < 9; ++k) nearest = std::min(nearest, std::abs(ev(k) - m.rate));
    EXPECT_LT(nearest, 1e-12);
    EXPECT_LE(m.rate.real(), 0.0);
  }
}

TEST(Correlation, SampledPropagationMatchesModes) {
  const Solved r = solve(bismuth(), {0.083, 2.9, 0.0, 0.0});
  const double dt = 0.05;
  const auto samples = sample_correlation(r.L, r.rho, {}, dt, 400);
  for (std::size_t n = 0; n < samples.size(); n += 17)
    EXPECT_LT(std::abs(samples[n] - r.corr.incoherent(n * dt)), 1e-10 * r.corr.equal_time) << n;
}

TEST(Spectrum, MollowTripletOfATwoLevelAtom) {
  LevelScheme s = bismuth();
  s.gamma32 = 0.0;
  s.gamma21 = 1e-4;
  const double g = 1.0;
  const Solved r = solve(s, {g, 0.0, 0.0, 0.0});
  const auto peaks = find_peaks(r.spec);
  ASSERT_EQ(peaks.size(), 3u);
  // sideband maxima are pulled inward at order Gamma^2 / g
  const double pull = s.gamma31 * s.gamma31 / g;
  EXPECT_NEAR(peaks[0].center, -2.0 * g, pull);
  EXPECT_NEAR(peaks[1].center, 0.0, 1e-12);
  EXPECT_NEAR(peaks[2].center, 2.0 * g, pull);
  EXPECT_NEAR(peaks[1].fwhm / s.gamma31, 1.0, 1e-2);
  EXPECT_NEAR(peaks[0].fwhm / (1.5 * s.gamma31), 1.0, 1e-2);
  EXPECT_NEAR(peaks[1].height / peaks[0].height, 3.0, 0.05);
}

TEST(Spectrum, TwoColorTripletMatchesAnalyticWidths) {
  const LevelScheme s = bismuth();
  const DriveSpec d{0.083, 2.9, 0.0, 0.0};
  const Solved r = solve(s, d);
  const auto peaks = find_peaks(r.spec);
  ASSERT_EQ(peaks.size(), 3u);
  const auto a = analytic_linewidths(s, d.g31, d.g21);
  EXPECT_NEAR(outer_sideband_distance(peaks) / a.sideband_distance, 1.0, 1e-6);
  EXPECT_NEAR(peaks[1].fwhm / a.gamma_c, 1.0, 1e-3);
  EXPECT_NEAR(peaks[0].fwhm / a.gamma_sb, 1.0, 1e-3);
  EXPECT_NEAR(peaks[2].fwhm / a.gamma_sb, 1.0, 1e-3);
  EXPECT_NEAR(peaks[0].center, -peaks[2].center, 1e-9);
  for (const auto& p : peaks) EXPECT_TRUE(p.resolved);
}

TEST(Spectrum, AreaMatchesEqualTimeCorrelation) {
  const LevelScheme s = bismuth();
  for (const DriveSpec& d : {DriveSpec{0.083, 2.9, 0, 0}, DriveSpec{1.2, 29.0, 0.01, 0}, DriveSpec{0.2, 0.0, 0, 0}}) {
    const Solved r = solve(s, d);
    const double c0 = r.corr.equal_time - r.corr.coherent_weight;
    EXPECT_NEAR(total_integral(r.corr) / c0, 1.0, 1e-10);
    const double window = window_integral(r.corr, r.spec.delta.front(), r.spec.delta.back());
    const double trap = trapezoid(r.spec.delta, r.spec.density);
    EXPECT_NEAR(trap / window, 1.0, 1e-6);
    EXPECT_NEAR((trap + total_integral(r.corr) - window) / c0, 1.0, 1e-6);
  }
}

TEST(Spectrum, TimeDomainRouteAgrees) {
  const LevelScheme s = bismuth();
  const DriveSpec d{0.083, 2.9, 0.0, 0.0};
  const Solved r = solve(s, d);
  const auto td = time_domain_spectrum(r.L, r.rho, {}, r.spec.delta);
  EXPECT_LT(relative_l2_difference(td.density, r.spec.density), 1e-7);
  const auto plan = plan_time_grid(r.L, r.rho, {}, r.spec.delta.back());
  EXPECT_GT(plan.doublings, 10);
  EXPECT_GT(plan.dt, 0.0);
}

TEST(Spectrum, WeakDriveGivesOneLine) {
  LevelScheme s = bismuth();
  s.gamma32 = 0.0;
  s.gamma21 = 1e-4;
  const Solved r = solve(s, {1e-4, 0.0, 0.0, 0.0});
  const auto peaks = find_peaks(r.spec);
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_NEAR(peaks[0].center, 0.0, 1e-9);
  // elastic scattering dominates below saturation
  EXPECT_GT(r.corr.coherent_weight, 1e3 * (r.corr.equal_time - r.corr.coherent_weight));
}

TEST(Spectrum, NoDriveNoLight) {
  const Solved r = solve(bismuth(), {});
  EXPECT_EQ(max_density(r.spec), 0.0);
  EXPECT_EQ(*std::min_element(r.spec.density.begin(), r.spec.density.end()), 0.0);
  EXPECT_TRUE(find_peaks(r.spec).empty());
  EXPECT_EQ(r.corr.coherent_weight, 0.0);
}

TEST(Spectrum, NonNegative) {
  const LevelScheme s = bismuth();
  for (const DriveSpec& d : {DriveSpec{0.083, 2.9, 0, 0}, DriveSpec{1.2, 29.0, 0.05, 0.1}, DriveSpec{33.0, 190.0, 0, 0}}) {
    const Solved r = solve(s, d);
    const double top = max_density(r.spec);
    for (double v : r.spec.density) EXPECT_GE(v, -1e-10 * top);
  }
}

TEST(Spectrum, OpticalBandAndDetectionScale) {
  const LevelScheme s = bismuth();
  const DriveSpec d{0.083, 2.9, 0.0, 0.01};
  DetectionGeometry optical;
  optical.band = EmissionBand::optical;
  const Solved r = solve(s, d, optical);
  EXPECT_NEAR(r.corr.equal_time / r.rho(1, 1).real(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.spec.drive_offset, -0.01);
  EXPECT_DOUBLE_EQ(r.spec.transition_offset(0), r.spec.delta[0] - 0.01);

  DetectionGeometry far;
  far.apply_prefactor = true;
  far.distance = 2.0;
  far.transition_moment = 3.0;
  const double e = s.omega31 * s.omega31 / (8.0 * std::numbers::pi);
  EXPECT_NEAR(detection_scale(far, s) / (9.0 * e * e), 1.0, 1e-14);
  far.eta = 0.0;
  EXPECT_EQ(detection_scale(far, s), 0.0);
  far.eta = 4.0;
  EXPECT_THROW(validate(far), std::invalid_argument);
}

TEST(Peaks, SyntheticLorentzians) {
  CorrelationFunction c;
  c.modes = {{cplx(1.0, 0.0), cplx(-0.01, 0.0)},
             {cplx(0.5, 0.0), cplx(-0.02, 1.0)},
             {cplx(0.5, 0.0), cplx(-0.02, -1.0)}};
  const auto spec = power_spectrum(c, refined_grid(c, 3.0));
  const auto peaks = find_peaks(spec);
  ASSERT_EQ(peaks.size(), 3u);
  EXPECT_NEAR(peaks[0].center, -1.0, 1e-6);
  EXPECT_NEAR(peaks[2].center, 1.0, 1e-6);
  EXPECT_NEAR(peaks[0].center + peaks[2].center, 0.0, 1e-12);
  EXPECT_NEAR(peaks[1].fwhm / 0.02, 1.0, 1e-2);
  EXPECT_NEAR(peaks[0].fwhm / 0.04, 1.0, 1e-2);
  EXPECT_NEAR(peaks[1].height, 1.0 / (std::numbers::pi * 0.01), 1e-2 / (std::numbers::pi * 0.01));
  EXPECT_THROW(power_spectrum(c, {0.0, 0.0, 1.0}), std::invalid_argument);
}

TEST(Analytic, LimitsAndTabulatedWidth) {
  const LevelScheme s = bismuth();
  const auto x_only = analytic_linewidths(s, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(x_only.R, 1.0);
  EXPECT_NEAR(x_only.gamma_c, s.gamma31 + s.gamma32, 1e-15);
  EXPECT_NEAR(x_only.gamma_sb, 1.5 * s.gamma31 + s.gamma32, 1e-15);
  const auto o_only = analytic_linewidths(s, 0.0, 1.0);
  EXPECT_NEAR(o_only.gamma_c, s.gamma21, 1e-25);
  EXPECT_NEAR(o_only.gamma_sb, 1.5 * s.gamma21, 1e-25);
  EXPECT_THROW(analytic_linewidths(s, 0.0, 0.0), std::invalid_argument);

  LevelScheme tl;
  tl.omega31 = 2236.5;
  tl.omega21 = 0.499;
  tl.gamma31 = 6.6e-3;
  tl.gamma21 = 1.1e-15;
  const auto a = analytic_linewidths(tl, 0.18, 2.1);
  EXPECT_NEAR(a.gamma_sb / 7.1e-5, 1.0, 0.03);
  EXPECT_NEAR(sideband_distance(a, 0.0), 4.0 * std::hypot(0.18, 2.1), 1e-12);
  EXPECT_GT(sideband_distance(a, 0.01), sideband_distance(a, 0.0));
}
