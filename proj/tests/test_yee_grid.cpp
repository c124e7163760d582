#include <gtest/gtest.h>

#include <cmath>
#include <iomanip>
#include <complex>
#include <random>

#include "reference_fdtd.hpp"
#include "romfdtd/romfdtd.hpp"

using namespace romfdtd;

namespace {

FieldState random_state(const YeeGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FieldState s = g.make_state();
  for (int j = 1; j < g.spec().ny; ++j)
    for (int i = 0; i < g.spec().nx; ++i)
      if (g.ex_role(i, j) == EdgeRole::kActive) s.ex(i, j) = u(rng);
  for (int j = 0; j < g.spec().ny; ++j)
    for (int i = 1; i < g.spec().nx; ++i)
      if (g.ey_role(i, j) == EdgeRole::kActive) s.ey(i, j) = u(rng);
  for (double& v : s.hz.data()) v = 2.7e-3 * u(rng);
  return s;
}

double spectral_radius_coarse(int n, double factor) {
  Scenario sc;
  sc.grid.nx = n;
  sc.grid.ny = n;
  sc.grid.dx = 2e-3;
  sc.grid.dy = 2e-3;
  SimulationOptions opt;
  opt.verify_passivity = false;
  opt.dt = factor * cfl_limit(2e-3, 2e-3, kC0);
  return amplification_spectral_radius(sc, opt);
}

}  // namespace

TEST(CflLimit, TwoMillimetreVacuum) {
  // 1 / (c sqrt(2) / 2 mm) with c = 299792458 m/s.
  EXPECT_NEAR(cfl_limit(2e-3, 2e-3, MaterialMap(4, 4)), 4.71731e-12, 1e-17);
}

TEST(CflLimit, FineMeshIsCoarseOverR) {
  const double coarse = cfl_limit(2e-3, 2e-3, kC0);
  const double fine = cfl_limit(0.4e-3, 0.4e-3, kC0);
  EXPECT_NEAR(fine, 9.43462e-13, 1e-18);
  EXPECT_NEAR(fine, coarse / 5.0, 1e-15 * coarse);
}

TEST(CflLimit, OneDimensionalLimit) {
  const double dy = 1e-3;
  EXPECT_NEAR(cfl_limit(1e6, dy, kC0), dy / kC0, 1e-12 * dy / kC0);
}

TEST(CflLimit, UsesFastestMaterial) {
  MaterialMap m(3, 3, Material{4.0, 0.0, 1.0, false});
  EXPECT_NEAR(cfl_limit(1e-3, 1e-3, m), 2.0 * cfl_limit(1e-3, 1e-3, kC0), 1e-25);
  m.set(1, 1, Material{1.0, 0.0, 1.0, false});
  EXPECT_NEAR(cfl_limit(1e-3, 1e-3, m), cfl_limit(1e-3, 1e-3, kC0), 1e-25);
}

TEST(CflLimit, RejectsNonPositiveCellSize) {
  EXPECT_THROW(cfl_limit(0.0, 1e-3, MaterialMap(1, 1)), Error);
  EXPECT_THROW(cfl_limit(1e-3, -1e-3, MaterialMap(1, 1)), Error);
}

TEST(StepCoarseH, ZeroIsFixedPoint) {
  YeeGrid g(GridSpec{6, 5, 1e-3, 1e-3}, MaterialMap(6, 5), 1e-12);
  const FieldState s0 = g.make_state();
  EXPECT_EQ(step_coarse_h(g, s0), s0);
  EXPECT_EQ(step_coarse_e(g, s0), s0);
}

TEST(StepCoarseH, SingleEdgeKick) {
  YeeGrid g(GridSpec{3, 3, 1e-3, 1e-3}, MaterialMap(3, 3), 1e-12);
  FieldState s = g.make_state();
  s.ex(1, 2) = 1.0;  // top edge of cell (1, 1)
  const FieldState out = step_coarse_h(g, s);
  EXPECT_NEAR(out.hz(1, 1), 7.9577e-4, 1e-8);
  EXPECT_NEAR(out.hz(1, 2), -7.9577e-4, 1e-8);
  EXPECT_EQ(out.hz(0, 1), 0.0);
}

TEST(StepCoarseH, UniformExHasNoCurl) {
  YeeGrid g(GridSpec{5, 4, 1e-3, 2e-3}, MaterialMap(5, 4), 1e-12);
  FieldState s = g.make_state();
  s.ex.fill(1.0);
  for (double& v : s.hz.data()) v = 0.25;
  const FieldState out = step_coarse_h(g, s);
  EXPECT_EQ(out.hz, s.hz);
}

TEST(StepCoarseE, UniformHzLeavesEUnchanged) {
  YeeGrid g(GridSpec{5, 5, 2e-3, 2e-3}, MaterialMap(5, 5), 1e-12);
  FieldState s = random_state(g, 3);
  s.hz.fill(0.7);
  const FieldState out = step_coarse_e(g, s);
  for (std::size_t k = 0; k < s.ex.size(); ++k) EXPECT_EQ(out.ex.data()[k], s.ex.data()[k]);
  for (std::size_t k = 0; k < s.ey.size(); ++k) EXPECT_EQ(out.ey.data()[k], s.ey.data()[k]);
}

TEST(StepCoarseE, LossyDecayFactor) {
  const double sigma = 0.5, dt = 1e-12;
  YeeGrid g(GridSpec{4, 4, 2e-3, 2e-3}, MaterialMap(4, 4, Material{1.0, sigma, 1.0, false}), dt);
  FieldState s = g.make_state();
  s.ex(2, 2) = 1.0;
  const FieldState out = step_coarse_e(g, s);
  const double expected = (kEps0 / dt - sigma / 2) / (kEps0 / dt + sigma / 2);
  EXPECT_NEAR(out.ex(2, 2), expected, 1e-15);
  EXPECT_LT(out.ex(2, 2), 1.0);
}

TEST(StepCoarseE, UnitHzCellKick) {
  // dt / (eps0 dy) = 1e-12 / (8.8541878128e-12 * 2e-3) = 56.4705 V/m.
  YeeGrid g(GridSpec{4, 4, 2e-3, 2e-3}, MaterialMap(4, 4), 1e-12);
  FieldState s = g.make_state();
  s.hz(1, 1) = 1.0;
  const FieldState out = step_coarse_e(g, s);
  EXPECT_NEAR(out.ex(1, 2), -56.4705, 1e-3);
  EXPECT_NEAR(out.ex(1, 1), 56.4705, 1e-3);
  EXPECT_NEAR(out.ey(1, 1), -56.4705, 1e-3);
  EXPECT_NEAR(out.ey(2, 1), 56.4705, 1e-3);
}

TEST(StepCoarse, MatchesPlainLoopWithMaterials) {
  const int nx = 10, ny = 8;
  const double dx = 1.5e-3, dy = 1e-3;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MaterialMap m(nx, ny);
  const double dt = 0.9 * cfl_limit(dx, dy, kC0);
  reference::UniformGrid ref(nx, ny, dx, dy, dt);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Material mat{1.0 + 5.0 * u(rng), 2.0 * u(rng), 1.0 + u(rng), false};
      if (i == 6 && j == 3) mat.pec = true;
      m.set(i, j, mat);
      ref.eps[ref.c(i, j)] = mat.eps_r * kEps0;
      ref.sig[ref.c(i, j)] = mat.sigma;
      ref.mu[ref.c(i, j)] = mat.mu_r * kMu0;
      ref.pec[ref.c(i, j)] = mat.pec;
    }
  YeeGrid g(GridSpec{nx, ny, dx, dy}, m, dt);
  FieldState s = random_state(g, 5);
  ref.ex = s.ex.data();
  ref.ey = s.ey.data();
  ref.hz = s.hz.data();
  for (int n = 0; n < 300; ++n) {
    g.step_h(s);
    g.step_e(s);
    ref.step_h();
    ref.step_e();
  }
  double emax = 0.0, err = 0.0;
  for (std::size_t k = 0; k < ref.ex.size(); ++k) {
    emax = std::max(emax, std::abs(ref.ex[k]));
    err = std::max(err, std::abs(ref.ex[k] - s.ex.data()[k]));
  }
  for (std::size_t k = 0; k < ref.ey.size(); ++k) {
    emax = std::max(emax, std::abs(ref.ey[k]));
    err = std::max(err, std::abs(ref.ey[k] - s.ey.data()[k]));
  }
  EXPECT_GT(emax, 0.0);
  EXPECT_LE(err, 1e-12 * emax);
  double hmax = 0.0, herr = 0.0;
  for (std::size_t k = 0; k < ref.hz.size(); ++k) {
    hmax = std::max(hmax, std::abs(ref.hz[k]));
    herr = std::max(herr, std::abs(ref.hz[k] - s.hz.data()[k]));
  }
  EXPECT_LE(herr, 1e-12 * hmax);
}

TEST(GaussianPulse, PeakAndSymmetry) {
  const double bw = 2e9, delay = GaussianPulse::default_delay(bw);
  EXPECT_DOUBLE_EQ(gaussian_pulse(delay, bw, delay), 1.0);
  for (double a : {1e-12, 7e-11, 3.3e-10})
    EXPECT_DOUBLE_EQ(gaussian_pulse(delay + a, bw, delay), gaussian_pulse(delay - a, bw, delay));
  EXPECT_LT(gaussian_pulse(0.0, bw, delay), 1e-4);
}

TEST(GaussianPulse, SpectrumIsTenPercentAtBandwidth) {
  // Trapezoidal Fourier integral of the sampled pulse.
  const double bw = 0.5e9, tau = GaussianPulse::tau_for(bw), delay = 12.0 * tau;
  const int n = 200000;
  const double h = 2.0 * delay / n;
  std::complex<double> at_bw = 0.0;
  double dc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double t = k * h, w = (k == 0 || k == n) ? 0.5 : 1.0;
    const double g = gaussian_pulse(t, bw, delay);
    dc += w * g;
    at_bw += w * g * std::polar(1.0, -2.0 * kPi * bw * t);
  }
  EXPECT_NEAR(std::abs(at_bw) / dc, 0.1, 1e-7);
}

TEST(YeeGrid, PecWallsStayZero) {
  YeeGrid g(GridSpec{9, 7, 1e-3, 1e-3}, MaterialMap(9, 7), 1.5e-12);
  FieldState s = random_state(g, 2);
  for (int n = 0; n < 50; ++n) {
    g.step_h(s);
    g.step_e(s);
    for (int i = 0; i < 9; ++i) {
      ASSERT_EQ(s.ex(i, 0), 0.0);
      ASSERT_EQ(s.ex(i, 7), 0.0);
    }
    for (int j = 0; j < 7; ++j) {
      ASSERT_EQ(s.ey(0, j), 0.0);
      ASSERT_EQ(s.ey(9, j), 0.0);
    }
  }
}

TEST(YeeGrid, PecCellsZeroTheirEdges) {
  MaterialMap m(6, 6);
  m.set(2, 3, Material{1.0, 0.0, 1.0, true});
  YeeGrid g(GridSpec{6, 6, 1e-3, 1e-3}, m, 1.5e-12);
  FieldState s = random_state(g, 9);
  for (int n = 0; n < 20; ++n) {
    g.step_h(s);
    g.step_e(s);
    EXPECT_EQ(s.ex(2, 3), 0.0);
    EXPECT_EQ(s.ex(2, 4), 0.0);
    EXPECT_EQ(s.ey(2, 3), 0.0);
    EXPECT_EQ(s.ey(3, 3), 0.0);
  }
}

TEST(YeeGrid, LosslessEnergyIsConserved) {
  YeeGrid g(GridSpec{12, 10, 1e-3, 1.3e-3}, MaterialMap(12, 10, Material{2.0, 0.0, 1.0, false}),
            0.99 * cfl_limit(1e-3, 1.3e-3, kC0 / std::sqrt(2.0)));
  FieldState s = random_state(g, 4);
  double w = g.energy(s);
  ASSERT_GT(w, 0.0);
  for (int n = 0; n < 500; ++n) {
    g.step_h(s);
    g.step_e(s);
    const double w1 = g.energy(s);
    ASSERT_LE(std::abs(w1 - w), 1e-9 * w);
    w = w1;
  }
}

TEST(YeeGrid, LossyEnergyStrictlyDecreases) {
  YeeGrid g(GridSpec{12, 12, 1e-3, 1e-3}, MaterialMap(12, 12, Material{1.0, 0.05, 1.0, false}),
            0.99 * cfl_limit(1e-3, 1e-3, kC0));
  FieldState s = random_state(g, 8);
  double w = g.energy(s);
  for (int n = 0; n < 300; ++n) {
    g.step_h(s);
    g.step_e(s);
    const double w1 = g.energy(s);
    ASSERT_LT(w1, w);
    w = w1;
  }
}

TEST(YeeGrid, AmplificationStableBelowLimit) {
  const double rho = spectral_radius_coarse(12, 0.999);
  EXPECT_LE(rho, 1.0 + 1e-10) << std::setprecision(17) << rho;
}

TEST(YeeGrid, AmplificationUnstableAboveLimit) {
  EXPECT_GT(spectral_radius_coarse(12, 1.01), 1.0 + 1e-6);
}

TEST(YeeGrid, PmlAbsorbsOutgoingPulse) {
  // A PML-terminated box against a box large enough that its walls are not
  // reached within the comparison window.
  const double d = 1e-3, bw = 30e9;
  const double dt = 0.99 * cfl_limit(d, d, kC0);
  auto build = [&](int n, bool pml) {
    Scenario sc;
    sc.grid = GridSpec{n, n, d, d};
    if (pml) {
      sc.grid.walls = {WallKind::kPml, WallKind::kPml, WallKind::kPml, WallKind::kPml};
      sc.grid.pml_depth = 10;
    }
    const int c = n / 2;
    sc.sources.push_back(SourceSpec{SourceKind::kHzPoint, c, c, 0, 1.0, bw, std::nullopt});
    sc.probes.push_back(ProbeSpec{"p", ProbeComponent::kHz, c + 12, c + 5, 0});
    sc.steps = 500;
    SimulationOptions opt;
    opt.dt = dt;
    return run(sc, opt);
  };
  const RunRecord small = build(60, true);
  const RunRecord big = build(400, false);
  double peak = 0.0, err = 0.0;
  for (std::size_t k = 0; k < big.probes[0].size(); ++k) {
    peak = std::max(peak, std::abs(big.probes[0][k]));
    err = std::max(err, std::abs(big.probes[0][k] - small.probes[0][k]));
  }
  EXPECT_LT(err, 1e-2 * peak);
}
