#include <gtest/gtest.h>

#include <random>

#include "romfdtd/romfdtd.hpp"

using namespace romfdtd;

namespace {

FineRegionSpec region(int width, int height, int r, double coarse = 1e-3) {
  FineRegionSpec s;
  s.width = width;
  s.height = height;
  s.refinement = r;
  s.coarse_dx = coarse;
  s.coarse_dy = coarse;
  return s;
}

ReducedSystem random_reduced(std::mt19937& rng, double& fine_cfl) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FineRegionSpec spec = region(1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 2), 3);
  spec.materials = MaterialMap(spec.fine_nx(), spec.fine_ny());
  for (int j = 0; j < spec.fine_ny(); ++j)
    for (int i = 0; i < spec.fine_nx(); ++i) spec.materials.set(i, j, Material{1.0 + 9.0 * u(rng), 10.0 * u(rng), 1.0, false});
  fine_cfl = cfl_limit(spec.fine_dx(), spec.fine_dy(), spec.materials);
  const DescriptorSystem sys = assemble_fine_system(spec, 0.99 * fine_cfl);
  const int q = sys.n() / 2 + static_cast<int>(rng() % static_cast<unsigned>(sys.n() / 2));
  return reduce(sys, build_projection(sys, q));
}

// Two-state-per-block model with prescribed generalized singular values.
ReducedSystem diagonal_model(double s1, double s2) {
  ReducedSystem rs;
  rs.r11 = Eigen::MatrixXd::Identity(2, 2);
  rs.r22 = Eigen::MatrixXd::Identity(2, 2);
  rs.f11 = Eigen::MatrixXd::Zero(2, 2);
  rs.k = Eigen::MatrixXd::Zero(2, 2);
  rs.k(0, 0) = s1;
  rs.k(1, 1) = s2;
  rs.s = Eigen::VectorXd::Constant(1, 1e-3);
  rs.l = Eigen::MatrixXd::Zero(4, 1);
  rs.l(0, 0) = 1.0;
  rs.b = rs.l * rs.s.asDiagonal();
  rs.dt = 1e-12;
  return rs;
}

}  // namespace

TEST(GeneralizedSingularValues, ZeroCurlGivesZero) {
  const ReducedSystem rs = diagonal_model(0.0, 0.0);
  const Eigen::VectorXd s = generalized_singular_values(rs);
  ASSERT_EQ(s.size(), 2);
  EXPECT_EQ(s.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GeneralizedSingularValues, VacuumLimitMatchesClassical) {
  for (int r : {2, 4, 5}) {
    const FineRegionSpec spec = region(2, 2, r);
    const DescriptorSystem sys = assemble_fine_system(spec, 1e-13);
    const ReducedSystem red = reduce(sys, Projection::make_identity(sys));
    const double limit = 2.0 / generalized_singular_values(red)[0];
    EXPECT_NEAR(limit / cfl_limit(spec.fine_dx(), spec.fine_dy(), kC0), 1.0, 5e-3);
  }
}

TEST(GeneralizedSingularValues, ScalingMaterialsHalvesValues) {
  FineRegionSpec a = region(1, 1, 3);
  a.materials = MaterialMap(3, 3);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) a.materials.set(i, j, Material{u(rng), 0.0, u(rng), false});
  FineRegionSpec b = a;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      b.materials.set(i, j, Material{2.0 * a.materials.eps(i, j) / kEps0, 0.0, 2.0 * a.materials.mu(i, j) / kMu0, false});
  auto values = [](const FineRegionSpec& s) {
    const DescriptorSystem sys = assemble_fine_system(s, 1e-13);
    return generalized_singular_values(reduce(sys, Projection::make_identity(sys)));
  };
  const Eigen::VectorXd sa = values(a), sb = values(b);
  ASSERT_EQ(sa.size(), sb.size());
  for (Eigen::Index k = 0; k < sa.size(); ++k) EXPECT_NEAR(sb[k], 0.5 * sa[k], 1e-12 * sa[0]);
}

TEST(GeneralizedSingularValues, RejectsNonDefiniteBlocks) {
  ReducedSystem rs = diagonal_model(1.0, 1.0);
  rs.r11(1, 1) = -1.0;
  EXPECT_THROW(generalized_singular_values(rs), Error);
  rs.r11(1, 1) = 1e-20;
  EXPECT_THROW(generalized_singular_values(rs), Error);
  EXPECT_THROW(extend_cfl(rs, 1e-12), Error);
}

TEST(ExtendCfl, ClipsToCap) {
  const ReducedSystem rs = diagonal_model(1.0e12, 4.0e11);
  const ReducedSystem out = extend_cfl(rs, 3e-12, 1e-6);
  const Eigen::VectorXd s = generalized_singular_values(out);
  const double cap = (2.0 / 3e-12) * (1.0 - 1e-6);
  EXPECT_NEAR(s[0], cap, 1e-12 * cap);
  EXPECT_NEAR(s[0], 6.66666e11, 1e6);
  EXPECT_NEAR(s[1], 4.0e11, 1e-12 * 4.0e11);
}

TEST(ExtendCfl, NoOpBelowLimit) {
  std::mt19937 rng(10);
  double fine = 0.0;
  const ReducedSystem rs = random_reduced(rng, fine);
  const ReducedSystem out = extend_cfl(rs, 0.5 * reduced_cfl_limit(rs));
  EXPECT_EQ(out.k, rs.k);
}

TEST(ExtendCfl, PassiveAtExtendedStep) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    double fine = 0.0;
    const ReducedSystem rs = random_reduced(rng, fine);
    for (double factor : {1.5, 2.0, 3.0}) {
      const double dt = factor * fine;
      const ReducedSystem out = extend_cfl(rs, dt);
      const PassivityReport rep = check_passivity(out, dt);
      EXPECT_TRUE(rep.pass()) << "trial " << trial << " factor " << factor;
      EXPECT_LE(generalized_singular_values(out)[0], (2.0 / dt) * (1.0 - 1e-6) * (1.0 + 1e-12));
      EXPECT_GE(reduced_cfl_limit(out), dt);
    }
  }
}

TEST(ExtendCfl, Idempotent) {
  std::mt19937 rng(12);
  double fine = 0.0;
  const ReducedSystem rs = random_reduced(rng, fine);
  const ReducedSystem once = extend_cfl(rs, 2.0 * fine);
  const ReducedSystem twice = extend_cfl(once, 2.0 * fine);
  EXPECT_LE((twice.k - once.k).cwiseAbs().maxCoeff(), 1e-14 * once.k.cwiseAbs().maxCoeff());
}

TEST(ExtendCfl, NeverIncreasesSingularValues) {
  std::mt19937 rng(13);
  double fine = 0.0;
  const ReducedSystem rs = random_reduced(rng, fine);
  const Eigen::VectorXd before = generalized_singular_values(rs);
  const Eigen::VectorXd after = generalized_singular_values(extend_cfl(rs, 2.5 * fine));
  ASSERT_EQ(before.size(), after.size());
  for (Eigen::Index k = 0; k < before.size(); ++k) EXPECT_LE(after[k], before[k] * (1.0 + 1e-12));
}

TEST(ExtendCfl, OnlyCurlBlockMoves) {
  std::mt19937 rng(14);
  double fine = 0.0;
  const ReducedSystem rs = random_reduced(rng, fine);
  const ReducedSystem out = extend_cfl(rs, 3.0 * reduced_cfl_limit(rs));
  EXPECT_NE(out.k, rs.k);
  EXPECT_EQ(out.r11, rs.r11);
  EXPECT_EQ(out.r22, rs.r22);
  EXPECT_EQ(out.f11, rs.f11);
  EXPECT_EQ(out.b, rs.b);
  EXPECT_EQ(out.l, rs.l);
  EXPECT_EQ(out.s, rs.s);
}

TEST(ExtendCfl, RejectsBadArguments) {
  const ReducedSystem rs = diagonal_model(1.0, 1.0);
  EXPECT_THROW(extend_cfl(rs, 0.0), Error);
  EXPECT_THROW(extend_cfl(rs, 1e-12, 0.0), Error);
  EXPECT_THROW(extend_cfl(rs, 1e-12, 1.0), Error);
}
