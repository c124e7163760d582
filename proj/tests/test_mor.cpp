#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
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

void randomize(FineRegionSpec& s, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  s.materials = MaterialMap(s.fine_nx(), s.fine_ny());
  for (int j = 0; j < s.fine_ny(); ++j)
    for (int i = 0; i < s.fine_nx(); ++i) s.materials.set(i, j, Material{1.0 + 9.0 * u(rng), 10.0 * u(rng), 1.0, false});
}

double orthonormality_residual(const Eigen::MatrixXd& v) {
  if (v.cols() == 0) return 0.0;
  return (v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

// Relative L2 distance between port outputs of two steppers fed the same inputs.
template <class A, class B>
double output_distance(const A& full, int n_full, const B& red, int n_red, const std::vector<Eigen::VectorXd>& inputs) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_full), z = Eigen::VectorXd::Zero(n_red);
  double num = 0.0, den = 0.0;
  for (const auto& u : inputs) {
    x = full.step(x, u);
    z = red.step(z, u);
    const Eigen::VectorXd y1 = full.output(x), y2 = red.output(z);
    num += (y1 - y2).squaredNorm();
    den += y1.squaredNorm();
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Mor, IdentityProjectionIsBitExact) {
  std::mt19937 rng(1);
  FineRegionSpec spec = region(1, 1, 4);
  randomize(spec, rng);
  const DescriptorSystem sys = assemble_fine_system(spec, 1e-13);
  const ReducedSystem red = reduce(sys, Projection::make_identity(sys));
  EXPECT_EQ(red.r11, Eigen::MatrixXd(sys.r11.asDiagonal()));
  EXPECT_EQ(red.r22, Eigen::MatrixXd(sys.r22.asDiagonal()));
  EXPECT_EQ(red.f11, Eigen::MatrixXd(sys.f11.asDiagonal()));
  EXPECT_EQ(red.k, Eigen::MatrixXd(sys.k));
  EXPECT_EQ(red.b, Eigen::MatrixXd(sys.b));
  EXPECT_EQ(red.l, Eigen::MatrixXd(sys.l));
  EXPECT_EQ(red.s, sys.s);
}

TEST(Mor, FullOrderProjectionReproducesTrajectories) {
  std::mt19937 rng(2);
  FineRegionSpec spec = region(1, 1, 3);
  randomize(spec, rng);
  const double dt = 0.99 * cfl_limit(spec.fine_dx(), spec.fine_dy(), spec.materials);
  const DescriptorSystem sys = assemble_fine_system(spec, dt);
  const Projection v = build_projection(sys, sys.n());
  ASSERT_EQ(v.q1(), sys.n_e());
  ASSERT_EQ(v.q2(), sys.n_h());
  EXPECT_LE(orthonormality_residual(v.v1), 1e-12);
  EXPECT_LE(orthonormality_residual(v.v2), 1e-12);
  const ReducedSystem red = reduce(sys, v);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::VectorXd> inputs(100, Eigen::VectorXd(sys.n_ports()));
  for (auto& in : inputs)
    for (int k = 0; k < in.size(); ++k) in[k] = u(rng);
  EXPECT_LE(output_distance(DescriptorStepper(sys), sys.n(), ReducedStepper(red), red.n(), inputs), 1e-12);
}

TEST(Mor, BasesAreOrthonormal) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    FineRegionSpec spec = region(2, 1 + trial % 2, 3);
    randomize(spec, rng);
    const DescriptorSystem sys = assemble_fine_system(spec, 1e-13);
    const int q = 5 + static_cast<int>(rng() % static_cast<unsigned>(sys.n() - 5));
    for (KrylovExpansion e : {KrylovExpansion::kShifted, KrylovExpansion::kDiscreteMarkov}) {
      ProjectionOptions po;
      po.expansion = e;
      const Projection v = build_projection(sys, q, po);
      EXPECT_EQ(v.order(), q);
      EXPECT_LE(orthonormality_residual(v.v1), 1e-12);
      EXPECT_LE(orthonormality_residual(v.v2), 1e-12);
    }
  }
}

TEST(Mor, ReducedBlocksKeepStructure) {
  std::mt19937 rng(4);
  FineRegionSpec spec = region(2, 2, 2);
  randomize(spec, rng);
  const DescriptorSystem sys = assemble_fine_system(spec, 1e-13);
  const ReducedSystem red = reduce(sys, build_projection(sys, 20));
  const Eigen::MatrixXd f = red.f_matrix(), r = red.r_matrix();
  EXPECT_EQ(f.bottomRightCorner(red.q2(), red.q2()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((r - r.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((red.r11 - red.r11.transpose()).cwiseAbs().maxCoeff(), 0.0);
  const double scale = red.b.cwiseAbs().maxCoeff();
  EXPECT_LE((red.b - red.l * red.s.asDiagonal()).cwiseAbs().maxCoeff(), 1e-13 * scale);
}

TEST(Mor, PassivityIsPreserved) {
  // Randomized fine systems reduced to random orders stay passive at the
  // time step where the full system is.
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 2 + static_cast<int>(rng() % 3);
    const int lo = (3 + r - 1) / r, hi = 8 / r;
    const int w = lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
    const int h = lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
    FineRegionSpec spec = region(w, h, r);
    randomize(spec, rng);
    const double dt = 0.99 * cfl_limit(spec.fine_dx(), spec.fine_dy(), spec.materials);
    const DescriptorSystem sys = assemble_fine_system(spec, dt);
    ASSERT_TRUE(check_passivity(sys, dt).pass());
    const int q = 1 + static_cast<int>(rng() % static_cast<unsigned>(sys.n()));
    const ReducedSystem red = reduce(sys, build_projection(sys, q));
    const PassivityReport rep = check_passivity(red, dt);
    EXPECT_TRUE(rep.pass()) << "trial " << trial << " q " << q;
    EXPECT_LE(rep.max_b_minus_ls, 1e-13 * red.b.cwiseAbs().maxCoeff());
  }
}

TEST(Mor, ReducedOutputTracksFullModel) {
  // 4x4 region, band-limited drive on one port, order at 40% of full.
  const FineRegionSpec spec = region(2, 2, 2, 2e-3);
  const double dt = 0.99 * cfl_limit(spec.fine_dx(), spec.fine_dy(), kC0);
  const DescriptorSystem sys = assemble_fine_system(spec, dt);
  const double bw = 5e9;
  ProjectionOptions po;
  po.expansion_hz = 0.1 * bw;
  const int q = (2 * sys.n() + 4) / 5;
  const ReducedSystem red = reduce(sys, build_projection(sys, q, po));
  const GaussianPulse g{bw, GaussianPulse::default_delay(bw)};
  std::vector<Eigen::VectorXd> inputs(3000, Eigen::VectorXd::Zero(sys.n_ports()));
  for (std::size_t n = 0; n < inputs.size(); ++n) inputs[n][0] = g((static_cast<double>(n) + 0.5) * dt);
  EXPECT_LE(output_distance(DescriptorStepper(sys), sys.n(), ReducedStepper(red), red.n(), inputs), 1e-2);
}

TEST(Mor, RejectsBadOrder) {
  const DescriptorSystem sys = assemble_fine_system(region(1, 1, 2), 1e-13);
  EXPECT_THROW(build_projection(sys, 0), Error);
  EXPECT_THROW(build_projection(sys, sys.n() + 1), Error);
  Projection wrong;
  wrong.v1 = Eigen::MatrixXd::Identity(3, 3);
  wrong.v2 = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_THROW(reduce(sys, wrong), Error);
}
