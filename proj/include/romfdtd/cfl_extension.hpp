#pragma once

// Generalized singular values s_k of R11^{-1/2} K R22^{-1/2} for a reduced
// model, the passivity conditions of the reduced model, and the CFL
// extension that clips s_k to 2/dt_target.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "romfdtd/error.hpp"
#include "romfdtd/fine_system.hpp"
#include "romfdtd/mor.hpp"

namespace romfdtd {

namespace detail {

inline constexpr double kEigenFloor = 1e-14;

struct SymmetricRoots {
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd inv_sqrt;
};

inline SymmetricRoots symmetric_roots(const Eigen::MatrixXd& a, const char* name) {
  SymmetricRoots out;
  if (a.rows() == 0) {
    out.sqrt = out.inv_sqrt = Eigen::MatrixXd(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kNotSpd, std::string(name) + ": eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  if (!(lmax > 0.0) || lam.minCoeff() < kEigenFloor * lmax)
    throw Error(ErrorCode::kNotSpd, std::string(name) + " is not symmetric positive definite");
  const Eigen::MatrixXd& q = es.eigenvectors();
  out.sqrt = q * lam.cwiseSqrt().asDiagonal() * q.transpose();
  out.inv_sqrt = q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  return out;
}

struct ScaledSvd {
  SymmetricRoots r11, r22;
  Eigen::MatrixXd u, w;
  Eigen::VectorXd sigma;  // descending
};

inline ScaledSvd scaled_svd(const ReducedSystem& rs) {
  ScaledSvd out;
  out.r11 = symmetric_roots(rs.r11, "R11");
  out.r22 = symmetric_roots(rs.r22, "R22");
  if (rs.q1() == 0 || rs.q2() == 0) {
    out.sigma = Eigen::VectorXd(0);
    return out;
  }
  const Eigen::MatrixXd m = out.r11.inv_sqrt * rs.k * out.r22.inv_sqrt;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = svd.matrixU();
  out.w = svd.matrixV();
  out.sigma = svd.singularValues();
  return out;
}

}  // namespace detail

/// s_k in descending order (1/s).
inline Eigen::VectorXd generalized_singular_values(const ReducedSystem& rs) {
  return detail::scaled_svd(rs).sigma;
}

/// Largest dt for which the reduced R stays positive definite: 2 / max s_k.
inline double reduced_cfl_limit(const ReducedSystem& rs) {
  const Eigen::VectorXd s = generalized_singular_values(rs);
  if (s.size() == 0 || s[0] <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 / s[0];
}

/// Returns a copy whose s_k are capped at (2/dt_target)(1 - margin). Only K
/// changes; when nothing exceeds the cap the copy is exact.
inline ReducedSystem extend_cfl(const ReducedSystem& rs, double dt_target, double margin = 1e-6) {
  if (!(dt_target > 0.0)) throw Error(ErrorCode::kInvalidArgument, "target time step must be positive");
  if (!(margin > 0.0 && margin < 1.0)) throw Error(ErrorCode::kInvalidArgument, "margin must lie in (0, 1)");
  const detail::ScaledSvd svd = detail::scaled_svd(rs);
  const double cap = (2.0 / dt_target) * (1.0 - margin);
  ReducedSystem out = rs;
  int clipped = 0;
  while (clipped < svd.sigma.size() && svd.sigma[clipped] > cap) ++clipped;
  if (clipped == 0) return out;
  const Eigen::VectorXd excess = (svd.sigma.head(clipped).array() - cap).matrix();
  const Eigen::MatrixXd delta =
      svd.r11.sqrt * svd.u.leftCols(clipped) * excess.asDiagonal() * svd.w.leftCols(clipped).transpose() * svd.r22.sqrt;
  out.k = rs.k - delta;
  return out;
}

/// Conditions R = R^T > 0, F + F^T >= 0 and B = L S for a reduced model.
inline PassivityReport check_passivity(const ReducedSystem& rs, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time step must be positive");
  const int q1 = rs.q1(), q2 = rs.q2(), n = rs.n();
  if (rs.r11.cols() != q1 || rs.r22.cols() != q2 || rs.f11.rows() != q1 || rs.f11.cols() != q1 ||
      rs.k.rows() != q1 || rs.k.cols() != q2 || rs.b.rows() != n || rs.l.rows() != n ||
      rs.b.cols() != rs.n_ports() || rs.l.cols() != rs.n_ports())
    throw Error(ErrorCode::kDimensionMismatch, "reduced system blocks are inconsistent");
  PassivityReport rep;
  ReducedSystem at = rs;
  at.dt = dt;
  const Eigen::MatrixXd r = at.r_matrix();
  const double rsym_err = detail::max_abs(r - r.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r, Eigen::EigenvaluesOnly);
  rep.min_eig_r = n ? es.eigenvalues().minCoeff() : 0.0;
  rep.cond_a = n > 0 && rep.min_eig_r > 0.0 && rsym_err <= detail::kEigTolerance * detail::max_abs(r);
  try {
    rep.max_dt = reduced_cfl_limit(rs);
  } catch (const Error&) {
    rep.max_dt = 0.0;
    rep.cond_a = false;
  }
  const Eigen::MatrixXd f2 = 2.0 * rs.f11;
  rep.tol_f = detail::kEigTolerance * detail::max_abs(f2);
  if (q1 > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ef(0.5 * (f2 + f2.transpose()), Eigen::EigenvaluesOnly);
    rep.min_eig_f = std::min(0.0, ef.eigenvalues().minCoeff());
  }
  rep.cond_b = rep.min_eig_f >= -rep.tol_f;
  rep.max_b_minus_ls = detail::max_abs(rs.b - rs.l * rs.s.asDiagonal());
  rep.tol_c = 1e-13 * detail::max_abs(rs.b);
  rep.cond_c = rep.max_b_minus_ls <= rep.tol_c;
  return rep;
}

}  // namespace romfdtd
