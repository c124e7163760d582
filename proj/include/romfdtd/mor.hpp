#pragma once

// Structure-preserving projection of a fine-region descriptor system.
// A block Krylov basis is split row-wise into its E and H parts, which are
// orthonormalized separately (V = blkdiag(V1, V2)); congruence with V keeps
// the 2x2 block form of R and F.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <optional>
#include <vector>

#include "romfdtd/error.hpp"
#include "romfdtd/fine_system.hpp"

namespace romfdtd {

struct Projection {
  Eigen::MatrixXd v1;  // nE x q1
  Eigen::MatrixXd v2;  // nH x q2
  bool identity = false;
  bool breakdown = false;  // Krylov space exhausted before reaching the requested order

  int q1() const { return static_cast<int>(v1.cols()); }
  int q2() const { return static_cast<int>(v2.cols()); }
  int order() const { return q1() + q2(); }

  static Projection make_identity(const DescriptorSystem& sys) {
    Projection p;
    p.v1 = Eigen::MatrixXd::Identity(sys.n_e(), sys.n_e());
    p.v2 = Eigen::MatrixXd::Identity(sys.n_h(), sys.n_h());
    p.identity = true;
    return p;
  }
};

struct ReducedSystem {
  Eigen::MatrixXd r11;  // q1 x q1
  Eigen::MatrixXd r22;  // q2 x q2
  Eigen::MatrixXd f11;  // q1 x q1
  Eigen::MatrixXd k;    // q1 x q2
  Eigen::MatrixXd b;    // q x nP
  Eigen::MatrixXd l;    // q x nP
  Eigen::VectorXd s;    // nP
  double dt = 0.0;
  Projection basis;

  int q1() const { return static_cast<int>(r11.rows()); }
  int q2() const { return static_cast<int>(r22.rows()); }
  int n() const { return q1() + q2(); }
  int n_ports() const { return static_cast<int>(s.size()); }

  /// sign = +1: R + F, -1: R - F, 0: R.
  Eigen::MatrixXd combined(int sign) const {
    const int a = q1(), c = q2();
    Eigen::MatrixXd m(a + c, a + c);
    m.topLeftCorner(a, a) = r11 / dt + sign * f11;
    m.topRightCorner(a, c) = (-0.5 - 0.5 * sign) * k;
    m.bottomLeftCorner(c, a) = (-0.5 + 0.5 * sign) * k.transpose();
    m.bottomRightCorner(c, c) = r22 / dt;
    return m;
  }
  Eigen::MatrixXd r_matrix() const { return combined(0); }
  Eigen::MatrixXd r_plus_f() const { return combined(1); }
  Eigen::MatrixXd r_minus_f() const { return combined(-1); }
  Eigen::MatrixXd f_matrix() const {
    const int a = q1(), c = q2();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a + c, a + c);
    m.topLeftCorner(a, a) = f11;
    m.topRightCorner(a, c) = -0.5 * k;
    m.bottomLeftCorner(c, a) = 0.5 * k.transpose();
    return m;
  }
};

enum class KrylovExpansion {
  kShifted,         // continuous-time pencil (s0 C + G)^{-1} C, real shift s0
  kDiscreteMarkov,  // single-step operator (R + F)^{-1} (R - F)
};

struct ProjectionOptions {
  KrylovExpansion expansion = KrylovExpansion::kShifted;
  std::optional<double> expansion_hz;  // shift frequency; default from the mesh
  double deflation_tol = 1e-10;
};

namespace detail {

/// Appends the component of `v` orthogonal to basis(:, 0:count) as a new unit
/// column (two Gram-Schmidt passes). Returns false when deflated.
inline bool orth_append(Eigen::MatrixXd& basis, int& count, Eigen::VectorXd v, double tol) {
  const double norm0 = v.norm();
  if (!(norm0 > 0.0) || !std::isfinite(norm0)) return false;
  if (count >= basis.cols()) return false;
  for (int pass = 0; pass < 2; ++pass) {
    if (count > 0) {
      const auto q = basis.leftCols(count);
      v.noalias() -= q * (q.transpose() * v);
    }
  }
  const double nrm = v.norm();
  if (nrm <= tol * norm0) return false;
  basis.col(count++) = v / nrm;
  return true;
}

/// Block version: projects the whole block against the existing basis with
/// two matrix passes, then appends column by column.
inline int orth_append_block(Eigen::MatrixXd& basis, int& count, Eigen::MatrixXd block, double tol) {
  const Eigen::VectorXd norms0 = block.colwise().norm().transpose();
  for (int pass = 0; pass < 2; ++pass) {
    if (count > 0) {
      const auto q = basis.leftCols(count);
      block.noalias() -= q * (q.transpose() * block);
    }
  }
  const int start = count;
  int added = 0;
  for (int c = 0; c < block.cols(); ++c) {
    if (count >= basis.cols()) break;
    Eigen::VectorXd v = block.col(c);
    for (int pass = 0; pass < 2; ++pass)
      if (count > start) {
        const auto q = basis.middleCols(start, count - start);
        v.noalias() -= q * (q.transpose() * v);
      }
    const double nrm = v.norm();
    if (!(norms0[c] > 0.0) || nrm <= tol * norms0[c]) continue;
    basis.col(count++) = v / nrm;
    ++added;
  }
  return added;
}

inline SparseMatrix row_slice(const SparseMatrix& m, int row0, int rows) {
  std::vector<Triplet> t;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      if (it.row() >= row0 && it.row() < row0 + rows)
        t.emplace_back(static_cast<int>(it.row()) - row0, static_cast<int>(it.col()), it.value());
  SparseMatrix out(rows, m.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

// Low shift for vacuum waves resolved at 2000 fine cells per wavelength.
inline double default_expansion_hz(const DescriptorSystem& sys) {
  return kC0 / (2000.0 * std::max(sys.dx, sys.dy));
}

}  // namespace detail

/// Block Krylov basis of order q (q1 + q2 == q unless the space is exhausted).
inline Projection build_projection(const DescriptorSystem& sys, int q, const ProjectionOptions& opt = {}) {
  const int n = sys.n(), ne = sys.n_e(), nh = sys.n_h();
  if (q <= 0 || q > n) throw Error(ErrorCode::kInvalidArgument, "reduction order must satisfy 0 < q <= full order");
  if (sys.n_ports() == 0) throw Error(ErrorCode::kInvalidArgument, "fine region has no ports to expand from");

  Eigen::SparseLU<SparseMatrix> lu;
  SparseMatrix apply_rhs;  // v -> apply_rhs * v, then solve
  if (opt.expansion == KrylovExpansion::kShifted) {
    const double f0 = opt.expansion_hz.value_or(detail::default_expansion_hz(sys));
    if (!(f0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "expansion frequency must be positive");
    const double s0 = 2.0 * kPi * f0;
    std::vector<Triplet> t;
    for (int e = 0; e < ne; ++e) t.emplace_back(e, e, s0 * sys.r11[e] + 2.0 * sys.f11[e]);
    for (int h = 0; h < nh; ++h) t.emplace_back(ne + h, ne + h, s0 * sys.r22[h]);
    for (int c = 0; c < sys.k.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(sys.k, c); it; ++it) {
        t.emplace_back(static_cast<int>(it.row()), ne + c, -it.value());
        t.emplace_back(ne + c, static_cast<int>(it.row()), it.value());
      }
    SparseMatrix p(n, n);
    p.setFromTriplets(t.begin(), t.end());
    lu.compute(p);
    std::vector<Triplet> ct;
    for (int e = 0; e < ne; ++e) ct.emplace_back(e, e, sys.r11[e]);
    for (int h = 0; h < nh; ++h) ct.emplace_back(ne + h, ne + h, sys.r22[h]);
    apply_rhs = SparseMatrix(n, n);
    apply_rhs.setFromTriplets(ct.begin(), ct.end());
  } else {
    lu.compute(sys.r_plus_f());
    apply_rhs = sys.r_minus_f();
  }
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::kSingular, "Krylov pencil is singular");

  Projection proj;
  Eigen::MatrixXd v1(ne, std::min(q, ne)), v2(nh, std::min(q, nh));
  int q1 = 0, q2 = 0;
  Eigen::MatrixXd w_basis(n, std::min(n, q + sys.n_ports()));
  int wcount = 0;

  Eigen::MatrixXd block = lu.solve(Eigen::MatrixXd(sys.b));
  bool done = false;
  while (!done) {
    const int start = wcount;
    const int added = detail::orth_append_block(w_basis, wcount, block, opt.deflation_tol);
    if (added == 0) {
      proj.breakdown = true;
      break;
    }
    const auto w_new = w_basis.middleCols(start, added);
    for (int c = 0; c < added && !done; ++c) {
      detail::orth_append(v1, q1, w_new.col(c).head(ne), opt.deflation_tol);
      done = q1 + q2 >= q;
    }
    for (int c = 0; c < added && !done; ++c) {
      detail::orth_append(v2, q2, w_new.col(c).tail(nh), opt.deflation_tol);
      done = q1 + q2 >= q;
    }
    if (done) break;
    const Eigen::MatrixXd rhs = apply_rhs * Eigen::MatrixXd(w_new);
    block = lu.solve(rhs);
    if (wcount >= w_basis.cols()) {
      w_basis.conservativeResize(Eigen::NoChange, std::min<Eigen::Index>(n, w_basis.cols() + sys.n_ports()));
      if (wcount >= w_basis.cols()) {
        proj.breakdown = true;
        break;
      }
    }
  }
  proj.v1 = v1.leftCols(q1);
  proj.v2 = v2.leftCols(q2);
  return proj;
}

/// Congruence transform of every block with V.
inline ReducedSystem reduce(const DescriptorSystem& sys, const Projection& v) {
  if (v.v1.rows() != sys.n_e() || v.v2.rows() != sys.n_h())
    throw Error(ErrorCode::kDimensionMismatch, "projection does not conform to the descriptor system");
  ReducedSystem red;
  red.dt = sys.dt;
  red.s = sys.s;
  red.basis = v;
  if (v.identity) {
    red.r11 = sys.r11.asDiagonal();
    red.r22 = sys.r22.asDiagonal();
    red.f11 = sys.f11.asDiagonal();
    red.k = Eigen::MatrixXd(sys.k);
    red.b = Eigen::MatrixXd(sys.b);
    red.l = Eigen::MatrixXd(sys.l);
    return red;
  }
  const Eigen::MatrixXd& v1 = v.v1;
  const Eigen::MatrixXd& v2 = v.v2;
  auto sym = [](const Eigen::MatrixXd& m) -> Eigen::MatrixXd { return 0.5 * (m + m.transpose()); };
  red.r11 = sym(v1.transpose() * (sys.r11.asDiagonal() * v1));
  red.r22 = sym(v2.transpose() * (sys.r22.asDiagonal() * v2));
  red.f11 = sym(v1.transpose() * (sys.f11.asDiagonal() * v1));
  red.k = v1.transpose() * (sys.k * v2);
  const int ne = sys.n_e(), nh = sys.n_h();
  auto project = [&](const SparseMatrix& m) {
    Eigen::MatrixXd out(v.order(), m.cols());
    const SparseMatrix top = detail::row_slice(m, 0, ne);
    const SparseMatrix bot = detail::row_slice(m, ne, nh);
    out.topRows(v.q1()) = (SparseMatrix(top.transpose()) * v1).transpose();
    out.bottomRows(v.q2()) = (SparseMatrix(bot.transpose()) * v2).transpose();
    return out;
  };
  red.b = project(sys.b);
  red.l = project(sys.l);
  return red;
}

/// Direct march of a reduced system (dense LU of R + F).
class ReducedStepper {
 public:
  explicit ReducedStepper(const ReducedSystem& sys) : rmf_(sys.r_minus_f()), b_(sys.b), l_(sys.l), lu_(sys.r_plus_f()) {}
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    Eigen::VectorXd rhs = rmf_ * x;
    if (u.size() != 0) rhs += b_ * u;
    return lu_.solve(rhs);
  }
  Eigen::VectorXd output(const Eigen::VectorXd& x) const { return l_.transpose() * x; }

 private:
  Eigen::MatrixXd rmf_, b_, l_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace romfdtd
