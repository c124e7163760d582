#pragma once

// Fine-region FDTD equations in descriptor form
//   (R + F) x^{n+1} = (R - F) x^n + B u^{n+1/2},   y^n = L^T x^n
// with x = [Ex; Ey; Hz], R = [R11/dt, -K/2; -K^T/2, R22/dt] and
// F = [F11, -K/2; K^T/2, 0]. Inputs u are hanging Hz samples on the region
// boundary, outputs y the co-located tangential E samples.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "romfdtd/error.hpp"
#include "romfdtd/yee_grid.hpp"

namespace romfdtd {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct FineRegionSpec {
  int i0 = 0;
  int j0 = 0;
  int width = 1;   // coarse cells
  int height = 1;  // coarse cells
  int refinement = 2;
  double coarse_dx = 1e-3;
  double coarse_dy = 1e-3;
  std::array<bool, 4> pec_backed = {false, false, false, false};  // S, N, W, E
  MaterialMap materials;  // fine resolution; empty means vacuum

  int fine_nx() const { return width * refinement; }
  int fine_ny() const { return height * refinement; }
  double fine_dx() const { return coarse_dx / refinement; }
  double fine_dy() const { return coarse_dy / refinement; }
  bool backed(Side s) const { return pec_backed[static_cast<int>(s)]; }
  CellRect rect() const { return {i0, j0, width, height}; }

  /// Geometry checks. `allow_unit_refinement` admits r = 1 for degenerate
  /// equivalence tests.
  void validate(bool allow_unit_refinement = false) const {
    if (width < 1 || height < 1) throw Error(ErrorCode::kGeometry, "fine region must span at least one coarse cell");
    if (refinement < 1 || (refinement == 1 && !allow_unit_refinement))
      throw Error(ErrorCode::kGeometry, "refinement factor must be an integer > 1");
    if (!(coarse_dx > 0.0) || !(coarse_dy > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "coarse cell sizes must be positive");
    if (materials.nx() != 0 && (materials.nx() != fine_nx() || materials.ny() != fine_ny()))
      throw Error(ErrorCode::kDimensionMismatch, "fine material map does not match region size");
    if (materials.nx() != 0) materials.validate();
  }
};

struct Port {
  Side side;
  int state_index;  // index of the co-located E sample in x
  int i;            // fine edge index
  int j;
};

struct PortLayout {
  std::vector<Port> ports;  // S, N, W, E; left-to-right / bottom-to-top
  std::array<int, 4> offset = {0, 0, 0, 0};
  std::array<int, 4> count = {0, 0, 0, 0};

  int size() const { return static_cast<int>(ports.size()); }
  int side_offset(Side s) const { return offset[static_cast<int>(s)]; }
  int side_count(Side s) const { return count[static_cast<int>(s)]; }
};

struct DescriptorSystem {
  int nx = 0;  // fine cells
  int ny = 0;
  double dx = 0.0;  // fine cell sizes
  double dy = 0.0;
  double dt = 0.0;
  Eigen::VectorXd r11;  // nE, edge capacitances  l * l' * eps
  Eigen::VectorXd r22;  // nH, cell inductances   area * mu
  Eigen::VectorXd f11;  // nE, l * l' * sigma / 2
  SparseMatrix k;       // nE x nH
  SparseMatrix b;       // (nE+nH) x nP
  SparseMatrix l;       // (nE+nH) x nP, 0/1 selector
  Eigen::VectorXd s;    // nP, signed port edge lengths
  PortLayout ports;
  std::vector<std::uint8_t> pec_edge;  // nE

  int n_ex() const { return nx * (ny + 1); }
  int n_ey() const { return (nx + 1) * ny; }
  int n_e() const { return n_ex() + n_ey(); }
  int n_h() const { return nx * ny; }
  int n() const { return n_e() + n_h(); }
  int n_ports() const { return static_cast<int>(s.size()); }

  int ex_index(int i, int j) const { return j * nx + i; }
  int ey_index(int i, int j) const { return n_ex() + j * (nx + 1) + i; }
  int h_index(int i, int j) const { return j * nx + i; }  // within the H block

  /// Full-state matrices. `sign` = +1 gives R + F, -1 gives R - F, 0 gives R.
  SparseMatrix combined(int sign) const {
    const int ne = n_e();
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(ne + n_h() + 4 * k.nonZeros()));
    for (int e = 0; e < ne; ++e) t.emplace_back(e, e, r11[e] / dt + sign * f11[e]);
    for (int h = 0; h < n_h(); ++h) t.emplace_back(ne + h, ne + h, r22[h] / dt);
    for (int col = 0; col < k.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
        const double v = it.value();
        // upper block: -K/2 (R) + sign * (-K/2) (F)
        const double up = -0.5 * v - sign * 0.5 * v;
        const double lo = -0.5 * v + sign * 0.5 * v;
        if (up != 0.0) t.emplace_back(static_cast<int>(it.row()), ne + col, up);
        if (lo != 0.0) t.emplace_back(ne + col, static_cast<int>(it.row()), lo);
      }
    SparseMatrix m(n(), n());
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }
  SparseMatrix r_matrix() const { return combined(0); }
  SparseMatrix r_plus_f() const { return combined(1); }
  SparseMatrix r_minus_f() const { return combined(-1); }

  SparseMatrix f_matrix() const {
    const int ne = n_e();
    std::vector<Triplet> t;
    for (int e = 0; e < ne; ++e)
      if (f11[e] != 0.0) t.emplace_back(e, e, f11[e]);
    for (int col = 0; col < k.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
        t.emplace_back(static_cast<int>(it.row()), ne + col, -0.5 * it.value());
        t.emplace_back(ne + col, static_cast<int>(it.row()), 0.5 * it.value());
      }
    SparseMatrix m(n(), n());
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  /// Same system with a different time step (R is kept factored).
  DescriptorSystem with_dt(double new_dt) const {
    DescriptorSystem c = *this;
    c.dt = new_dt;
    return c;
  }
};

inline DescriptorSystem assemble_fine_system(const FineRegionSpec& region, double dt,
                                             bool allow_unit_refinement = false) {
  region.validate(allow_unit_refinement);
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time step must be positive");
  DescriptorSystem sys;
  sys.nx = region.fine_nx();
  sys.ny = region.fine_ny();
  sys.dx = region.fine_dx();
  sys.dy = region.fine_dy();
  sys.dt = dt;
  const int nx = sys.nx, ny = sys.ny;
  const double dx = sys.dx, dy = sys.dy;
  const bool has_map = region.materials.nx() != 0;
  const MaterialMap& mm = region.materials;
  auto inside = [&](int i, int j) { return i >= 0 && j >= 0 && i < nx && j < ny; };
  auto eps = [&](int i, int j) { return has_map ? mm.eps(i, j) : kEps0; };
  auto sig = [&](int i, int j) { return has_map ? mm.sigma(i, j) : 0.0; };
  auto mu = [&](int i, int j) { return has_map ? mm.mu(i, j) : kMu0; };
  auto pec = [&](int i, int j) { return has_map && inside(i, j) && mm.pec(i, j); };

  const int ne = sys.n_e(), nh = sys.n_h();
  sys.r11.resize(ne);
  sys.f11.resize(ne);
  sys.r22.resize(nh);
  sys.pec_edge.assign(static_cast<std::size_t>(ne), 0);
  std::vector<Triplet> kt;
  kt.reserve(static_cast<std::size_t>(4 * nh));

  const bool pec_s = region.backed(Side::kSouth), pec_n = region.backed(Side::kNorth);
  const bool pec_w = region.backed(Side::kWest), pec_e = region.backed(Side::kEast);

  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int e = sys.ex_index(i, j);
      double c = 0.0, g = 0.0;
      for (int jj : {j - 1, j})
        if (inside(i, jj)) {
          c += 0.5 * dy * eps(i, jj);
          g += 0.5 * dy * sig(i, jj);
        }
      sys.r11[e] = dx * c;
      sys.f11[e] = 0.5 * dx * g;
      const bool is_pec = pec(i, j - 1) || pec(i, j) || (j == 0 && pec_s) || (j == ny && pec_n);
      if (is_pec) {
        sys.pec_edge[static_cast<std::size_t>(e)] = 1;
        if ((j == 0 && !pec_s) || (j == ny && !pec_n))
          throw Error(ErrorCode::kGeometry, "PEC material touches a coupled side of a fine region");
        continue;
      }
      if (j < ny) kt.emplace_back(e, sys.h_index(i, j), dx);
      if (j > 0) kt.emplace_back(e, sys.h_index(i, j - 1), -dx);
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int e = sys.ey_index(i, j);
      double c = 0.0, g = 0.0;
      for (int ii : {i - 1, i})
        if (inside(ii, j)) {
          c += 0.5 * dx * eps(ii, j);
          g += 0.5 * dx * sig(ii, j);
        }
      sys.r11[e] = dy * c;
      sys.f11[e] = 0.5 * dy * g;
      const bool is_pec = pec(i - 1, j) || pec(i, j) || (i == 0 && pec_w) || (i == nx && pec_e);
      if (is_pec) {
        sys.pec_edge[static_cast<std::size_t>(e)] = 1;
        if ((i == 0 && !pec_w) || (i == nx && !pec_e))
          throw Error(ErrorCode::kGeometry, "PEC material touches a coupled side of a fine region");
        continue;
      }
      if (i < nx) kt.emplace_back(e, sys.h_index(i, j), -dy);
      if (i > 0) kt.emplace_back(e, sys.h_index(i - 1, j), dy);
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) sys.r22[sys.h_index(i, j)] = dx * dy * mu(i, j);
  for (int e = 0; e < ne; ++e)
    if (!(sys.r11[e] > 0.0)) throw Error(ErrorCode::kMaterial, "non-positive permittivity in fine region");
  for (int h = 0; h < nh; ++h)
    if (!(sys.r22[h] > 0.0)) throw Error(ErrorCode::kMaterial, "non-positive permeability in fine region");
  for (int e = 0; e < ne; ++e)
    if (!std::isfinite(sys.f11[e])) throw Error(ErrorCode::kMaterial, "non-finite conductivity in fine region");
  sys.k = SparseMatrix(ne, nh);
  sys.k.setFromTriplets(kt.begin(), kt.end());

  // Ports.
  PortLayout& pl = sys.ports;
  auto add_side = [&](Side side, bool backed, int count, auto index_of) {
    pl.offset[static_cast<int>(side)] = pl.size();
    if (backed) return;
    for (int k = 0; k < count; ++k) {
      auto [i, j, idx] = index_of(k);
      pl.ports.push_back({side, idx, i, j});
    }
    pl.count[static_cast<int>(side)] = count;
  };
  add_side(Side::kSouth, pec_s, nx, [&](int k) { return std::array<int, 3>{k, 0, sys.ex_index(k, 0)}; });
  add_side(Side::kNorth, pec_n, nx, [&](int k) { return std::array<int, 3>{k, ny, sys.ex_index(k, ny)}; });
  add_side(Side::kWest, pec_w, ny, [&](int k) { return std::array<int, 3>{0, k, sys.ey_index(0, k)}; });
  add_side(Side::kEast, pec_e, ny, [&](int k) { return std::array<int, 3>{nx, k, sys.ey_index(nx, k)}; });

  const int np = pl.size();
  sys.s.resize(np);
  std::vector<Triplet> bt, lt;
  for (int p = 0; p < np; ++p) {
    const Port& port = pl.ports[static_cast<std::size_t>(p)];
    double sv = 0.0;
    switch (port.side) {
      case Side::kSouth: sv = -dx; break;
      case Side::kNorth: sv = dx; break;
      case Side::kWest: sv = dy; break;
      case Side::kEast: sv = -dy; break;
    }
    sys.s[p] = sv;
    lt.emplace_back(port.state_index, p, 1.0);
    bt.emplace_back(port.state_index, p, sv);
  }
  sys.b = SparseMatrix(sys.n(), np);
  sys.b.setFromTriplets(bt.begin(), bt.end());
  sys.l = SparseMatrix(sys.n(), np);
  sys.l.setFromTriplets(lt.begin(), lt.end());
  return sys;
}

/// Direct march of a descriptor system: factorizes R + F once.
class DescriptorStepper {
 public:
  explicit DescriptorStepper(const DescriptorSystem& sys) : rmf_(sys.r_minus_f()), b_(sys.b), l_(sys.l) {
    lu_.compute(sys.r_plus_f());
    if (lu_.info() != Eigen::Success) throw Error(ErrorCode::kSingular, "R + F is singular");
  }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    Eigen::VectorXd rhs = rmf_ * x;
    if (u.size() != 0) rhs += b_ * u;
    return lu_.solve(rhs);
  }
  Eigen::VectorXd output(const Eigen::VectorXd& x) const { return l_.transpose() * x; }

 private:
  SparseMatrix rmf_, b_, l_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

struct PassivityReport {
  double min_eig_r = std::numeric_limits<double>::quiet_NaN();  // NaN when too large to compute
  double min_eig_f = 0.0;
  double max_b_minus_ls = 0.0;
  double tol_f = 0.0;
  double tol_c = 0.0;
  bool cond_a = false;
  bool cond_b = false;
  bool cond_c = false;
  double max_dt = 0.0;  // largest dt for which R stays positive definite
  bool pass() const { return cond_a && cond_b && cond_c; }
};

namespace detail {

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline double sparse_max_abs(const SparseMatrix& m) {
  double v = 0.0;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) v = std::max(v, std::abs(it.value()));
  return v;
}

inline constexpr double kEigTolerance = 1e-12;
inline constexpr int kDenseEigenLimit = 4000;

// Largest eigenvalue of a symmetric PSD operator by Lanczos-free power iteration.
template <class Apply>
double power_max_eig(int n, Apply apply, int iterations = 3000) {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = apply(v);
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / nrm;
    if (it > 50 && std::abs(next - lambda) <= 1e-13 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace detail

/// Largest singular value of R11^{-1/2} K R22^{-1/2} for diagonal R11, R22.
inline double max_scaled_singular_value(const DescriptorSystem& sys) {
  const Eigen::VectorXd a = sys.r11.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd c = sys.r22.cwiseSqrt().cwiseInverse();
  const SparseMatrix m = a.asDiagonal() * sys.k * c.asDiagonal();
  if (sys.n_h() <= detail::kDenseEigenLimit) {
    const Eigen::MatrixXd g = Eigen::MatrixXd(m.transpose() * m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  const SparseMatrix mt = m.transpose();
  return std::sqrt(std::max(0.0, detail::power_max_eig(sys.n_h(), [&](const Eigen::VectorXd& v) {
                                  return Eigen::VectorXd(mt * (m * v));
                                })));
}

/// Conditions R = R^T > 0, F + F^T >= 0 and B = L S at time step dt.
inline PassivityReport check_passivity(const DescriptorSystem& sys, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time step must be positive");
  if (sys.r11.size() != sys.n_e() || sys.f11.size() != sys.n_e() || sys.r22.size() != sys.n_h() ||
      sys.k.rows() != sys.n_e() || sys.k.cols() != sys.n_h() || sys.b.rows() != sys.n() ||
      sys.l.rows() != sys.n() || sys.b.cols() != sys.n_ports() || sys.l.cols() != sys.n_ports())
    throw Error(ErrorCode::kDimensionMismatch, "descriptor system blocks are inconsistent");
  PassivityReport rep;
  const DescriptorSystem at = sys.with_dt(dt);
  const double smax = max_scaled_singular_value(sys);
  rep.max_dt = smax > 0.0 ? 2.0 / smax : std::numeric_limits<double>::infinity();
  const bool diag_pos = sys.r11.minCoeff() > 0.0 && (sys.n_h() == 0 || sys.r22.minCoeff() > 0.0);
  if (sys.n() <= detail::kDenseEigenLimit) {
    const Eigen::MatrixXd r = Eigen::MatrixXd(at.r_matrix());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r, Eigen::EigenvaluesOnly);
    rep.min_eig_r = es.eigenvalues().minCoeff();
    rep.cond_a = diag_pos && rep.min_eig_r > 0.0;
  } else {
    rep.cond_a = diag_pos && smax * dt < 2.0;
  }
  // F + F^T = diag(2 F11, 0).
  const double fmax = 2.0 * sys.f11.cwiseAbs().maxCoeff();
  rep.min_eig_f = std::min(0.0, 2.0 * sys.f11.minCoeff());
  rep.tol_f = detail::kEigTolerance * fmax;
  rep.cond_b = rep.min_eig_f >= -rep.tol_f;
  const SparseMatrix diff = sys.b - sys.l * sys.s.asDiagonal();
  rep.max_b_minus_ls = detail::sparse_max_abs(diff);
  rep.tol_c = 0.0;
  rep.cond_c = rep.max_b_minus_ls <= rep.tol_c;
  return rep;
}

/// Coordinate-list text: first line "rows cols", then "row col value".
inline std::string to_coo(const SparseMatrix& m) {
  std::ostringstream os;
  os << m.rows() << ' ' << m.cols() << '\n';
  std::vector<Triplet> t;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  char buf[64];
  for (const auto& e : t) {
    auto res = std::to_chars(buf, buf + sizeof buf, e.value(), std::chars_format::general, 17);
    os << e.row() << ' ' << e.col() << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
  return os.str();
}

inline SparseMatrix from_coo(const std::string& text) {
  std::istringstream is(text);
  long rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw Error(ErrorCode::kIo, "malformed coordinate-list header");
  std::vector<Triplet> t;
  std::string r, c, v;
  while (is >> r >> c >> v) {
    long ri = 0, ci = 0;
    double val = 0.0;
    auto ok = [](const std::string& s, auto& out) {
      auto res = std::from_chars(s.data(), s.data() + s.size(), out);
      return res.ec == std::errc{} && res.ptr == s.data() + s.size();
    };
    if (!ok(r, ri) || !ok(c, ci) || !ok(v, val) || ri < 0 || ci < 0 || ri >= rows || ci >= cols)
      throw Error(ErrorCode::kIo, "malformed coordinate-list entry");
    t.emplace_back(static_cast<int>(ri), static_cast<int>(ci), val);
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline void write_coo(const SparseMatrix& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
  f << to_coo(m);
  if (!f) throw Error(ErrorCode::kIo, "write failed: " + path);
}

inline SparseMatrix read_coo(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_coo(ss.str());
}

}  // namespace romfdtd
