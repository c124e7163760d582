#pragma once

// Coupling of an embedded reduced model to the coarse grid.
//
// Composite state z = [y; u; x] with y the coarse interface E, u the fine
// hanging H (inputs of the reduced model) and x the reduced state:
//   A1 z^{n+1} = A2 z^n + [D_l G H^{n+1/2}; 0; 0]
//   A1 = [D_l D_l' (D_eps/dt + D_sig/2),  (1/r) D_l G T^T,  0      ]
//        [T,                              0,               -L^T    ]
//        [0,                              -B,               R + F  ]
//   A2 = blkdiag(D_l D_l' (D_eps/dt - D_sig/2), 0, R - F)
// E samples are equal across the interface (fine = T y) and the coarse
// hanging H is the mean of the r fine ones (U = T^T u / r).

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <memory>
#include <vector>

#include "romfdtd/cfl_extension.hpp"
#include "romfdtd/error.hpp"
#include "romfdtd/fine_system.hpp"
#include "romfdtd/mor.hpp"
#include "romfdtd/yee_grid.hpp"

namespace romfdtd {

struct InterfaceEdge {
  Side side;
  YeeGrid::EdgeRef edge;  // coarse E sample
  int out_i;              // coarse cell outside the region sharing the edge
  int out_j;
  double length;     // coarse edge length
  double half_dual;  // half the coarse dual edge crossing the interface
  double eps;        // material of the outside half cell
  double sigma;
  double sign;  // pairing of the edge with the outside Hz
};

struct InterfaceSpec {
  int refinement = 1;
  std::vector<InterfaceEdge> edges;  // S, N, W, E; left-to-right / bottom-to-top
  std::array<int, 4> edge_offset = {0, 0, 0, 0};
  std::array<int, 4> edge_count = {0, 0, 0, 0};
  std::array<int, 4> port_offset = {0, 0, 0, 0};
  std::array<int, 4> port_count = {0, 0, 0, 0};

  int n_edges() const { return static_cast<int>(edges.size()); }
  int n_ports() const {
    return port_count[0] + port_count[1] + port_count[2] + port_count[3];
  }
};

/// Interface between a coarse grid (with the region cut out) and the region's
/// fine ports.
inline InterfaceSpec build_interface(const YeeGrid& grid, const FineRegionSpec& region, const PortLayout& ports) {
  const GridSpec& g = grid.spec();
  const int i0 = region.i0, j0 = region.j0, i1 = region.i0 + region.width, j1 = region.j0 + region.height;
  if (i0 < 0 || j0 < 0 || i1 > g.nx || j1 > g.ny)
    throw Error(ErrorCode::kGeometry, "fine region lies outside the coarse grid");
  if (std::abs(region.coarse_dx - g.dx) > 1e-12 * g.dx || std::abs(region.coarse_dy - g.dy) > 1e-12 * g.dy)
    throw Error(ErrorCode::kMisalignedInterface, "fine region cell sizes do not match the coarse grid");
  const std::array<bool, 4> on_wall = {j0 == 0, j1 == g.ny, i0 == 0, i1 == g.nx};
  for (Side s : kAllSides) {
    const int k = static_cast<int>(s);
    if (on_wall[k] && !region.pec_backed[k])
      throw Error(ErrorCode::kGeometry, "a fine region side on the outer wall must be PEC-backed");
    if (!on_wall[k] && region.pec_backed[k])
      throw Error(ErrorCode::kGeometry, "only fine region sides on the outer wall may be PEC-backed");
    if (on_wall[k] && g.wall(s) != WallKind::kPec)
      throw Error(ErrorCode::kGeometry, "a fine region may only touch PEC outer walls");
  }
  InterfaceSpec spec;
  spec.refinement = region.refinement;
  const MaterialMap& m = grid.materials();
  auto add = [&](Side side, YeeGrid::EdgeRef e, int oi, int oj, double len, double half, double sign) {
    if (grid.is_pml_cell(oi, oj) || m.pec(oi, oj))
      throw Error(ErrorCode::kGeometry, "a fine region must not border PML or PEC coarse cells");
    if ((e.is_x ? grid.ex_role(e.i, e.j) : grid.ey_role(e.i, e.j)) != EdgeRole::kInterface)
      throw Error(ErrorCode::kGeometry, "fine region interface edge is shared with another region");
    spec.edges.push_back({side, e, oi, oj, len, half, m.eps(oi, oj), m.sigma(oi, oj), sign});
  };
  for (Side s : kAllSides) {
    const int k = static_cast<int>(s);
    spec.edge_offset[k] = spec.n_edges();
    spec.port_offset[k] = ports.side_offset(s);
    spec.port_count[k] = ports.side_count(s);
    if (region.pec_backed[k]) continue;
    switch (s) {
      case Side::kSouth:
        for (int i = i0; i < i1; ++i) add(s, {true, i, j0}, i, j0 - 1, g.dx, 0.5 * g.dy, -1.0);
        break;
      case Side::kNorth:
        for (int i = i0; i < i1; ++i) add(s, {true, i, j1}, i, j1, g.dx, 0.5 * g.dy, 1.0);
        break;
      case Side::kWest:
        for (int j = j0; j < j1; ++j) add(s, {false, i0, j}, i0 - 1, j, g.dy, 0.5 * g.dx, 1.0);
        break;
      case Side::kEast:
        for (int j = j0; j < j1; ++j) add(s, {false, i1, j}, i1, j, g.dy, 0.5 * g.dx, -1.0);
        break;
    }
    spec.edge_count[k] = spec.n_edges() - spec.edge_offset[k];
    if (spec.port_count[k] != spec.refinement * spec.edge_count[k])
      throw Error(ErrorCode::kMisalignedInterface, "each coarse interface edge must face exactly r fine ports");
  }
  return spec;
}

struct InterpolationMatrix {
  SparseMatrix t;  // nPorts x nEdges, 0/1
  int refinement = 1;
};

inline InterpolationMatrix build_interpolation(const InterfaceSpec& iface, int r) {
  if (r < 1) throw Error(ErrorCode::kInvalidArgument, "refinement must be positive");
  InterpolationMatrix out;
  out.refinement = r;
  std::vector<Triplet> t;
  for (int s = 0; s < 4; ++s) {
    if (iface.port_count[s] != r * iface.edge_count[s])
      throw Error(ErrorCode::kMisalignedInterface, "port count is not r times the coarse edge count");
    for (int k = 0; k < iface.edge_count[s]; ++k)
      for (int m = 0; m < r; ++m) t.emplace_back(iface.port_offset[s] + k * r + m, iface.edge_offset[s] + k, 1.0);
  }
  out.t = SparseMatrix(iface.n_ports(), iface.n_edges());
  out.t.setFromTriplets(t.begin(), t.end());
  return out;
}

class CoupledUpdate {
 public:
  static constexpr int kDenseLimit = 5000;

  int n_y() const { return ny_; }
  int n_p() const { return np_; }
  int n_x() const { return nx_; }
  int size() const { return ny_ + np_ + nx_; }
  double dt() const { return dt_; }
  bool dense() const { return dense_; }
  const SparseMatrix& a1() const { return a1_; }
  const SparseMatrix& a2() const { return a2_; }
  /// Scale of the coarse H input on each y row (l_k g_k).
  const Eigen::VectorXd& input_scale() const { return input_scale_; }

  /// Dense operators (z x (nY + nX)) and (z x nY); empty when not dense.
  const Eigen::MatrixXd& phi() const { return phi_; }
  const Eigen::MatrixXd& psi() const { return psi_; }

  /// z' = A1^{-1} (A2 z + [D_l G h; 0; 0]).
  void step(const Eigen::VectorXd& z, const Eigen::VectorXd& h, Eigen::VectorXd& out) const {
    if (dense_) {
      packed_.resize(ny_ + nx_);
      packed_.head(ny_) = z.head(ny_);
      packed_.tail(nx_) = z.tail(nx_);
      out.noalias() = phi_ * packed_;
      out.noalias() += psi_ * h;
      return;
    }
    Eigen::VectorXd rhs = a2_ * z;
    rhs.head(ny_) += input_scale_.cwiseProduct(h);
    out = lu_->solve(rhs);
  }

  friend CoupledUpdate assemble_coupled(const ReducedSystem&, const InterfaceSpec&, double, bool, bool);

 private:
  int ny_ = 0, np_ = 0, nx_ = 0;
  double dt_ = 0.0;
  bool dense_ = false;
  SparseMatrix a1_, a2_;
  Eigen::VectorXd input_scale_;
  Eigen::MatrixXd phi_, psi_;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
  mutable Eigen::VectorXd packed_;
};

/// Builds A1, A2 and the explicit update operators. With `verify_passivity`
/// the reduced model must satisfy its passivity conditions at dt.
inline CoupledUpdate assemble_coupled(const ReducedSystem& rs, const InterfaceSpec& iface, double dt,
                                      bool verify_passivity = true, bool force_sparse = false) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time step must be positive");
  if (rs.n_ports() != iface.n_ports())
    throw Error(ErrorCode::kDimensionMismatch, "reduced model ports do not match the interface");
  ReducedSystem at = rs;
  at.dt = dt;
  if (verify_passivity) {
    const PassivityReport rep = check_passivity(at, dt);
    if (!rep.pass()) throw Error(ErrorCode::kPassivity, "reduced model is not passive at the requested time step");
  }
  const int r = iface.refinement;
  const InterpolationMatrix interp = build_interpolation(iface, r);
  CoupledUpdate cu;
  cu.ny_ = iface.n_edges();
  cu.np_ = iface.n_ports();
  cu.nx_ = rs.n();
  cu.dt_ = dt;
  const int ny = cu.ny_, np = cu.np_, nx = cu.nx_, nz = ny + np + nx;
  const int ou = ny, ox = ny + np;

  std::vector<Triplet> t1, t2;
  cu.input_scale_.resize(ny);
  for (int k = 0; k < ny; ++k) {
    const InterfaceEdge& e = iface.edges[static_cast<std::size_t>(k)];
    const double ll = e.length * e.half_dual;
    t1.emplace_back(k, k, ll * (e.eps / dt + 0.5 * e.sigma));
    t2.emplace_back(k, k, ll * (e.eps / dt - 0.5 * e.sigma));
    cu.input_scale_[k] = e.length * e.sign;
  }
  for (int c = 0; c < interp.t.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(interp.t, c); it; ++it) {
      const int p = static_cast<int>(it.row()), k = static_cast<int>(it.col());
      t1.emplace_back(k, ou + p, cu.input_scale_[k] * it.value() / r);
      t1.emplace_back(ou + p, k, it.value());
    }
  for (int p = 0; p < np; ++p)
    for (int i = 0; i < nx; ++i) {
      if (rs.l(i, p) != 0.0) t1.emplace_back(ou + p, ox + i, -rs.l(i, p));
      if (rs.b(i, p) != 0.0) t1.emplace_back(ox + i, ou + p, -rs.b(i, p));
    }
  const Eigen::MatrixXd rpf = at.r_plus_f();
  const Eigen::MatrixXd rmf = at.r_minus_f();
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i < nx; ++i) {
      if (rpf(i, j) != 0.0) t1.emplace_back(ox + i, ox + j, rpf(i, j));
      if (rmf(i, j) != 0.0) t2.emplace_back(ox + i, ox + j, rmf(i, j));
    }
  cu.a1_ = SparseMatrix(nz, nz);
  cu.a1_.setFromTriplets(t1.begin(), t1.end());
  cu.a2_ = SparseMatrix(nz, nz);
  cu.a2_.setFromTriplets(t2.begin(), t2.end());

  cu.dense_ = !force_sparse && nz < CoupledUpdate::kDenseLimit;
  if (cu.dense_) {
    const Eigen::MatrixXd a1 = Eigen::MatrixXd(cu.a1_);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a1);
    const double rc = lu.rcond();
    if (!(rc > 0.0)) throw Error(ErrorCode::kSingular, "coupled system matrix A1 is singular");
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nz, 2 * ny + nx);
    const Eigen::MatrixXd a2 = Eigen::MatrixXd(cu.a2_);
    rhs.leftCols(ny) = a2.leftCols(ny);
    rhs.middleCols(ny, nx) = a2.rightCols(nx);
    for (int k = 0; k < ny; ++k) rhs(k, ny + nx + k) = cu.input_scale_[k];
    const Eigen::MatrixXd sol = lu.solve(rhs);
    cu.phi_ = sol.leftCols(ny + nx);
    cu.psi_ = sol.rightCols(ny);
    if (!sol.allFinite()) throw Error(ErrorCode::kSingular, "coupled system matrix A1 is singular");
  } else {
    cu.lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
    cu.lu_->compute(cu.a1_);
    if (cu.lu_->info() != Eigen::Success) throw Error(ErrorCode::kSingular, "coupled system matrix A1 is singular");
  }
  return cu;
}

/// Functional form of one interface update.
inline Eigen::VectorXd step_interface(const CoupledUpdate& cu, const Eigen::VectorXd& z, const Eigen::VectorXd& h_half) {
  if (z.size() != cu.size() || h_half.size() != cu.n_y())
    throw Error(ErrorCode::kDimensionMismatch, "interface state or input has the wrong size");
  Eigen::VectorXd out(cu.size());
  cu.step(z, h_half, out);
  return out;
}

}  // namespace romfdtd
