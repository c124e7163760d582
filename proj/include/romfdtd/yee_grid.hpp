#pragma once

// Coarse 2-D TEz Yee grid: materials, leap-frog updates, PEC walls,
// split-field PML terminations, sources and probes.
//
// Layout (cell (i, j) spans [i dx, (i+1) dx] x [j dy, (j+1) dy]):
//   Ex(i, j)  at ((i+1/2) dx, j dy)        nx x (ny+1)
//   Ey(i, j)  at (i dx, (j+1/2) dy)        (nx+1) x ny
//   Hz(i, j)  at ((i+1/2) dx, (j+1/2) dy)  nx x ny
// All arrays are stored row-major with j outer, i inner.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "romfdtd/constants.hpp"
#include "romfdtd/error.hpp"

namespace romfdtd {

enum class Side : int { kSouth = 0, kNorth = 1, kWest = 2, kEast = 3 };
inline constexpr std::array<Side, 4> kAllSides = {Side::kSouth, Side::kNorth, Side::kWest,
                                                  Side::kEast};

enum class WallKind { kPec, kPml };

struct GridSpec {
  int nx = 1;
  int ny = 1;
  double dx = 1e-3;
  double dy = 1e-3;
  std::array<WallKind, 4> walls = {WallKind::kPec, WallKind::kPec, WallKind::kPec,
                                   WallKind::kPec};
  int pml_depth = 0;

  WallKind wall(Side s) const { return walls[static_cast<int>(s)]; }
  bool has_pml() const {
    return std::any_of(walls.begin(), walls.end(), [](WallKind w) { return w == WallKind::kPml; });
  }

  void validate() const {
    if (nx < 1 || ny < 1) throw Error(ErrorCode::kGeometry, "grid cell counts must be >= 1");
    if (!(dx > 0.0) || !(dy > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "grid cell sizes must be positive");
    if (pml_depth < 0) throw Error(ErrorCode::kGeometry, "pml_depth must be >= 0");
    if (has_pml() && 2 * pml_depth >= std::min(nx, ny))
      throw Error(ErrorCode::kGeometry, "pml_depth must be less than min(nx, ny)/2");
  }

  bool operator==(const GridSpec&) const = default;
};

template <class T>
class Array2D {
 public:
  Array2D() = default;
  Array2D(int nx, int ny, T value = T{})
      : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), value) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }

  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }
  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Array2D&) const = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  std::vector<T> data_;
};

using Field2D = Array2D<double>;

/// Bulk material of one cell. Relative permittivity/permeability, absolute
/// conductivity. `pec` marks a perfect conductor: every edge touching the
/// cell carries zero tangential E.
struct Material {
  double eps_r = 1.0;
  double sigma = 0.0;
  double mu_r = 1.0;
  bool pec = false;

  bool operator==(const Material&) const = default;
};

/// Per-cell material arrays with the edge averages used by the update
/// equations: arithmetic mean of the (up to) two cells sharing a primary edge.
class MaterialMap {
 public:
  MaterialMap() = default;
  MaterialMap(int nx, int ny, const Material& fill = {})
      : eps_(nx, ny, fill.eps_r * kEps0),
        sigma_(nx, ny, fill.sigma),
        mu_(nx, ny, fill.mu_r * kMu0),
        pec_(nx, ny, fill.pec ? 1 : 0) {}

  int nx() const { return eps_.nx(); }
  int ny() const { return eps_.ny(); }

  void set(int i, int j, const Material& m) {
    eps_(i, j) = m.eps_r * kEps0;
    sigma_(i, j) = m.sigma;
    mu_(i, j) = m.mu_r * kMu0;
    pec_(i, j) = m.pec ? 1 : 0;
  }

  double eps(int i, int j) const { return eps_(i, j); }
  double sigma(int i, int j) const { return sigma_(i, j); }
  double mu(int i, int j) const { return mu_(i, j); }
  bool pec(int i, int j) const { return pec_(i, j) != 0; }

  Field2D& eps_cells() { return eps_; }
  Field2D& sigma_cells() { return sigma_; }
  Field2D& mu_cells() { return mu_; }

  // Ex(i, j) edge: cells (i, j-1) and (i, j).
  double eps_x(int i, int j) const { return edge_mean(eps_, i, j - 1, i, j); }
  double sigma_x(int i, int j) const { return edge_mean(sigma_, i, j - 1, i, j); }
  bool pec_x(int i, int j) const { return touches_pec(i, j - 1, i, j); }
  // Ey(i, j) edge: cells (i-1, j) and (i, j).
  double eps_y(int i, int j) const { return edge_mean(eps_, i - 1, j, i, j); }
  double sigma_y(int i, int j) const { return edge_mean(sigma_, i - 1, j, i, j); }
  bool pec_y(int i, int j) const { return touches_pec(i - 1, j, i, j); }
  double mu_z(int i, int j) const { return mu_(i, j); }

  double max_wave_speed() const {
    double c = 0.0;
    for (std::size_t k = 0; k < eps_.size(); ++k)
      c = std::max(c, 1.0 / std::sqrt(eps_.data()[k] * mu_.data()[k]));
    return c;
  }

  void validate() const {
    for (std::size_t k = 0; k < eps_.size(); ++k) {
      if (!(eps_.data()[k] > 0.0) || !(mu_.data()[k] > 0.0))
        throw Error(ErrorCode::kMaterial, "permittivity and permeability must be positive");
      if (!std::isfinite(sigma_.data()[k]))
        throw Error(ErrorCode::kMaterial, "conductivity must be finite");
    }
  }

  /// Stricter check for grid marching; negative conductivity makes the
  /// scheme active.
  void validate_passive() const {
    validate();
    for (double s : sigma_.data())
      if (s < 0.0) throw Error(ErrorCode::kMaterial, "conductivity must be non-negative");
  }

  bool operator==(const MaterialMap&) const = default;

 private:
  double edge_mean(const Field2D& a, int i1, int j1, int i2, int j2) const {
    double sum = 0.0;
    int count = 0;
    if (a.contains(i1, j1)) { sum += a(i1, j1); ++count; }
    if (a.contains(i2, j2)) { sum += a(i2, j2); ++count; }
    return count ? sum / count : 0.0;
  }
  bool touches_pec(int i1, int j1, int i2, int j2) const {
    return (pec_.contains(i1, j1) && pec_(i1, j1)) || (pec_.contains(i2, j2) && pec_(i2, j2));
  }

  Field2D eps_, sigma_, mu_;
  Array2D<std::uint8_t> pec_;
};

/// Largest stable leap-frog step for wave speed c on a dx x dy mesh.
inline double cfl_limit(double dx, double dy, double c) {
  if (!(dx > 0.0) || !(dy > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "cfl_limit: cell sizes must be positive");
  return 1.0 / (c * std::sqrt(1.0 / (dx * dx) + 1.0 / (dy * dy)));
}

inline double cfl_limit(double dx, double dy, const MaterialMap& materials) {
  materials.validate();
  return cfl_limit(dx, dy, materials.max_wave_speed());
}

/// Gaussian pulse whose amplitude spectrum at `bandwidth` is 10% of DC.
struct GaussianPulse {
  double bandwidth = 1e9;
  double delay = 0.0;

  static double tau_for(double bandwidth) {
    if (!(bandwidth > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "pulse bandwidth must be positive");
    return std::sqrt(std::log(10.0) / 2.0) / (kPi * bandwidth);
  }
  static double default_delay(double bandwidth) { return 4.5 * tau_for(bandwidth); }

  double tau() const { return tau_for(bandwidth); }
  double operator()(double t) const {
    const double tau_ = tau();
    const double a = (t - delay) / tau_;
    return std::exp(-0.5 * a * a);
  }
};

inline double gaussian_pulse(double t, double bandwidth, double delay) {
  return GaussianPulse{bandwidth, delay}(t);
}

enum class SourceKind { kHzPoint, kJyLine };

/// Excitation. kHzPoint adds amplitude*g(t) (A/m) to Hz of cell (i, j) after
/// each H update; kJyLine drives a current density amplitude*g(t) (A/m^2) on
/// the Ey edges of column i, rows [j, j_end).
struct SourceSpec {
  SourceKind kind = SourceKind::kHzPoint;
  int i = 0;
  int j = 0;
  int j_end = 0;
  double amplitude = 1.0;
  double bandwidth = 1e9;
  std::optional<double> delay;

  GaussianPulse pulse() const {
    return GaussianPulse{bandwidth, delay.value_or(GaussianPulse::default_delay(bandwidth))};
  }
  bool operator==(const SourceSpec&) const = default;
};

enum class ProbeComponent { kHz, kEx, kEy, kEyLine };

/// Sampling point. kHz reads cell (i, j); kEx/kEy read one edge; kEyLine
/// averages Ey over column i, rows [j, j_end).
struct ProbeSpec {
  std::string id;
  ProbeComponent component = ProbeComponent::kHz;
  int i = 0;
  int j = 0;
  int j_end = 0;

  bool operator==(const ProbeSpec&) const = default;
};

/// Rectangle of coarse cells removed from the coarse update (a fine region).
struct CellRect {
  int i0 = 0;
  int j0 = 0;
  int width = 1;
  int height = 1;

  bool contains_cell(int i, int j) const {
    return i >= i0 && i < i0 + width && j >= j0 && j < j0 + height;
  }
  bool operator==(const CellRect&) const = default;
};

enum class EdgeRole : std::uint8_t {
  kActive,     // standard leap-frog update
  kPec,        // tangential E forced to zero
  kInterface,  // on the boundary of a fine region; written by the coupling update
  kInterior,   // inside a fine region; unused, stays zero
};

struct FieldState {
  Field2D ex;
  Field2D ey;
  Field2D hz;
  std::vector<double> pml_hzx;  // x-split part of Hz, one entry per PML cell
  long step = 0;

  bool operator==(const FieldState&) const = default;
};

/// Graded split-field PML conductivity (order 3, normal reflection 1e-8).
struct PmlProfile {
  static constexpr double kOrder = 3.0;
  static constexpr double kReflection = 1e-8;

  static double sigma_max(double thickness) {
    return -(kOrder + 1.0) * std::log(kReflection) * kEps0 * kC0 / (2.0 * thickness);
  }
};

class YeeGrid {
 public:
  YeeGrid(GridSpec spec, MaterialMap materials, double dt, std::vector<CellRect> holes = {})
      : spec_(spec), materials_(std::move(materials)), dt_(dt), holes_(std::move(holes)) {
    spec_.validate();
    if (materials_.nx() != spec_.nx || materials_.ny() != spec_.ny)
      throw Error(ErrorCode::kDimensionMismatch, "material map does not match grid");
    materials_.validate_passive();
    if (!(dt_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time step must be positive");
    for (const auto& h : holes_) {
      if (h.width < 1 || h.height < 1 || h.i0 < 0 || h.j0 < 0 || h.i0 + h.width > spec_.nx ||
          h.j0 + h.height > spec_.ny)
        throw Error(ErrorCode::kGeometry, "fine region lies outside the coarse grid");
    }
    build_roles();
    build_coefficients();
  }

  const GridSpec& spec() const { return spec_; }
  const MaterialMap& materials() const { return materials_; }
  double dt() const { return dt_; }
  const std::vector<CellRect>& holes() const { return holes_; }

  EdgeRole ex_role(int i, int j) const { return ex_role_(i, j); }
  EdgeRole ey_role(int i, int j) const { return ey_role_(i, j); }
  bool cell_active(int i, int j) const { return cell_active_(i, j) != 0; }
  std::size_t pml_cell_count() const { return pml_cells_.size(); }
  bool is_pml_cell(int i, int j) const { return pml_index_(i, j) >= 0; }

  FieldState make_state() const {
    FieldState s;
    s.ex = Field2D(spec_.nx, spec_.ny + 1);
    s.ey = Field2D(spec_.nx + 1, spec_.ny);
    s.hz = Field2D(spec_.nx, spec_.ny);
    s.pml_hzx.assign(pml_cells_.size(), 0.0);
    return s;
  }

  /// Hz from n-1/2 to n+1/2 using E at level n (interface E included).
  void step_h(FieldState& s) const {
    const int nx = spec_.nx, ny = spec_.ny;
    const double idx = 1.0 / spec_.dx, idy = 1.0 / spec_.dy;
    for (int j = 0; j < ny; ++j) {
      const double* ex0 = &s.ex(0, j);
      const double* ex1 = &s.ex(0, j + 1);
      const double* ey = &s.ey(0, j);
      const double* ch = &ch_(0, j);
      double* hz = &s.hz(0, j);
      for (int i = 0; i < nx; ++i)
        hz[i] += ch[i] * ((ex1[i] - ex0[i]) * idy - (ey[i + 1] - ey[i]) * idx);
    }
    for (std::size_t p = 0; p < pml_cells_.size(); ++p) {
      const PmlCell& c = pml_cells_[p];
      const double curl_x = -(s.ey(c.i + 1, c.j) - s.ey(c.i, c.j)) * idx;
      const double curl_y = (s.ex(c.i, c.j + 1) - s.ex(c.i, c.j)) * idy;
      const double hzx = s.pml_hzx[p];
      const double hzy = s.hz(c.i, c.j) - hzx;
      const double hzx_new = c.dax * hzx + c.dbx * curl_x;
      const double hzy_new = c.day * hzy + c.dby * curl_y;
      s.pml_hzx[p] = hzx_new;
      s.hz(c.i, c.j) = hzx_new + hzy_new;
    }
  }

  /// E from n to n+1 on active edges. Interface edges keep their values
  /// (they are written by the coupling update); PEC and interior edges stay 0.
  void step_e(FieldState& s) const {
    saved_.resize(interface_edges_.size());
    for (std::size_t k = 0; k < interface_edges_.size(); ++k) saved_[k] = edge_value(s, interface_edges_[k]);
    const int nx = spec_.nx, ny = spec_.ny;
    for (int j = 0; j <= ny; ++j) {
      const int jm = std::max(j - 1, 0), jp = std::min(j, ny - 1);
      const double* h1 = &s.hz(0, jp);
      const double* h0 = &s.hz(0, jm);
      const double* ca = &cax_(0, j);
      const double* cb = &cbx_(0, j);
      double* ex = &s.ex(0, j);
      for (int i = 0; i < nx; ++i) ex[i] = ca[i] * ex[i] + cb[i] * (h1[i] - h0[i]);
    }
    for (int j = 0; j < ny; ++j) {
      const double* h = &s.hz(0, j);
      const double* ca = &cay_(0, j);
      const double* cb = &cby_(0, j);
      double* ey = &s.ey(0, j);
      ey[0] = ca[0] * ey[0];
      for (int i = 1; i < nx; ++i) ey[i] = ca[i] * ey[i] - cb[i] * (h[i] - h[i - 1]);
      ey[nx] = ca[nx] * ey[nx];
    }
    for (std::size_t k = 0; k < interface_edges_.size(); ++k) edge_value(s, interface_edges_[k]) = saved_[k];
  }

  /// Soft magnetic source: Hz(i, j) += value.
  void add_hz(FieldState& s, int i, int j, double value) const { s.hz(i, j) += value; }

  /// Impressed current density J (A/m^2) on Ey(i, j) for the current E step.
  void apply_current_ey(FieldState& s, int i, int j, double current_density) const {
    if (ey_role_(i, j) != EdgeRole::kActive) return;
    s.ey(i, j) -= cby_(i, j) * spec_.dx * current_density;
  }

  /// Discrete stored energy per unit length (J/m): dt * x^T R x of the grid's
  /// descriptor form. Exactly conserved by lossless PEC runs below the CFL
  /// limit; PML cells are included without their split structure.
  double energy(const FieldState& s) const {
    const int nx = spec_.nx, ny = spec_.ny;
    const double dx = spec_.dx, dy = spec_.dy, area = dx * dy;
    double w = 0.0;
    auto hz_at = [&](int i, int j) {
      return (i >= 0 && j >= 0 && i < nx && j < ny && cell_active_(i, j)) ? s.hz(i, j) : 0.0;
    };
    auto cell_eps = [&](int i, int j) {
      return (i >= 0 && j >= 0 && i < nx && j < ny && cell_active_(i, j)) ? materials_.eps(i, j) : 0.0;
    };
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const EdgeRole r = ex_role_(i, j);
        if (r != EdgeRole::kActive && r != EdgeRole::kInterface) continue;
        const double e = s.ex(i, j);
        const double cap = 0.5 * area * (cell_eps(i, j - 1) + cell_eps(i, j));
        const double kh = dx * (hz_at(i, j) - hz_at(i, j - 1));
        w += cap * e * e - dt_ * e * kh;
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const EdgeRole r = ey_role_(i, j);
        if (r != EdgeRole::kActive && r != EdgeRole::kInterface) continue;
        const double e = s.ey(i, j);
        const double cap = 0.5 * area * (cell_eps(i - 1, j) + cell_eps(i, j));
        const double kh = dy * (hz_at(i - 1, j) - hz_at(i, j));
        w += cap * e * e - dt_ * e * kh;
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (cell_active_(i, j)) w += area * materials_.mu(i, j) * s.hz(i, j) * s.hz(i, j);
    return w;
  }

  /// Reads a probe value from the state.
  double probe(const FieldState& s, const ProbeSpec& p) const {
    switch (p.component) {
      case ProbeComponent::kHz: return s.hz(p.i, p.j);
      case ProbeComponent::kEx: return s.ex(p.i, p.j);
      case ProbeComponent::kEy: return s.ey(p.i, p.j);
      case ProbeComponent::kEyLine: {
        double sum = 0.0;
        for (int j = p.j; j < p.j_end; ++j) sum += s.ey(p.i, j);
        return sum / std::max(1, p.j_end - p.j);
      }
    }
    return 0.0;
  }

  void validate_probe(const ProbeSpec& p) const {
    const int nx = spec_.nx, ny = spec_.ny;
    bool ok = false;
    switch (p.component) {
      case ProbeComponent::kHz: ok = p.i >= 0 && p.i < nx && p.j >= 0 && p.j < ny && cell_active(p.i, p.j); break;
      case ProbeComponent::kEx: ok = p.i >= 0 && p.i < nx && p.j >= 0 && p.j <= ny && ex_role_(p.i, p.j) != EdgeRole::kInterior; break;
      case ProbeComponent::kEy: ok = p.i >= 0 && p.i <= nx && p.j >= 0 && p.j < ny && ey_role_(p.i, p.j) != EdgeRole::kInterior; break;
      case ProbeComponent::kEyLine:
        ok = p.i >= 0 && p.i <= nx && p.j >= 0 && p.j < p.j_end && p.j_end <= ny;
        for (int j = p.j; ok && j < p.j_end; ++j) ok = ey_role_(p.i, j) != EdgeRole::kInterior;
        break;
    }
    if (!ok) throw Error(ErrorCode::kGeometry, "probe '" + p.id + "' lies outside the grid or inside a fine region");
  }

  void validate_source(const SourceSpec& src) const {
    const int nx = spec_.nx, ny = spec_.ny;
    bool ok = false;
    if (src.kind == SourceKind::kHzPoint) {
      ok = src.i >= 0 && src.i < nx && src.j >= 0 && src.j < ny && cell_active(src.i, src.j);
    } else {
      ok = src.i > 0 && src.i < nx && src.j >= 0 && src.j < src.j_end && src.j_end <= ny;
      for (int j = src.j; ok && j < src.j_end; ++j) ok = ey_role_(src.i, j) == EdgeRole::kActive || ey_role_(src.i, j) == EdgeRole::kPec;
    }
    if (!ok) throw Error(ErrorCode::kGeometry, "source lies outside the grid or inside a fine region");
    if (!(src.bandwidth > 0.0)) throw Error(ErrorCode::kInvalidArgument, "source bandwidth must be positive");
  }

  /// Interface edges in a fixed order (all Ex, then all Ey), for bookkeeping.
  struct EdgeRef {
    bool is_x;
    int i;
    int j;
  };
  const std::vector<EdgeRef>& interface_edges() const { return interface_edges_; }

  static double& edge_value(FieldState& s, const EdgeRef& e) { return e.is_x ? s.ex(e.i, e.j) : s.ey(e.i, e.j); }
  static double edge_value(const FieldState& s, const EdgeRef& e) { return e.is_x ? s.ex(e.i, e.j) : s.ey(e.i, e.j); }

 private:
  struct PmlCell {
    int i, j;
    double dax, dbx, day, dby;
  };

  void build_roles() {
    const int nx = spec_.nx, ny = spec_.ny;
    cell_active_ = Array2D<std::uint8_t>(nx, ny, 1);
    for (const auto& h : holes_)
      for (int j = h.j0; j < h.j0 + h.height; ++j)
        for (int i = h.i0; i < h.i0 + h.width; ++i) {
          if (!cell_active_(i, j)) throw Error(ErrorCode::kGeometry, "fine regions overlap");
          cell_active_(i, j) = 0;
        }
    auto active = [&](int i, int j) { return i >= 0 && j >= 0 && i < nx && j < ny && cell_active_(i, j); };
    auto classify = [&](bool wall, bool a, bool b, bool in_a, bool in_b, bool pec) {
      if (wall) return EdgeRole::kPec;
      if (!a && !b && in_a && in_b) return EdgeRole::kInterior;
      if (a != b) return EdgeRole::kInterface;
      return pec ? EdgeRole::kPec : EdgeRole::kActive;
    };
    ex_role_ = Array2D<EdgeRole>(nx, ny + 1, EdgeRole::kActive);
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const bool wall = (j == 0 || j == ny);
        ex_role_(i, j) = classify(wall, active(i, j - 1), active(i, j), true, true, materials_.pec_x(i, j));
      }
    ey_role_ = Array2D<EdgeRole>(nx + 1, ny, EdgeRole::kActive);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const bool wall = (i == 0 || i == nx);
        ey_role_(i, j) = classify(wall, active(i - 1, j), active(i, j), true, true, materials_.pec_y(i, j));
      }
    interface_edges_.clear();
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (ex_role_(i, j) == EdgeRole::kInterface) interface_edges_.push_back({true, i, j});
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i)
        if (ey_role_(i, j) == EdgeRole::kInterface) interface_edges_.push_back({false, i, j});
  }

  // PML conductivity at coordinate `pos` along an axis of length `len`.
  double pml_sigma(double pos, double len, WallKind lo, WallKind hi, double cell) const {
    const double d = spec_.pml_depth * cell;
    if (spec_.pml_depth == 0) return 0.0;
    const double smax = PmlProfile::sigma_max(d);
    double rho = 0.0;
    if (lo == WallKind::kPml && pos < d) rho = (d - pos) / d;
    if (hi == WallKind::kPml && pos > len - d) rho = std::max(rho, (pos - (len - d)) / d);
    return smax * std::pow(rho, PmlProfile::kOrder);
  }
  double pml_sigma_x(double x) const {
    return pml_sigma(x, spec_.nx * spec_.dx, spec_.wall(Side::kWest), spec_.wall(Side::kEast), spec_.dx);
  }
  double pml_sigma_y(double y) const {
    return pml_sigma(y, spec_.ny * spec_.dy, spec_.wall(Side::kSouth), spec_.wall(Side::kNorth), spec_.dy);
  }
  bool in_pml_zone(int i, int j) const {
    if (spec_.pml_depth == 0) return false;
    const int d = spec_.pml_depth;
    return (spec_.wall(Side::kWest) == WallKind::kPml && i < d) ||
           (spec_.wall(Side::kEast) == WallKind::kPml && i >= spec_.nx - d) ||
           (spec_.wall(Side::kSouth) == WallKind::kPml && j < d) ||
           (spec_.wall(Side::kNorth) == WallKind::kPml && j >= spec_.ny - d);
  }

  void build_coefficients() {
    const int nx = spec_.nx, ny = spec_.ny;
    const double dx = spec_.dx, dy = spec_.dy;
    cax_ = Field2D(nx, ny + 1);
    cbx_ = Field2D(nx, ny + 1);
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (ex_role_(i, j) != EdgeRole::kActive) continue;
        const double eps = materials_.eps_x(i, j);
        const double sig = materials_.sigma_x(i, j) + pml_sigma_y(j * dy);
        const double den = eps / dt_ + 0.5 * sig;
        cax_(i, j) = (eps / dt_ - 0.5 * sig) / den;
        cbx_(i, j) = 1.0 / (den * dy);
      }
    cay_ = Field2D(nx + 1, ny);
    cby_ = Field2D(nx + 1, ny);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        if (ey_role_(i, j) != EdgeRole::kActive) continue;
        const double eps = materials_.eps_y(i, j);
        const double sig = materials_.sigma_y(i, j) + pml_sigma_x(i * dx);
        const double den = eps / dt_ + 0.5 * sig;
        cay_(i, j) = (eps / dt_ - 0.5 * sig) / den;
        cby_(i, j) = 1.0 / (den * dx);
      }
    ch_ = Field2D(nx, ny);
    pml_index_ = Array2D<int>(nx, ny, -1);
    pml_cells_.clear();
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!cell_active_(i, j)) continue;
        const double mu = materials_.mu(i, j);
        if (!in_pml_zone(i, j)) {
          ch_(i, j) = dt_ / mu;
          continue;
        }
        const double ratio = mu / materials_.eps(i, j);
        const double sx = pml_sigma_x((i + 0.5) * dx) * ratio;
        const double sy = pml_sigma_y((j + 0.5) * dy) * ratio;
        PmlCell c{i, j, 0, 0, 0, 0};
        c.dax = (mu / dt_ - 0.5 * sx) / (mu / dt_ + 0.5 * sx);
        c.dbx = 1.0 / (mu / dt_ + 0.5 * sx);
        c.day = (mu / dt_ - 0.5 * sy) / (mu / dt_ + 0.5 * sy);
        c.dby = 1.0 / (mu / dt_ + 0.5 * sy);
        pml_index_(i, j) = static_cast<int>(pml_cells_.size());
        pml_cells_.push_back(c);
      }
  }

  GridSpec spec_;
  MaterialMap materials_;
  double dt_;
  std::vector<CellRect> holes_;

  Array2D<std::uint8_t> cell_active_;
  Array2D<EdgeRole> ex_role_, ey_role_;
  std::vector<EdgeRef> interface_edges_;
  Field2D cax_, cbx_, cay_, cby_, ch_;
  Array2D<int> pml_index_;
  std::vector<PmlCell> pml_cells_;
  mutable std::vector<double> saved_;
};

/// Functional forms of the two half steps.
inline FieldState step_coarse_h(const YeeGrid& grid, FieldState state) {
  grid.step_h(state);
  return state;
}

inline FieldState step_coarse_e(const YeeGrid& grid, FieldState state) {
  grid.step_e(state);
  return state;
}

}  // namespace romfdtd
