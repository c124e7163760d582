#pragma once

// Scenario description, the coupled time march (coarse grid + embedded
// reduced models), probe records and post-processing.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "romfdtd/cfl_extension.hpp"
#include "romfdtd/coupling.hpp"
#include "romfdtd/error.hpp"
#include "romfdtd/fine_system.hpp"
#include "romfdtd/mor.hpp"
#include "romfdtd/yee_grid.hpp"

namespace romfdtd {

enum class ShapeKind { kRect, kCircle };

/// Material object in physical coordinates (meters from the grid's lower-left
/// corner). Later objects override earlier ones.
struct MaterialObject {
  ShapeKind shape = ShapeKind::kRect;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // rectangle corners
  double cx = 0.0, cy = 0.0, radius = 0.0;        // circle
  Material material;

  bool contains(double x, double y) const {
    if (shape == ShapeKind::kRect) return x >= x0 && x <= x1 && y >= y0 && y <= y1;
    const double ddx = x - cx, ddy = y - cy;
    return ddx * ddx + ddy * ddy <= radius * radius;
  }
  bool operator==(const MaterialObject&) const = default;
};

struct MaterialLayout {
  Material background;
  std::vector<MaterialObject> objects;
  bool operator==(const MaterialLayout&) const = default;
};

/// Samples the layout at cell centres of an nx x ny mesh whose lower-left
/// corner sits at (ox, oy).
inline MaterialMap rasterize(const MaterialLayout& layout, int nx, int ny, double dx, double dy, double ox = 0.0,
                             double oy = 0.0) {
  MaterialMap m(nx, ny, layout.background);
  if (layout.objects.empty()) return m;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = ox + (i + 0.5) * dx, y = oy + (j + 0.5) * dy;
      for (auto it = layout.objects.rbegin(); it != layout.objects.rend(); ++it)
        if (it->contains(x, y)) {
          m.set(i, j, it->material);
          break;
        }
    }
  return m;
}

struct MorConfig {
  bool enabled = true;
  int order = 0;
  std::optional<double> expansion_hz;
  bool operator==(const MorConfig&) const = default;
};

struct ExtensionConfig {
  bool enabled = false;
  double factor = 1.0;
  double margin = 1e-6;
  bool operator==(const ExtensionConfig&) const = default;
};

struct RegionConfig {
  int i0 = 0;
  int j0 = 0;
  int width = 1;
  int height = 1;
  int refinement = 2;
  std::array<bool, 4> pec_backed = {false, false, false, false};
  MorConfig mor;
  ExtensionConfig extension;
  bool operator==(const RegionConfig&) const = default;
};

struct Scenario {
  GridSpec grid;
  MaterialLayout materials;
  std::vector<RegionConfig> regions;
  std::vector<SourceSpec> sources;
  std::vector<ProbeSpec> probes;
  long steps = 0;
  double cfl_number = 0.99;  // relative to the unextended reference limit
  bool operator==(const Scenario&) const = default;
};

struct SimulationOptions {
  bool verify_passivity = true;
  std::optional<double> dt;  // overrides the CFL-number policy
  bool allow_unit_refinement = false;
  bool force_sparse_coupling = false;
  KrylovExpansion expansion = KrylovExpansion::kShifted;
  int max_full_order = 6000;  // largest unreduced region embedded densely
};

struct RunRecord {
  double dt = 0.0;
  long steps = 0;
  std::string scheme;
  std::vector<std::string> probe_ids;
  std::vector<std::vector<double>> probes;  // [probe][step], sampled after each step
  std::vector<double> source;               // waveform of the first source at (n+1/2) dt
  double source_bandwidth = 0.0;

  double probe_time(long n) const { return static_cast<double>(n + 1) * dt; }
  double source_time(long n) const { return (static_cast<double>(n) + 0.5) * dt; }
};

struct RegionInfo {
  int full_order = 0;
  int reduced_order = 0;
  int q1 = 0;
  int q2 = 0;
  int interface_edges = 0;
  int ports = 0;
  double fine_cfl = 0.0;
  double model_limit = 0.0;  // 2 / max s_k of the embedded model
  bool breakdown = false;
};

class Simulation {
 public:
  explicit Simulation(const Scenario& sc, const SimulationOptions& opt = {}) : scenario_(sc), options_(opt) {
    const GridSpec& g = sc.grid;
    g.validate();
    MaterialMap coarse = rasterize(sc.materials, g.nx, g.ny, g.dx, g.dy);
    coarse.validate_passive();
    coarse_limit_ = cfl_limit(g.dx, g.dy, coarse);

    std::vector<FineRegionSpec> specs;
    std::vector<CellRect> holes;
    reference_limit_ = coarse_limit_;
    for (const RegionConfig& rc : sc.regions) {
      FineRegionSpec fs;
      fs.i0 = rc.i0;
      fs.j0 = rc.j0;
      fs.width = rc.width;
      fs.height = rc.height;
      fs.refinement = rc.refinement;
      fs.coarse_dx = g.dx;
      fs.coarse_dy = g.dy;
      fs.pec_backed = rc.pec_backed;
      fs.validate(opt.allow_unit_refinement);
      fs.materials = rasterize(sc.materials, fs.fine_nx(), fs.fine_ny(), fs.fine_dx(), fs.fine_dy(), rc.i0 * g.dx,
                               rc.j0 * g.dy);
      fs.materials.validate();
      const double fine = cfl_limit(fs.fine_dx(), fs.fine_dy(), fs.materials);
      reference_limit_ = std::min(reference_limit_, fine);
      specs.push_back(std::move(fs));
      holes.push_back(specs.back().rect());
    }
    if (opt.dt) {
      dt_ = *opt.dt;
    } else {
      if (!(sc.cfl_number > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cfl_number must be positive");
      dt_ = sc.cfl_number * reference_limit_;
    }
    if (!(dt_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "time step must be positive");
    grid_.emplace(g, std::move(coarse), dt_, holes);
    state_ = grid_->make_state();

    double max_bw = 0.0;
    for (const SourceSpec& s : sc.sources) {
      grid_->validate_source(s);
      max_bw = std::max(max_bw, s.bandwidth);
      pulses_.push_back(s.pulse());
    }
    for (const ProbeSpec& p : sc.probes) grid_->validate_probe(p);

    scheme_limit_ = coarse_limit_;
    for (std::size_t r = 0; r < specs.size(); ++r) build_region(sc.regions[r], specs[r], max_bw);
    if (opt.verify_passivity && dt_ > coarse_limit_)
      throw Error(ErrorCode::kInstability, "time step exceeds the coarse-grid CFL limit");
  }

  double dt() const { return dt_; }
  double coarse_limit() const { return coarse_limit_; }
  /// min(coarse limit, fine limit of every region) before any extension.
  double reference_limit() const { return reference_limit_; }
  /// min(coarse limit, limit of every embedded model).
  double scheme_limit() const { return scheme_limit_; }
  const YeeGrid& grid() const { return *grid_; }
  const FieldState& state() const { return state_; }
  FieldState& state() { return state_; }
  const Scenario& scenario() const { return scenario_; }
  std::size_t region_count() const { return regions_.size(); }
  const RegionInfo& region_info(std::size_t r) const { return regions_[r].info; }
  const ReducedSystem& region_model(std::size_t r) const { return regions_[r].rom; }
  const InterfaceSpec& region_interface(std::size_t r) const { return regions_[r].iface; }
  const CoupledUpdate& region_update(std::size_t r) const { return regions_[r].cu; }
  const Eigen::VectorXd& region_state(std::size_t r) const { return regions_[r].z; }

  /// One full step: coarse H, interface updates, coarse E.
  void step() { advance(true); }

  /// Total discrete energy (J/m): coarse grid plus every embedded model.
  double energy() const {
    double w = grid_->energy(state_);
    for (const auto& reg : regions_) {
      const Eigen::VectorXd x = reg.z.tail(reg.cu.n_x());
      w += dt_ * x.dot(reg.r_at_dt * x);
    }
    return w;
  }

  double max_abs_field() const {
    double m = 0.0;
    for (double v : state_.ex.data()) m = std::max(m, std::abs(v));
    for (double v : state_.ey.data()) m = std::max(m, std::abs(v));
    for (double v : state_.hz.data()) m = std::max(m, std::abs(v));
    return m;
  }

  double probe(const ProbeSpec& p) const { return grid_->probe(state_, p); }

  RunRecord run(long steps = -1) {
    const long n = steps < 0 ? scenario_.steps : steps;
    RunRecord rec;
    rec.dt = dt_;
    rec.steps = n;
    rec.scheme = regions_.empty() ? "fdtd" : "embedded";
    rec.source_bandwidth = scenario_.sources.empty() ? 0.0 : scenario_.sources.front().bandwidth;
    for (const auto& p : scenario_.probes) rec.probe_ids.push_back(p.id);
    rec.probes.assign(scenario_.probes.size(), std::vector<double>());
    for (auto& v : rec.probes) v.reserve(static_cast<std::size_t>(n));
    rec.source.reserve(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
      const long step_index = state_.step;
      rec.source.push_back(scenario_.sources.empty() ? 0.0 : source_value(0, (step_index + 0.5) * dt_));
      advance(true);
      for (std::size_t p = 0; p < scenario_.probes.size(); ++p) rec.probes[p].push_back(probe(scenario_.probes[p]));
    }
    return rec;
  }

  /// Number of entries in the packed scheme state.
  int packed_size() const { return static_cast<int>(layout().size()); }

  /// Packed state: active and interface coarse E, active Hz, PML split
  /// parts, then each region's reduced state.
  Eigen::VectorXd pack() const {
    const auto& lay = layout();
    Eigen::VectorXd v(static_cast<Eigen::Index>(lay.size()));
    for (std::size_t k = 0; k < lay.size(); ++k) v[static_cast<Eigen::Index>(k)] = read(lay[k]);
    return v;
  }
  void unpack(const Eigen::VectorXd& v) {
    const auto& lay = layout();
    if (v.size() != static_cast<Eigen::Index>(lay.size()))
      throw Error(ErrorCode::kDimensionMismatch, "packed state has the wrong size");
    state_ = grid_->make_state();
    for (auto& reg : regions_) reg.z.setZero();
    for (std::size_t k = 0; k < lay.size(); ++k) write(lay[k], v[static_cast<Eigen::Index>(k)]);
    for (auto& reg : regions_)
      for (int k = 0; k < reg.cu.n_y(); ++k) reg.z[k] = YeeGrid::edge_value(state_, reg.iface.edges[static_cast<std::size_t>(k)].edge);
  }

  /// Explicit one-step operator of the whole scheme with sources off.
  Eigen::MatrixXd amplification_matrix(int max_size = 20000) {
    const int n = packed_size();
    if (n > max_size) throw Error(ErrorCode::kTooLarge, "scheme state too large for explicit assembly");
    const FieldState saved = state_;
    std::vector<Eigen::VectorXd> saved_z;
    for (const auto& reg : regions_) saved_z.push_back(reg.z);
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < n; ++c) {
      e.setZero();
      e[c] = 1.0;
      unpack(e);
      advance(false);
      a.col(c) = pack();
    }
    state_ = saved;
    for (std::size_t r = 0; r < regions_.size(); ++r) regions_[r].z = saved_z[r];
    return a;
  }

 private:
  struct Region {
    FineRegionSpec spec;
    InterfaceSpec iface;
    ReducedSystem rom;
    CoupledUpdate cu;
    Eigen::MatrixXd r_at_dt;
    Eigen::VectorXd z, z_next, h;
    RegionInfo info;
  };

  enum class SlotKind : std::uint8_t { kEx, kEy, kHz, kPml, kRom };
  struct Slot {
    SlotKind kind;
    int a;
    int b;
  };

  void build_region(const RegionConfig& rc, const FineRegionSpec& fs, double max_bw) {
    Region reg;
    reg.spec = fs;
    DescriptorSystem sys = assemble_fine_system(fs, dt_, options_.allow_unit_refinement);
    reg.info.full_order = sys.n();
    reg.info.fine_cfl = cfl_limit(fs.fine_dx(), fs.fine_dy(), fs.materials);
    Projection v;
    if (rc.mor.enabled) {
      ProjectionOptions po;
      po.expansion = options_.expansion;
      po.expansion_hz = rc.mor.expansion_hz;
      if (!po.expansion_hz && max_bw > 0.0) po.expansion_hz = 0.1 * max_bw;
      const int q = rc.mor.order > 0 ? std::min(rc.mor.order, sys.n()) : sys.n();
      v = build_projection(sys, q, po);
    } else {
      if (sys.n() > options_.max_full_order)
        throw Error(ErrorCode::kTooLarge, "fine region too large to embed without model order reduction");
      v = Projection::make_identity(sys);
    }
    reg.info.breakdown = v.breakdown;
    reg.rom = reduce(sys, v);
    reg.rom.basis = Projection{};  // the basis is not needed for marching
    reg.rom.basis.identity = v.identity;
    if (rc.extension.enabled) {
      if (!(rc.extension.factor >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "extension factor must be >= 1");
      reg.rom = extend_cfl(reg.rom, rc.extension.factor * reg.info.fine_cfl, rc.extension.margin);
    }
    reg.info.model_limit = reduced_cfl_limit(reg.rom);
    reg.info.reduced_order = reg.rom.n();
    reg.info.q1 = reg.rom.q1();
    reg.info.q2 = reg.rom.q2();
    scheme_limit_ = std::min(scheme_limit_, reg.info.model_limit);
    reg.iface = build_interface(*grid_, fs, sys.ports);
    reg.info.interface_edges = reg.iface.n_edges();
    reg.info.ports = reg.iface.n_ports();
    reg.cu = assemble_coupled(reg.rom, reg.iface, dt_, options_.verify_passivity, options_.force_sparse_coupling);
    ReducedSystem at = reg.rom;
    at.dt = dt_;
    reg.r_at_dt = at.r_matrix();
    reg.z = Eigen::VectorXd::Zero(reg.cu.size());
    reg.z_next = reg.z;
    reg.h = Eigen::VectorXd::Zero(reg.cu.n_y());
    regions_.push_back(std::move(reg));
    layout_.clear();
  }

  double source_value(std::size_t s, double t) const {
    return scenario_.sources[s].amplitude * pulses_[s](t);
  }

  void advance(bool with_sources) {
    const double th = (static_cast<double>(state_.step) + 0.5) * dt_;
    grid_->step_h(state_);
    if (with_sources)
      for (std::size_t s = 0; s < scenario_.sources.size(); ++s) {
        const SourceSpec& src = scenario_.sources[s];
        if (src.kind == SourceKind::kHzPoint) grid_->add_hz(state_, src.i, src.j, source_value(s, th));
      }
    for (auto& reg : regions_) {
      for (int k = 0; k < reg.cu.n_y(); ++k) {
        const InterfaceEdge& e = reg.iface.edges[static_cast<std::size_t>(k)];
        reg.h[k] = state_.hz(e.out_i, e.out_j);
      }
      reg.cu.step(reg.z, reg.h, reg.z_next);
      std::swap(reg.z, reg.z_next);
      for (int k = 0; k < reg.cu.n_y(); ++k)
        YeeGrid::edge_value(state_, reg.iface.edges[static_cast<std::size_t>(k)].edge) = reg.z[k];
    }
    grid_->step_e(state_);
    if (with_sources)
      for (std::size_t s = 0; s < scenario_.sources.size(); ++s) {
        const SourceSpec& src = scenario_.sources[s];
        if (src.kind != SourceKind::kJyLine) continue;
        const double j = source_value(s, th);
        for (int row = src.j; row < src.j_end; ++row) grid_->apply_current_ey(state_, src.i, row, j);
      }
    ++state_.step;
    if (state_.step % 1000 == 0) check_finite();
  }

  void check_finite() const {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    bool ok = finite(state_.ex.data()) && finite(state_.ey.data()) && finite(state_.hz.data());
    for (const auto& reg : regions_) ok = ok && reg.z.allFinite();
    if (!ok) throw Error(ErrorCode::kInstability, "non-finite field detected at step " + std::to_string(state_.step));
  }

  const std::vector<Slot>& layout() const {
    if (!layout_.empty()) return layout_;
    const GridSpec& g = grid_->spec();
    auto e_live = [](EdgeRole r) { return r == EdgeRole::kActive || r == EdgeRole::kInterface; };
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (e_live(grid_->ex_role(i, j))) layout_.push_back({SlotKind::kEx, i, j});
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i <= g.nx; ++i)
        if (e_live(grid_->ey_role(i, j))) layout_.push_back({SlotKind::kEy, i, j});
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (grid_->cell_active(i, j)) layout_.push_back({SlotKind::kHz, i, j});
    for (std::size_t p = 0; p < grid_->pml_cell_count(); ++p) layout_.push_back({SlotKind::kPml, static_cast<int>(p), 0});
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      const auto& reg = regions_[r];
      const int off = reg.cu.n_y() + reg.cu.n_p();
      for (int k = 0; k < reg.cu.n_x(); ++k) layout_.push_back({SlotKind::kRom, static_cast<int>(r), off + k});
    }
    return layout_;
  }
  double read(const Slot& s) const {
    switch (s.kind) {
      case SlotKind::kEx: return state_.ex(s.a, s.b);
      case SlotKind::kEy: return state_.ey(s.a, s.b);
      case SlotKind::kHz: return state_.hz(s.a, s.b);
      case SlotKind::kPml: return state_.pml_hzx[static_cast<std::size_t>(s.a)];
      case SlotKind::kRom: return regions_[static_cast<std::size_t>(s.a)].z[s.b];
    }
    return 0.0;
  }
  void write(const Slot& s, double v) {
    switch (s.kind) {
      case SlotKind::kEx: state_.ex(s.a, s.b) = v; break;
      case SlotKind::kEy: state_.ey(s.a, s.b) = v; break;
      case SlotKind::kHz: state_.hz(s.a, s.b) = v; break;
      case SlotKind::kPml: state_.pml_hzx[static_cast<std::size_t>(s.a)] = v; break;
      case SlotKind::kRom: regions_[static_cast<std::size_t>(s.a)].z[s.b] = v; break;
    }
  }

  Scenario scenario_;
  SimulationOptions options_;
  double coarse_limit_ = 0.0;
  double reference_limit_ = 0.0;
  double scheme_limit_ = 0.0;
  double dt_ = 0.0;
  std::optional<YeeGrid> grid_;
  FieldState state_;
  std::vector<GaussianPulse> pulses_;
  std::vector<Region> regions_;
  mutable std::vector<Slot> layout_;
};

inline RunRecord run(const Scenario& sc, const SimulationOptions& opt = {}) {
  Simulation sim(sc, opt);
  return sim.run();
}

/// Spectral radius of the scheme's one-step operator.
namespace detail {

/// Diagonal similarity by powers of two equalizing row and column norms.
/// Field and model states differ by many orders of magnitude, which would
/// otherwise spoil the accuracy of eigenvalues near the unit circle.
inline void balance(Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double c = a.col(k).cwiseAbs().sum() - std::abs(a(k, k));
      const double r = a.row(k).cwiseAbs().sum() - std::abs(a(k, k));
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      double cs = c;
      while (cs < r / 2.0) { cs *= 2.0; f *= 2.0; }
      while (cs >= r * 2.0) { cs /= 2.0; f /= 2.0; }
      if ((cs + r / f) < 0.95 * (c + r)) {
        converged = false;
        a.col(k) *= f;
        a.row(k) /= f;
      }
    }
  }
}

}  // namespace detail

inline double amplification_spectral_radius(const Scenario& sc, const SimulationOptions& opt = {},
                                            int max_size = 20000) {
  Simulation sim(sc, opt);
  Eigen::MatrixXd a = sim.amplification_matrix(max_size);
  detail::balance(a);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kSingular, "eigenvalue computation failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Spectra

struct Spectrum {
  std::vector<double> freq;
  std::vector<std::complex<double>> value;
};

struct DbSpectrum {
  std::vector<double> freq;
  std::vector<double> db;
};

struct SpectrumOptions {
  int bins = 2048;
  double f_max = 0.0;  // 0: 1.2 x source bandwidth
  bool window = true;  // right-half Hann taper cos^2(pi t / 2T)
};

namespace detail {

/// DFT of samples x[n] taken at t0 + n dt, evaluated at `freq`.
inline std::vector<std::complex<double>> dft(const std::vector<double>& x, double t0, double dt,
                                             const std::vector<double>& freq, bool window) {
  const std::size_t n = x.size();
  const double total = static_cast<double>(n) * dt;
  std::vector<double> w(x);
  if (window)
    for (std::size_t k = 0; k < n; ++k) {
      const double c = std::cos(kPi * (t0 + static_cast<double>(k) * dt) / (2.0 * (t0 + total)));
      w[k] *= c * c;
    }
  std::vector<std::complex<double>> out(freq.size());
  for (std::size_t b = 0; b < freq.size(); ++b) {
    const double omega = 2.0 * kPi * freq[b];
    const std::complex<double> rot = std::polar(1.0, -omega * dt);
    std::complex<double> ph = std::polar(1.0, -omega * t0);
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += w[k] * ph;
      ph *= rot;
      if ((k & 1023u) == 1023u) ph = std::polar(1.0, -omega * (t0 + static_cast<double>(k + 1) * dt));
    }
    out[b] = acc * dt;
  }
  return out;
}

inline std::vector<double> frequency_grid(const RunRecord& rec, const SpectrumOptions& opt) {
  if (opt.bins < 2) throw Error(ErrorCode::kInvalidArgument, "at least two frequency bins are required");
  const double fmax = opt.f_max > 0.0 ? opt.f_max : 1.2 * rec.source_bandwidth;
  if (!(fmax > 0.0)) throw Error(ErrorCode::kInvalidArgument, "frequency range is empty");
  std::vector<double> f(static_cast<std::size_t>(opt.bins));
  for (int b = 0; b < opt.bins; ++b) f[static_cast<std::size_t>(b)] = fmax * b / (opt.bins - 1);
  return f;
}

}  // namespace detail

/// Probe spectrum divided by source spectrum.
inline Spectrum frequency_response(const RunRecord& rec, std::size_t probe = 0, const SpectrumOptions& opt = {}) {
  if (probe >= rec.probes.size()) throw Error(ErrorCode::kInvalidArgument, "probe index out of range");
  if (rec.source.size() != rec.probes[probe].size() || rec.source.empty())
    throw Error(ErrorCode::kDimensionMismatch, "record series lengths differ");
  Spectrum s;
  s.freq = detail::frequency_grid(rec, opt);
  const auto p = detail::dft(rec.probes[probe], rec.dt, rec.dt, s.freq, opt.window);
  const auto src = detail::dft(rec.source, 0.5 * rec.dt, rec.dt, s.freq, opt.window);
  double smax = 0.0;
  for (const auto& v : src) smax = std::max(smax, std::abs(v));
  s.value.resize(s.freq.size());
  for (std::size_t b = 0; b < s.freq.size(); ++b) {
    if (!(std::abs(src[b]) > 1e-12 * smax)) throw Error(ErrorCode::kZeroSpectrum, "source spectrum vanishes in band");
    s.value[b] = p[b] / src[b];
  }
  return s;
}

/// Plain spectrum of a probe series (no source normalization).
inline Spectrum probe_spectrum(const RunRecord& rec, std::size_t probe = 0, const SpectrumOptions& opt = {}) {
  if (probe >= rec.probes.size()) throw Error(ErrorCode::kInvalidArgument, "probe index out of range");
  Spectrum s;
  s.freq = detail::frequency_grid(rec, opt);
  s.value = detail::dft(rec.probes[probe], rec.dt, rec.dt, s.freq, opt.window);
  return s;
}

/// Local maxima of |value| in [f_lo, f_hi] above `rel_height` x the band
/// maximum, refined by parabolic interpolation.
inline std::vector<double> find_peaks(const Spectrum& s, double f_lo, double f_hi, double rel_height = 0.05) {
  std::vector<double> mag(s.value.size());
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(s.value[k]);
  double band_max = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k)
    if (s.freq[k] >= f_lo && s.freq[k] <= f_hi) band_max = std::max(band_max, mag[k]);
  std::vector<double> peaks;
  for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
    if (s.freq[k] < f_lo || s.freq[k] > f_hi) continue;
    if (!(mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])) continue;
    if (mag[k] < rel_height * band_max) continue;
    const double a = mag[k - 1], b = mag[k], c = mag[k + 1];
    const double den = a - 2.0 * b + c;
    const double off = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
    const double df = s.freq[k + 1] - s.freq[k];
    peaks.push_back(s.freq[k] + off * df);
  }
  return peaks;
}

/// 10 log10(|DFT(with - reference)|^2 / |DFT(reference)|^2) at one probe.
inline DbSpectrum reflection_spectrum(const RunRecord& with_obj, const RunRecord& reference, std::size_t probe = 0,
                                      const SpectrumOptions& opt = {}) {
  if (with_obj.dt != reference.dt || with_obj.steps != reference.steps || with_obj.probes.size() != reference.probes.size() ||
      probe >= reference.probes.size() || with_obj.probes[probe].size() != reference.probes[probe].size())
    throw Error(ErrorCode::kDimensionMismatch, "runs do not share time step, length and probes");
  RunRecord diff = reference;
  for (std::size_t k = 0; k < diff.probes[probe].size(); ++k)
    diff.probes[probe][k] = with_obj.probes[probe][k] - reference.probes[probe][k];
  const Spectrum refl = probe_spectrum(diff, probe, opt);
  const Spectrum inc = probe_spectrum(reference, probe, opt);
  DbSpectrum out;
  out.freq = refl.freq;
  out.db.resize(refl.freq.size());
  for (std::size_t b = 0; b < refl.freq.size(); ++b) {
    const double num = std::norm(refl.value[b]);
    const double den = std::norm(inc.value[b]);
    if (!(den > 0.0)) throw Error(ErrorCode::kZeroSpectrum, "incident spectrum vanishes in band");
    out.db[b] = num > 0.0 ? 10.0 * std::log10(num / den) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference transforms

/// Same scenario meshed uniformly at r times the coarse resolution, with no
/// embedded regions. Time step: min(cfl_number, 0.99) of the fine limit;
/// step count chosen to cover the same physical time.
inline Scenario make_all_fine(const Scenario& sc, int r, double coarse_dt) {
  if (r < 1) throw Error(ErrorCode::kInvalidArgument, "refinement must be positive");
  Scenario f = sc;
  f.regions.clear();
  f.grid.nx = sc.grid.nx * r;
  f.grid.ny = sc.grid.ny * r;
  f.grid.dx = sc.grid.dx / r;
  f.grid.dy = sc.grid.dy / r;
  f.grid.pml_depth = sc.grid.pml_depth * r;
  const int mid = r % 2 == 1 ? (r - 1) / 2 : r / 2;
  for (auto& s : f.sources) {
    if (s.kind == SourceKind::kHzPoint) {
      s.i = s.i * r + mid;
      s.j = s.j * r + mid;
    } else {
      s.i *= r;
      s.j *= r;
      s.j_end *= r;
    }
  }
  for (auto& p : f.probes) {
    switch (p.component) {
      case ProbeComponent::kHz:
        p.i = p.i * r + mid;
        p.j = p.j * r + mid;
        break;
      case ProbeComponent::kEx:
        p.i = p.i * r + mid;
        p.j *= r;
        break;
      case ProbeComponent::kEy:
        p.i *= r;
        p.j = p.j * r + mid;
        break;
      case ProbeComponent::kEyLine:
        p.i *= r;
        p.j *= r;
        p.j_end *= r;
        break;
    }
  }
  const MaterialMap fm = rasterize(f.materials, f.grid.nx, f.grid.ny, f.grid.dx, f.grid.dy);
  const double limit = cfl_limit(f.grid.dx, f.grid.dy, fm);
  f.cfl_number = std::min(sc.cfl_number, 0.99);
  const double dt = f.cfl_number * limit;
  f.steps = static_cast<long>(std::ceil(static_cast<double>(sc.steps) * coarse_dt / dt));
  return f;
}

/// Same scenario with every embedded region removed (coarse mesh only),
/// covering the same physical time.
inline Scenario make_all_coarse(const Scenario& sc, double original_dt) {
  Scenario c = sc;
  c.regions.clear();
  const MaterialMap cm = rasterize(c.materials, c.grid.nx, c.grid.ny, c.grid.dx, c.grid.dy);
  c.cfl_number = std::min(sc.cfl_number, 0.99);
  const double dt = c.cfl_number * cfl_limit(c.grid.dx, c.grid.dy, cm);
  c.steps = static_cast<long>(std::ceil(static_cast<double>(sc.steps) * original_dt / dt));
  return c;
}

}  // namespace romfdtd
