#pragma once

// Stand-alone TEz leap-frog loops used as test oracles. Written directly from
// the update equations, sharing no code with the library.

#include <cmath>
#include <functional>
#include <vector>

namespace reference {

inline constexpr double kEps0 = 8.8541878128e-12;
inline constexpr double kMu0 = 1.25663706212e-6;

/// Uniform grid with PEC outer walls and per-cell materials.
struct UniformGrid {
  int nx, ny;
  double dx, dy, dt;
  std::vector<double> eps, sig, mu;
  std::vector<char> pec;
  std::vector<double> ex, ey, hz;

  UniformGrid(int nx_, int ny_, double dx_, double dy_, double dt_)
      : nx(nx_), ny(ny_), dx(dx_), dy(dy_), dt(dt_),
        eps(static_cast<std::size_t>(nx_ * ny_), kEps0), sig(static_cast<std::size_t>(nx_ * ny_), 0.0),
        mu(static_cast<std::size_t>(nx_ * ny_), kMu0), pec(static_cast<std::size_t>(nx_ * ny_), 0),
        ex(static_cast<std::size_t>(nx_ * (ny_ + 1)), 0.0), ey(static_cast<std::size_t>((nx_ + 1) * ny_), 0.0),
        hz(static_cast<std::size_t>(nx_ * ny_), 0.0) {}

  std::size_t c(int i, int j) const { return static_cast<std::size_t>(j * nx + i); }
  double& Ex(int i, int j) { return ex[static_cast<std::size_t>(j * nx + i)]; }
  double& Ey(int i, int j) { return ey[static_cast<std::size_t>(j * (nx + 1) + i)]; }
  double& Hz(int i, int j) { return hz[static_cast<std::size_t>(j * nx + i)]; }

  void step_h() {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        Hz(i, j) += dt / mu[c(i, j)] * ((Ex(i, j + 1) - Ex(i, j)) / dy - (Ey(i + 1, j) - Ey(i, j)) / dx);
  }

  void step_e() {
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (pec[c(i, j - 1)] || pec[c(i, j)]) {
          Ex(i, j) = 0.0;
          continue;
        }
        const double e = 0.5 * (eps[c(i, j - 1)] + eps[c(i, j)]);
        const double s = 0.5 * (sig[c(i, j - 1)] + sig[c(i, j)]);
        Ex(i, j) = ((e / dt - s / 2) * Ex(i, j) + (Hz(i, j) - Hz(i, j - 1)) / dy) / (e / dt + s / 2);
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 1; i < nx; ++i) {
        if (pec[c(i - 1, j)] || pec[c(i, j)]) {
          Ey(i, j) = 0.0;
          continue;
        }
        const double e = 0.5 * (eps[c(i - 1, j)] + eps[c(i, j)]);
        const double s = 0.5 * (sig[c(i - 1, j)] + sig[c(i, j)]);
        Ey(i, j) = ((e / dt - s / 2) * Ey(i, j) + (Hz(i - 1, j) - Hz(i, j)) / dx) / (e / dt + s / 2);
      }
  }
};

/// Isolated fine region driven by hanging H on its boundary. Boundary edges
/// see only the half cell inside the region.
struct FineRegion {
  int nx, ny;
  double dx, dy, dt;
  std::vector<double> eps, sig, mu;
  std::vector<double> ex, ey, hz;

  FineRegion(int nx_, int ny_, double dx_, double dy_, double dt_)
      : nx(nx_), ny(ny_), dx(dx_), dy(dy_), dt(dt_),
        eps(static_cast<std::size_t>(nx_ * ny_), kEps0), sig(static_cast<std::size_t>(nx_ * ny_), 0.0),
        mu(static_cast<std::size_t>(nx_ * ny_), kMu0),
        ex(static_cast<std::size_t>(nx_ * (ny_ + 1)), 0.0), ey(static_cast<std::size_t>((nx_ + 1) * ny_), 0.0),
        hz(static_cast<std::size_t>(nx_ * ny_), 0.0) {}

  bool in(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
  std::size_t c(int i, int j) const { return static_cast<std::size_t>(j * nx + i); }
  double& Ex(int i, int j) { return ex[static_cast<std::size_t>(j * nx + i)]; }
  double& Ey(int i, int j) { return ey[static_cast<std::size_t>(j * (nx + 1) + i)]; }
  double& Hz(int i, int j) { return hz[static_cast<std::size_t>(j * nx + i)]; }

  /// u_s[i], u_n[i] (size nx) and u_w[j], u_e[j] (size ny): hanging H at n+1/2.
  void step(const std::vector<double>& u_s, const std::vector<double>& u_n, const std::vector<double>& u_w,
            const std::vector<double>& u_e) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        Hz(i, j) += dt / mu[c(i, j)] * ((Ex(i, j + 1) - Ex(i, j)) / dy - (Ey(i + 1, j) - Ey(i, j)) / dx);
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double a = 0.0, b = 0.0;
        for (int jj = j - 1; jj <= j; ++jj)
          if (in(i, jj)) {
            a += 0.5 * dy * eps[c(i, jj)];
            b += 0.5 * dy * sig[c(i, jj)];
          }
        const double top = j < ny ? Hz(i, j) : u_n[static_cast<std::size_t>(i)];
        const double bottom = j > 0 ? Hz(i, j - 1) : u_s[static_cast<std::size_t>(i)];
        Ex(i, j) = ((a / dt - b / 2) * Ex(i, j) + (top - bottom)) / (a / dt + b / 2);
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        double a = 0.0, b = 0.0;
        for (int ii = i - 1; ii <= i; ++ii)
          if (in(ii, j)) {
            a += 0.5 * dx * eps[c(ii, j)];
            b += 0.5 * dx * sig[c(ii, j)];
          }
        const double left = i > 0 ? Hz(i - 1, j) : u_w[static_cast<std::size_t>(j)];
        const double right = i < nx ? Hz(i, j) : u_e[static_cast<std::size_t>(j)];
        Ey(i, j) = ((a / dt - b / 2) * Ey(i, j) + (left - right)) / (a / dt + b / 2);
      }
  }
};

}  // namespace reference
