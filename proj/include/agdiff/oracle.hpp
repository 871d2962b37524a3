#pragma once

// Reference solutions: a conservative explicit finite-volume solver for
//   d_t rho = d_x(rho d_x(K * rho) + d_x phi(rho))
// on the periodic grid, Barenblatt cell averages, and L1 comparison of
// particle trajectories against reference snapshots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "agdiff/barenblatt.hpp"
#include "agdiff/error.hpp"
#include "agdiff/kernels.hpp"
#include "agdiff/nonlinearity.hpp"
#include "agdiff/parallel.hpp"
#include "agdiff/particle_state.hpp"

namespace agdiff {

struct FVConfig {
  std::size_t cell_count = 1024;
  double cfl = 0.4;
  double t_end = 1.0;
  std::vector<double> snapshot_times; // besides t_end; must lie in [0, t_end]
};

struct FVSnapshot {
  double t = 0.0;
  GridDensity density;
};

struct FVResult {
  GridDensity final_density;
  std::vector<FVSnapshot> snapshots; // snapshot_times then t_end, ascending, deduplicated
  std::size_t steps = 0;
  double min_value = 0.0;            // smallest cell value seen over the run
};

namespace detail {

/// D[d] = K(wrap((d+1) h)) - K(wrap(d h)) so that the face velocity between
/// cells i and i+1 is -sum_j rho_j D[(i - j) mod M].
inline std::vector<double> fv_velocity_stencil(const Kernel& kernel, double length, std::size_t m) {
  const double h = length / static_cast<double>(m);
  std::vector<double> kv(m);
  for (std::size_t d = 0; d < m; ++d) kv[d] = kernel.eval(wrap(h * static_cast<double>(d), length));
  std::vector<double> stencil(m);
  for (std::size_t d = 0; d < m; ++d) stencil[d] = kv[(d + 1) % m] - kv[d];
  return stencil;
}

} // namespace detail

/// Explicit Euler, upwind transport with exact face velocities of the
/// cell-average convolution, central diffusion flux of phi. The step
///   dt = cfl / (2 max|v| / h + 2 a / h^2),  a = max secant slope of phi,
/// keeps every cell nonnegative for cfl <= 1.
inline FVResult fv_solve(const GridDensity& rho0, const Kernel& kernel, const Nonlinearity& nl, const FVConfig& cfg) {
  require(cfg.cell_count >= 16, "oracle cell count must be at least 16");
  require(cfg.cfl > 0.0 && cfg.cfl <= 1.0, "oracle.cfl must lie in (0, 1]");
  require(cfg.t_end > 0.0, "oracle t_end must be positive");
  for (double v : rho0.values) require(v >= 0.0 && std::isfinite(v), "oracle initial density must be nonnegative");
  require(rho0.mass() > 0.0, "oracle initial density must carry mass");

  const std::size_t m = cfg.cell_count;
  const double L = rho0.length;
  const double h = L / static_cast<double>(m);
  std::vector<double> rho = remap(rho0, m).values;
  const bool transport = !kernel.is_zero();
  const std::vector<double> stencil = transport ? detail::fv_velocity_stencil(kernel, L, m) : std::vector<double>{};

  std::vector<double> targets;
  for (double t : cfg.snapshot_times) {
    require(t >= 0.0 && t <= cfg.t_end * (1.0 + 1e-12), "oracle snapshot times must lie in [0, t_end]");
    targets.push_back(std::min(t, cfg.t_end));
  }
  targets.push_back(cfg.t_end);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end(),
                            [&](double a, double b) { return std::abs(a - b) <= 1e-12 * cfg.t_end; }),
                targets.end());

  FVResult res;
  res.min_value = *std::min_element(rho.begin(), rho.end());
  const double dt_floor = 1e-14 * cfg.t_end;
  const double peak0 = *std::max_element(rho.begin(), rho.end());

  // cells [lo, hi] hold all nonzero values while the support stays off the
  // grid ends; `full` switches to the whole periodic grid for good
  std::size_t lo = 0, hi = m - 1;
  bool full = true;
  {
    auto first = std::find_if(rho.begin(), rho.end(), [](double v) { return v != 0.0; });
    auto last = std::find_if(rho.rbegin(), rho.rend(), [](double v) { return v != 0.0; });
    lo = static_cast<std::size_t>(first - rho.begin());
    hi = m - 1 - static_cast<std::size_t>(last - rho.rbegin());
    full = lo < 2 || hi + 4 > m;
  }

  std::vector<double> phi(m), vel(m, 0.0), flux(m, 0.0);
  double t = 0.0;
  std::size_t next = 0;
  while (next < targets.size() && targets[next] <= 0.0) {
    res.snapshots.push_back({0.0, GridDensity(L, rho)});
    ++next;
  }
  while (next < targets.size()) {
    // faces f = i couple cells i and i+1 (mod m)
    const std::size_t f_lo = full ? 0 : lo - 2;
    const std::size_t f_hi = full ? m - 1 : hi + 1;
    const std::size_t c_lo = full ? 0 : lo - 1;
    const std::size_t c_hi = full ? m - 1 : hi + 1;
    for (std::size_t i = f_lo; i <= (full ? m - 1 : hi + 2); ++i) phi[i] = nl.phi(rho[i]);

    double vmax = 0.0;
    if (transport) {
      const std::size_t j_lo = full ? 0 : lo;
      const std::size_t j_hi = full ? m - 1 : hi;
      parallel_for(f_hi - f_lo + 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t q = b; q < e; ++q) {
          const std::size_t i = f_lo + q;
          double s = 0.0;
          for (std::size_t j = j_lo; j <= j_hi; ++j) s += rho[j] * stencil[(i + m - j) % m];
          vel[i] = -s;
        }
      }, 64);
      for (std::size_t i = f_lo; i <= f_hi; ++i) vmax = std::max(vmax, std::abs(vel[i]));
    }
    double a = 0.0;
    for (std::size_t i = f_lo; i <= f_hi; ++i) {
      const std::size_t r = (i + 1) % m;
      const double dr = rho[r] - rho[i];
      const double slope = dr != 0.0 ? (phi[r] - phi[i]) / dr : nl.phi_prime(rho[i]);
      a = std::max(a, std::abs(slope));
    }
    double dt = cfg.cfl / (2.0 * vmax / h + 2.0 * a / (h * h) + 1e-300);
    if (dt < dt_floor)
      throw Error("oracle time step underflow at t=" + format_double(t) + ": dt=" + format_double(dt) +
                  " (max|v|=" + format_double(vmax) + ", max phi slope=" + format_double(a) + ")");
    bool landing = false;
    if (t + dt >= targets[next] - 1e-13 * cfg.t_end) {
      dt = targets[next] - t;
      landing = true;
    }

    for (std::size_t i = f_lo; i <= f_hi; ++i) {
      const std::size_t r = (i + 1) % m;
      const double v = transport ? vel[i] : 0.0;
      const double up = v > 0.0 ? rho[i] : rho[r];
      flux[i] = up * v - (phi[r] - phi[i]) / h;
    }
    const double ratio = dt / h;
    if (full) {
      const double f_prev = flux[m - 1];
      double carry = f_prev;
      for (std::size_t i = 0; i < m; ++i) {
        rho[i] -= ratio * (flux[i] - carry);
        carry = flux[i];
      }
    } else {
      for (std::size_t i = c_lo; i <= c_hi; ++i) rho[i] -= ratio * (flux[i] - flux[i - 1]);
      std::size_t nlo = lo - 1, nhi = hi + 1;
      while (nlo < nhi && rho[nlo] == 0.0) ++nlo;
      while (nhi > nlo && rho[nhi] == 0.0) --nhi;
      lo = nlo;
      hi = nhi;
      if (lo < 2 || hi + 4 > m) full = true;
    }
    t = landing ? targets[next] : t + dt;
    ++res.steps;
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = c_lo; i <= c_hi; ++i) mn = std::min(mn, rho[i]);
    res.min_value = std::min(res.min_value, mn);
    if (mn < -1e-12 * peak0)
      throw Error("oracle lost nonnegativity at t=" + format_double(t) + " (min cell " + format_double(mn) + ")");
    if (landing) {
      res.snapshots.push_back({t, GridDensity(L, rho)});
      ++next;
    }
  }
  res.final_density = res.snapshots.back().density;
  return res;
}

/// Exact cell averages of the Barenblatt profile at time t centred at `center`.
/// Requires the support (plus one cell) to stay inside the window.
inline GridDensity barenblatt_grid(const Barenblatt& b, double t, double length, std::size_t m, double center = 0.0) {
  const double h = length / static_cast<double>(m);
  const double r = b.support_radius(t);
  require(std::abs(center) + r + h < 0.5 * length,
          "Barenblatt support reaches the seam of the torus; enlarge domain.L");
  std::vector<double> v(m);
  double prev = b.cumulative(t, -0.5 * length - center);
  for (std::size_t i = 0; i < m; ++i) {
    const double right = -0.5 * length + h * static_cast<double>(i + 1);
    const double cur = b.cumulative(t, right - center);
    v[i] = (cur - prev) / h;
    prev = cur;
  }
  return GridDensity(length, std::move(v));
}

struct TimedError {
  double t = 0.0;
  double l1 = 0.0;
};

/// Per-time L1 distance between the particle snapshots and reference grids at
/// matching times (|dt| <= 1e-9), both projected to m_grid cells.
inline std::vector<TimedError> compare_trajectories(const std::vector<ParticleState>& particle,
                                                    const std::vector<FVSnapshot>& reference, std::size_t m_grid) {
  std::vector<TimedError> out;
  for (const auto& s : particle) {
    for (const auto& r : reference) {
      if (std::abs(r.t - s.time()) > 1e-9) continue;
      out.push_back({s.time(), l1_distance(to_grid(s, m_grid), remap(r.density, m_grid))});
      break;
    }
  }
  require(!out.empty(), "no matching sample times between particle and reference trajectories");
  return out;
}

/// Trapezoid rule in time; a single sample contributes zero.
inline double space_time_l1(const std::vector<TimedError>& e) {
  double s = 0.0;
  for (std::size_t i = 1; i < e.size(); ++i) s += 0.5 * (e[i].l1 + e[i - 1].l1) * (e[i].t - e[i - 1].t);
  return s;
}

inline std::string reference_file_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "ref_t%.9g.csv", t);
  return buf;
}

inline void write_reference(const std::filesystem::path& dir, const std::vector<FVSnapshot>& snaps) {
  std::filesystem::create_directories(dir);
  for (const auto& s : snaps) {
    std::ofstream os(dir / reference_file_name(s.t));
    require(static_cast<bool>(os), "cannot write reference snapshot into " + dir.string());
    write_grid_csv(os, s.density);
  }
}

} // namespace agdiff
