#pragma once

// Particle ODE
//   x_k' = -(c_L/N) sum_{j != k} K'(x_k - x_j) - (N/c_L) [phi(rho_k) - phi(rho_{k-1})],
// its piecewise-linear-in-mass kernel interpolation, and time integration with
// ordering guards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "agdiff/domain.hpp"
#include "agdiff/error.hpp"
#include "agdiff/kernels.hpp"
#include "agdiff/nonlinearity.hpp"
#include "agdiff/parallel.hpp"
#include "agdiff/particle_state.hpp"
#include "agdiff/trajectory.hpp"

namespace agdiff {

struct Velocity {
  std::vector<double> values;      // x_k'
  std::vector<double> flux_jumps;  // F_k = phi(rho_k) - phi(rho_{k-1})
};

struct IntegratorConfig {
  /// imex: interaction explicit, diffusion backward Euler (Newton, cyclic tridiagonal).
  enum class Method { rk4, heun, euler, imex };

  Method method = Method::rk4;
  double dt_init = 1e-2;
  double safety = 0.2;
  double rho_cap = 100.0;
  double min_gap_floor = 0.0; // 0 selects 1e-3 c_L / (N rho_cap)
  double t_end = 1.0;
  double sample_every = 1e-2;

  double gap_floor(double mass, std::size_t n) const {
    return min_gap_floor > 0.0 ? min_gap_floor : 1e-3 * mass / (static_cast<double>(n) * rho_cap);
  }
};

inline const char* to_string(IntegratorConfig::Method m) {
  switch (m) {
    case IntegratorConfig::Method::rk4: return "rk4";
    case IntegratorConfig::Method::heun: return "heun";
    case IntegratorConfig::Method::euler: return "euler";
    case IntegratorConfig::Method::imex: return "imex";
  }
  return "?";
}

namespace detail {

/// S_k = sum_{j != k} K'(x_k - x_j) for a lifted configuration, ascending j.
/// Pairs are evaluated once (j > k) and reused with the odd symmetry of K'.
inline std::vector<double> interaction_sums(std::span<const double> x, double L, const Kernel& kernel) {
  const std::size_t n = x.size();
  std::vector<double> sums(n, 0.0);
  if (kernel.is_zero()) return sums;
  constexpr std::size_t max_cached = 4096;
  if (n <= max_cached) {
    // upper triangle, row k holds j = k+1 .. n-1
    std::vector<std::size_t> offset(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) offset[k + 1] = offset[k] + (n - 1 - k);
    std::vector<double> upper(offset[n]);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        double* row = upper.data() + offset[k];
        for (std::size_t j = k + 1; j < n; ++j)
          row[j - k - 1] = torus_d1(kernel, periodic_diff(x[k], x[j], L), L);
      }
    }, 64);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s -= upper[offset[j] + (k - j - 1)];
        const double* row = upper.data() + offset[k];
        for (std::size_t j = k + 1; j < n; ++j) s += row[j - k - 1];
        sums[k] = s;
      }
    }, 64);
    return sums;
  }
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s -= torus_d1(kernel, periodic_diff(x[j], x[k], L), L);
      for (std::size_t j = k + 1; j < n; ++j) s += torus_d1(kernel, periodic_diff(x[k], x[j], L), L);
      sums[k] = s;
    }
  }, 64);
  return sums;
}

inline std::vector<double> flux_jumps(std::span<const double> x, double L, double mass, const Nonlinearity& nl) {
  const std::size_t n = x.size();
  const double cell = mass / static_cast<double>(n);
  std::vector<double> phi(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double next = k + 1 == n ? x[0] + L : x[k + 1];
    phi[k] = nl.phi(cell / (next - x[k]));
  }
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = phi[k] - phi[(k + n - 1) % n];
  return f;
}

inline Velocity velocity(std::span<const double> x, double L, double mass, const Kernel& kernel,
                         const Nonlinearity& nl, bool with_interaction = true, bool with_diffusion = true) {
  const std::size_t n = x.size();
  const double nn = static_cast<double>(n);
  Velocity v;
  v.values.assign(n, 0.0);
  v.flux_jumps = flux_jumps(x, L, mass, nl);
  if (with_interaction) {
    const auto s = interaction_sums(x, L, kernel);
    for (std::size_t k = 0; k < n; ++k) v.values[k] = -(mass / nn) * s[k];
  }
  if (with_diffusion)
    for (std::size_t k = 0; k < n; ++k) v.values[k] -= (nn / mass) * v.flux_jumps[k];
  return v;
}

/// Index of the first gap that is non-positive or below the floor, if any.
inline std::optional<std::size_t> ordering_violation(std::span<const double> x, double L, double floor) {
  const std::size_t n = x.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double next = k + 1 == n ? x[0] + L : x[k + 1];
    const double g = next - x[k];
    if (!(g > 0.0) || !(g >= floor) || !std::isfinite(g)) return k;
  }
  return std::nullopt;
}

/// Solves J d = r for the symmetric cyclic tridiagonal J with diagonal `diag`
/// and coupling off[k] between unknowns k and k+1 (off[n-1] couples n-1 and 0).
inline std::vector<double> solve_cyclic_tridiagonal(std::vector<double> diag, const std::vector<double>& off,
                                                    std::vector<double> r) {
  const std::size_t n = diag.size();
  if (n == 2) {
    const double o = off[0] + off[1];
    const double det = diag[0] * diag[1] - o * o;
    return {(r[0] * diag[1] - o * r[1]) / det, (diag[0] * r[1] - o * r[0]) / det};
  }
  // Sherman-Morrison: J = T + u v^T with u = (gamma, 0, ..., off[n-1]), v = (1, 0, ..., off[n-1]/gamma)
  const double gamma = -diag[0];
  const double corner = off[n - 1];
  diag[0] -= gamma;
  diag[n - 1] -= corner * corner / gamma;
  auto thomas = [&](std::vector<double> rhs) {
    std::vector<double> c(n), d(n);
    c[0] = off[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double m = diag[i] - off[i - 1] * c[i - 1];
      c[i] = i + 1 < n ? off[i] / m : 0.0;
      d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
  };
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = corner;
  const auto y = thomas(std::move(r));
  const auto q = thomas(std::move(u));
  const double vy = y[0] + corner / gamma * y[n - 1];
  const double vq = q[0] + corner / gamma * q[n - 1];
  const double f = vy / (1.0 + vq);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i] - f * q[i];
  return out;
}

/// Backward Euler for the diffusion part: y - dt D(y) = rhs, Newton iterations
/// with ordering-preserving damping. Returns nullopt when Newton fails.
inline std::optional<std::vector<double>> implicit_diffusion(const std::vector<double>& rhs, double L, double mass,
                                                             const Nonlinearity& nl, double dt) {
  const std::size_t n = rhs.size();
  const double nn = static_cast<double>(n);
  const double cell = mass / nn;
  const double coef = dt * nn / mass;
  std::vector<double> y = rhs;
  if (ordering_violation(y, L, 0.0)) return std::nullopt;
  std::vector<double> g(n), rho(n), phi(n), res(n), diag(n), off(n);
  auto evaluate = [&](const std::vector<double>& z) {
    for (std::size_t k = 0; k < n; ++k) {
      g[k] = (k + 1 == n ? z[0] + L : z[k + 1]) - z[k];
      rho[k] = cell / g[k];
      phi[k] = nl.phi(rho[k]);
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      res[k] = z[k] - rhs[k] + coef * (phi[k] - phi[(k + n - 1) % n]);
      worst = std::max(worst, std::abs(res[k]));
    }
    return worst;
  };
  double min_g = *std::min_element(g.begin(), g.end());
  double worst = evaluate(y);
  for (int iter = 0; iter < 60; ++iter) {
    min_g = *std::min_element(g.begin(), g.end());
    if (worst <= 1e-13 * min_g) return y;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = coef * nl.phi_prime(rho[k]) * rho[k] / g[k];
      off[k] = -a;
      diag[k] = 1.0;
    }
    for (std::size_t k = 0; k < n; ++k) diag[k] += -off[k] - off[(k + n - 1) % n];
    std::vector<double> neg(n);
    for (std::size_t k = 0; k < n; ++k) neg[k] = -res[k];
    const auto delta = solve_cyclic_tridiagonal(diag, off, std::move(neg));
    double lambda = 1.0;
    std::vector<double> trial(n);
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      for (std::size_t k = 0; k < n; ++k) trial[k] = y[k] + lambda * delta[k];
      if (!ordering_violation(trial, L, 0.0)) {
        const double w = evaluate(trial);
        if (w < worst || half >= 8) {
          y.swap(trial);
          worst = w;
          accepted = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (!accepted) return std::nullopt;
  }
  evaluate(y);
  min_g = *std::min_element(g.begin(), g.end());
  if (worst <= 1e-10 * min_g) return y;
  return std::nullopt;
}

} // namespace detail

/// S_k = sum_{j != k} K'(x_k - x_j), summed in ascending j.
inline std::vector<double> interaction_sums(const ParticleState& s, const Kernel& kernel) {
  return detail::interaction_sums(s.positions(), s.domain().length(), kernel);
}

/// Right-hand side of the particle ODE.
inline Velocity rhs(const ParticleState& s, const Kernel& kernel, const Nonlinearity& nl) {
  return detail::velocity(s.positions(), s.domain().length(), s.domain().mass(), kernel, nl);
}

/// K^lin' (rho^N) * rho^N at x, using precomputed interaction sums.
inline double klin_convolve(const ParticleState& s, std::span<const double> sums, double x) {
  const double c = s.domain().mass();
  const auto n = static_cast<double>(s.size());
  const double z = cdf_at(s, x);
  const double u = z * n / c;
  auto k = static_cast<std::size_t>(std::floor(u));
  if (k >= s.size()) k = s.size() - 1;
  const double theta = u - static_cast<double>(k);
  const std::size_t next = (k + 1) % s.size();
  return (c / n) * ((1.0 - theta) * sums[k] + theta * sums[next]);
}

/// K^lin' (rho^N) * rho^N at the canonical point x: linear interpolation in the
/// mass variable between the self-interaction-free particle sums at x_k, x_{k+1}.
inline double klin_convolve(const ParticleState& s, const Kernel& kernel, double x) {
  const auto sums = interaction_sums(s, kernel);
  return klin_convolve(s, sums, x);
}

struct Collapse {
  std::size_t index = 0;
};

using StepResult = std::variant<ParticleState, Collapse>;

/// One step of cfg.method. A violated ordering, or a gap below the floor,
/// is reported as Collapse rather than returned as a state.
inline StepResult step(const ParticleState& s, const Kernel& kernel, const Nonlinearity& nl,
                       const IntegratorConfig& cfg, double dt) {
  require(dt >= 0.0 && std::isfinite(dt), "step needs a nonnegative time step");
  if (dt == 0.0) return s;
  const double L = s.domain().length();
  const double c = s.domain().mass();
  const std::size_t n = s.size();
  const double floor = cfg.gap_floor(c, n);
  const std::vector<double> x0(s.positions().begin(), s.positions().end());

  auto axpy = [&](const std::vector<double>& base, double a, const std::vector<double>& v) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = base[k] + a * v[k];
    return out;
  };
  auto vel = [&](const std::vector<double>& x) { return detail::velocity(x, L, c, kernel, nl).values; };
  auto bad = [&](const std::vector<double>& x) { return detail::ordering_violation(x, L, 0.0); };

  std::vector<double> x1;
  using Method = IntegratorConfig::Method;
  switch (cfg.method) {
    case Method::euler:
      x1 = axpy(x0, dt, vel(x0));
      break;
    case Method::heun: {
      const auto k1 = vel(x0);
      const auto xp = axpy(x0, dt, k1);
      if (auto v = bad(xp)) return Collapse{*v};
      const auto k2 = vel(xp);
      x1.resize(n);
      for (std::size_t k = 0; k < n; ++k) x1[k] = x0[k] + 0.5 * dt * (k1[k] + k2[k]);
      break;
    }
    case Method::rk4: {
      const auto k1 = vel(x0);
      const auto xa = axpy(x0, 0.5 * dt, k1);
      if (auto v = bad(xa)) return Collapse{*v};
      const auto k2 = vel(xa);
      const auto xb = axpy(x0, 0.5 * dt, k2);
      if (auto v = bad(xb)) return Collapse{*v};
      const auto k3 = vel(xb);
      const auto xc = axpy(x0, dt, k3);
      if (auto v = bad(xc)) return Collapse{*v};
      const auto k4 = vel(xc);
      x1.resize(n);
      for (std::size_t k = 0; k < n; ++k) x1[k] = x0[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
      break;
    }
    case Method::imex: {
      const auto vi = detail::velocity(x0, L, c, kernel, nl, true, false).values;
      const auto xs = axpy(x0, dt, vi);
      if (auto v = bad(xs)) return Collapse{*v};
      auto solved = detail::implicit_diffusion(xs, L, c, nl, dt);
      if (!solved) {
        std::size_t worst = 0;
        for (std::size_t k = 1; k < n; ++k)
          if (s.gap(k) < s.gap(worst)) worst = k;
        return Collapse{worst};
      }
      x1 = std::move(*solved);
      break;
    }
  }
  if (auto v = detail::ordering_violation(x1, L, floor)) return Collapse{*v};
  return ParticleState::from_lift(s.domain(), std::move(x1), s.time() + dt, s.winding());
}

namespace detail {

/// Gershgorin bound on the spectral radius of the ODE Jacobian.
inline double stiffness_bound(const ParticleState& s, const Kernel& kernel, const Nonlinearity& nl) {
  const std::size_t n = s.size();
  const double nn = static_cast<double>(n);
  const double c = s.domain().mass();
  double diff = 0.0;
  std::vector<double> a(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double rho = s.density(k);
    a[k] = nl.phi_prime(rho) * rho / s.gap(k);
  }
  for (std::size_t k = 0; k < n; ++k) diff = std::max(diff, 2.0 * (nn / c) * (a[k] + a[(k + n - 1) % n]));
  return diff + 2.0 * c * kernel.norms().sup_k2;
}

inline double stability_limit(IntegratorConfig::Method m) {
  switch (m) {
    case IntegratorConfig::Method::euler: return 1.8;
    case IntegratorConfig::Method::heun: return 1.8;
    case IntegratorConfig::Method::rk4: return 2.5;
    case IntegratorConfig::Method::imex: return std::numeric_limits<double>::infinity();
  }
  return 1.0;
}

} // namespace detail

/// Sample times 0, dt_s, 2 dt_s, ... up to t_end (t_end always included).
inline std::vector<double> sample_times(double t_end, double sample_every) {
  require(t_end > 0.0 && sample_every > 0.0, "sampling needs positive t_end and sample_every");
  std::vector<double> t;
  const auto count = static_cast<std::size_t>(std::floor(t_end / sample_every + 1e-9));
  for (std::size_t i = 0; i <= count; ++i) t.push_back(static_cast<double>(i) * sample_every);
  if (t_end - t.back() > 1e-9 * t_end) t.push_back(t_end);
  else t.back() = t_end;
  return t;
}

struct SimulateOptions {
  bool keep_snapshots = true;
  std::function<void(const ParticleState&)> observer;
};

/// Advances s0 to cfg.t_end with the gap-based adaptive step
///   dt = safety min_k g_k / (max_k |x'_{k+1} - x'_k| + 1e-30),
/// additionally capped by the explicit stability limit, clamped to
/// [1e-14 t_end, dt_init], and shortened to land on every sample time.
inline Trajectory simulate(const ParticleState& s0, const Kernel& kernel, const Nonlinearity& nl,
                           const IntegratorConfig& cfg, const SimulateOptions& opts = {}) {
  require(cfg.t_end > 0.0, "integrator.t_end must be positive");
  require(cfg.dt_init > 0.0, "integrator.dt_init must be positive");
  require(cfg.safety > 0.0 && cfg.safety <= 1.0, "integrator.safety must lie in (0, 1]");
  Trajectory traj;
  const double rho0 = s0.max_density();
  const double k1 = kernel.norms().sup_k1;
  traj.local_existence_time =
      k1 > 0.0 ? 1.0 / (2.0 * k1 * rho0) : std::numeric_limits<double>::infinity();

  const double dt_floor = 1e-14 * cfg.t_end;
  const auto times = sample_times(cfg.t_end, cfg.sample_every);
  ParticleState cur = s0.with_time(0.0);
  auto record = [&](const ParticleState& st) {
    if (opts.keep_snapshots) traj.snapshots.push_back(st);
    if (opts.observer) opts.observer(st);
  };
  record(cur);
  traj.stats.dt_min = std::numeric_limits<double>::infinity();
  const bool split = cfg.method == IntegratorConfig::Method::imex;
  const double n = static_cast<double>(cur.size());
  const double c = cur.domain().mass();

  for (std::size_t next = 1; next < times.size(); ++next) {
    const double target = times[next];
    while (cur.time() < target) {
      const Velocity v = detail::velocity(cur.positions(), cur.domain().length(), c, kernel, nl, true, !split);
      double max_rel = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k)
        max_rel = std::max(max_rel, std::abs(v.values[(k + 1) % cur.size()] - v.values[k]));
      double dt = cfg.safety * cur.min_gap() / (max_rel + 1e-30);
      if (!split) dt = std::min(dt, detail::stability_limit(cfg.method) / detail::stiffness_bound(cur, kernel, nl));
      dt = std::min(dt, cfg.dt_init);
      if (dt < dt_floor) {
        traj.termination = {Termination::Kind::step_floor, cur.time(), 0};
        return traj;
      }
      bool landing = false;
      if (cur.time() + dt >= target - 1e-12 * cfg.t_end) {
        dt = target - cur.time();
        landing = true;
      }
      std::optional<ParticleState> accepted;
      std::size_t offending = 0;
      for (int attempt = 0; attempt < 7; ++attempt) {
        auto r = step(cur, kernel, nl, cfg, dt);
        if (auto* st = std::get_if<ParticleState>(&r)) {
          accepted = std::move(*st);
          break;
        }
        offending = std::get<Collapse>(r).index;
        ++traj.stats.rejected;
        dt *= 0.25;
        landing = false;
        if (dt < dt_floor) break;
      }
      if (!accepted) {
        traj.termination = {Termination::Kind::gap_collapse, cur.time(), offending};
        return traj;
      }
      ++traj.stats.steps;
      traj.stats.dt_min = std::min(traj.stats.dt_min, dt);
      traj.stats.dt_max = std::max(traj.stats.dt_max, dt);
      cur = landing ? accepted->with_time(target) : std::move(*accepted);
    }
    record(cur);
  }
  (void)n;
  traj.termination = {Termination::Kind::completed, cur.time(), 0};
  return traj;
}

} // namespace agdiff
