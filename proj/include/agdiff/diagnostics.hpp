#pragma once

// Functionals along particle trajectories: energy, discrete W^{1,2} and TV of
// phi(rho), anchored Wasserstein-1, the interaction-term inequalities and the
// fitted time bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "agdiff/dynamics.hpp"
#include "agdiff/error.hpp"
#include "agdiff/kernels.hpp"
#include "agdiff/nonlinearity.hpp"
#include "agdiff/parallel.hpp"
#include "agdiff/particle_state.hpp"
#include "agdiff/trajectory.hpp"

namespace agdiff {

struct Energy {
  double total = 0.0;
  double interaction = 0.0;
  double internal = 0.0;
};

/// sum_k g_k W(rho_k).
inline double internal_energy(const ParticleState& s, const Nonlinearity& nl) {
  double e = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) e += s.gap(k) * nl.w(s.density(k));
  return e;
}

/// 1/2 int int K(x - y) rho^N(x) rho^N(y), exact through the periodic second
/// antiderivative of K.
inline double interaction_energy_exact(const ParticleState& s, const Kernel& kernel) {
  require(kernel.has_antiderivatives(), "exact interaction energy needs a closed-form kernel");
  if (kernel.is_zero()) return 0.0;
  const TorusKernel tk(kernel, s.domain().length());
  const std::size_t n = s.size();
  const auto rho = s.densities();
  std::vector<double> partial(n, 0.0);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double a0 = s.lifted(i), a1 = s.lifted(i + 1);
      double row = 0.5 * rho[i] * tk.cell_pair_integral(a0, a1, a0, a1);
      for (std::size_t j = i + 1; j < n; ++j)
        row += rho[j] * tk.cell_pair_integral(a0, a1, s.lifted(j), s.lifted(j + 1));
      partial[i] = rho[i] * row;
    }
  }, 32);
  double e = 0.0;
  for (double p : partial) e += p;
  return e;
}

/// Same integral by midpoint quadrature with q points per cell.
inline double interaction_energy_quadrature(const ParticleState& s, const Kernel& kernel, std::size_t q) {
  require(q >= 1, "quadrature needs at least one point per cell");
  if (kernel.is_zero()) return 0.0;
  const double L = s.domain().length();
  const std::size_t n = s.size();
  std::vector<double> pts(n * q), wts(n * q);
  for (std::size_t k = 0; k < n; ++k) {
    const double h = s.gap(k) / static_cast<double>(q);
    for (std::size_t a = 0; a < q; ++a) {
      pts[k * q + a] = s.lifted(k) + h * (static_cast<double>(a) + 0.5);
      wts[k * q + a] = s.density(k) * h;
    }
  }
  const std::size_t m = pts.size();
  std::vector<double> partial(m, 0.0);
  parallel_for(m, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += wts[j] * kernel.eval(periodic_diff(pts[i], pts[j], L));
      partial[i] = wts[i] * row;
    }
  }, 32);
  double e = 0.0;
  for (double p : partial) e += p;
  return 0.5 * e;
}

/// Bare particle sum 1/2 (c_L/N)^2 sum_{j != k} K(x_k - x_j); biased by O(1/N).
inline double interaction_energy_particles(const ParticleState& s, const Kernel& kernel) {
  const double L = s.domain().length();
  const double w = s.cell_mass();
  double e = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t j = k + 1; j < s.size(); ++j)
      e += kernel.eval(periodic_diff(s.positions()[k], s.positions()[j], L));
  return w * w * e;
}

/// F_L(rho^N). quad_per_cell = 0 selects the closed form when the kernel has
/// one (midpoint quadrature with 4 points per cell otherwise).
inline Energy energy(const ParticleState& s, const Kernel& kernel, const Nonlinearity& nl,
                     std::size_t quad_per_cell = 0) {
  Energy e;
  e.internal = internal_energy(s, nl);
  if (quad_per_cell == 0 && kernel.has_antiderivatives()) e.interaction = interaction_energy_exact(s, kernel);
  else e.interaction = interaction_energy_quadrature(s, kernel, quad_per_cell == 0 ? 4 : quad_per_cell);
  e.total = e.interaction + e.internal;
  return e;
}

namespace detail {
inline std::vector<double> phi_values(const ParticleState& s, const Nonlinearity& nl) {
  std::vector<double> p(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) p[k] = nl.phi(s.density(k));
  return p;
}
} // namespace detail

/// (N/c_L) sum_k (phi(rho_{k+1}) - phi(rho_k))^2, indices mod N.
inline double discrete_w12(const ParticleState& s, const Nonlinearity& nl) {
  const auto p = detail::phi_values(s, nl);
  const std::size_t n = p.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = p[(k + 1) % n] - p[k];
    acc += d * d;
  }
  return static_cast<double>(n) / s.domain().mass() * acc;
}

/// sum_k |phi(rho_{k+1}) - phi(rho_k)|.
inline double tv_phi(const ParticleState& s, const Nonlinearity& nl) {
  const auto p = detail::phi_values(s, nl);
  const std::size_t n = p.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += std::abs(p[(k + 1) % n] - p[k]);
  return acc;
}

struct Wasserstein {
  double distance = 0.0;
  bool winding_differs = false; // anchored and periodic W1 may disagree
};

/// (1/c_L) int_0^{c_L} |X_a(z) - X_b(z)| dz in unwrapped coordinates, exact
/// for the piecewise-linear pseudo-inverses.
inline Wasserstein wasserstein1_report(const ParticleState& a, const ParticleState& b) {
  require(a.size() == b.size(), "wasserstein1 needs states with the same particle count");
  require(a.domain() == b.domain(), "wasserstein1 needs states on the same torus with the same mass");
  const std::size_t n = a.size();
  double acc = 0.0;
  double d0 = a.unwrapped(0) - b.unwrapped(0);
  for (std::size_t k = 0; k < n; ++k) {
    const double d1 = a.unwrapped(k + 1) - b.unwrapped(k + 1);
    const double p = std::abs(d0), q = std::abs(d1);
    if ((d0 >= 0.0) == (d1 >= 0.0) || p == 0.0 || q == 0.0) acc += 0.5 * (p + q);
    else acc += 0.5 * (p * p + q * q) / (p + q);
    d0 = d1;
  }
  return {acc / static_cast<double>(n), a.winding() != b.winding()};
}

inline double wasserstein1(const ParticleState& a, const ParticleState& b) {
  return wasserstein1_report(a, b).distance;
}

/// K' * rho^N at x, exact: sum_j rho_j [K(x - x_j) - K(x - x_{j+1})].
inline double convolve_d1(const ParticleState& s, const Kernel& kernel, double x) {
  if (kernel.is_zero()) return 0.0;
  const double L = s.domain().length();
  const std::size_t n = s.size();
  double acc = 0.0;
  double prev = s.density(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    const double rho = s.density(j);
    acc += (rho - prev) * kernel.eval(periodic_diff(x, s.positions()[j], L));
    prev = rho;
  }
  return acc;
}

/// K' * rho^N at x by midpoint quadrature with q points per cell.
inline double convolve_d1_quadrature(const ParticleState& s, const Kernel& kernel, double x, std::size_t q) {
  const double L = s.domain().length();
  double acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double h = s.gap(k) / static_cast<double>(q);
    double cell = 0.0;
    for (std::size_t a = 0; a < q; ++a)
      cell += torus_d1(kernel, periodic_diff(x, s.lifted(k) + h * (static_cast<double>(a) + 0.5), L), L);
    acc += s.density(k) * h * cell;
  }
  return acc;
}

struct InequalityEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = std::numeric_limits<double>::infinity(); // rhs - lhs at the worst point
  double x = 0.0;                                          // location of the worst point
  bool violated = false;
};

struct InequalityReport {
  std::vector<InequalityEntry> entries;

  std::size_t violations() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [](const InequalityEntry& e) { return e.violated; }));
  }
  const InequalityEntry& find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw Error("no inequality named " + name);
  }
};

/// Evaluates
///   kerbound   |K' * rho^N (X(z))| <= c_L ||K'||
///   kerlip     |K' * rho^N - K^lin' * rho^N| (X(z)) <= ||K''|| g_k + c_L (L ||K''|| + 3 ||K'||) / N
///   w12linfty  ||phi(rho^N)|| <= phi(c_L / L) + 1 + N sum |d phi|^2
///   tvtv2      sum |d phi| <= max{1, N sum |d phi|^2}
/// at points_per_cell mass levels per cell. A margin below -1e-9 max(1, |rhs|)
/// is a violation.
inline InequalityReport check_inequalities(const ParticleState& s, const Kernel& kernel, const Nonlinearity& nl,
                                           std::size_t points_per_cell = 4) {
  require(points_per_cell >= 1, "check_inequalities needs at least one point per cell");
  const std::size_t n = s.size();
  const double nn = static_cast<double>(n);
  const double c = s.domain().mass();
  const double L = s.domain().length();
  const auto& norms = kernel.norms();
  InequalityReport rep;
  auto judge = [](InequalityEntry& e) { e.violated = e.margin < -1e-9 * std::max(1.0, std::abs(e.rhs)); };

  InequalityEntry kb{"kerbound", 0, c * norms.sup_k1, std::numeric_limits<double>::infinity(), 0, false};
  InequalityEntry kl{"kerlip", 0, 0, std::numeric_limits<double>::infinity(), 0, false};
  if (!kernel.is_zero()) {
    const auto sums = interaction_sums(s, kernel);
    const std::size_t total = n * points_per_cell;
    struct Worst {
      double kb_margin = std::numeric_limits<double>::infinity(), kb_lhs = 0, kb_x = 0;
      double kl_margin = std::numeric_limits<double>::infinity(), kl_lhs = 0, kl_rhs = 0, kl_x = 0;
    };
    std::vector<Worst> worst(total);
    parallel_for(total, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t k = i / points_per_cell;
        const double theta = static_cast<double>(i % points_per_cell) / static_cast<double>(points_per_cell);
        const double x = wrap(s.lifted(k) + theta * s.gap(k), L);
        const double exact = convolve_d1(s, kernel, x);
        const double lin = (c / nn) * ((1.0 - theta) * sums[k] + theta * sums[(k + 1) % n]);
        const double bound = norms.sup_k2 * s.gap(k) + c * (L * norms.sup_k2 + 3.0 * norms.sup_k1) / nn;
        Worst& w = worst[i];
        w.kb_lhs = std::abs(exact);
        w.kb_margin = c * norms.sup_k1 - w.kb_lhs;
        w.kb_x = x;
        w.kl_lhs = std::abs(exact - lin);
        w.kl_rhs = bound;
        w.kl_margin = bound - w.kl_lhs;
        w.kl_x = x;
      }
    }, 64);
    for (const auto& w : worst) {
      if (w.kb_margin < kb.margin) {
        kb.margin = w.kb_margin;
        kb.lhs = w.kb_lhs;
        kb.x = w.kb_x;
      }
      if (w.kl_margin < kl.margin) {
        kl.margin = w.kl_margin;
        kl.lhs = w.kl_lhs;
        kl.rhs = w.kl_rhs;
        kl.x = w.kl_x;
      }
    }
  } else {
    kb.margin = 0.0;
    kl.margin = 0.0;
  }
  judge(kb);
  judge(kl);
  rep.entries.push_back(kb);
  rep.entries.push_back(kl);

  const auto p = detail::phi_values(s, nl);
  double sup = 0.0, sq = 0.0, tv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sup = std::max(sup, std::abs(p[k]));
    const double d = p[(k + 1) % n] - p[k];
    sq += d * d;
    tv += std::abs(d);
  }
  InequalityEntry wl{"w12linfty", sup, nl.phi(c / L) + 1.0 + nn * sq, 0, 0, false};
  wl.margin = wl.rhs - wl.lhs;
  judge(wl);
  rep.entries.push_back(wl);
  InequalityEntry tt{"tvtv2", tv, std::max(1.0, nn * sq), 0, 0, false};
  tt.margin = tt.rhs - tt.lhs;
  judge(tt);
  rep.entries.push_back(tt);
  return rep;
}

/// Right-hand side of the gap bound for data with inf rho_0 >= eps:
/// (1/N)(c_L/eps + ||K'||/||K''||) exp(c_L ||K''|| t). Infinite for the zero kernel.
inline double gap_upper_bound(std::size_t n, double mass, double eps, const Kernel& kernel, double t) {
  const auto& k = kernel.norms();
  if (!(k.sup_k2 > 0.0)) return std::numeric_limits<double>::infinity();
  return (mass / eps + k.sup_k1 / k.sup_k2) * std::exp(mass * k.sup_k2 * t) / static_cast<double>(n);
}

/// Centered differences of the energy column, one-sided at the ends.
inline std::vector<std::pair<double, double>> energy_rate_series(const std::vector<double>& t,
                                                                  const std::vector<double>& e) {
  require(t.size() == e.size(), "energy_rate_series needs matching columns");
  require(t.size() >= 3, "energy_rate_series needs at least three samples");
  const std::size_t n = t.size();
  std::vector<std::pair<double, double>> out(n);
  out[0] = {t[0], (e[1] - e[0]) / (t[1] - t[0])};
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = {t[i], (e[i + 1] - e[i - 1]) / (t[i + 1] - t[i - 1])};
  out[n - 1] = {t[n - 1], (e[n - 1] - e[n - 2]) / (t[n - 1] - t[n - 2])};
  return out;
}

inline std::vector<std::pair<double, double>> energy_rate_series(const Trajectory& traj) {
  std::vector<double> t, e;
  for (const auto& r : traj.rows) {
    t.push_back(r.t);
    e.push_back(r.energy);
  }
  return energy_rate_series(t, e);
}

inline double max_positive_rate(const std::vector<DiagnosticsRow>& rows) {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.energy_rate);
  return m;
}

struct DiagnosticsOptions {
  std::size_t quad_per_cell = 0;   // 0: closed-form interaction energy
  std::size_t check_points = 2;    // mass levels per cell for check_inequalities; 0 disables
};

struct DiagnosticsResult {
  std::vector<DiagnosticsRow> rows;
  std::size_t violations = 0;
  std::vector<std::string> violation_notes;
  bool winding_differs = false;
};

inline DiagnosticsRow diagnostics_row(const ParticleState& s, const ParticleState& init, const Kernel& kernel,
                                      const Nonlinearity& nl, const DiagnosticsOptions& opt = {}) {
  DiagnosticsRow r;
  r.t = s.time();
  r.min_gap = s.min_gap();
  r.max_density = s.max_density();
  const Energy e = energy(s, kernel, nl, opt.quad_per_cell);
  r.energy = e.total;
  r.interaction_energy = e.interaction;
  r.internal_energy = e.internal;
  r.w12 = discrete_w12(s, nl);
  r.tv_phi = tv_phi(s, nl);
  r.w1_from_init = wasserstein1(s, init);
  return r;
}

/// Rows for every snapshot (energy_rate filled when there are >= 3), plus the
/// inequality checks at every snapshot.
inline DiagnosticsResult compute_diagnostics(const std::vector<ParticleState>& snaps, const Kernel& kernel,
                                             const Nonlinearity& nl, const DiagnosticsOptions& opt = {}) {
  require(!snaps.empty(), "diagnostics need at least one snapshot");
  DiagnosticsResult out;
  out.rows.resize(snaps.size());
  std::vector<InequalityReport> reports(snaps.size());
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    out.rows[i] = diagnostics_row(snaps[i], snaps.front(), kernel, nl, opt);
    if (opt.check_points > 0) reports[i] = check_inequalities(snaps[i], kernel, nl, opt.check_points);
    if (snaps[i].winding() != snaps.front().winding()) out.winding_differs = true;
  }
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (const auto& e : reports[i].entries)
      if (e.violated) {
        ++out.violations;
        out.violation_notes.push_back(e.name + " at t=" + format_double(snaps[i].time()));
      }
  if (out.rows.size() >= 3) {
    const auto rates = energy_rate_series([&] {
      std::vector<double> t;
      for (const auto& r : out.rows) t.push_back(r.t);
      return t;
    }(), [&] {
      std::vector<double> e;
      for (const auto& r : out.rows) e.push_back(r.energy);
      return e;
    }());
    for (std::size_t i = 0; i < rates.size(); ++i) out.rows[i].energy_rate = rates[i].second;
  }
  return out;
}

struct HolderFit {
  double constant = 0.0;  // w1(t_0, t_last) / sqrt(t_last - t_0)
  double max_ratio = 0.0; // largest w1 / sqrt|dt| over the dyadic pairs
  std::size_t pairs = 0;
};

/// Dyadic pairs (i s, (i+1) s) in sample-index units for s = 1, 2, 4, ...,
/// plus the coarsest pair (first, last).
inline HolderFit holder_fit(const std::vector<ParticleState>& snaps) {
  require(snaps.size() >= 2, "Hoelder fit needs at least two snapshots");
  HolderFit f;
  const std::size_t last = snaps.size() - 1;
  auto ratio = [&](std::size_t i, std::size_t j) {
    const double dt = snaps[j].time() - snaps[i].time();
    return wasserstein1(snaps[i], snaps[j]) / std::sqrt(dt);
  };
  f.constant = ratio(0, last);
  f.max_ratio = f.constant;
  f.pairs = 1;
  for (std::size_t s = 1; s < last; s *= 2)
    for (std::size_t i = 0; i + s <= last; i += s) {
      f.max_ratio = std::max(f.max_ratio, ratio(i, i + s));
      ++f.pairs;
    }
  return f;
}

struct LinearBound {
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  double operator()(double t) const { return gamma1 + gamma2 * (1.0 + t); }
};

/// Smallest line through (t_0, y_0) lying above every sample, i.e.
/// gamma2 = max_i max(0, (y_i - y_0)/(t_i - t_0)), gamma1 = y_0 - gamma2 (1 + t_0);
/// both constants are then inflated by (1 + margin).
inline LinearBound fit_linear_bound(const std::vector<double>& t, const std::vector<double>& y, double margin) {
  require(t.size() == y.size() && !t.empty(), "linear bound fit needs matching nonempty columns");
  require(margin >= 0.0, "linear bound margin must be nonnegative");
  double slope = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) slope = std::max(slope, (y[i] - y[0]) / (t[i] - t[0]));
  LinearBound b{y[0] - slope * (1.0 + t[0]), slope};
  b.gamma1 *= 1.0 + margin;
  b.gamma2 *= 1.0 + margin;
  return b;
}

} // namespace agdiff
