#pragma once

// Ordered particles on T_L carrying equal mass c_L/N, the piecewise-constant
// density they induce, and the uniform-grid density used to exchange data
// with the finite-volume oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agdiff/domain.hpp"
#include "agdiff/error.hpp"

namespace agdiff {

/// Particle configuration. Positions are stored as a lift to R: the base
/// particle x_0 is canonical and x_0 < x_1 < ... < x_{N-1} < x_0 + L, so the
/// wraparound gap closes at x_N = x_0 + L. `winding` counts how many periods
/// the base particle has been re-wrapped, giving unwrapped coordinates for
/// transport distances.
class ParticleState {
public:
  ParticleState(TorusDomain domain, std::vector<double> positions, double time = 0.0,
                std::int64_t winding = 0)
      : domain_(domain), x_(std::move(positions)), time_(time), winding_(winding) {
    require(x_.size() >= 2, "a particle state needs at least two particles");
    const double L = domain_.length();
    require(x_.front() >= -0.5 * L && x_.front() < 0.5 * L, "base particle must be canonical");
    for (std::size_t k = 1; k < x_.size(); ++k)
      require(x_[k] > x_[k - 1], "particle positions must be strictly increasing");
    require(x_.back() < x_.front() + L, "particles must span less than one period");
    require(std::isfinite(time) && time >= 0.0, "state time must be a nonnegative real");
  }

  /// Builds a state from any increasing lift, re-anchoring the base particle.
  static ParticleState from_lift(TorusDomain domain, std::vector<double> lift, double time = 0.0,
                                 std::int64_t winding = 0) {
    require(!lift.empty(), "empty particle lift");
    const double L = domain.length();
    const double base = wrap(lift.front(), L);
    const double shift = base - lift.front();
    const auto periods = static_cast<std::int64_t>(std::llround(-shift / L));
    for (double& v : lift) v += shift;
    // exact canonical base after rounding in the shift
    lift.front() = base;
    return ParticleState(domain, std::move(lift), time, winding + periods);
  }

  const TorusDomain& domain() const { return domain_; }
  std::size_t size() const { return x_.size(); }
  double time() const { return time_; }
  std::int64_t winding() const { return winding_; }
  std::span<const double> positions() const { return x_; }

  /// Lifted position of particle k for k in [0, N]; k == N is x_0 + L.
  double lifted(std::size_t k) const {
    return k == x_.size() ? x_.front() + domain_.length() : x_[k];
  }
  double canonical(std::size_t k) const { return wrap(x_[k % x_.size()], domain_.length()); }
  double unwrapped(std::size_t k) const {
    return lifted(k) + static_cast<double>(winding_) * domain_.length();
  }

  double cell_mass() const { return domain_.mass() / static_cast<double>(x_.size()); }
  double gap(std::size_t k) const { return lifted(k + 1) - lifted(k); }
  /// rho_k = c_L / (N (x_{k+1} - x_k)), indices mod N.
  double density(std::size_t k) const { return cell_mass() / gap(k % x_.size()); }

  std::vector<double> gaps() const {
    std::vector<double> g(x_.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = gap(k);
    return g;
  }
  std::vector<double> densities() const {
    std::vector<double> r(x_.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = density(k);
    return r;
  }
  double min_gap() const {
    double g = gap(0);
    for (std::size_t k = 1; k < x_.size(); ++k) g = std::min(g, gap(k));
    return g;
  }
  double max_density() const { return cell_mass() / min_gap(); }

  ParticleState with_time(double t) const { return ParticleState(domain_, x_, t, winding_); }

private:
  TorusDomain domain_;
  std::vector<double> x_;
  double time_;
  std::int64_t winding_;
};

/// Rigid translation by delta (winding tracked).
inline ParticleState shift(const ParticleState& s, double delta) {
  std::vector<double> lift(s.positions().begin(), s.positions().end());
  for (double& v : lift) v += delta;
  return ParticleState::from_lift(s.domain(), std::move(lift), s.time(), s.winding());
}

/// Cell averages on the uniform grid of width L/M anchored at -L/2.
struct GridDensity {
  double length = 1.0;
  std::vector<double> values;

  GridDensity() = default;
  GridDensity(double L, std::vector<double> v) : length(L), values(std::move(v)) {
    require(length > 0.0, "grid length must be positive");
    require(!values.empty(), "grid needs at least one cell");
  }

  std::size_t cell_count() const { return values.size(); }
  double cell_width() const { return length / static_cast<double>(values.size()); }
  double cell_left(std::size_t i) const { return -0.5 * length + cell_width() * static_cast<double>(i); }

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_width();
  }

  /// Mass on [-L/2, x] for x in [-L/2, L/2].
  double cumulative(double x) const {
    const double h = cell_width();
    const double u = std::clamp((x + 0.5 * length) / h, 0.0, static_cast<double>(values.size()));
    const auto i = static_cast<std::size_t>(std::floor(u));
    double s = 0.0;
    for (std::size_t j = 0; j < i && j < values.size(); ++j) s += values[j];
    s *= h;
    if (i < values.size()) s += values[i] * (u - static_cast<double>(i)) * h;
    return s;
  }
};

/// Initial datum given through its cumulative mass function on [-L/2, L/2].
struct DensityProfile {
  std::function<double(double)> cumulative; // mass of [-L/2, x]
  double total = 0.0;                        // mass of the whole window
  std::function<double(double)> quantile;    // optional closed-form inverse of cumulative
};

/// Exact cell averages of a profile on an M-cell grid.
inline GridDensity sample_profile(const DensityProfile& p, double length, std::size_t m) {
  require(m >= 1, "grid needs at least one cell");
  std::vector<double> v(m);
  const double h = length / static_cast<double>(m);
  double prev = p.cumulative(-0.5 * length);
  for (std::size_t i = 0; i < m; ++i) {
    const double right = i + 1 == m ? 0.5 * length : -0.5 * length + h * static_cast<double>(i + 1);
    const double cur = p.cumulative(right);
    v[i] = std::max(0.0, (cur - prev) / h);
    prev = cur;
  }
  return GridDensity(length, std::move(v));
}

/// Piecewise-linear cumulative of a grid density, with prefix sums.
inline DensityProfile profile_from_grid(const GridDensity& g) {
  auto prefix = std::make_shared<std::vector<double>>(g.cell_count() + 1, 0.0);
  const double h = g.cell_width();
  for (std::size_t i = 0; i < g.cell_count(); ++i) (*prefix)[i + 1] = (*prefix)[i] + g.values[i] * h;
  const double L = g.length;
  auto values = std::make_shared<std::vector<double>>(g.values);
  DensityProfile p;
  p.total = prefix->back();
  p.cumulative = [prefix, values, h, L](double x) {
    const double u = std::clamp((x + 0.5 * L) / h, 0.0, static_cast<double>(values->size()));
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= values->size()) return prefix->back();
    return (*prefix)[i] + (*values)[i] * (u - static_cast<double>(i)) * h;
  };
  return p;
}

/// Places particles at consecutive c_L/N-quantiles of the datum, starting
/// from x_0 = -L/2: x_k is the smallest x whose cumulative mass reaches k c_L/N.
inline ParticleState init_from_density(const DensityProfile& rho0, std::size_t n, const TorusDomain& d) {
  require(n >= 2, "need at least two particles");
  require(rho0.total > 0.0, "initial datum has zero total mass");
  require(std::abs(rho0.total - d.mass()) <= 1e-9 * d.mass(),
          "initial datum mass does not match the torus mass");
  const double L = d.length();
  const double left = -0.5 * L;
  const double step = d.mass() / static_cast<double>(n);
  std::vector<double> x(n);
  x[0] = left;
  for (std::size_t k = 1; k < n; ++k) {
    const double target = static_cast<double>(k) * step;
    if (rho0.quantile) {
      x[k] = rho0.quantile(target);
      require(x[k] > x[k - 1], "initial datum quantiles are not increasing");
      continue;
    }
    double lo = x[k - 1];
    double hi = 0.5 * L;
    if (rho0.cumulative(hi) < target) throw Error("initial datum CDF never reaches the required quantile");
    if (!(rho0.cumulative(lo) < target))
      throw Error("initial datum has an atom of mass >= c_L/N; quantiles cannot be separated");
    // invariant: cumulative(lo) < target <= cumulative(hi)
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (rho0.cumulative(mid) < target) lo = mid; else hi = mid;
    }
    if (!(hi > x[k - 1]))
      throw Error("initial datum has an atom of mass >= c_L/N; quantiles cannot be separated");
    x[k] = hi;
  }
  if (!(x[n - 1] < left + L)) throw Error("initial datum has an atom at the right end of the window");
  return ParticleState(d, std::move(x));
}

/// Cumulative mass of rho^N from x_0 to the canonical point x.
inline double cdf_at(const ParticleState& s, double x) {
  const double L = s.domain().length();
  const double x0 = s.lifted(0);
  double off = std::fmod(x - x0, L);
  if (off < 0.0) off += L;
  const double y = x0 + off;
  const auto pos = s.positions();
  const auto it = std::upper_bound(pos.begin(), pos.end(), y);
  const auto k = static_cast<std::size_t>(it - pos.begin()) - 1;
  return static_cast<double>(k) * s.cell_mass() + s.density(k) * (y - pos[k]);
}

/// Lifted pseudo-inverse X(z) in [x_0, x_0 + L).
inline double pseudo_inverse_lift(const ParticleState& s, double z) {
  const double c = s.domain().mass();
  require(z >= 0.0 && z < c, "pseudo_inverse needs z in [0, c_L)");
  const auto n = static_cast<double>(s.size());
  const double u = z * n / c;
  auto k = static_cast<std::size_t>(std::floor(u));
  if (k >= s.size()) k = s.size() - 1;
  return s.lifted(k) + (u - static_cast<double>(k)) * s.gap(k);
}

inline double pseudo_inverse(const ParticleState& s, double z) {
  return wrap(pseudo_inverse_lift(s, z), s.domain().length());
}

/// Exact cell averages of rho^N on an M-cell grid.
inline GridDensity to_grid(const ParticleState& s, std::size_t m) {
  require(m >= 1, "grid needs at least one cell");
  const double L = s.domain().length();
  const double h = L / static_cast<double>(m);
  std::vector<double> mass(m, 0.0);
  auto deposit = [&](double a, double b, double rho) {
    // a, b within [-L/2, L/2]
    if (b <= a) return;
    auto i = static_cast<std::size_t>(std::clamp(std::floor((a + 0.5 * L) / h), 0.0, static_cast<double>(m - 1)));
    while (i < m) {
      const double cl = -0.5 * L + h * static_cast<double>(i);
      const double cr = i + 1 == m ? 0.5 * L : cl + h;
      const double lo = std::max(a, cl), hi = std::min(b, cr);
      if (hi > lo) mass[i] += rho * (hi - lo);
      if (cr >= b) break;
      ++i;
    }
  };
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double g = s.gap(k);
    const double rho = s.density(k);
    const double a = wrap(s.lifted(k), L);
    const double b = a + g;
    if (b <= 0.5 * L) {
      deposit(a, b, rho);
    } else {
      deposit(a, 0.5 * L, rho);
      double rest = b - L;
      // a gap can exceed the remaining period only when it is the whole torus
      while (rest > 0.5 * L) {
        deposit(-0.5 * L, 0.5 * L, rho);
        rest -= L;
      }
      deposit(-0.5 * L, rest, rho);
    }
  }
  for (double& v : mass) v /= h;
  return GridDensity(L, std::move(mass));
}

/// Conservative remap of a grid density to m cells (exact overlap integrals).
inline GridDensity remap(const GridDensity& g, std::size_t m) {
  if (m == g.cell_count()) return g;
  return sample_profile(profile_from_grid(g), g.length, m);
}

inline double l1_distance(const GridDensity& a, const GridDensity& b) {
  require(a.cell_count() == b.cell_count(), "l1_distance needs grids with equal cell counts");
  require(std::abs(a.length - b.length) <= 1e-12 * a.length, "l1_distance needs grids on the same torus");
  double s = 0.0;
  for (std::size_t i = 0; i < a.cell_count(); ++i) s += std::abs(a.values[i] - b.values[i]);
  return s * a.cell_width();
}

// CSV exchange format: "# L=<L> M=<M> mass=<c_L>" then one cell average per line.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_grid_csv(std::ostream& os, const GridDensity& g) {
  os << "# L=" << format_double(g.length) << " M=" << g.cell_count() << " mass=" << format_double(g.mass())
     << "\n";
  for (double v : g.values) os << format_double(v) << "\n";
}

inline GridDensity read_grid_csv(std::istream& is) {
  std::string header;
  require(static_cast<bool>(std::getline(is, header)), "grid CSV is empty");
  double L = 0.0, mass = 0.0;
  std::size_t m = 0;
  {
    std::string body = header;
    require(body.rfind('#', 0) == 0, "grid CSV header must start with '#'");
    body.erase(0, 1);
    std::istringstream hs(body);
    std::string tok;
    bool has_l = false, has_m = false;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      require(eq != std::string::npos, "malformed grid CSV header token '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "L") { L = std::stod(val); has_l = true; }
      else if (key == "M") { m = static_cast<std::size_t>(std::stoul(val)); has_m = true; }
      else if (key == "mass") mass = std::stod(val);
      else throw Error("unknown grid CSV header key '" + key + "'");
    }
    require(has_l && has_m, "grid CSV header needs L and M");
  }
  std::vector<double> values;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    values.push_back(std::stod(line));
  }
  require(values.size() == m, "grid CSV has " + std::to_string(values.size()) + " rows, header says M=" +
                                  std::to_string(m));
  for (double v : values) require(v >= 0.0 && std::isfinite(v), "grid CSV values must be finite and nonnegative");
  GridDensity g(L, std::move(values));
  if (mass > 0.0) require(std::abs(g.mass() - mass) <= 1e-9 * mass, "grid CSV mass does not match its values");
  return g;
}

inline GridDensity read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open grid CSV '" + path + "'");
  return read_grid_csv(in);
}

} // namespace agdiff
