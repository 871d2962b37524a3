#pragma once

// Initial data on the line, cut to the window [-L/2, L/2), normalised to the
// torus mass and optionally lifted off vacuum by a constant floor.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "agdiff/barenblatt.hpp"
#include "agdiff/domain.hpp"
#include "agdiff/error.hpp"
#include "agdiff/particle_state.hpp"

namespace agdiff {

struct InitialSpec {
  enum class Kind { uniform, hat, gaussian_like, barenblatt, from_file };

  Kind kind = Kind::uniform;
  double center = 0.0;
  double width = 1.0;  // hat half-width
  double height = 1.0; // hat peak before normalisation
  double sigma = 1.0;
  double m = 2.0;      // Barenblatt exponent
  double t0 = 0.1;     // Barenblatt time
  std::string path;
  double vacuum_floor = 0.0; // epsilon_lambda >= 0
};

inline const char* to_string(InitialSpec::Kind k) {
  switch (k) {
    case InitialSpec::Kind::uniform: return "uniform";
    case InitialSpec::Kind::hat: return "hat";
    case InitialSpec::Kind::gaussian_like: return "gaussian_like";
    case InitialSpec::Kind::barenblatt: return "barenblatt";
    case InitialSpec::Kind::from_file: return "from_file";
  }
  return "?";
}

namespace detail {

/// Mass of (-inf, x] for the raw (unnormalised) line shape.
inline std::function<double(double)> line_cumulative(const InitialSpec& spec, double length) {
  using Kind = InitialSpec::Kind;
  switch (spec.kind) {
    case Kind::uniform:
      return [length](double x) { return x + 0.5 * length; };
    case Kind::hat: {
      require(spec.width > 0.0, "initial.width must be positive");
      require(spec.height > 0.0, "initial.height must be positive");
      const double c = spec.center, w = spec.width, h = spec.height;
      return [c, w, h](double x) {
        const double u = (x - c) / w;
        if (u <= -1.0) return 0.0;
        if (u >= 1.0) return h * w;
        if (u <= 0.0) return 0.5 * h * w * (1.0 + u) * (1.0 + u);
        return h * w * (1.0 - 0.5 * (1.0 - u) * (1.0 - u));
      };
    }
    case Kind::gaussian_like: {
      require(spec.sigma > 0.0, "initial.sigma must be positive");
      const double c = spec.center, s = spec.sigma;
      return [c, s](double x) { return 0.5 * std::erfc(-(x - c) / (s * std::sqrt(2.0))); };
    }
    case Kind::barenblatt: {
      require(spec.t0 > 0.0, "initial.t0 must be positive");
      auto b = std::make_shared<Barenblatt>(spec.m, 1.0);
      const double t0 = spec.t0, c = spec.center;
      return [b, t0, c](double x) { return b->cumulative(t0, x - c); };
    }
    case Kind::from_file: {
      auto g = std::make_shared<GridDensity>(read_grid_csv(spec.path));
      require(std::abs(g->length - length) <= 1e-12 * length,
              "initial.path grid length does not match domain.L");
      auto p = std::make_shared<DensityProfile>(profile_from_grid(*g));
      return [p](double x) { return p->cumulative(x); };
    }
  }
  throw Error("unknown initial datum kind");
}

} // namespace detail

/// Builds the torus datum: the line shape cut to the window, scaled to carry
/// the torus mass, then (if vacuum_floor > 0) floored and renormalised.
inline DensityProfile make_profile(const InitialSpec& spec, const TorusDomain& d) {
  require(spec.vacuum_floor >= 0.0 && std::isfinite(spec.vacuum_floor), "initial.vacuum_floor must be >= 0");
  const double L = d.length();
  const double c = d.mass();
  auto raw = detail::line_cumulative(spec, L);
  const double lo = raw(-0.5 * L);
  const double window = raw(0.5 * L) - lo;
  require(window > 0.0, "initial datum carries no mass inside the window");
  const double eps = spec.vacuum_floor;
  const double scale = c / (c + eps * L);
  DensityProfile p;
  p.total = c;
  p.cumulative = [raw, lo, window, c, eps, scale, L](double x) {
    const double y = std::clamp(x, -0.5 * L, 0.5 * L);
    const double base = c * (raw(y) - lo) / window;
    return scale * (base + eps * (y + 0.5 * L));
  };
  if (spec.kind == InitialSpec::Kind::uniform) p.quantile = [L, c](double z) { return -0.5 * L + z * L / c; };
  return p;
}

/// First moment of the datum, int |x| rho_0, from its cumulative on a fine grid.
inline double first_moment(const DensityProfile& p, double length, std::size_t cells = 1 << 14) {
  const GridDensity g = sample_profile(p, length, cells);
  double s = 0.0;
  for (std::size_t i = 0; i < cells; ++i) s += std::abs(g.cell_left(i) + 0.5 * g.cell_width()) * g.values[i];
  return s * g.cell_width();
}

} // namespace agdiff
