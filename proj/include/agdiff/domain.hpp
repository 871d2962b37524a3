#pragma once

#include <cmath>

#include "agdiff/error.hpp"

namespace agdiff {

/// The torus T_L = R / L Z together with the mass it carries.
class TorusDomain {
public:
  TorusDomain(double length, double mass) : length_(length), mass_(mass) {
    require(std::isfinite(length) && length > 0.0, "torus length must be positive");
    require(std::isfinite(mass) && mass > 0.0 && mass <= 1.0, "torus mass must lie in (0, 1]");
  }

  double length() const { return length_; }
  double mass() const { return mass_; }
  double left() const { return -0.5 * length_; }
  double right() const { return 0.5 * length_; }

  friend bool operator==(const TorusDomain&, const TorusDomain&) = default;

private:
  double length_;
  double mass_;
};

/// Canonical representative of x in [-L/2, L/2).
inline double wrap(double x, double length) {
  const double half = 0.5 * length;
  // differences of lifted positions land within one period of the window
  if (x >= -half && x < half) return x;
  if (x >= half && x < 3.0 * half) return x - length;
  if (x < -half && x >= -3.0 * half) return x + length;
  double r = x - length * std::floor((x + half) / length);
  // floor can round so that r lands on the excluded right endpoint
  if (r >= half) r -= length;
  if (r < -half) r += length;
  return r;
}

inline double wrap(double x, const TorusDomain& d) { return wrap(x, d.length()); }

inline double periodic_diff(double x, double y, double length) { return wrap(x - y, length); }

inline double periodic_diff(double x, double y, const TorusDomain& d) {
  return wrap(x - y, d.length());
}

/// Forward arc length from x_left to x_right, in (0, L]; the self-gap is L.
inline double gap(double x_left, double x_right, const TorusDomain& d) {
  const double L = d.length();
  double g = x_right - x_left;
  g -= L * std::floor(g / L);
  if (g <= 0.0 || g > L) g = L;
  return g;
}

} // namespace agdiff
