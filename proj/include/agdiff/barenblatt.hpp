#pragma once

// Self-similar solution of d_t rho = d_xx(rho^m) on the line:
//   rho(t, x) = t^-a (C - k x^2 t^-2a)_+^(1/(m-1)),  a = 1/(m+1),  k = a (m-1) / (2m),
// with C fixed by the total mass.

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "agdiff/error.hpp"

namespace agdiff {

class Barenblatt {
public:
  Barenblatt(double m, double mass) : m_(m), mass_(mass) {
    require(std::isfinite(m) && m > 1.0, "Barenblatt profile needs m > 1");
    require(std::isfinite(mass) && mass > 0.0, "Barenblatt profile needs positive mass");
    alpha_ = 1.0 / (m + 1.0);
    kappa_ = alpha_ * (m - 1.0) / (2.0 * m);
    p_ = 1.0 / (m - 1.0);
    // mass = C^(p + 1/2) kappa^(-1/2) B(1/2, p + 1)
    const double b = boost::math::beta(0.5, p_ + 1.0);
    c_ = std::pow(mass * std::sqrt(kappa_) / b, 1.0 / (p_ + 0.5));
  }

  double m() const { return m_; }
  double mass() const { return mass_; }
  double alpha() const { return alpha_; }
  double kappa() const { return kappa_; }
  double constant() const { return c_; }

  /// Radius of the support at time t.
  double support_radius(double t) const { return std::sqrt(c_ / kappa_) * std::pow(t, alpha_); }

  double operator()(double t, double x) const {
    require(t > 0.0, "Barenblatt profile needs t > 0");
    const double ta = std::pow(t, -alpha_);
    const double inner = c_ - kappa_ * x * x * ta * ta;
    if (inner <= 0.0) return 0.0;
    return ta * std::pow(inner, p_);
  }

  /// Mass of (-inf, x] at time t.
  double cumulative(double t, double x) const {
    require(t > 0.0, "Barenblatt profile needs t > 0");
    const double w = std::clamp(0.5 * (1.0 + x / support_radius(t)), 0.0, 1.0);
    if (w <= 0.0) return 0.0;
    if (w >= 1.0) return mass_;
    return mass_ * boost::math::ibeta(p_ + 1.0, p_ + 1.0, w);
  }

private:
  double m_, mass_;
  double alpha_ = 0.0, kappa_ = 0.0, p_ = 0.0, c_ = 0.0;
};

/// Pointwise evaluation.
inline double barenblatt(double m, double mass, double t, double x) { return Barenblatt(m, mass)(t, x); }

} // namespace agdiff
