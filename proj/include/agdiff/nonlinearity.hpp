#pragma once

// Diffusion nonlinearities phi(rho) = rho W'(rho) - W(rho) and the structural
// constants c0, c1, c2, rho_hat, rho_bar they are checked against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agdiff/error.hpp"
#include "agdiff/validation.hpp"

namespace agdiff {

struct NonlinearityConstants {
  double c0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double rho_hat = 0.5;
  double rho_bar = 2.0;
};

struct NonlinearitySpec {
  enum class Kind { power_law, custom };

  Kind kind = Kind::power_law;
  double m = 2.0;
  // custom: tabulated phi and W on increasing rho nodes starting at 0
  std::vector<double> table_rho;
  std::vector<double> table_phi;
  std::vector<double> table_w;

  static NonlinearitySpec power_law(double m) {
    NonlinearitySpec s;
    s.m = m;
    return s;
  }
  static NonlinearitySpec custom(std::vector<double> rho, std::vector<double> phi, std::vector<double> w) {
    NonlinearitySpec s;
    s.kind = Kind::custom;
    s.table_rho = std::move(rho);
    s.table_phi = std::move(phi);
    s.table_w = std::move(w);
    return s;
  }
};

class Nonlinearity {
public:
  static Nonlinearity power_law(double m) {
    require(std::isfinite(m) && m >= 1.0, "phi.m must satisfy m >= 1");
    Nonlinearity n;
    n.m_ = m;
    n.constants_ = {m, 1.0, 1.0, 0.5, 2.0};
    return n;
  }

  static Nonlinearity custom(std::vector<double> rho, std::vector<double> phi, std::vector<double> w) {
    require(rho.size() >= 2 && phi.size() == rho.size() && w.size() == rho.size(),
            "custom nonlinearity needs matching rho/phi/W columns with at least two rows");
    require(rho.front() == 0.0, "custom nonlinearity table must start at rho = 0");
    for (std::size_t i = 1; i < rho.size(); ++i)
      require(rho[i] > rho[i - 1], "custom nonlinearity rho nodes must be strictly increasing");
    Nonlinearity n;
    n.m_ = 0.0;
    n.rho_ = std::move(rho);
    n.phi_ = std::move(phi);
    n.w_ = std::move(w);
    n.estimate_constants();
    return n;
  }

  bool is_power_law() const { return m_ >= 1.0; }
  double exponent() const { return m_; }
  const NonlinearityConstants& constants() const { return constants_; }

  double phi(double rho) const {
    if (m_ == 2.0) return rho * rho;
    if (m_ == 1.0) return rho;
    if (m_ > 0.0) return std::pow(rho, m_);
    return table_interp(phi_, rho);
  }

  double phi_prime(double rho) const {
    if (m_ == 2.0) return 2.0 * rho;
    if (m_ == 1.0) return 1.0;
    if (m_ > 0.0) return m_ * std::pow(rho, m_ - 1.0);
    return table_slope(phi_, rho);
  }

  /// Internal energy density W.
  double w(double rho) const {
    if (m_ == 1.0) return rho > 0.0 ? rho * std::log(rho) - rho : 0.0;
    if (m_ > 0.0) return phi(rho) / (m_ - 1.0);
    return table_interp(w_, rho);
  }

  double phi_inverse(double v) const {
    require(v >= 0.0, "phi_inverse needs a nonnegative argument");
    if (m_ == 1.0) return v;
    if (m_ == 2.0) return std::sqrt(v);
    if (m_ > 0.0) return std::pow(v, 1.0 / m_);
    // phi strictly increasing: monotone bisection
    double lo = 0.0, hi = 1.0;
    while (phi(hi) < v) hi *= 2.0;
    const double tol = 1e-12 * (1.0 + v);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (phi(mid) < v) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

private:
  Nonlinearity() = default;

  // linear interpolation, linear extrapolation past the last node
  double table_interp(const std::vector<double>& col, double rho) const {
    if (rho <= rho_.front()) return col.front();
    std::size_t i = static_cast<std::size_t>(std::upper_bound(rho_.begin(), rho_.end(), rho) - rho_.begin());
    i = std::min(i, rho_.size() - 1) - 1;
    const double s = (col[i + 1] - col[i]) / (rho_[i + 1] - rho_[i]);
    return col[i] + s * (rho - rho_[i]);
  }

  double table_slope(const std::vector<double>& col, double rho) const {
    std::size_t i = static_cast<std::size_t>(std::upper_bound(rho_.begin(), rho_.end(), rho) - rho_.begin());
    i = std::clamp<std::size_t>(i, 1, rho_.size() - 1) - 1;
    return (col[i + 1] - col[i]) / (rho_[i + 1] - rho_[i]);
  }

  void estimate_constants() {
    NonlinearityConstants c{0.0, 0.0, std::numeric_limits<double>::infinity(), 0.5, 2.0};
    std::vector<double> probe(rho_.begin() + 1, rho_.end());
    for (std::size_t i = 0; i + 1 < rho_.size(); ++i) probe.push_back(0.5 * (rho_[i] + rho_[i + 1]));
    probe.push_back(std::max(2.0 * rho_.back(), 4.0));
    for (double r : probe) {
      const double p = phi(r);
      if (p > 0.0) c.c0 = std::max(c.c0, phi_prime(r) * r / p);
      if (r <= c.rho_hat) c.c1 = std::max(c.c1, p / r);
      if (r >= c.rho_bar) c.c2 = std::min(c.c2, p / r);
    }
    if (c.c1 == 0.0) c.c1 = phi(c.rho_hat) / c.rho_hat;
    if (c.c0 == 0.0) c.c0 = 1.0;
    constants_ = c;
  }

  double m_ = 2.0;
  std::vector<double> rho_, phi_, w_;
  NonlinearityConstants constants_;
};

inline Nonlinearity build_nonlinearity(const NonlinearitySpec& spec) {
  if (spec.kind == NonlinearitySpec::Kind::power_law) return Nonlinearity::power_law(spec.m);
  return Nonlinearity::custom(spec.table_rho, spec.table_phi, spec.table_w);
}

/// Checks W >= 0, phi(0) = 0, strict monotonicity, phi' rho <= c0 phi,
/// phi <= max{rho, c0 W}, the linear bounds near 0 and infinity, and the
/// inverse round trip on the grid (0, rho_max].
inline ValidationReport validate_nonlinearity(const Nonlinearity& nl, double rho_max, std::size_t n_samples) {
  require(n_samples >= 100, "validate_nonlinearity needs at least 100 samples");
  require(rho_max > 0.0, "rho_max must be positive");
  const auto& c = nl.constants();
  std::vector<double> grid(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    grid[i] = rho_max * static_cast<double>(i + 1) / static_cast<double>(n_samples);

  auto first_failure = [&](const std::string& name, auto&& holds, const std::string& what) {
    Check chk{name, true, {}, {}};
    for (double r : grid) {
      if (!holds(r)) {
        std::ostringstream os;
        os << what << " fails at rho=" << r;
        chk.passed = false;
        chk.witness = r;
        chk.detail = os.str();
        break;
      }
    }
    return chk;
  };
  constexpr double rel = 1e-12;

  ValidationReport report;
  report.checks.push_back(first_failure("W_nonnegative", [&](double r) { return nl.w(r) >= 0.0; }, "W >= 0"));

  Check zero{"phi_at_zero", nl.phi(0.0) == 0.0, {}, {}};
  if (!zero.passed) {
    zero.witness = 0.0;
    zero.detail = "phi(0) != 0";
  }
  report.checks.push_back(zero);

  Check mono{"phi_increasing", true, {}, {}};
  double prev = nl.phi(0.0);
  for (double r : grid) {
    const double p = nl.phi(r);
    if (!(p > prev)) {
      std::ostringstream os;
      os << "phi not strictly increasing at rho=" << r;
      mono.passed = false;
      mono.witness = r;
      mono.detail = os.str();
      break;
    }
    prev = p;
  }
  report.checks.push_back(mono);

  report.checks.push_back(first_failure(
      "phi_prime_bound", [&](double r) { return nl.phi_prime(r) * r <= c.c0 * nl.phi(r) * (1.0 + rel); },
      "phi'(rho) rho <= c0 phi(rho)"));
  report.checks.push_back(first_failure(
      "phi_energy_bound",
      [&](double r) { return nl.phi(r) <= std::max(r, c.c0 * nl.w(r)) * (1.0 + rel); },
      "phi(rho) <= max{rho, c0 W(rho)}"));
  report.checks.push_back(first_failure(
      "phi_linear_bounds",
      [&](double r) {
        if (r <= c.rho_hat && nl.phi(r) > c.c1 * r * (1.0 + rel)) return false;
        if (r >= c.rho_bar && nl.phi(r) < c.c2 * r * (1.0 - rel)) return false;
        return true;
      },
      "phi(rho) <= c1 rho below rho_hat and >= c2 rho above rho_bar"));
  report.checks.push_back(first_failure(
      "inverse_roundtrip",
      [&](double r) { return std::abs(nl.phi_inverse(nl.phi(r)) - r) <= 1e-10 * r; },
      "phi_inverse(phi(rho)) == rho"));
  return report;
}

} // namespace agdiff
