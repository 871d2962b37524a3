#pragma once

// Interaction kernels K: even, bounded, C^2 away from the origin, with
// integrable derivative. Closed-form kinds are finite sums of exponentials
// K(z) = sum_i a_i exp(-r_i |z|); tabulated kernels interpolate linearly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agdiff/domain.hpp"
#include "agdiff/error.hpp"
#include "agdiff/validation.hpp"

namespace agdiff {

struct KernelNorms {
  double sup_k = 0.0;  // ||K||_inf
  double sup_k1 = 0.0; // ||K'||_inf
  double sup_k2 = 0.0; // ||K''||_inf away from the origin
  double l1_k1 = 0.0;  // ||K'||_L1(R)
};

struct KernelSpec {
  enum class Kind { double_yukawa, morse, zero, tabulated };

  Kind kind = Kind::zero;
  double beta = 0.0;
  double attr_amp = 0.0;
  double attr_range = 0.0;
  double rep_amp = 0.0;
  double rep_range = 0.0;
  std::vector<double> table_z; // strictly increasing sample points
  std::vector<double> table_k; // kernel values at table_z

  static KernelSpec double_yukawa(double beta) {
    KernelSpec s;
    s.kind = Kind::double_yukawa;
    s.beta = beta;
    return s;
  }
  static KernelSpec morse(double attr_amp, double attr_range, double rep_amp, double rep_range) {
    KernelSpec s;
    s.kind = Kind::morse;
    s.attr_amp = attr_amp;
    s.attr_range = attr_range;
    s.rep_amp = rep_amp;
    s.rep_range = rep_range;
    return s;
  }
  static KernelSpec zero() { return KernelSpec{}; }
  static KernelSpec tabulated(std::vector<double> z, std::vector<double> k) {
    KernelSpec s;
    s.kind = Kind::tabulated;
    s.table_z = std::move(z);
    s.table_k = std::move(k);
    return s;
  }
};

inline const char* to_string(KernelSpec::Kind k) {
  switch (k) {
    case KernelSpec::Kind::double_yukawa: return "double_yukawa";
    case KernelSpec::Kind::morse: return "morse";
    case KernelSpec::Kind::zero: return "zero";
    case KernelSpec::Kind::tabulated: return "tabulated";
  }
  return "?";
}

class Kernel {
public:
  struct Term {
    double amp;
    double rate;
  };

  /// Sum of exponentials; an empty term list is the zero kernel.
  static Kernel exponential_sum(std::vector<Term> terms);
  static Kernel tabulated(std::vector<double> z, std::vector<double> k);

  double eval(double z) const {
    if (tabulated_) return table_eval(z);
    const double a = std::abs(z);
    double s = 0.0;
    for (const auto& t : terms_) s += t.amp * std::exp(-t.rate * a);
    return s;
  }

  /// K'(z), with K'(0) := 0.
  double eval_d1(double z) const {
    if (z == 0.0) return 0.0;
    if (tabulated_) return table_slope(z);
    const double a = std::abs(z);
    double s = 0.0;
    for (const auto& t : terms_) s -= t.amp * t.rate * std::exp(-t.rate * a);
    return z > 0.0 ? s : -s;
  }

  /// K''(z) away from the origin; at 0 the (common) one-sided limit.
  double eval_d2(double z) const {
    if (tabulated_) return 0.0;
    const double a = std::abs(z);
    double s = 0.0;
    for (const auto& t : terms_) s += t.amp * t.rate * t.rate * std::exp(-t.rate * a);
    return s;
  }

  /// True when closed-form first and second antiderivatives are available.
  bool has_antiderivatives() const { return !tabulated_; }

  /// int_0^z K.
  double antiderivative1(double z) const {
    require(!tabulated_, "tabulated kernels carry no closed-form antiderivative");
    const double a = std::abs(z);
    double s = 0.0;
    for (const auto& t : terms_) s += t.amp * (-std::expm1(-t.rate * a)) / t.rate;
    return z >= 0.0 ? s : -s;
  }

  /// int_0^z int_0^y K; even in z.
  double antiderivative2(double z) const {
    require(!tabulated_, "tabulated kernels carry no closed-form antiderivative");
    const double a = std::abs(z);
    double s = 0.0;
    for (const auto& t : terms_) s += t.amp / t.rate * (a + std::expm1(-t.rate * a) / t.rate);
    return s;
  }

  const KernelNorms& norms() const { return norms_; }
  bool is_zero() const { return !tabulated_ && terms_.empty(); }
  bool is_tabulated() const { return tabulated_; }
  const std::vector<Term>& terms() const { return terms_; }
  const std::vector<double>& table_z() const { return table_z_; }

  /// Slowest exponential decay rate (0 for the zero kernel).
  double decay_rate() const {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& t : terms_) r = std::min(r, t.rate);
    return std::isfinite(r) ? r : 0.0;
  }

  /// Truncation radius for numerical norm estimation.
  double cutoff() const {
    if (tabulated_) return std::max(std::abs(table_z_.front()), std::abs(table_z_.back()));
    const double r = decay_rate();
    return r > 0.0 ? std::max(50.0, 20.0 / r) : 50.0;
  }

  /// Analytic bound on sup_{|z| > z_cut} |K^(order)(z)| for exponential sums.
  double tail_bound(int order, double z_cut) const {
    if (tabulated_) return order == 0 ? std::max(std::abs(table_k_.front()), std::abs(table_k_.back())) : 0.0;
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.amp) * std::pow(t.rate, order) * std::exp(-t.rate * z_cut);
    return s;
  }

private:
  Kernel() = default;

  double table_eval(double z) const {
    if (z <= table_z_.front()) return table_k_.front();
    if (z >= table_z_.back()) return table_k_.back();
    const auto it = std::upper_bound(table_z_.begin(), table_z_.end(), z);
    const std::size_t i = static_cast<std::size_t>(it - table_z_.begin()) - 1;
    const double w = (z - table_z_[i]) / (table_z_[i + 1] - table_z_[i]);
    return (1.0 - w) * table_k_[i] + w * table_k_[i + 1];
  }

  double table_slope(double z) const {
    if (z <= table_z_.front() || z >= table_z_.back()) return 0.0;
    const auto it = std::upper_bound(table_z_.begin(), table_z_.end(), z);
    const std::size_t i = static_cast<std::size_t>(it - table_z_.begin()) - 1;
    const double right = (table_k_[i + 1] - table_k_[i]) / (table_z_[i + 1] - table_z_[i]);
    if (z != table_z_[i]) return right;
    // on an interior node take the mean of the one-sided slopes, which keeps K' odd
    const double left = (table_k_[i] - table_k_[i - 1]) / (table_z_[i] - table_z_[i - 1]);
    return 0.5 * (left + right);
  }

  void certify_norms();

  std::vector<Term> terms_;
  bool tabulated_ = false;
  std::vector<double> table_z_;
  std::vector<double> table_k_;
  KernelNorms norms_;
};

namespace detail {

/// Maximum of |f| on [a, b] from a dense uniform grid, with each grid-local
/// maximum refined by golden-section search on its bracketing cells.
inline double dense_sup(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  std::vector<double> v(n + 1);
  for (std::size_t i = 0; i <= n; ++i) v[i] = std::abs(f(a + h * static_cast<double>(i)));
  double best = *std::max_element(v.begin(), v.end());
  for (std::size_t i = 1; i < n; ++i) {
    if (!(v[i] >= v[i - 1] && v[i] >= v[i + 1]) || v[i] < 0.5 * best) continue;
    double lo = a + h * static_cast<double>(i - 1);
    double hi = a + h * static_cast<double>(i + 1);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
    for (int it = 0; it < 80 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
      if (f1 < f2) {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + g * (hi - lo); f2 = std::abs(f(x2));
      } else {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - g * (hi - lo); f1 = std::abs(f(x1));
      }
    }
    best = std::max({best, f1, f2});
  }
  return best;
}

} // namespace detail

inline Kernel Kernel::exponential_sum(std::vector<Term> terms) {
  Kernel k;
  for (const auto& t : terms) {
    require(std::isfinite(t.amp) && std::isfinite(t.rate) && t.rate > 0.0,
            "exponential kernel terms need finite amplitudes and positive rates");
    if (t.amp != 0.0) k.terms_.push_back(t);
  }
  k.certify_norms();
  return k;
}

inline Kernel Kernel::tabulated(std::vector<double> z, std::vector<double> values) {
  require(z.size() == values.size() && z.size() >= 2, "tabulated kernel needs matching z/K columns");
  for (std::size_t i = 1; i < z.size(); ++i)
    require(z[i] > z[i - 1], "tabulated kernel sample points must be strictly increasing");
  Kernel k;
  k.tabulated_ = true;
  k.table_z_ = std::move(z);
  k.table_k_ = std::move(values);
  k.certify_norms();
  return k;
}

inline void Kernel::certify_norms() {
  if (tabulated_) {
    // piecewise-linear: extremes sit on nodes, K'' vanishes off nodes
    KernelNorms n;
    for (double v : table_k_) n.sup_k = std::max(n.sup_k, std::abs(v));
    for (std::size_t i = 0; i + 1 < table_z_.size(); ++i) {
      const double dk = table_k_[i + 1] - table_k_[i];
      n.sup_k1 = std::max(n.sup_k1, std::abs(dk / (table_z_[i + 1] - table_z_[i])));
      n.l1_k1 += std::abs(dk);
    }
    norms_ = n;
    return;
  }
  if (terms_.empty()) {
    norms_ = KernelNorms{};
    return;
  }
  const double zc = cutoff();
  constexpr std::size_t grid = 1'000'000;
  auto k0 = [this](double z) { return eval(z); };
  auto k1 = [this](double z) { return z == 0.0 ? eval_d1(1e-300) : eval_d1(z); };
  auto k2 = [this](double z) { return eval_d2(z); };
  KernelNorms n;
  n.sup_k = std::max(detail::dense_sup(k0, 0.0, zc, grid), tail_bound(0, zc));
  n.sup_k1 = std::max(detail::dense_sup(k1, 0.0, zc, grid), tail_bound(1, zc));
  n.sup_k2 = std::max(detail::dense_sup(k2, 0.0, zc, grid), tail_bound(2, zc));

  // ||K'||_L1 = 2 * sum over monotone pieces of |K(b) - K(a)|, pieces split at
  // sign changes of K' located on the grid and refined by bisection
  const double h = zc / static_cast<double>(grid);
  double last_root = 0.0;
  double one_sided = 0.0;
  double prev = k1(0.0);
  for (std::size_t i = 1; i <= grid; ++i) {
    const double z = h * static_cast<double>(i);
    const double cur = k1(z);
    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
      double lo = z - h, hi = z;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((k1(mid) > 0.0) == (prev > 0.0)) lo = mid; else hi = mid;
      }
      const double root = 0.5 * (lo + hi);
      one_sided += std::abs(eval(root) - eval(last_root));
      last_root = root;
    }
    if (cur != 0.0) prev = cur;
  }
  one_sided += std::abs(eval(zc) - eval(last_root)) + tail_bound(0, zc);
  n.l1_k1 = 2.0 * one_sided;
  norms_ = n;
}

/// Builds the kernel described by spec; throws on invalid parameters.
inline Kernel build_kernel(const KernelSpec& spec) {
  using Kind = KernelSpec::Kind;
  switch (spec.kind) {
    case Kind::double_yukawa:
      require(std::isfinite(spec.beta) && spec.beta > 0.0, "kernel.beta must be a positive real");
      // K(z) = -beta^2 exp(-beta |z|) + exp(-|z|)
      return Kernel::exponential_sum({{-spec.beta * spec.beta, spec.beta}, {1.0, 1.0}});
    case Kind::morse:
      require(spec.attr_range > 0.0, "kernel.attr_range must be a positive real");
      require(spec.rep_range > 0.0, "kernel.rep_range must be a positive real");
      require(spec.attr_amp >= 0.0, "kernel.attr_amp must be nonnegative");
      require(spec.rep_amp >= 0.0, "kernel.rep_amp must be nonnegative");
      return Kernel::exponential_sum(
          {{-spec.attr_amp, 1.0 / spec.attr_range}, {spec.rep_amp, 1.0 / spec.rep_range}});
    case Kind::zero:
      return Kernel::exponential_sum({});
    case Kind::tabulated:
      return Kernel::tabulated(spec.table_z, spec.table_k);
  }
  throw Error("unknown kernel kind");
}

/// The kernel seen on T_L: K evaluated at the canonical representative of its
/// argument, with antiderivatives of the periodic function.
/// K' at a canonical difference z in [-L/2, L/2). The single-representative
/// kernel jumps at the antipode; within rounding of it the mean of the one-sided
/// limits, 0, is used.
inline double torus_d1(const Kernel& k, double z, double length) {
  return std::abs(std::abs(z) - 0.5 * length) <= 1e-12 * length ? 0.0 : k.eval_d1(z);
}

class TorusKernel {
public:
  TorusKernel(const Kernel& k, double length) : kernel_(&k), length_(length) {
    if (k.has_antiderivatives()) period_integral_ = 2.0 * k.antiderivative1(0.5 * length);
  }

  const Kernel& kernel() const { return *kernel_; }
  double length() const { return length_; }

  double eval(double u) const { return kernel_->eval(wrap(u, length_)); }
  double eval_d1(double u) const { return torus_d1(*kernel_, wrap(u, length_), length_); }

  /// int_0^u K(wrap(s)) ds for any real u.
  double antiderivative1(double u) const {
    const double r = wrap(u, length_);
    const double n = std::round((u - r) / length_);
    return kernel_->antiderivative1(r) + n * period_integral_;
  }

  /// int_0^u int_0^s K(wrap(v)) dv ds for any real u.
  double antiderivative2(double u) const {
    const double r = wrap(u, length_);
    const double n = std::round((u - r) / length_);
    return kernel_->antiderivative2(r) + n * period_integral_ * r +
           0.5 * period_integral_ * length_ * n * n;
  }

  /// int_a^b int_c^d K(wrap(x - y)) dy dx.
  double cell_pair_integral(double a, double b, double c, double d) const {
    return antiderivative2(b - c) - antiderivative2(a - c) - antiderivative2(b - d) +
           antiderivative2(a - d);
  }

private:
  const Kernel* kernel_;
  double length_;
  double period_integral_ = 0.0;
};

namespace detail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                               double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  // split into panels so narrow features near the origin are resolved
  const int panels = 64;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * p / panels;
    const double hi = a + (b - a) * (p + 1) / panels;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += adaptive_simpson(f, lo, hi, fa, fm, fb, whole, tol / panels, 40);
  }
  return total;
}

} // namespace detail

/// Numerical check of the kernel assumptions: symmetry, continuity at the
/// origin, boundedness of K, K', K'' against the certified norms, and
/// finiteness of ||K'||_L1.
inline ValidationReport validate_kernel(const Kernel& k, std::size_t n_samples, double tol) {
  require(n_samples >= 100, "validate_kernel needs at least 100 samples");
  const double zmax = k.cutoff();
  // table nodes first, so a bad node is reported as the witness
  std::vector<double> samples;
  samples.reserve(n_samples + k.table_z().size());
  if (k.is_tabulated())
    for (double z : k.table_z())
      if (z > 0.0) samples.push_back(z);
  for (std::size_t i = 0; i < n_samples; ++i)
    samples.push_back(zmax * static_cast<double>(i + 1) / static_cast<double>(n_samples));
  auto describe = [&](double z) {
    std::ostringstream os;
    os << "z=" << z;
    const auto& tz = k.table_z();
    for (std::size_t i = 0; i < tz.size(); ++i)
      if (tz[i] == z || tz[i] == -z) os << " (table node " << i << ")";
    return os.str();
  };

  ValidationReport report;
  Check sym{"symmetry", true, {}, {}};
  Check odd{"odd_derivative", true, {}, {}};
  for (double z : samples) {
    const double a = k.eval(z), b = k.eval(-z);
    if (sym.passed && std::abs(a - b) > tol * std::max(1.0, std::abs(a))) {
      sym.passed = false;
      sym.witness = z;
      sym.detail = describe(z) + ": K(z) != K(-z)";
    }
    const double d = k.eval_d1(z), e = k.eval_d1(-z);
    if (odd.passed && std::abs(d + e) > tol * std::max(1.0, std::abs(d))) {
      odd.passed = false;
      odd.witness = z;
      odd.detail = describe(z) + ": K'(z) != -K'(-z)";
    }
  }
  report.checks.push_back(sym);
  report.checks.push_back(odd);

  Check cont{"continuity_at_origin", true, {}, {}};
  for (double delta : {1e-4, 1e-6, 1e-8}) {
    const double jump = std::max(std::abs(k.eval(delta) - k.eval(0.0)), std::abs(k.eval(-delta) - k.eval(0.0)));
    if (!(jump <= k.norms().sup_k1 * delta * (1.0 + 1e-6) + tol)) {
      cont.passed = false;
      cont.witness = delta;
      cont.detail = "K jumps at the origin";
      break;
    }
  }
  report.checks.push_back(cont);

  Check bounded{"boundedness", true, {}, {}};
  const auto& n = k.norms();
  if (!(std::isfinite(n.sup_k) && std::isfinite(n.sup_k1) && std::isfinite(n.sup_k2))) {
    bounded.passed = false;
    bounded.detail = "non-finite norm constant";
  }
  for (double z : samples) {
    if (!bounded.passed) break;
    for (double s : {z, -z}) {
      const double slack = 1.0 + tol;
      if (std::abs(k.eval(s)) > n.sup_k * slack + tol || std::abs(k.eval_d1(s)) > n.sup_k1 * slack + tol ||
          std::abs(k.eval_d2(s)) > n.sup_k2 * slack + tol) {
        bounded.passed = false;
        bounded.witness = s;
        bounded.detail = describe(s) + ": sample exceeds certified norm";
        break;
      }
    }
  }
  report.checks.push_back(bounded);

  Check l1{"derivative_integrable", true, {}, {}};
  std::function<double(double)> abs_d1 = [&k](double z) { return std::abs(k.eval_d1(z)); };
  const double quad = 2.0 * (detail::integrate(abs_d1, 0.0, zmax, 1e-10) + k.tail_bound(0, zmax));
  if (!std::isfinite(quad) || !std::isfinite(n.l1_k1)) {
    l1.passed = false;
    l1.detail = "||K'||_L1 is not finite";
  } else {
    std::ostringstream os;
    os << "quadrature " << quad << " vs certified " << n.l1_k1;
    l1.detail = os.str();
  }
  report.checks.push_back(l1);
  return report;
}

} // namespace agdiff
