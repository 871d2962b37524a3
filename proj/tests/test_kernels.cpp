#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "agdiff/kernels.hpp"

using agdiff::Kernel;
using agdiff::KernelSpec;

namespace {

Kernel yukawa(double beta) { return agdiff::build_kernel(KernelSpec::double_yukawa(beta)); }

// composite Simpson on [a, b] with n (even) panels
template <class F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * i);
  return s * h / 3.0;
}

} // namespace

TEST(DoubleYukawa, ValueAtOrigin) { EXPECT_DOUBLE_EQ(yukawa(2.0).eval(0.0), -3.0); }

TEST(DoubleYukawa, OneSidedDerivativeLimit) {
  const Kernel k = yukawa(2.0);
  EXPECT_NEAR(k.eval_d1(1e-12), 7.0, 1e-9);
  EXPECT_NEAR(k.eval_d1(-1e-12), -7.0, 1e-9);
  EXPECT_EQ(k.eval_d1(0.0), 0.0);
}

TEST(DoubleYukawa, CertifiedNorms) {
  const auto& n = yukawa(2.0).norms();
  EXPECT_NEAR(n.sup_k, 3.0, 1e-9);
  EXPECT_NEAR(n.sup_k1, 7.0, 1e-9);
  EXPECT_NEAR(n.sup_k2, 15.0, 1e-9);
}

TEST(DoubleYukawa, DerivativeL1NormAgainstQuadrature) {
  // K' changes sign at z = ln 8 for beta = 2, so ||K'||_L1 exceeds 2 |K(0)|
  const Kernel k = yukawa(2.0);
  // one-sided limit at the origin, where eval_d1 returns 0
  auto d1 = [&](double z) { return k.eval_d1(std::max(z, 1e-300)); };
  const double one_sided = simpson([&](double z) { return std::abs(d1(z)); }, 0.0, std::log(8.0), 20000) +
                           simpson([&](double z) { return std::abs(d1(z)); }, std::log(8.0), 60.0, 200000);
  EXPECT_NEAR(k.norms().l1_k1, 2.0 * one_sided, 1e-8);
  EXPECT_NEAR(k.norms().l1_k1, 6.25, 1e-8);
  // signed integral of K' over (0, inf) is beta^2 - 1
  EXPECT_NEAR(simpson(d1, 0.0, 60.0, 400000), 3.0, 1e-9);
}

TEST(DoubleYukawa, DerivativesMatchFiniteDifferences) {
  for (double beta : {2.0, 5.0}) {
    const Kernel k = yukawa(beta);
    for (double z : {-3.0, -0.7, -0.01, 0.02, 0.5, 1.3, 4.0}) {
      const double h = 1e-5;
      const double fd1 = (k.eval(z + h) - k.eval(z - h)) / (2 * h);
      const double fd2 = (k.eval_d1(z + h) - k.eval_d1(z - h)) / (2 * h);
      EXPECT_NEAR(k.eval_d1(z), fd1, 1e-7 * (1 + std::abs(fd1))) << "beta=" << beta << " z=" << z;
      EXPECT_NEAR(k.eval_d2(z), fd2, 1e-6 * (1 + std::abs(fd2))) << "beta=" << beta << " z=" << z;
    }
  }
}

TEST(DoubleYukawa, Antiderivatives) {
  const Kernel k = yukawa(2.0);
  for (double z : {-2.5, -0.3, 0.0, 0.4, 3.0}) {
    const double a1 = simpson([&](double s) { return k.eval(s); }, 0.0, z, 2000);
    EXPECT_NEAR(k.antiderivative1(z), a1, 1e-10);
    const double a2 = simpson([&](double s) { return k.antiderivative1(s); }, 0.0, z, 2000);
    EXPECT_NEAR(k.antiderivative2(z), a2, 1e-10);
  }
}

TEST(DoubleYukawa, RejectsNonPositiveBeta) {
  EXPECT_THROW(yukawa(0.0), agdiff::Error);
  EXPECT_THROW(yukawa(-1.0), agdiff::Error);
}

TEST(ZeroKernel, Vanishes) {
  const Kernel k = agdiff::build_kernel(KernelSpec::zero());
  EXPECT_TRUE(k.is_zero());
  for (double z : {-1.0, 0.0, 0.5}) {
    EXPECT_EQ(k.eval(z), 0.0);
    EXPECT_EQ(k.eval_d1(z), 0.0);
  }
  EXPECT_EQ(k.norms().sup_k, 0.0);
  EXPECT_EQ(k.norms().sup_k1, 0.0);
  EXPECT_EQ(k.norms().sup_k2, 0.0);
  EXPECT_EQ(k.norms().l1_k1, 0.0);
  EXPECT_TRUE(agdiff::validate_kernel(k, 1000, 1e-10).all_passed());
}

TEST(Morse, Norms) {
  // -2 e^{-|z|} + 3 e^{-2|z|}: K' at 0+ is 2 - 6 = -4, K'' at 0 is -2 + 12 = 10
  const Kernel k = agdiff::build_kernel(KernelSpec::morse(2.0, 1.0, 3.0, 0.5));
  EXPECT_NEAR(k.eval(0.0), 1.0, 1e-15);
  EXPECT_NEAR(k.norms().sup_k1, 4.0, 1e-9);
  EXPECT_NEAR(k.norms().sup_k2, 10.0, 1e-9);
  EXPECT_TRUE(agdiff::validate_kernel(k, 2000, 1e-10).all_passed());
}

TEST(ValidateKernel, DoubleYukawaPasses) {
  const auto r = agdiff::validate_kernel(yukawa(2.0), 10000, 1e-10);
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(ValidateKernel, SymmetricTableAndAsymmetricNode) {
  std::vector<double> z{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  std::vector<double> v{0.0, -0.3, -0.8, -1.0, -0.8, -0.3, 0.0};
  EXPECT_TRUE(agdiff::validate_kernel(Kernel::tabulated(z, v), 1000, 1e-10).all_passed());

  v[5] = -0.4; // node z = 1.0 no longer matches z = -1.0
  const auto r = agdiff::validate_kernel(Kernel::tabulated(z, v), 1000, 1e-10);
  const auto* sym = r.find("symmetry");
  ASSERT_NE(sym, nullptr);
  EXPECT_FALSE(sym->passed);
  EXPECT_NE(sym->detail.find("table node"), std::string::npos) << sym->detail;
  EXPECT_FALSE(r.all_passed());
}

TEST(TabulatedKernel, PiecewiseLinearNorms) {
  const Kernel k = Kernel::tabulated({-1.0, 0.0, 1.0}, {0.0, 2.0, 0.0});
  EXPECT_NEAR(k.eval(0.25), 1.5, 1e-15);
  EXPECT_NEAR(k.eval_d1(0.25), -2.0, 1e-15);
  EXPECT_NEAR(k.norms().sup_k, 2.0, 1e-15);
  EXPECT_NEAR(k.norms().sup_k1, 2.0, 1e-15);
  EXPECT_NEAR(k.norms().l1_k1, 4.0, 1e-15);
  EXPECT_THROW(Kernel::tabulated({0.0, 0.0}, {1.0, 1.0}), agdiff::Error);
}

TEST(TorusKernel, CellPairIntegralAgainstQuadrature) {
  const Kernel k = yukawa(2.0);
  const double L = 3.0;
  const agdiff::TorusKernel tk(k, L);
  // rectangles that straddle the seam and the origin of K
  const double a = -1.4, b = -0.2, c = 0.9, d = 2.6;
  const int n = 1200;
  auto inner = [&](double x) {
    // K' jumps where x - y hits a multiple of L/2 (origin and antipode); split there
    std::vector<double> cuts{c, d};
    for (int p = -4; p <= 4; ++p) {
      const double y = x - p * 0.5 * L;
      if (y > c && y < d) cuts.push_back(y);
    }
    std::sort(cuts.begin(), cuts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      s += simpson([&](double y) { return tk.eval(x - y); }, cuts[i], cuts[i + 1], 200);
    return s;
  };
  // inner(x) loses smoothness where x - c or x - d is a multiple of L/2
  const double x1 = c - 0.5 * L, x2 = d - L;
  const double ref = simpson(inner, a, x1, n) + simpson(inner, x1, x2, n) + simpson(inner, x2, b, n);
  EXPECT_NEAR(tk.cell_pair_integral(a, b, c, d), ref, 1e-9);
  // self cell
  auto self_inner = [&](double x) {
    return simpson([&](double y) { return tk.eval(x - y); }, a, x, 200) +
           simpson([&](double y) { return tk.eval(x - y); }, x, b, 200);
  };
  EXPECT_NEAR(tk.cell_pair_integral(a, b, a, b), simpson(self_inner, a, b, n), 1e-9);
}

TEST(TorusKernel, PeriodicAntiderivative) {
  const Kernel k = yukawa(2.0);
  const agdiff::TorusKernel tk(k, 2.0);
  const double period = tk.antiderivative1(1.0) - tk.antiderivative1(-1.0);
  for (double u : {-3.3, -0.4, 0.7, 2.5, 5.1})
    EXPECT_NEAR(tk.antiderivative1(u + 2.0) - tk.antiderivative1(u), period, 1e-12);
}

TEST(TorusKernel, DerivativeVanishesAtAntipode) {
  const Kernel k = yukawa(2.0);
  EXPECT_EQ(agdiff::torus_d1(k, -4.0, 8.0), 0.0);
  EXPECT_EQ(agdiff::torus_d1(k, std::nextafter(4.0, 0.0), 8.0), 0.0);
  EXPECT_EQ(agdiff::torus_d1(k, 1.5, 8.0), k.eval_d1(1.5));
  const agdiff::TorusKernel tk(k, 8.0);
  EXPECT_EQ(tk.eval_d1(4.0), 0.0);
  EXPECT_EQ(tk.eval_d1(-4.0), 0.0);
}
