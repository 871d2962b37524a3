#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "agdiff/nonlinearity.hpp"

using agdiff::Nonlinearity;

TEST(PowerLaw, SquareValues) {
  const auto nl = Nonlinearity::power_law(2.0);
  EXPECT_DOUBLE_EQ(nl.phi(3.0), 9.0);
  EXPECT_DOUBLE_EQ(nl.w(3.0), 9.0);
  EXPECT_DOUBLE_EQ(nl.phi_prime(3.0), 6.0);
}

TEST(PowerLaw, CubeInverse) { EXPECT_NEAR(Nonlinearity::power_law(3.0).phi_inverse(8.0), 2.0, 1e-14); }

TEST(PowerLaw, PhiIsLegendreOfW) {
  // phi = rho W'(rho) - W(rho), W' by central differences
  for (double m : {1.0, 1.5, 2.0, 3.0}) {
    const auto nl = Nonlinearity::power_law(m);
    for (double r : {0.2, 0.7, 1.0, 2.5, 9.0}) {
      const double h = 1e-5 * r;
      const double wp = (nl.w(r + h) - nl.w(r - h)) / (2 * h);
      EXPECT_NEAR(r * wp - nl.w(r), nl.phi(r), 1e-7 * (1 + nl.phi(r))) << "m=" << m << " rho=" << r;
    }
  }
}

TEST(PowerLaw, DerivativeMatchesFiniteDifferences) {
  for (double m : {1.0, 1.5, 2.0, 3.0}) {
    const auto nl = Nonlinearity::power_law(m);
    double prev_err = 0.0;
    for (double h : {1e-2, 5e-3}) {
      double err = 0.0;
      for (int i = 1; i <= 100; ++i) {
        const double r = 0.1 + (100.0 - 0.1) * i / 100.0;
        const double fd = (nl.phi(r + h) - nl.phi(r - h)) / (2 * h);
        err = std::max(err, std::abs(fd - nl.phi_prime(r)) / (1 + std::abs(fd)));
      }
      if (prev_err > 1e-12) EXPECT_LE(err, 0.3 * prev_err) << "m=" << m; // second-order
      prev_err = err;
    }
  }
}

TEST(PowerLaw, RejectsSublinear) { EXPECT_THROW(Nonlinearity::power_law(0.5), agdiff::Error); }

TEST(ValidateNonlinearity, SquarePasses) {
  const auto r = agdiff::validate_nonlinearity(Nonlinearity::power_law(2.0), 100.0, 1000);
  for (const auto& c : r.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(ValidateNonlinearity, OtherExponentsPass) {
  for (double m : {1.5, 3.0}) {
    const auto r = agdiff::validate_nonlinearity(Nonlinearity::power_law(m), 100.0, 1000);
    EXPECT_TRUE(r.all_passed()) << "m=" << m;
  }
}

TEST(ValidateNonlinearity, LinearDiffusionFailsOnlyWNonnegative) {
  const auto r = agdiff::validate_nonlinearity(Nonlinearity::power_law(1.0), 10.0, 1000);
  EXPECT_FALSE(r.passed("W_nonnegative"));
  ASSERT_TRUE(r.find("W_nonnegative")->witness.has_value());
  EXPECT_LT(*r.find("W_nonnegative")->witness, std::exp(1.0));
  const double half = Nonlinearity::power_law(1.0).w(0.5);
  EXPECT_NEAR(half, 0.5 * std::log(0.5) - 0.5, 1e-15);
  for (const auto& c : r.checks)
    if (c.name != "W_nonnegative") EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(ValidateNonlinearity, NonMonotoneTableHasWitness) {
  const auto nl = Nonlinearity::custom({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 0.5, 4.0}, {0.0, 1.0, 2.0, 3.0});
  const auto r = agdiff::validate_nonlinearity(nl, 3.0, 300);
  const auto* mono = r.find("phi_increasing");
  ASSERT_NE(mono, nullptr);
  EXPECT_FALSE(mono->passed);
  ASSERT_TRUE(mono->witness.has_value());
  EXPECT_GT(*mono->witness, 1.0);
  EXPECT_LE(*mono->witness, 2.0 + 1e-12);
}

TEST(CustomNonlinearity, InterpolationAndInverse) {
  const auto nl = Nonlinearity::custom({0.0, 1.0, 2.0}, {0.0, 1.0, 4.0}, {0.0, 1.0, 4.0});
  EXPECT_DOUBLE_EQ(nl.phi(1.5), 2.5);
  EXPECT_DOUBLE_EQ(nl.phi_prime(1.5), 3.0);
  EXPECT_DOUBLE_EQ(nl.phi(3.0), 7.0); // linear extrapolation
  EXPECT_NEAR(nl.phi_inverse(2.5), 1.5, 1e-11);
  EXPECT_THROW(Nonlinearity::custom({0.1, 1.0}, {0.0, 1.0}, {0.0, 1.0}), agdiff::Error);
}
