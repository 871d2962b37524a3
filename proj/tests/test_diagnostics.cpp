#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "agdiff/diagnostics.hpp"
#include "agdiff/harness.hpp"
#include "agdiff/initial_data.hpp"

using agdiff::Kernel;
using agdiff::KernelSpec;
using agdiff::Nonlinearity;
using agdiff::ParticleState;
using agdiff::TorusDomain;

namespace {

Kernel yukawa(double beta) { return agdiff::build_kernel(KernelSpec::double_yukawa(beta)); }
Kernel zero_kernel() { return agdiff::build_kernel(KernelSpec::zero()); }

ParticleState uniform_state(double L, double c, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = -0.5 * L + L * static_cast<double>(k) / static_cast<double>(n);
  return ParticleState(TorusDomain(L, c), x);
}

ParticleState two_particles() { return ParticleState(TorusDomain(2.0, 1.0), {-1.0, -0.5}); }

template <class F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * i);
  return s * h / 3.0;
}

} // namespace

TEST(Energy, UniformPorousMedium) {
  const auto nl = Nonlinearity::power_law(2.0);
  const auto e4 = agdiff::energy(uniform_state(4.0, 1.0, 16), zero_kernel(), nl);
  EXPECT_NEAR(e4.internal, 0.25, 1e-15);
  EXPECT_EQ(e4.interaction, 0.0);
  EXPECT_NEAR(e4.total, 0.25, 1e-15);
  EXPECT_NEAR(agdiff::energy(uniform_state(8.0, 1.0, 16), zero_kernel(), nl).internal, 0.125, 1e-15);
}

TEST(Energy, TwoParticleInteractionAgainstDenseQuadrature) {
  const auto s = two_particles();
  const Kernel k = yukawa(2.0);
  const double L = 2.0;
  // density 1 on [-1, -0.5), 1/3 on [-0.5, 1); inner integral split at the jump
  // and where x - y is a multiple of L/2 (kinks of the periodic kernel)
  auto inner = [&](double x) {
    std::vector<double> cuts{-1.0, -0.5, 1.0};
    for (int p = -4; p <= 4; ++p) {
      const double y = x - 0.5 * p * L;
      if (y > -1.0 && y < 1.0 && y != -0.5) cuts.push_back(y);
    }
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double r = cuts[i] < -0.5 ? 1.0 : 1.0 / 3.0;
      acc += r * simpson([&](double y) { return k.eval(agdiff::wrap(x - y, L)); }, cuts[i], cuts[i + 1], 500);
    }
    return acc;
  };
  // outer integrand loses smoothness at the density jump and at x = 0, 0.5
  const std::vector<double> outer{-1.0, -0.5, 0.0, 0.5, 1.0};
  double ref = 0.0;
  for (std::size_t i = 0; i + 1 < outer.size(); ++i)
    ref += 0.5 * (outer[i] < -0.5 ? 1.0 : 1.0 / 3.0) * simpson(inner, outer[i], outer[i + 1], 500);
  const double exact = agdiff::energy(s, k, Nonlinearity::power_law(2.0)).interaction;
  EXPECT_NEAR(exact, ref, 1e-6 * std::abs(ref));
}

TEST(Energy, ExactMatchesFineQuadratureOnRandomState) {
  std::mt19937_64 rng(2);
  const auto s = agdiff::random_state(TorusDomain(5.0, 0.8), 12, rng, 1.5);
  const Kernel k = yukawa(2.0);
  const double exact = agdiff::interaction_energy_exact(s, k);
  const double quad = agdiff::interaction_energy_quadrature(s, k, 200);
  EXPECT_NEAR(exact, quad, 1e-4 * std::abs(exact));
}

TEST(DiscreteW12, TwoParticleHandValue) {
  const auto nl = Nonlinearity::power_law(2.0);
  EXPECT_NEAR(agdiff::discrete_w12(two_particles(), nl), 256.0 / 81.0, 1e-13);
  EXPECT_NEAR(agdiff::tv_phi(two_particles(), nl), 16.0 / 9.0, 1e-14);
  EXPECT_NEAR(agdiff::discrete_w12(uniform_state(3.0, 1.0, 9), nl), 0.0, 1e-24);
  EXPECT_NEAR(agdiff::tv_phi(uniform_state(3.0, 1.0, 9), nl), 0.0, 1e-13);
}

TEST(DiscreteW12, InvariantUnderBaseRelabelling) {
  std::mt19937_64 rng(3);
  const auto s = agdiff::random_state(TorusDomain(4.0, 1.0), 10, rng);
  std::vector<double> lift(10);
  for (std::size_t j = 0; j < 10; ++j) lift[j] = s.lifted((j + 3) % 10) + (j + 3 >= 10 ? 4.0 : 0.0);
  const auto r = ParticleState::from_lift(s.domain(), lift);
  const auto nl = Nonlinearity::power_law(3.0);
  EXPECT_NEAR(agdiff::discrete_w12(r, nl), agdiff::discrete_w12(s, nl), 1e-10 * agdiff::discrete_w12(s, nl));
  EXPECT_NEAR(agdiff::tv_phi(r, nl), agdiff::tv_phi(s, nl), 1e-10 * agdiff::tv_phi(s, nl));
}

TEST(Wasserstein, SelfAndShift) {
  std::mt19937_64 rng(4);
  const auto s = agdiff::random_state(TorusDomain(4.0, 0.6), 20, rng);
  EXPECT_EQ(agdiff::wasserstein1(s, s), 0.0);
  EXPECT_NEAR(agdiff::wasserstein1(s, agdiff::shift(s, 0.1)), 0.1, 1e-12);
  // crossing the seam is tracked through the winding counter
  const auto far = agdiff::shift(s, 3.9);
  const auto rep = agdiff::wasserstein1_report(s, far);
  EXPECT_NEAR(rep.distance, 3.9, 1e-12);
  EXPECT_THROW(agdiff::wasserstein1(s, uniform_state(4.0, 0.6, 21)), agdiff::Error);
  EXPECT_THROW(agdiff::wasserstein1(s, uniform_state(4.0, 0.5, 20)), agdiff::Error);
}

TEST(Wasserstein, TwoParticleStatesAgainstRiemannSum) {
  const TorusDomain d(2.0, 1.0);
  const ParticleState a(d, {-1.0, -0.5});
  const ParticleState b(d, {-0.8, 0.6});
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = (i + 0.5) / n;
    acc += std::abs(agdiff::pseudo_inverse_lift(a, z) - agdiff::pseudo_inverse_lift(b, z));
  }
  EXPECT_NEAR(agdiff::wasserstein1(a, b), acc / n, 1e-8);
}

TEST(ConvolveD1, ExactAgainstQuadrature) {
  std::mt19937_64 rng(5);
  const auto s = agdiff::random_state(TorusDomain(3.0, 1.0), 9, rng, 1.0);
  const Kernel k = yukawa(2.0);
  for (double x : {-1.4, -0.2, 0.5, 1.3}) {
    // Simpson per cell, split where x - y is a multiple of L/2 (jumps of K')
    double q = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double a = s.lifted(j), b = s.lifted(j + 1);
      std::vector<double> cuts{a, b};
      for (int p = -8; p <= 8; ++p) {
        const double y = x - 1.5 * p;
        if (y > a && y < b) cuts.push_back(y);
      }
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        q += s.density(j) * simpson([&](double y) { return k.eval_d1(agdiff::wrap(x - y, 3.0)); },
                                    cuts[i] + 1e-15, cuts[i + 1] - 1e-15, 2000);
    }
    EXPECT_NEAR(agdiff::convolve_d1(s, k, x), q, 1e-9);
    EXPECT_NEAR(agdiff::convolve_d1_quadrature(s, k, x, 4000), q, 1e-3);
  }
}

TEST(Inequalities, UniformStateHasNonnegativeMargins) {
  const auto r = agdiff::check_inequalities(uniform_state(8.0, 1.0, 32), yukawa(2.0), Nonlinearity::power_law(2.0));
  ASSERT_EQ(r.entries.size(), 4u);
  for (const auto& e : r.entries) {
    EXPECT_GE(e.margin, 0.0) << e.name;
    EXPECT_FALSE(e.violated) << e.name;
  }
  EXPECT_NEAR(r.find("w12linfty").rhs, std::pow(1.0 / 8.0, 2) + 1.0, 1e-15);
}

TEST(Inequalities, RandomStatesHoldTheBounds) {
  std::mt19937_64 rng(20240613);
  const Kernel k = yukawa(2.0);
  const auto nl = Nonlinearity::power_law(2.0);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = agdiff::random_state(TorusDomain(8.0, 1.0), 2 + i % 40, rng);
    violations += agdiff::check_inequalities(s, k, nl, 2).violations();
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Inequalities, NearCollapseStateHoldsTheBounds) {
  const double L = 4.0;
  std::vector<double> x(16);
  for (std::size_t k = 0; k < 16; ++k) x[k] = -0.5 * L + 0.25 * static_cast<double>(k);
  x[8] = x[7] + 1e-6 * L;
  const ParticleState s(TorusDomain(L, 1.0), x);
  for (double m : {1.5, 2.0, 3.0}) {
    const auto r = agdiff::check_inequalities(s, yukawa(5.0), Nonlinearity::power_law(m), 4);
    EXPECT_EQ(r.violations(), 0u) << "m=" << m;
  }
}

TEST(Inequalities, ReportCountsViolations) {
  agdiff::InequalityEntry e{"x", 2.0, 1.0, -1.0, 0.0, true};
  agdiff::InequalityReport r;
  r.entries.push_back(e);
  EXPECT_EQ(r.violations(), 1u);
  EXPECT_THROW(r.find("missing"), agdiff::Error);
}

TEST(GapBound, Formula) {
  const Kernel k = yukawa(2.0);
  const double g = agdiff::gap_upper_bound(512, 1.0, 0.05, k, 0.5);
  EXPECT_NEAR(g, (20.0 + 7.0 / 15.0) * std::exp(7.5) / 512.0, 1e-10);
  EXPECT_TRUE(std::isinf(agdiff::gap_upper_bound(512, 1.0, 0.05, zero_kernel(), 0.5)));
}

TEST(EnergyRate, SeriesAndErrors) {
  const auto r = agdiff::energy_rate_series({0.0, 1.0, 2.0, 4.0}, {1.0, 0.5, 0.5, 1.5});
  ASSERT_EQ(r.size(), 4u);
  EXPECT_DOUBLE_EQ(r[0].second, -0.5);
  EXPECT_DOUBLE_EQ(r[1].second, -0.25);
  EXPECT_DOUBLE_EQ(r[2].second, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r[3].second, 0.5);
  EXPECT_THROW(agdiff::energy_rate_series({0.0, 1.0}, {1.0, 1.0}), agdiff::Error);
}

TEST(EnergyRate, StationaryTrajectory) {
  agdiff::IntegratorConfig cfg;
  cfg.t_end = 0.5;
  cfg.sample_every = 0.1;
  const Kernel k = yukawa(2.0);
  const auto nl = Nonlinearity::power_law(2.0);
  const auto tr = agdiff::simulate(uniform_state(8.0, 1.0, 32), k, nl, cfg);
  const auto d = agdiff::compute_diagnostics(tr.snapshots, k, nl);
  for (const auto& row : d.rows) EXPECT_LE(std::abs(row.energy_rate), 1e-10);
  EXPECT_EQ(d.violations, 0u);
}

TEST(EnergyRate, PureDiffusionDissipates) {
  const TorusDomain dom(8.0, 1.0);
  agdiff::InitialSpec spec;
  spec.kind = agdiff::InitialSpec::Kind::hat;
  spec.width = 1.0;
  const auto s0 = agdiff::init_from_density(agdiff::make_profile(spec, dom), 128, dom);
  agdiff::IntegratorConfig cfg;
  cfg.t_end = 0.2;
  cfg.sample_every = 0.02;
  const auto nl = Nonlinearity::power_law(2.0);
  const auto tr = agdiff::simulate(s0, zero_kernel(), nl, cfg);
  ASSERT_TRUE(tr.completed());
  const auto d = agdiff::compute_diagnostics(tr.snapshots, zero_kernel(), nl);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    EXPECT_LE(d.rows[i].energy_rate, 1e-8);
    if (i > 0) {
      EXPECT_LT(d.rows[i].energy, d.rows[i - 1].energy);
    }
  }
  EXPECT_EQ(d.violations, 0u);
  EXPECT_EQ(agdiff::max_positive_rate(d.rows), 0.0);
}

TEST(HolderFit, TranslatingState) {
  // rigid motion x(t) = x0 + v t: W1 = v |dt|, ratio v sqrt(dt), largest on the coarsest pair
  std::mt19937_64 rng(6);
  const auto s = agdiff::random_state(TorusDomain(4.0, 1.0), 8, rng);
  std::vector<ParticleState> snaps;
  for (int i = 0; i <= 8; ++i) snaps.push_back(agdiff::shift(s, 0.3 * i / 8.0).with_time(i / 8.0));
  const auto f = agdiff::holder_fit(snaps);
  EXPECT_NEAR(f.constant, 0.3, 1e-12);
  EXPECT_NEAR(f.max_ratio, 0.3, 1e-12);
  EXPECT_EQ(f.pairs, 1u + 8u + 4u + 2u);
}

TEST(LinearBound, FitCoversSamples) {
  const std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> y{1.0, 1.2, 1.3, 1.5, 1.4};
  const auto b = agdiff::fit_linear_bound(t, y, 0.0);
  // steepest chord from (0, 1) is to (0.25, 1.2)
  EXPECT_NEAR(b.gamma2, 0.8, 1e-15);
  EXPECT_NEAR(b.gamma1, 0.2, 1e-15);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LE(y[i], b(t[i]) + 1e-15);
  const auto flat = agdiff::fit_linear_bound(t, {2.0, 1.0, 1.0, 1.0, 1.0}, 0.1);
  EXPECT_EQ(flat.gamma2, 0.0);
  EXPECT_NEAR(flat.gamma1, 2.2, 1e-15);
}
