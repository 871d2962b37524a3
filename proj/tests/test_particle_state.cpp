#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "agdiff/initial_data.hpp"
#include "agdiff/particle_state.hpp"

using agdiff::GridDensity;
using agdiff::ParticleState;
using agdiff::TorusDomain;

namespace {

ParticleState uniform_state(double L, double c, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = -0.5 * L + L * static_cast<double>(k) / static_cast<double>(n);
  return ParticleState(TorusDomain(L, c), x);
}

ParticleState random_state(std::mt19937_64& rng, double L, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> g(n);
  double total = 0.0;
  for (double& v : g) total += (v = u(rng));
  std::vector<double> x(n);
  x[0] = -0.5 * L + 0.3 * L * u(rng);
  for (std::size_t k = 1; k < n; ++k) x[k] = x[k - 1] + g[k - 1] * L / total;
  return ParticleState(TorusDomain(L, 1.0), x);
}

} // namespace

TEST(ParticleState, UniformInitialisation) {
  const TorusDomain d(4.0, 1.0);
  agdiff::InitialSpec spec;
  const auto s = agdiff::init_from_density(agdiff::make_profile(spec, d), 4, d);
  const std::vector<double> expect{-2.0, -1.0, 0.0, 1.0};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(s.positions()[k], expect[k], 1e-12);
    EXPECT_NEAR(s.density(k), 0.25, 1e-12);
  }
}

TEST(ParticleState, HatQuantilesMatchClosedForm) {
  const TorusDomain d(4.0, 1.0);
  agdiff::InitialSpec spec;
  spec.kind = agdiff::InitialSpec::Kind::hat;
  spec.width = 1.0;
  const auto s = agdiff::init_from_density(agdiff::make_profile(spec, d), 4, d);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(s.positions()[0], -2.0, 1e-15);
  EXPECT_NEAR(s.positions()[1], -1.0 + r, 1e-12);
  EXPECT_NEAR(s.positions()[2], 0.0, 1e-12);
  EXPECT_NEAR(s.positions()[3], 1.0 - r, 1e-12);
}

TEST(ParticleState, RejectsUnordered) {
  const TorusDomain d(2.0, 1.0);
  EXPECT_THROW(ParticleState(d, {0.0, 0.0}), agdiff::Error);
  EXPECT_THROW(ParticleState(d, {0.5, 0.2}), agdiff::Error);
  EXPECT_THROW(ParticleState(d, {-1.0, 1.0}), agdiff::Error); // spans a full period
  EXPECT_THROW(ParticleState(d, {1.0, 1.5}), agdiff::Error);  // base not canonical
  EXPECT_THROW(ParticleState(d, {0.0}), agdiff::Error);
}

TEST(ParticleState, FromLiftTracksWinding) {
  const TorusDomain d(2.0, 1.0);
  const auto s = ParticleState::from_lift(d, {1.2, 1.5, 2.8});
  EXPECT_NEAR(s.positions()[0], -0.8, 1e-15);
  EXPECT_EQ(s.winding(), 1);
  EXPECT_NEAR(s.unwrapped(0), 1.2, 1e-15);
  EXPECT_NEAR(s.unwrapped(2), 2.8, 1e-14);
  const auto t = agdiff::shift(s, -3.0);
  EXPECT_NEAR(t.unwrapped(1), -1.5, 1e-14);
  EXPECT_EQ(t.winding(), -1);
}

TEST(Cdf, Examples) {
  const auto s = uniform_state(4.0, 1.0, 4);
  EXPECT_NEAR(agdiff::cdf_at(s, 0.0), 0.5, 1e-15);
  std::mt19937_64 rng(5);
  const auto r = random_state(rng, 3.0, 9);
  for (std::size_t k = 0; k < r.size(); ++k) {
    EXPECT_NEAR(agdiff::cdf_at(r, r.canonical(k)), static_cast<double>(k) / 9.0, 1e-12);
    const double mid = agdiff::wrap(r.lifted(k) + 0.5 * r.gap(k), 3.0);
    EXPECT_NEAR(agdiff::cdf_at(r, mid), (static_cast<double>(k) + 0.5) / 9.0, 1e-12);
  }
}

TEST(PseudoInverse, NodesAndUniform) {
  std::mt19937_64 rng(9);
  const auto r = random_state(rng, 5.0, 7);
  for (std::size_t k = 0; k < 7; ++k)
    EXPECT_NEAR(agdiff::pseudo_inverse(r, static_cast<double>(k) / 7.0), r.canonical(k), 1e-12);
  const auto u = uniform_state(4.0, 0.5, 8);
  for (double z : {0.0, 0.1, 0.3, 0.49})
    EXPECT_NEAR(agdiff::pseudo_inverse(u, z), -2.0 + z * 4.0 / 0.5, 1e-12);
  EXPECT_THROW(agdiff::pseudo_inverse(u, 0.5), agdiff::Error);
  EXPECT_THROW(agdiff::pseudo_inverse(u, -0.1), agdiff::Error);
}

TEST(PseudoInverse, RoundTrip) {
  std::mt19937_64 rng(13);
  const auto r = random_state(rng, 2.5, 12);
  for (int i = 0; i < 1000; ++i) {
    const double z = i / 1000.0;
    EXPECT_NEAR(agdiff::cdf_at(r, agdiff::pseudo_inverse(r, z)), z, 1e-12);
  }
}

TEST(ToGrid, UniformAndSingleCell) {
  const auto s = uniform_state(4.0, 0.8, 10);
  for (double v : agdiff::to_grid(s, 64).values) EXPECT_NEAR(v, 0.2, 1e-12);
  std::mt19937_64 rng(2);
  const auto r = random_state(rng, 4.0, 10);
  const auto g = agdiff::to_grid(r, 1);
  ASSERT_EQ(g.cell_count(), 1u);
  EXPECT_NEAR(g.values[0], 0.25, 1e-13);
}

TEST(ToGrid, TwoParticleHandOverlap) {
  const ParticleState s(TorusDomain(2.0, 1.0), {-1.0, -0.5});
  EXPECT_DOUBLE_EQ(s.density(0), 1.0);
  EXPECT_DOUBLE_EQ(s.density(1), 1.0 / 3.0);
  const auto g = agdiff::to_grid(s, 4);
  EXPECT_NEAR(g.values[0], 1.0, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(g.values[i], 1.0 / 3.0, 1e-15);

  // shifted so the first cell straddles the seam and grid lines
  const ParticleState t(TorusDomain(2.0, 1.0), {0.8, 1.3});
  const auto h = agdiff::to_grid(t, 4);
  // density 1 on [0.8, 1.3) which wraps to [0.8, 1) and [-1, -0.7); 1/3 elsewhere
  EXPECT_NEAR(h.values[0], (0.3 * 1.0 + 0.2 / 3.0) / 0.5, 1e-14);
  EXPECT_NEAR(h.values[1], 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(h.values[2], 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(h.values[3], (0.2 * 1.0 + 0.3 / 3.0) / 0.5, 1e-14);
}

TEST(ToGrid, MassConservation) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) {
    auto r = random_state(rng, 7.0, 33);
    r = agdiff::shift(r, 10.0 * i / 7.0);
    for (std::size_t m : {1u, 7u, 100u, 1024u})
      EXPECT_NEAR(agdiff::to_grid(r, m).mass(), 1.0, 1e-12);
  }
}

TEST(L1Distance, Examples) {
  const GridDensity a(4.0, std::vector<double>(16, 0.25));
  const GridDensity b(4.0, std::vector<double>(16, 0.5));
  EXPECT_EQ(agdiff::l1_distance(a, a), 0.0);
  EXPECT_NEAR(agdiff::l1_distance(a, b), 1.0, 1e-15);
  std::vector<double> ind(16, 0.0), shifted(16, 0.0);
  for (int i = 4; i < 8; ++i) ind[i] = 2.0;
  for (int i = 5; i < 9; ++i) shifted[i] = 2.0;
  // shift by one cell (0.25) of an indicator of height 2
  EXPECT_NEAR(agdiff::l1_distance(GridDensity(4.0, ind), GridDensity(4.0, shifted)), 2.0 * 0.25 * 2.0, 1e-15);
  EXPECT_THROW(agdiff::l1_distance(a, GridDensity(4.0, std::vector<double>(8, 0.25))), agdiff::Error);
  EXPECT_THROW(agdiff::l1_distance(a, GridDensity(2.0, std::vector<double>(16, 0.25))), agdiff::Error);
}

TEST(Remap, ConservesMassAndIsExactOnRefinement) {
  const GridDensity g(2.0, {1.0, 3.0, 0.0, 2.0});
  const auto fine = agdiff::remap(g, 8);
  const std::vector<double> expect{1, 1, 3, 3, 0, 0, 2, 2};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(fine.values[i], expect[i], 1e-14);
  const auto coarse = agdiff::remap(g, 2);
  EXPECT_NEAR(coarse.values[0], 2.0, 1e-14);
  EXPECT_NEAR(coarse.values[1], 1.0, 1e-14);
  EXPECT_NEAR(agdiff::remap(g, 3).mass(), g.mass(), 1e-14);
}

TEST(GridCsv, RoundTrip) {
  const GridDensity g(3.0, {0.1, 0.2, 1.0 / 3.0});
  std::stringstream ss;
  agdiff::write_grid_csv(ss, g);
  const auto back = agdiff::read_grid_csv(ss);
  EXPECT_EQ(back.length, 3.0);
  EXPECT_EQ(back.values, g.values);
  std::stringstream bad("# L=1 M=3\n0.1\n0.2\n");
  EXPECT_THROW(agdiff::read_grid_csv(bad), agdiff::Error);
}
