#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fraclat/energy.hpp"
#include "fraclat/errors.hpp"

using namespace fraclat;

namespace {

// Sites -0.5, 0, 0.5 with all sums running over them.
LatticeDomain three_sites() { return build_lattice(1, 0.5, interval(-0.5, 0.5), interval(-0.5, 0.5)); }

GridFunction bump3(const LatticeDomain& lat) { return GridFunction(lat, {0.0, 1.0, 0.0}); }

EnergySpec quadratic_spec() {
  EnergySpec spec;
  spec.p = 2.0;
  spec.s = 0.5;
  spec.V = Potential::power(2.0);
  return spec;
}

// c = 2 on the pair {-1, 0} (integer sites), 1 otherwise.
class OnePairDoubled final : public PairWeights {
 public:
  double operator()(const Site& a, const Site& b) const override {
    const bool hit = (a[0] == -1 && b[0] == 0) || (a[0] == 0 && b[0] == -1);
    return hit ? 2.0 : 1.0;
  }
};

class ScaledConstant final : public PairWeights {
 public:
  explicit ScaledConstant(double v) : v_(v) {}
  double operator()(const Site&, const Site&) const override { return v_; }

 private:
  double v_;
};

GridFunction random_function(const LatticeDomain& lat, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, scale);
  std::vector<double> v(lat.size());
  for (double& x : v) x = N(rng);
  return GridFunction(lat, std::move(v));
}

GridFunction random_dirichlet(const LatticeDomain& lat, std::uint64_t seed) {
  GridFunction u = random_function(lat, seed);
  for (std::size_t id = 0; id < u.size(); ++id) {
    if (lat.region(id) != SiteRegion::Interior) u[id] = 0.0;
  }
  return u;
}

}  // namespace

TEST(Energy, ThreeSiteValue) {
  const auto lat = three_sites();
  const UnitWeights one;
  EnergySpec spec = quadratic_spec();
  EXPECT_NEAR(energy_value(spec, one, bump3(lat)), 4.0, 4e-12);
  spec.f = GridFunction::constant(lat, 1.0);
  EXPECT_NEAR(energy_value(spec, one, bump3(lat)), 3.5, 3.5e-12);
}

TEST(Energy, ConstantHasZeroEnergy) {
  const auto lat = build_lattice(1, 0.125, interval(-1, 1), interval(-1.5, 1.5));
  const WeightField w(WeightDistribution::lognormal(1.0), 3);
  for (Flavor flavor : {Flavor::GlobalHaloTruncated, Flavor::LocalQ}) {
    EnergySpec spec;
    spec.p = 3.0;
    spec.s = 0.3;
    spec.V = Potential::smoothed_power(3.0, 0.01);
    spec.flavor = flavor;
    EXPECT_EQ(energy_value(spec, w, GridFunction::constant(lat, 2.5)), 0.0);
    const auto g = energy_gradient(spec, w, GridFunction::constant(lat, 2.5));
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Energy, ThreeSiteGradient) {
  const auto lat = three_sites();
  const auto g = energy_gradient(quadratic_spec(), UnitWeights{}, bump3(lat));
  EXPECT_NEAR(g[1], 8.0, 8e-12);
  EXPECT_NEAR(g[0], -4.0, 4e-12);
  EXPECT_NEAR(g[2], -4.0, 4e-12);
}

TEST(Energy, GradientMatchesFiniteDifferences) {
  const auto lat = build_lattice(1, 0.125, interval(-1, 1), interval(-1.25, 1.25));
  const WeightField w(WeightDistribution::lognormal(0.7), 21);
  EnergySpec spec;
  spec.p = 3.0;
  spec.s = 0.4;
  spec.V = Potential::smoothed_power(3.0, 0.1);
  spec.G = ZeroOrderTerm::power(0.5, 2.0);
  spec.f = random_function(lat, 5);
  const GridFunction u = random_function(lat, 6);
  const auto g = energy_gradient(spec, w, u);
  double gmax = 0.0;
  for (double v : g.values()) gmax = std::max(gmax, std::abs(v));
  const double h = 1e-6 * (1.0 + u.sup_norm());
  for (std::size_t k = 0; k < u.size(); ++k) {
    GridFunction up = u;
    GridFunction dn = u;
    up[k] += h;
    dn[k] -= h;
    const double fd = (energy_value(spec, w, up) - energy_value(spec, w, dn)) / (2.0 * h);
    EXPECT_LE(std::abs(fd - g[k]), 1e-5 * std::max(std::abs(g[k]), 1e-3 * gmax)) << k;
  }
}

TEST(Energy, GradientRequiresDifferentiablePotential) {
  const auto lat = three_sites();
  EnergySpec spec = quadratic_spec();
  spec.p = 1.5;
  spec.V = Potential::power(1.5);
  EXPECT_THROW(energy_gradient(spec, UnitWeights{}, bump3(lat)), std::invalid_argument);
  EXPECT_NO_THROW((void)energy_value(spec, UnitWeights{}, bump3(lat)));
}

TEST(Energy, ReflectionSymmetryOfGradient) {
  const auto lat = build_lattice(1, 0.125, interval(-1, 1), interval(-1, 1));
  EnergySpec spec;
  spec.p = 4.0;
  spec.s = 0.5;
  spec.V = Potential::power(4.0);
  spec.constraint = Constraint::DirichletZero;
  spec.f = GridFunction::from_function(lat, [](const Point& x) { return std::cos(x[0]); });
  const auto raw = random_dirichlet(lat, 9);
  const std::size_t n = lat.size();
  GridFunction even(lat);
  GridFunction odd(lat);
  for (std::size_t i = 0; i < n; ++i) {
    even[i] = 0.5 * (raw[i] + raw[n - 1 - i]);
    odd[i] = 0.5 * (raw[i] - raw[n - 1 - i]);
  }
  const auto ge = energy_gradient(spec, UnitWeights{}, even);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ge[i], ge[n - 1 - i], 1e-12 * (1 + std::abs(ge[i])));
  spec.f.reset();
  const auto go = energy_gradient(spec, UnitWeights{}, odd);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(go[i], -go[n - 1 - i], 1e-12 * (1 + std::abs(go[i])));
}

TEST(Energy, ConstraintViolationsRejected) {
  const auto lat = build_lattice(1, 0.25, interval(-1, 1), interval(-1.5, 1.5));
  EnergySpec spec = quadratic_spec();
  spec.constraint = Constraint::DirichletZero;
  EXPECT_THROW((void)energy_value(spec, UnitWeights{}, GridFunction::constant(lat, 1.0)),
               std::invalid_argument);
  spec.constraint = Constraint::ZeroOutsideQ;
  EXPECT_THROW((void)energy_value(spec, UnitWeights{}, GridFunction::constant(lat, 1.0)),
               std::invalid_argument);
  spec.constraint = Constraint::MeanZero;
  spec.flavor = Flavor::LocalQ;
  EXPECT_THROW((void)energy_value(spec, UnitWeights{}, GridFunction::constant(lat, 1.0)),
               std::invalid_argument);
  spec.flavor = Flavor::GlobalHaloTruncated;
  EXPECT_THROW((void)energy_value(spec, UnitWeights{}, GridFunction(lat)), std::invalid_argument);
}

TEST(Energy, Convexity) {
  const auto lat = build_lattice(1, 0.125, interval(-1, 1), interval(-1.25, 1.25));
  const WeightField w(WeightDistribution::unit_power_law(3.0), 2);
  for (const Potential& V : {Potential::power(2.5), Potential::smoothed_power(1.5, 1e-3)}) {
    EnergySpec spec;
    spec.p = V.exponent();
    spec.s = 0.5;
    spec.V = V;
    spec.G = ZeroOrderTerm::power(1.0, 1.5);
    spec.f = random_function(lat, 1);
    for (int trial = 0; trial < 5; ++trial) {
      const auto a = random_function(lat, 100 + trial);
      const auto b = random_function(lat, 200 + trial);
      GridFunction mid(lat);
      for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
      const double ea = energy_value(spec, w, a);
      const double eb = energy_value(spec, w, b);
      EXPECT_LE(energy_value(spec, w, mid), 0.5 * (ea + eb) + 1e-12 * (std::abs(ea) + std::abs(eb)));
    }
  }
}

TEST(Energy, IncrementMatchesDifference) {
  const auto lat = build_lattice(1, 0.125, interval(-1, 1), interval(-1.25, 1.25));
  const WeightField w(WeightDistribution::lognormal(0.5), 8);
  EnergySpec spec;
  spec.p = 4.0;
  spec.s = 0.5;
  spec.V = Potential::power(4.0);
  spec.G = ZeroOrderTerm::power(0.3, 3.0);
  spec.f = random_function(lat, 3);
  const EnergyModel model(spec, std::make_shared<WeightField>(w), lat);
  const auto u = random_function(lat, 4);
  const auto h = random_function(lat, 5);
  for (double t : {1.0, 0.1, 1e-3}) {
    const double direct = model.value(u) - [&] {
      GridFunction v = u;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += t * h[i];
      return model.value(v);
    }();
    EXPECT_NEAR(model.increment(u, h, t), -direct, 1e-10 * std::abs(model.value(u)));
  }
}

TEST(Energy, CachedAndUncachedAgree) {
  const auto lat = build_lattice(1, 0.0625, interval(-1, 1), interval(-1.5, 1.5));
  const auto w = std::make_shared<WeightField>(WeightDistribution::lognormal(1.0), 17);
  EnergySpec spec;
  spec.p = 3.0;
  spec.s = 0.5;
  spec.V = Potential::smoothed_power(3.0, 1e-4);
  const EnergyModel cached(spec, w, lat, true);
  const EnergyModel direct(spec, w, lat, false);
  const auto u = random_function(lat, 1);
  EXPECT_EQ(cached.value(u), direct.value(u));
  const auto g1 = cached.gradient(u);
  const auto g2 = direct.gradient(u);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
}

TEST(Seminorm, ThreeSiteValues) {
  const auto lat = three_sites();
  EXPECT_NEAR(gagliardo_seminorm(bump3(lat), 0.5, 2.0, SumRange::Global), 2.0, 2e-12);
  EXPECT_NEAR(weighted_seminorm(UnitWeights{}, bump3(lat), 0.5, 2.0, SumRange::Global), 2.0, 2e-12);
  EXPECT_NEAR(weighted_seminorm(ScaledConstant(4.0), bump3(lat), 0.5, 2.0, SumRange::Global), 4.0, 4e-12);
  EXPECT_NEAR(weighted_seminorm(OnePairDoubled{}, bump3(lat), 0.5, 2.0, SumRange::Global), std::sqrt(6.0),
              1e-12);
  EXPECT_EQ(gagliardo_seminorm(GridFunction::constant(lat, 3.0), 0.5, 2.0, SumRange::Global), 0.0);
}

TEST(Seminorm, Homogeneity) {
  const auto lat = build_lattice(2, 0.125, square(-0.5, 0.5), square(-0.75, 0.75));
  const auto u = random_function(lat, 12);
  GridFunction v = u;
  for (double& x : v.values()) x *= -3.0;
  const WeightField w(WeightDistribution::lognormal(0.5), 1);
  for (SumRange range : {SumRange::Global, SumRange::Q}) {
    for (double p : {1.5, 2.0, 3.0}) {
      const double a = gagliardo_seminorm(u, 0.4, p, range);
      EXPECT_NEAR(gagliardo_seminorm(v, 0.4, p, range), 3.0 * a, 1e-12 * a);
      EXPECT_NEAR(weighted_seminorm(UnitWeights{}, u, 0.4, p, range), a, 1e-12 * a);
      const double b = weighted_seminorm(w, u, 0.4, p, range);
      EXPECT_NEAR(weighted_seminorm(w, v, 0.4, p, range), 3.0 * b, 1e-12 * b);
    }
  }
}

TEST(Norms, LqNorm) {
  const auto lat = three_sites();
  EXPECT_NEAR(lq_norm(bump3(lat), 2.0, SumRange::Global), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(lq_norm(GridFunction(lat, {0.5, -2.0, 1.0}), kInfinity, SumRange::Global), 2.0);
  const auto lat4 = build_lattice(1, 0.5, interval(0, 2.5), interval(0, 2.5));
  EXPECT_DOUBLE_EQ(lat4.discrete_volume(), 2.0);
  EXPECT_NEAR(lq_norm(GridFunction::constant(lat4, 1.0), 1.0, SumRange::Q), 2.0, 1e-15);
}

TEST(Norms, EmbeddingRatio) {
  const auto lat = build_lattice(1, 0.0625, interval(-1, 1), interval(-1, 1));
  EXPECT_THROW((void)embedding_ratio(GridFunction(lat), 0.5, 2.0, 2.0), std::domain_error);
  const WeightField w(WeightDistribution::lognormal(0.5), 1);
  EXPECT_THROW((void)embedding_ratio(GridFunction::constant(lat, 1.0), 0.5, 2.0, 2.0, &w), std::domain_error);
  for (int k = 0; k < 5; ++k) {
    const auto u = random_function(lat, 40 + k);
    EXPECT_LE(embedding_ratio(u, 0.5, 2.0, 2.0), 1.0);
    EXPECT_LE(embedding_ratio(u, 0.3, 3.0, 3.0), 1.0);
  }
}

TEST(Norms, HolderChain) {
  const double p = 2.0;
  const double s = 0.5;
  const auto dist = WeightDistribution::unit_power_law(4.0);
  const auto report = check_assumption(p, s, 1, dist.lower_moment_exponent());
  ASSERT_TRUE(report.satisfied);
  const double r = *report.witness_r;
  for (double eps : {0.125, 0.0625, 0.03125}) {
    const auto lat = build_lattice(1, eps, interval(-1, 1), interval(-1, 1));
    for (std::uint64_t seed : {1U, 2U, 3U}) {
      const WeightField w(dist, seed);
      for (double s2 : {0.1, 0.25, 0.4}) {
        const double C = holder_chain_constant(lat, w, s, p, s2, r);
        const auto u = random_function(lat, seed * 10);
        const double lhs = gagliardo_seminorm(u, s2, r, SumRange::Q);
        const double rhs = C * weighted_seminorm(w, u, s, p, SumRange::Q);
        EXPECT_LE(lhs, rhs * (1.0 + 1e-12));
      }
    }
  }
}

TEST(Norms, TruncationTailBound) {
  const double eps = 1.0 / 32;
  const double R = 0.5;
  const Box q = interval(-1, 1);
  const WeightField w(WeightDistribution::lognormal(0.5), 5);
  EnergySpec spec = quadratic_spec();
  auto tent = [](const Point& x) { return std::max(0.0, 1.0 - std::abs(x[0])); };
  const auto small = build_lattice(1, eps, q, interval(-1 - R, 1 + R));
  const auto big = build_lattice(1, eps, q, interval(-1 - 8 * R, 1 + 8 * R));
  const double e_small = energy_value(spec, w, GridFunction::from_function(small, tent));
  const double e_big = energy_value(spec, w, GridFunction::from_function(big, tent));
  const auto tb = truncation_tail_bound(w, q, 1, eps, 2.0, 0.5, R, 3, 1.0);
  EXPECT_GT(e_big - e_small, 0.0);
  EXPECT_LE(e_big - e_small, tb.bound);
}

TEST(Potentials, GrowthBounds) {
  EXPECT_TRUE(Potential::power(2.0).check_growth());
  EXPECT_TRUE(Potential::power(1.3).check_growth());
  EXPECT_TRUE(Potential::smoothed_power(3.0, 0.1).check_growth());
  EXPECT_TRUE(Potential::smoothed_power(1.5, 1e-8).check_growth());
  EXPECT_TRUE(Potential::smoothed_power(1.5, 1e-5).check_growth());
  EXPECT_EQ(Potential::power(3.0).value(0.0), 0.0);
  EXPECT_EQ(Potential::smoothed_power(3.0, 0.2).value(0.0), 0.0);
  const auto bad = Potential::custom([](double x) { return std::abs(x); }, {}, 2.0, {1.0, 1.0, 0.0});
  EXPECT_FALSE(bad.check_growth());
}
