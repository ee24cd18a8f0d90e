#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fraclat/errors.hpp"
#include "fraclat/linear_ops.hpp"

using namespace fraclat;

namespace {

LatticeDomain three_sites() { return build_lattice(1, 0.5, interval(-0.5, 0.5), interval(-0.5, 0.5)); }
LatticeDomain one_free_site() { return build_lattice(1, 0.5, interval(-1, 1), interval(-1, 1)); }

class ScaledConstant final : public PairWeights {
 public:
  explicit ScaledConstant(double v) : v_(v) {}
  double operator()(const Site&, const Site&) const override { return v_; }

 private:
  double v_;
};

GridFunction random_function(const LatticeDomain& lat, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> v(lat.size());
  for (double& x : v) x = N(rng);
  return GridFunction(lat, std::move(v));
}

GridFunction masked(const GridFunction& u, const std::vector<std::size_t>& keep) {
  GridFunction out(u.lattice());
  for (std::size_t id : keep) out[id] = u[id];
  return out;
}

}  // namespace

TEST(LinearOps, ThreeSiteOperator) {
  const auto lat = three_sites();
  const auto Lu = apply_operator(UnitWeights{}, 0.5, GridFunction(lat, {0, 1, 0}));
  EXPECT_NEAR(Lu[0], 2.0, 2e-12);
  EXPECT_NEAR(Lu[1], -4.0, 4e-12);
  EXPECT_NEAR(Lu[2], 2.0, 2e-12);
  const auto L1 = apply_operator(UnitWeights{}, 0.5, GridFunction::constant(lat, 5.0));
  for (double v : L1.values()) EXPECT_EQ(v, 0.0);
}

TEST(LinearOps, OperatorIsLinear) {
  const auto lat = build_lattice(2, 0.125, square(-0.5, 0.5), square(-0.5, 0.5));
  const WeightField w(WeightDistribution::lognormal(0.8), 3);
  const auto u = random_function(lat, 1);
  const auto v = random_function(lat, 2);
  GridFunction comb(lat);
  for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = 2.5 * u[i] - 0.75 * v[i];
  const auto Lu = apply_operator(w, 0.3, u);
  const auto Lv = apply_operator(w, 0.3, v);
  const auto Lc = apply_operator(w, 0.3, comb);
  for (std::size_t i = 0; i < comb.size(); ++i) {
    const double expect = 2.5 * Lu[i] - 0.75 * Lv[i];
    EXPECT_NEAR(Lc[i], expect, 1e-11 * (std::abs(Lu[i]) + std::abs(Lv[i])));
  }
}

TEST(LinearOps, QuadraticEnergyGradientIsMinusFourEpsDTimesOperator) {
  const auto lat = build_lattice(1, 0.0625, interval(-1, 1), interval(-1.25, 1.25));
  const WeightField w(WeightDistribution::lognormal(1.0), 9);
  EnergySpec spec;
  spec.p = 2.0;
  spec.s = 0.5;
  spec.V = Potential::power(2.0);
  const auto u = random_function(lat, 4);
  const auto g = energy_gradient(spec, w, u);
  const auto Lu = apply_operator(w, 0.5, u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_NEAR(g[i], -4.0 * lat.cell_volume() * Lu[i], 1e-10 * (1.0 + std::abs(g[i])));
  }
  const auto lat3 = three_sites();
  const auto g3 = energy_gradient(spec, UnitWeights{}, GridFunction(lat3, {0, 1, 0}));
  const auto L3 = apply_operator(UnitWeights{}, 0.5, GridFunction(lat3, {0, 1, 0}));
  EXPECT_NEAR(g3[1], -4.0 * 0.5 * L3[1], 1e-12);
}

TEST(LinearOps, OneByOneSystem) {
  const auto lat = one_free_site();
  const auto sys = assemble(lat, UnitWeights{}, 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated,
                            GridFunction::constant(lat, 1.0));
  ASSERT_EQ(sys.free_ids.size(), 1U);
  EXPECT_DOUBLE_EQ(lat.point(sys.free_ids[0])[0], 0.0);
  EXPECT_NEAR(sys.matrix(0, 0), 5.0, 5e-12);
  EXPECT_NEAR(sys.rhs[0], 0.5, 1e-15);
  const auto res = solve(sys);
  EXPECT_NEAR(res.u[sys.free_ids[0]], 0.1, 1e-13);
  const auto spec = spectrum(sys, 1);
  ASSERT_EQ(spec.eigenvalues.size(), 1U);
  EXPECT_NEAR(spec.eigenvalues[0], 0.1, 1e-13);
}

TEST(LinearOps, AssemblyInvariants) {
  const auto lat = build_lattice(1, 1.0 / 32, interval(-1, 1), interval(-1.5, 1.5));
  const WeightField w(WeightDistribution::unit_power_law(3.0), 5);
  for (Flavor flavor : {Flavor::GlobalHaloTruncated, Flavor::LocalQ}) {
    const auto sys = assemble(lat, w, 0.4, Constraint::DirichletZero, flavor, std::nullopt);
    const auto& A = sys.matrix;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      for (Eigen::Index j = 0; j < A.cols(); ++j) ASSERT_EQ(A(i, j), A(j, i));
    }
    const SumRange range = flavor == Flavor::LocalQ ? SumRange::Q : SumRange::Global;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto u = masked(random_function(lat, seed), sys.free_ids);
      const Eigen::VectorXd x = sys.restrict(u);
      const double q = x.dot(A * x);
      EXPECT_GT(q, 0.0);
      const double sn = weighted_seminorm(w, u, 0.4, 2.0, range);
      EXPECT_NEAR(q, sn * sn, 1e-12 * q);
    }
  }
}

TEST(LinearOps, MeanZeroFormVanishesOnConstants) {
  const auto lat = build_lattice(1, 1.0 / 16, interval(-1, 1), interval(-1, 1));
  const WeightField w(WeightDistribution::lognormal(1.0), 5);
  const auto sys = assemble(lat, w, 0.5, Constraint::MeanZero, Flavor::LocalQ, std::nullopt);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sys.free_ids.size()));
  EXPECT_NEAR(one.dot(sys.matrix * one), 0.0, 1e-12 * sys.matrix.diagonal().sum());
  EXPECT_THROW(assemble(lat, w, 0.5, Constraint::MeanZero, Flavor::GlobalHaloTruncated, std::nullopt),
               std::invalid_argument);
}

TEST(LinearOps, WeakFormConsistency) {
  const auto lat = build_lattice(1, 1.0 / 32, interval(-1, 1), interval(-1.25, 1.25));
  const WeightField w(WeightDistribution::lognormal(0.6), 13);
  EnergySpec spec;
  spec.p = 2.0;
  spec.s = 0.5;
  spec.V = Potential::power(2.0);
  spec.constraint = Constraint::DirichletZero;
  spec.f = random_function(lat, 3);
  const auto sys = assemble(lat, w, 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated, spec.f);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto u = masked(random_function(lat, 10 + seed), sys.free_ids);
    const auto v = masked(random_function(lat, 20 + seed), sys.free_ids);
    const auto g = energy_gradient(spec, w, u);
    double dirderiv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dirderiv += g[i] * v[i];
    const Eigen::VectorXd uu = sys.restrict(u);
    const Eigen::VectorXd vv = sys.restrict(v);
    const double vAu = vv.dot(sys.matrix * uu);
    // E = u^T A u - b^T u, so the derivative along v is 2 v^T A u - b^T v.
    EXPECT_NEAR(vAu, 0.5 * (dirderiv + sys.rhs.dot(vv)), 1e-8 * std::abs(vAu));
  }
}

TEST(LinearOps, ZeroRhsNeedsNoIterations) {
  const auto lat = build_lattice(1, 1.0 / 16, interval(-1, 1), interval(-1, 1));
  const auto sys = assemble(lat, UnitWeights{}, 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated,
                            std::nullopt);
  const auto res = solve(sys);
  EXPECT_EQ(res.stats.iters, 0);
  for (double v : res.u.values()) EXPECT_EQ(v, 0.0);
}

TEST(LinearOps, ConjugateGradientsMatchDirectSolve) {
  const WeightField w(WeightDistribution::lognormal(1.0), 77);
  for (int dim : {1, 2}) {
    const auto lat = dim == 1 ? build_lattice(1, 1.0 / 64, interval(-1, 1), interval(-1.25, 1.25))
                              : build_lattice(2, 1.0 / 8, square(-1, 1), square(-1, 1));
    const auto f = random_function(lat, 8);
    const auto sys = assemble(lat, w, 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated, f);
    const Eigen::VectorXd direct = sys.matrix.ldlt().solve(sys.rhs);
    for (bool jacobi : {false, true}) {
      const double tol = 1e-10;
      const auto res = solve(sys, {tol, 5000, jacobi});
      EXPECT_LE(res.stats.residual, tol);
      const double err = (sys.restrict(res.u) - direct).norm() / direct.norm();
      EXPECT_LE(err, 10.0 * tol) << "dim " << dim << " jacobi " << jacobi;
      for (std::size_t id = 0; id < lat.size(); ++id) {
        if (lat.region(id) != SiteRegion::Interior) EXPECT_EQ(res.u[id], 0.0);
      }
    }
  }
}

TEST(LinearOps, MeanZeroSolve) {
  const auto lat = build_lattice(1, 1.0 / 32, interval(-1, 1), interval(-1, 1));
  const WeightField w(WeightDistribution::lognormal(0.5), 2);
  const auto f = GridFunction::from_function(lat, [](const Point& x) { return 1.0 + x[0]; });
  const auto sys = assemble(lat, w, 0.5, Constraint::MeanZero, Flavor::LocalQ, f);
  const auto res = solve(sys, {1e-10, 5000, false});
  EXPECT_TRUE(res.stats.rhs_projected);
  double sum = 0.0;
  for (std::size_t id : sys.free_ids) sum += res.u[id];
  EXPECT_LE(std::abs(sum), 1e-12 * static_cast<double>(sys.free_ids.size()) * res.u.sup_norm());
  Eigen::VectorXd b = sys.rhs;
  b.array() -= b.mean();
  const Eigen::VectorXd r = sys.matrix * sys.restrict(res.u) - b;
  EXPECT_LE(r.norm(), 1e-9 * b.norm());
}

TEST(LinearOps, NonConvergenceReported) {
  const auto lat = build_lattice(1, 1.0 / 64, interval(-1, 1), interval(-1, 1));
  const auto sys = assemble(lat, UnitWeights{}, 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated,
                            GridFunction::constant(lat, 1.0));
  try {
    (void)solve(sys, {1e-12, 2, false});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("residual history"), std::string::npos);
  }
}

TEST(Spectrum, OrthonormalPositiveDecreasing) {
  const auto lat = build_lattice(1, 1.0 / 32, interval(-1, 1), interval(-1, 1));
  const WeightField w(WeightDistribution::lognormal(1.0), 4);
  const auto sys = assemble(lat, w, 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated, std::nullopt);
  const auto rep = spectrum(sys, 8);
  ASSERT_EQ(rep.eigenvalues.size(), 8U);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_GT(rep.eigenvalues[j], 0.0);
    if (j > 0) EXPECT_LT(rep.eigenvalues[j], rep.eigenvalues[j - 1]);
    for (std::size_t k = 0; k < 8; ++k) {
      double ip = 0.0;
      for (std::size_t id = 0; id < lat.size(); ++id) ip += rep.eigenvectors[j][id] * rep.eigenvectors[k][id];
      ip *= lat.cell_volume();
      EXPECT_NEAR(ip, j == k ? 1.0 : 0.0, 1e-10);
    }
    for (std::size_t id : sys.free_ids) {
      if (std::abs(rep.eigenvectors[j][id]) > 1e-8) {
        EXPECT_GT(rep.eigenvectors[j][id], 0.0);
        break;
      }
    }
    // A psi = lambda eps^d psi.
    const Eigen::VectorXd psi = sys.restrict(rep.eigenvectors[j]);
    const Eigen::VectorXd res = sys.matrix * psi - (lat.cell_volume() / rep.eigenvalues[j]) * psi;
    EXPECT_LE(res.norm(), 1e-9 * (sys.matrix * psi).norm());
  }
  EXPECT_THROW(spectrum(sys, sys.free_ids.size() + 1), std::invalid_argument);
}

TEST(Spectrum, DoublingWeightsHalvesEigenvalues) {
  const auto lat = build_lattice(1, 1.0 / 32, interval(-1, 1), interval(-1.25, 1.25));
  const auto one = spectrum(
      assemble(lat, ScaledConstant(1.0), 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated, std::nullopt), 5);
  const auto two = spectrum(
      assemble(lat, ScaledConstant(2.0), 0.5, Constraint::DirichletZero, Flavor::GlobalHaloTruncated, std::nullopt), 5);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(two.eigenvalues[j], 0.5 * one.eigenvalues[j], 1e-13 * one.eigenvalues[j]);
}
