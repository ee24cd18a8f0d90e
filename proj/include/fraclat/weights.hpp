#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fraclat/lattice.hpp"

namespace fraclat {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Symmetric positive pair weights c(z1, z2). Implementations must be pure and
/// safe to call concurrently.
class PairWeights {
 public:
  virtual ~PairWeights() = default;
  [[nodiscard]] virtual double operator()(const Site& z1, const Site& z2) const = 0;
};

/// c == 1 everywhere; used for the unweighted Gagliardo seminorm.
class UnitWeights final : public PairWeights {
 public:
  [[nodiscard]] double operator()(const Site&, const Site&) const override { return 1.0; }
};

class WeightDistribution;

namespace dist {
struct Constant {
  double value = 1.0;
  friend bool operator==(const Constant&, const Constant&) = default;
};
/// c = exp(sigma * Z), Z standard normal.
struct LogNormal {
  double sigma = 1.0;
  friend bool operator==(const LogNormal&, const LogNormal&) = default;
};
/// c = U^(1/a), U uniform on (0,1).
struct UnitPowerLaw {
  double a = 1.0;
  friend bool operator==(const UnitPowerLaw&, const UnitPowerLaw&) = default;
};
/// c = 1 + X with X classical Pareto(a) of scale 1, i.e. X = U^(-1/a).
struct ShiftedPareto {
  double a = 2.0;
  friend bool operator==(const ShiftedPareto&, const ShiftedPareto&) = default;
};
/// c(z1, z2) = base(z1, z2) * (1 + |z1 - z2|)^(-alpha), integer distance.
struct DecayingProduct {
  std::shared_ptr<const WeightDistribution> base;
  double alpha = 1.0;
  friend bool operator==(const DecayingProduct& a, const DecayingProduct& b);
};
}  // namespace dist

/// Law of the i.i.d. pair weights. Non-constant kinds are rescaled so that
/// E(c) = 1 unless `normalized` is false (DecayingProduct normalizes its base).
class WeightDistribution {
 public:
  using Kind = std::variant<dist::Constant, dist::LogNormal, dist::UnitPowerLaw,
                            dist::ShiftedPareto, dist::DecayingProduct>;

  WeightDistribution() = default;
  /// Validates parameters; throws std::invalid_argument on non-positive values or
  /// on a ShiftedPareto with a <= 1 (infinite mean).
  explicit WeightDistribution(Kind kind, bool normalized = true);

  static WeightDistribution constant(double v);
  static WeightDistribution lognormal(double sigma, bool normalized = true);
  static WeightDistribution unit_power_law(double a, bool normalized = true);
  static WeightDistribution shifted_pareto(double a, bool normalized = true);
  static WeightDistribution decaying_product(WeightDistribution base, double alpha);

  [[nodiscard]] const Kind& kind() const { return kind_; }
  [[nodiscard]] bool normalized() const { return normalized_; }
  [[nodiscard]] std::string name() const;

  /// Value of c given the pair's uniform variates and integer distance.
  [[nodiscard]] double transform(double u1, double u2, double int_distance) const;

  /// Analytic E(c^q) of the stationary factor (the base for DecayingProduct);
  /// +inf when it diverges.
  [[nodiscard]] double moment(double q) const;
  [[nodiscard]] double mean() const { return moment(1.0); }

  /// Supremum-type exponent fq with E(c^-fq) < inf: +inf for laws bounded away
  /// from zero or with all negative moments, the largest double below a for
  /// UnitPowerLaw(a), and 0 for DecayingProduct (not stationary in |z1 - z2|).
  [[nodiscard]] double lower_moment_exponent() const;

  friend bool operator==(const WeightDistribution& a, const WeightDistribution& b) {
    return a.normalized_ == b.normalized_ && a.kind_ == b.kind_;
  }

 private:
  [[nodiscard]] double scale() const;  // multiplier applied to the raw variate
  Kind kind_{dist::Constant{1.0}};
  bool normalized_ = true;
};

/// The seeded random field c on Z^d x Z^d. Each unordered pair draws its own
/// variates from a stateless hash of (seed, min(z1,z2), z2 - z1 oriented from
/// the smaller site), so the field is symmetric, pure and i.i.d. over pairs.
class WeightField final : public PairWeights {
 public:
  WeightField() = default;
  WeightField(WeightDistribution dist, std::uint64_t seed) : dist_(std::move(dist)), seed_(seed) {}

  [[nodiscard]] const WeightDistribution& distribution() const { return dist_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] bool symmetrized() const { return true; }

  /// Throws std::invalid_argument when z1 == z2.
  [[nodiscard]] double operator()(const Site& z1, const Site& z2) const override;

 private:
  WeightDistribution dist_;
  std::uint64_t seed_ = 0;
};

/// Fills the pair's two uniform variates in (0,1). Exposed for tests.
void pair_uniforms(std::uint64_t seed, const Site& z1, const Site& z2, double& u1, double& u2);

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Monte-Carlo estimate of E(c^q) from all unordered pairs inside the boxes
/// shift + o_m + [-R, R]^d, m = 0..M-1, with disjoint origins o_m along axis 0.
/// Throws NumericalError naming the pair when c^q is not finite.
MomentEstimate empirical_moment(const WeightField& field, int dim, double q, int box_radius,
                                int origin_samples, const Site& shift = {});

struct AssumptionReport {
  bool satisfied = false;
  std::optional<double> witness_r;
};

/// Lower-moment/integrability condition: fq > d/(ps) and some r in (1, p) with
/// fq >= r/(p - r) > d/(ps). q_max may be +inf.
AssumptionReport check_assumption(double p, double s, int d, double q_max);

/// p*_fq = d p fq / (2d + d fq - s p fq), or d p / (d - s p) for fq = +inf.
/// Throws std::domain_error when the denominator is not positive and
/// std::invalid_argument when the assumption check fails.
double critical_exponent(double p, double s, int d, double q_max);

/// S(R) = mean over origins o of sum_{0<|z|<=R} omega(o, o+z) |z|^{ps}, where
/// omega = c |z|^{-(d+ps)}; the summand is c(o, o+z) / |z|^d.
std::vector<double> divergence_probe(const WeightField& field, int dim, double p, double s,
                                     std::span<const int> radii, int origins = 1);

/// eps^{2d} sum_{x in Q^eps} sum_{y in Z_eps^d, 0<|x-y|<xi} c(x,y) |x-y|^{-d+alpha}.
double local_weighted_sum(const PairWeights& weights, const Box& domain, double eps, double xi,
                          double alpha);

}  // namespace fraclat
