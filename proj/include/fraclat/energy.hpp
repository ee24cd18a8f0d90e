#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fraclat/grid_function.hpp"
#include "fraclat/lattice.hpp"
#include "fraclat/weights.hpp"

namespace fraclat {

enum class Flavor { GlobalHaloTruncated, LocalQ };
enum class Constraint { None, DirichletZero, MeanZero, ZeroOutsideQ };
enum class SumRange { Global, Q };

std::string to_string(Flavor f);
std::string to_string(Constraint c);
Flavor parse_flavor(const std::string& s);
Constraint parse_constraint(const std::string& s);

/// alpha |xi|^p <= V(xi) <= c_V + beta |xi|^p.
struct GrowthConstants {
  double alpha = 1.0;
  double beta = 1.0;
  double c_v = 0.0;
};

/// The pair potential V.
class Potential {
 public:
  enum class Kind { PowerP, SmoothedPowerP, Custom };
  using Fn = std::function<double(double)>;

  Potential() = default;  // xi^2

  /// V = |xi|^p.
  static Potential power(double p);
  /// V = (xi^2 + delta^2)^{p/2} - delta^p. For p < 2 the declared lower growth
  /// constant is valid for |xi| >= 1e-3, the sampled range.
  static Potential smoothed_power(double p, double delta);
  /// derivative may be empty (evaluation only).
  static Potential custom(Fn value, Fn derivative, double p, GrowthConstants growth);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double exponent() const { return p_; }
  [[nodiscard]] double delta() const { return delta_; }
  [[nodiscard]] const GrowthConstants& growth() const { return growth_; }
  [[nodiscard]] std::string name() const;

  [[nodiscard]] double value(double xi) const;
  [[nodiscard]] double derivative(double xi) const;
  /// PowerP with p >= 2, SmoothedPowerP, or Custom with a derivative.
  [[nodiscard]] bool differentiable() const;
  /// V(a + h) - V(a) without cancellation when a and a + h share a sign.
  [[nodiscard]] double difference(double a, double h) const;

  /// Checks the growth bounds on xi = +-2^k 1e-3, k = 0..20.
  [[nodiscard]] bool check_growth() const;

 private:
  Kind kind_ = Kind::PowerP;
  double p_ = 2.0;
  double delta_ = 0.0;
  GrowthConstants growth_{};
  Fn value_;
  Fn derivative_;
};

/// On-site term G.
class ZeroOrderTerm {
 public:
  enum class Kind { None, PowerK, Custom };
  using Fn = std::function<double(double)>;

  ZeroOrderTerm() = default;
  /// G = alpha |xi|^k with alpha >= 0, k >= 1.
  static ZeroOrderTerm power(double alpha, double k);
  static ZeroOrderTerm custom(Fn value, Fn derivative);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double coefficient() const { return alpha_; }
  [[nodiscard]] double exponent() const { return k_; }
  [[nodiscard]] bool active() const { return kind_ != Kind::None; }
  [[nodiscard]] std::string name() const;

  [[nodiscard]] double value(double xi) const;
  [[nodiscard]] double derivative(double xi) const;
  [[nodiscard]] double difference(double a, double h) const;

 private:
  Kind kind_ = Kind::None;
  double alpha_ = 0.0;
  double k_ = 1.0;
  Fn value_;
  Fn derivative_;
};

struct EnergySpec {
  double p = 2.0;
  double s = 0.5;
  Potential V;
  ZeroOrderTerm G;
  std::optional<GridFunction> f;  // absent means f = 0
  Flavor flavor = Flavor::GlobalHaloTruncated;
  Constraint constraint = Constraint::None;
};

/// Site ids the sums of a flavor run over: all halo sites or Q^eps.
std::vector<std::size_t> summation_ids(const LatticeDomain& lattice, Flavor flavor);
std::vector<std::size_t> summation_ids(const LatticeDomain& lattice, SumRange range);

/// Throws std::invalid_argument when u violates the constraint (exact zeros for
/// DirichletZero/ZeroOutsideQ, |sum over Q^eps| <= 1e-12 N |u|_inf for MeanZero).
void check_constraint(const GridFunction& u, Constraint constraint);

/// Dense or on-the-fly kernel K_ij = c_ij / |x_i - x_j|^{d+alpha} over a fixed list of site ids.
class PairKernel {
 public:
  static constexpr std::size_t kCacheLimit = 2048;

  PairKernel(const LatticeDomain& lattice, std::shared_ptr<const PairWeights> weights,
             std::vector<std::size_t> ids, double exponent, bool allow_cache = true);

  [[nodiscard]] std::size_t size() const { return ids_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& ids() const { return ids_; }
  [[nodiscard]] bool cached() const { return !dense_.empty(); }
  /// Local indices a != b.
  [[nodiscard]] double operator()(std::size_t a, std::size_t b) const;

  /// Fills row a (entry a set to 0).
  void row(std::size_t a, std::vector<double>& out) const;

 private:
  [[nodiscard]] double compute(std::size_t a, std::size_t b) const;

  LatticeDomain lattice_;
  std::shared_ptr<const PairWeights> weights_;
  std::vector<std::size_t> ids_;
  double exponent_;
  std::vector<double> dense_;
};

/// Energy functional bound to a lattice and weights. Kernel entries are cached
/// when the summation set is small enough.
class EnergyModel {
 public:
  EnergyModel(EnergySpec spec, std::shared_ptr<const PairWeights> weights, const LatticeDomain& lattice,
              bool allow_cache = true);

  [[nodiscard]] const EnergySpec& spec() const { return spec_; }
  [[nodiscard]] const LatticeDomain& lattice() const { return lattice_; }

  [[nodiscard]] double value(const GridFunction& u) const;
  /// Nonlocal part only (no G and f terms).
  [[nodiscard]] double nonlocal_value(const GridFunction& u) const;
  /// Gradient with the constraint projection applied.
  [[nodiscard]] GridFunction gradient(const GridFunction& u) const;
  /// E(u + t h) - E(u), evaluated pairwise to avoid cancellation.
  [[nodiscard]] double increment(const GridFunction& u, const GridFunction& h, double t) const;

  /// Projects a grid function onto the constraint's tangent space.
  void project_gradient(GridFunction& g) const;

 private:
  EnergySpec spec_;
  std::shared_ptr<const PairWeights> weights_;
  LatticeDomain lattice_;
  PairKernel kernel_;
  std::vector<double> forcing_;  // f restricted to the summation ids
};

double energy_value(const EnergySpec& spec, const PairWeights& weights, const GridFunction& u);
GridFunction energy_gradient(const EnergySpec& spec, const PairWeights& weights, const GridFunction& u);

/// [u]_{s,p,eps} (range Global) or [u]_{s,p,eps,Q} (range Q), as the p-th root.
double gagliardo_seminorm(const GridFunction& u, double s, double p, SumRange range);
/// [u]_{s,p,eps,Q,c}.
double weighted_seminorm(const PairWeights& weights, const GridFunction& u, double s, double p,
                         SumRange range);
/// (eps^d sum |u|^q)^{1/q}; q = +inf gives max |u|.
double lq_norm(const GridFunction& u, double q, SumRange range);

/// Plain: |u|_q / (|u|_p^p + [u]_{s,p}^p)^{1/p}. Weighted: |u|_q / [u]_{s,p,eps,Q,c}.
/// Throws std::domain_error on a zero denominator.
double embedding_ratio(const GridFunction& u, double s, double p, double q,
                       const PairWeights* weights = nullptr, SumRange range = SumRange::Q);

/// The constant C with [u]_{s2,r,eps,Q} <= C [u]_{s,p,eps,Q,c} from Hoelder's
/// inequality with exponents p/r and p/(p-r); requires 1 <= r < p.
double holder_chain_constant(const LatticeDomain& lattice, const PairWeights& weights, double s,
                             double p, double s2, double r);

struct TailBound {
  double bound = 0.0;
  double density = 0.0;  // empirical sup over dyadic shells of the c~ density
};

/// Upper bound for the energy of pairs (x, y), x in the support box and
/// |x - y| > R, for u supported in the box with sup V(+-u) <= v_sup:
/// v_sup * density * |Q| * omega_d * 2^d R^{-ps} / (1 - 2^{-ps}). The density is
/// the max over k < levels of eps^{2d} sum_{x in Q^eps} sum_{0<|x-y|<=2^{k+1}R} c~ / (|Q| omega_d (2^{k+1}R)^d)
/// with c~ = c(x,y) + c(y,x).
TailBound truncation_tail_bound(const PairWeights& weights, const Box& support, int dim, double eps,
                                double p, double s, double R, int levels, double v_sup);

}  // namespace fraclat
