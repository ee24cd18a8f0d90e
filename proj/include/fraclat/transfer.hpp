#pragma once

#include <functional>
#include <optional>

#include "fraclat/energy.hpp"
#include "fraclat/grid_function.hpp"
#include "fraclat/lattice.hpp"

namespace fraclat {

enum class Smoothness { C0, C1, Lipschitz };

/// Real function on R^d. Outside `support` it is zero; outside `defined_on`
/// evaluation throws std::out_of_range.
class ContinuumFunction {
 public:
  using Fn = std::function<double(const Point&)>;

  ContinuumFunction() = default;
  ContinuumFunction(int dim, Fn f, std::optional<Box> support = std::nullopt, Smoothness smoothness = Smoothness::C0,
                    double lipschitz = kInfinity);

  static ContinuumFunction constant(int dim, double v);
  /// max(0, 1 - |x|_inf / r) scaled by height, Lipschitz with constant height / r.
  static ContinuumFunction tent(int dim, double height = 1.0, double r = 1.0);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const std::optional<Box>& support() const { return support_; }
  [[nodiscard]] const std::optional<Box>& defined_on() const { return defined_on_; }
  [[nodiscard]] Smoothness smoothness() const { return smoothness_; }
  /// +inf unless tagged Lipschitz.
  [[nodiscard]] double lipschitz_constant() const { return lipschitz_; }

  ContinuumFunction& restrict_definition(const Box& b);

  double operator()(const Point& x) const;

 private:
  int dim_ = 1;
  Fn f_;
  std::optional<Box> support_;
  std::optional<Box> defined_on_;
  Smoothness smoothness_ = Smoothness::C0;
  double lipschitz_ = kInfinity;
};

/// Site whose half-open cell x_i + [-eps/2, eps/2)^d contains x: floor(x/eps + 1/2).
Site cell_of(const Point& x, double eps, int dim);

/// R_eps^* u: piecewise constant on half-open cells; defined on the halo box.
ContinuumFunction embed(const GridFunction& u);

/// R_eps f: cell averages by tensor Gauss-Legendre quadrature of order 5.
GridFunction average(const ContinuumFunction& f, const LatticeDomain& lattice);

/// Q_eps u: multilinear on each cell eps z + [0, eps)^d; defined on the halo box.
ContinuumFunction fe_interpolate(const GridFunction& u);

/// Pointwise values at the sites.
GridFunction sample(const ContinuumFunction& f, const LatticeDomain& lattice);

/// f * eta_k with eta_k = k^d eta(k x) and eta the normalized standard bump on the
/// unit ball, by adaptive Gauss-Kronrod quadrature to 1e-8. Needs a support box.
ContinuumFunction mollified_recovery(const ContinuumFunction& f, int k);

struct EnergyBracket {
  double low = 0.0;
  double high = 0.0;
  double far = 0.0;         // |x - y| >= xi part
  double far_error = 0.0;   // |I(n) - I(n/2)|
  double near_high = 0.0;   // upper bound of the |x - y| < xi part (lower bound 0)

  [[nodiscard]] double mid() const { return 0.5 * (low + high); }
  [[nodiscard]] double width() const { return high - low; }
  [[nodiscard]] bool contains(double v, double inflate = 0.0) const;
};

/// Brackets int_Q int_Q V(f(x) - f(y)) / |x - y|^{d+ps} dx dy. The far part is
/// computed in (x, h = y - x) coordinates with quad_n composite Gauss panels per
/// axis in x and graded panels in |h|; the near part is bounded using the
/// Lipschitz constant L: 0 <= near <= |Q| |S^{d-1}| int_0^xi V(L r) r^{-1-ps} dr.
/// Throws std::invalid_argument unless f is tagged Lipschitz.
EnergyBracket continuum_energy(const ContinuumFunction& f, double s, double p, const Potential& V, const Box& domain,
                               int quad_n, double xi);

/// |R_a^* u - R_b^* v|_{L^2(Q)}, exact on the merged cell grid clipped to Q.
double embedding_l2_distance(const GridFunction& u, const GridFunction& v, const Box& q);
/// |R^* u|_{L^2(Q)}, exact.
double embedding_l2_norm(const GridFunction& u, const Box& q);

}  // namespace fraclat
