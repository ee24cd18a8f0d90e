#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "fraclat/energy.hpp"
#include "fraclat/grid_function.hpp"
#include "fraclat/weights.hpp"

namespace fraclat {

/// Dense symmetric form over the free sites with
/// u^T A v = eps^{2d} sum_{x != y} c (u(y) - u(x)) (v(y) - v(x)) / |x - y|^{d+2s}
/// (u, v extended by zero off the free set) and rhs b = eps^d f restricted to the free set.
struct BilinearSystem {
  LatticeDomain lattice;
  double s = 0.5;
  Constraint constraint = Constraint::DirichletZero;
  Flavor flavor = Flavor::GlobalHaloTruncated;
  std::vector<std::size_t> free_ids;
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;

  [[nodiscard]] Eigen::VectorXd restrict(const GridFunction& u) const;
  [[nodiscard]] GridFunction extend(const Eigen::VectorXd& v) const;
};

/// Dirichlet keeps the interior sites free; MeanZero keeps Q^eps and needs the
/// local flavor. Throws std::invalid_argument on an empty free set or an
/// unsupported constraint.
BilinearSystem assemble(const LatticeDomain& lattice, const PairWeights& weights, double s,
                        Constraint constraint, Flavor flavor, const std::optional<GridFunction>& f);

/// (L_eps u)(x) = eps^d sum_{y != x} c (u(y) - u(x)) / |x - y|^{d+2s} over all halo sites.
GridFunction apply_operator(const PairWeights& weights, double s, const GridFunction& u);

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  bool jacobi = false;
};

struct SolveStats {
  int iters = 0;
  double residual = 0.0;        // final |Au - b| / |b|
  bool rhs_projected = false;   // MeanZero rhs had a nonzero mean that was removed
  std::vector<double> residual_history;
};

struct SolveResult {
  GridFunction u;
  SolveStats stats;
};

/// Conjugate gradients. Throws NumericalError (with the residual history) when
/// the tolerance is not met within max_iter.
SolveResult solve(const BilinearSystem& system, const SolveOptions& opts = {});

/// y = A x with a row-blocked product.
Eigen::VectorXd apply_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& x);

struct SpectralReport {
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> eigenvalues;        // mu_1 >= mu_2 >= ... of the solution operator
  std::vector<GridFunction> eigenvectors;  // eps^d-orthonormal on the free set
};

/// Lowest k eigenpairs of A psi = lambda eps^d psi, returned as mu = 1/lambda.
/// Each eigenvector's first component with |v| > 1e-10 max|v| is positive.
SpectralReport spectrum(const BilinearSystem& system, std::size_t k);

}  // namespace fraclat
