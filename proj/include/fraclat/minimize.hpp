#pragma once

#include <optional>
#include <vector>

#include "fraclat/energy.hpp"

namespace fraclat {

enum class Method { GradientDescent, LBFGS };

struct MinimizeOptions {
  double grad_tol = 1e-10;  // sup norm of the projected gradient
  int max_iter = 20000;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 80;
  std::optional<GridFunction> initial;  // zero when absent
  Method method = Method::LBFGS;
  int memory = 8;
};

struct MinimizeStats {
  int iters = 0;
  double final_energy = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  bool best_effort = false;  // potential convexity not known
  std::vector<double> energy_history;  // energy after each accepted step, starting at the initial point
};

struct MinimizeResult {
  GridFunction u;
  MinimizeStats stats;
};

/// Projected minimization over the constrained space of the spec. Throws
/// NumericalError when the line search underflows or max_iter is exhausted.
MinimizeResult minimize(const EnergyModel& model, const MinimizeOptions& opts = {});
MinimizeResult minimize(const EnergySpec& spec, const PairWeights& weights, const LatticeDomain& lattice,
                        const MinimizeOptions& opts = {});

/// DirichletZero zeroes every non-interior site, ZeroOutsideQ every site
/// outside Q^eps, MeanZero subtracts the Q^eps mean on Q^eps.
GridFunction project_constraint(const GridFunction& u, Constraint constraint);

}  // namespace fraclat
