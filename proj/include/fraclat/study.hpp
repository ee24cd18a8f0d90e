#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fraclat/config.hpp"
#include "fraclat/report.hpp"
#include "fraclat/transfer.hpp"

namespace fraclat {

/// Solution of one (eps, weights) problem. p = 2 with V = |xi|^2, no G term and a
/// Dirichlet or mean-zero constraint goes through the linear system A u = b;
/// everything else minimizes the energy.
struct ProblemSolution {
  GridFunction u;
  std::string method;  // linear|minimize
  int iters = 0;
  double residual = 0.0;  // relative CG residual or final gradient norm
};

ProblemSolution solve_problem(const StudyConfig& cfg, const LatticeDomain& lattice, const PairWeights& weights);

LatticeDomain study_lattice(const StudyConfig& cfg, double eps);

/// Test function used by gamma_limit and vanish, from gamma.function.
ContinuumFunction study_function(const StudyConfig& cfg);

/// Embedding test family on the domain box; names tent|bump|comb.
ContinuumFunction embedding_function(const std::string& name, const Box& domain);

StudyReport run_solve(const StudyConfig& cfg);
StudyReport run_homogenize(const StudyConfig& cfg);
/// Throws std::invalid_argument when u is not Lipschitz-tagged or its support
/// box leaves the closed domain.
StudyReport run_gamma_limit(const StudyConfig& cfg, const std::optional<ContinuumFunction>& u = std::nullopt);
StudyReport run_spectral(const StudyConfig& cfg);
StudyReport run_embeddings(const StudyConfig& cfg);
StudyReport run_ergodic(const StudyConfig& cfg);
StudyReport run_vanish(const StudyConfig& cfg);

/// Dispatches on cfg.study and fills the metadata (version, config echo, wall time).
StudyReport run_study(const StudyConfig& cfg);

double median(std::vector<double> v);

}  // namespace fraclat
