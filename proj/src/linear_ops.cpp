#include "fraclat/linear_ops.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fraclat/errors.hpp"
#include "fraclat/parallel.hpp"

namespace fraclat {

Eigen::VectorXd BilinearSystem::restrict(const GridFunction& u) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(free_ids.size()));
  for (std::size_t i = 0; i < free_ids.size(); ++i) v[static_cast<Eigen::Index>(i)] = u[free_ids[i]];
  return v;
}

GridFunction BilinearSystem::extend(const Eigen::VectorXd& v) const {
  GridFunction u(lattice);
  for (std::size_t i = 0; i < free_ids.size(); ++i) u[free_ids[i]] = v[static_cast<Eigen::Index>(i)];
  return u;
}

BilinearSystem assemble(const LatticeDomain& lattice, const PairWeights& weights, double s,
                        Constraint constraint, Flavor flavor, const std::optional<GridFunction>& f) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("assemble needs s in (0,1)");
  BilinearSystem sys;
  sys.lattice = lattice;
  sys.s = s;
  sys.constraint = constraint;
  sys.flavor = flavor;
  if (constraint == Constraint::DirichletZero) {
    const auto ids = lattice.interior_ids();
    sys.free_ids.assign(ids.begin(), ids.end());
  } else if (constraint == Constraint::MeanZero) {
    if (flavor != Flavor::LocalQ) throw std::invalid_argument("the mean-zero system requires the local flavor");
    const auto ids = lattice.domain_ids();
    sys.free_ids.assign(ids.begin(), ids.end());
  } else {
    throw std::invalid_argument("assemble supports the Dirichlet and mean-zero constraints only");
  }
  if (sys.free_ids.empty()) throw std::invalid_argument("assemble: empty free set");
  if (f && f->size() != lattice.size()) throw std::invalid_argument("forcing f lives on a different lattice");

  const std::vector<std::size_t> sum_ids = summation_ids(lattice, flavor);
  const std::size_t n = sys.free_ids.size();
  const double e2d = std::pow(lattice.eps(), 2 * lattice.dim());
  const double expo = static_cast<double>(lattice.dim()) + 2.0 * s;
  auto kernel = [&](std::size_t i, std::size_t j) {
    const Site& a = lattice.site(i);
    const Site& b = lattice.site(j);
    return weights(a, b) * std::pow(pair_distance(a, b, lattice.eps()), -expo);
  };

  std::vector<std::ptrdiff_t> local(lattice.size(), -1);
  for (std::size_t i = 0; i < n; ++i) local[sys.free_ids[i]] = static_cast<std::ptrdiff_t>(i);

  sys.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  // Upper triangle and diagonal per row block, then mirrored, so A is exactly symmetric.
  parallel_for_blocks(block_count(n), [&](std::size_t blk) {
    const std::size_t end = std::min(n, (blk + 1) * kReductionBlock);
    for (std::size_t i = blk * kReductionBlock; i < end; ++i) {
      const std::size_t gi = sys.free_ids[i];
      double diag = 0.0;
      for (std::size_t gj : sum_ids) {
        if (gj == gi) continue;
        const double k = kernel(gi, gj);
        diag += k;
        const std::ptrdiff_t j = local[gj];
        if (j > static_cast<std::ptrdiff_t>(i)) sys.matrix(static_cast<Eigen::Index>(i), j) = -2.0 * e2d * k;
      }
      sys.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 2.0 * e2d * diag;
    }
  });
  sys.matrix.triangularView<Eigen::StrictlyLower>() = sys.matrix.transpose().triangularView<Eigen::StrictlyLower>();

  sys.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (f) {
    for (std::size_t i = 0; i < n; ++i) {
      sys.rhs[static_cast<Eigen::Index>(i)] = lattice.cell_volume() * (*f)[sys.free_ids[i]];
    }
  }
  return sys;
}

GridFunction apply_operator(const PairWeights& weights, double s, const GridFunction& u) {
  const LatticeDomain& lat = u.lattice();
  const std::size_t n = lat.size();
  const double expo = static_cast<double>(lat.dim()) + 2.0 * s;
  GridFunction out(lat);
  parallel_for_blocks(block_count(n), [&](std::size_t blk) {
    const std::size_t end = std::min(n, (blk + 1) * kReductionBlock);
    for (std::size_t i = blk * kReductionBlock; i < end; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Site& a = lat.site(i);
        const Site& b = lat.site(j);
        acc += weights(a, b) * (u[j] - u[i]) * std::pow(pair_distance(a, b, lat.eps()), -expo);
      }
      out[i] = lat.cell_volume() * acc;
    }
  });
  return out;
}

Eigen::VectorXd apply_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& x) {
  const auto n = static_cast<std::size_t>(A.rows());
  Eigen::VectorXd y(A.rows());
  parallel_for_blocks(block_count(n), [&](std::size_t blk) {
    const std::size_t end = std::min(n, (blk + 1) * kReductionBlock);
    for (std::size_t i = blk * kReductionBlock; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      // Column access: A is symmetric and column-major.
      y[r] = A.col(r).dot(x);
    }
  });
  return y;
}

namespace {

void remove_mean(Eigen::VectorXd& v) { v.array() -= v.mean(); }

}  // namespace

SolveResult solve(const BilinearSystem& system, const SolveOptions& opts) {
  if (!(opts.tol > 0.0) || opts.max_iter < 0) throw std::invalid_argument("solve needs tol > 0, max_iter >= 0");
  const bool mean_zero = system.constraint == Constraint::MeanZero;
  const Eigen::MatrixXd& A = system.matrix;
  Eigen::VectorXd b = system.rhs;
  SolveStats stats;
  if (mean_zero) {
    const double m = b.mean();
    if (std::abs(m) > 1e-14 * b.cwiseAbs().maxCoeff()) stats.rhs_projected = true;
    remove_mean(b);
  }

  const double bnorm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  if (bnorm == 0.0) return {system.extend(x), stats};

  const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
  auto precondition = [&](const Eigen::VectorXd& r) {
    Eigen::VectorXd z = opts.jacobi ? Eigen::VectorXd(inv_diag.cwiseProduct(r)) : r;
    if (mean_zero) remove_mean(z);
    return z;
  };

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precondition(r);
  Eigen::VectorXd d = z;
  double rz = r.dot(z);
  stats.residual = 1.0;
  stats.residual_history.push_back(1.0);
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd Ad = apply_matrix(A, d);
    const double dAd = d.dot(Ad);
    if (!(dAd > 0.0)) break;
    const double alpha = rz / dAd;
    x += alpha * d;
    r -= alpha * Ad;
    if (mean_zero) remove_mean(r);
    stats.iters = it + 1;
    stats.residual = r.norm() / bnorm;
    stats.residual_history.push_back(stats.residual);
    if (stats.residual <= opts.tol) break;
    z = precondition(r);
    const double rz_new = r.dot(z);
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  if (mean_zero) remove_mean(x);
  // Report the true residual rather than the recursively updated one.
  Eigen::VectorXd res = apply_matrix(A, x) - b;
  if (mean_zero) remove_mean(res);
  stats.residual = res.norm() / bnorm;
  if (!(stats.residual <= opts.tol)) {
    std::ostringstream os;
    os << "CG did not reach tol " << opts.tol << " in " << stats.iters << " iterations; residual history:";
    const std::size_t h = stats.residual_history.size();
    const std::size_t step = std::max<std::size_t>(1, h / 10);
    for (std::size_t i = 0; i < h; i += step) os << ' ' << stats.residual_history[i];
    os << " final " << stats.residual;
    throw NumericalError(os.str());
  }
  return {system.extend(x), stats};
}

SpectralReport spectrum(const BilinearSystem& system, std::size_t k) {
  if (system.constraint != Constraint::DirichletZero) {
    throw std::invalid_argument("spectrum needs the Dirichlet constraint");
  }
  const auto n = system.free_ids.size();
  if (k == 0 || k > n) throw std::invalid_argument("spectrum: k must be in 1..free-set size");
  const double ed = system.lattice.cell_volume();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(system.matrix / ed);
  if (solver.info() != Eigen::Success) throw NumericalError("dense symmetric eigensolver failed");

  SpectralReport rep;
  rep.eps = system.lattice.eps();
  for (std::size_t j = 0; j < k; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const double lambda = solver.eigenvalues()[col];
    if (!(lambda > 0.0)) throw NumericalError("form eigenvalue is not positive");
    Eigen::VectorXd v = solver.eigenvectors().col(col) / std::sqrt(ed);
    const double vmax = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > 1e-10 * vmax) {
        if (v[i] < 0.0) v = -v;
        break;
      }
    }
    rep.eigenvalues.push_back(1.0 / lambda);
    rep.eigenvectors.push_back(system.extend(v));
  }
  return rep;
}

}  // namespace fraclat
