#include "fraclat/minimize.hpp"

#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fraclat/errors.hpp"

namespace fraclat {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double sup(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion: returns -H g.
std::vector<double> lbfgs_direction(const std::deque<Pair>& mem, std::span<const double> g) {
  std::vector<double> q(g.begin(), g.end());
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * dot(mem[i].s, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * mem[i].y[k];
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * dot(mem[i].y, q);
    for (std::size_t k = 0; k < q.size(); ++k) q[k] += (alpha[i] - beta) * mem[i].s[k];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

GridFunction project_constraint(const GridFunction& u, Constraint constraint) {
  GridFunction out = u;
  const LatticeDomain& lat = u.lattice();
  switch (constraint) {
    case Constraint::None:
      break;
    case Constraint::DirichletZero:
      for (std::size_t id = 0; id < out.size(); ++id) {
        if (lat.region(id) != SiteRegion::Interior) out[id] = 0.0;
      }
      break;
    case Constraint::ZeroOutsideQ:
      for (std::size_t id = 0; id < out.size(); ++id) {
        if (!lat.in_domain(id)) out[id] = 0.0;
      }
      break;
    case Constraint::MeanZero: {
      const auto q = lat.domain_ids();
      if (q.empty()) break;
      double mean = 0.0;
      for (std::size_t id : q) mean += out[id];
      mean /= static_cast<double>(q.size());
      for (std::size_t id : q) out[id] -= mean;
      break;
    }
  }
  return out;
}

MinimizeResult minimize(const EnergySpec& spec, const PairWeights& weights, const LatticeDomain& lattice,
                        const MinimizeOptions& opts) {
  const EnergyModel model(spec, std::shared_ptr<const PairWeights>(&weights, [](const PairWeights*) {}),
                          lattice);
  return minimize(model, opts);
}

MinimizeResult minimize(const EnergyModel& model, const MinimizeOptions& opts) {
  if (!(opts.grad_tol > 0.0) || opts.max_iter < 0 || opts.memory < 1 || !(opts.shrink > 0.0 && opts.shrink < 1.0) ||
      !(opts.sufficient_decrease > 0.0 && opts.sufficient_decrease < 1.0)) {
    throw std::invalid_argument("invalid minimize options");
  }
  const EnergySpec& spec = model.spec();
  if (!spec.V.differentiable()) {
    throw std::invalid_argument("minimize needs a differentiable potential, got " + spec.V.name());
  }
  const LatticeDomain& lat = model.lattice();
  const Constraint constraint = spec.constraint;

  if (opts.initial && opts.initial->size() != lat.size()) {
    throw std::invalid_argument("initial guess lives on a different lattice");
  }
  GridFunction u = opts.initial ? project_constraint(*opts.initial, constraint) : GridFunction(lat);

  MinimizeStats stats;
  stats.best_effort = spec.V.kind() == Potential::Kind::Custom || spec.G.kind() == ZeroOrderTerm::Kind::Custom;
  double energy = model.value(u);
  stats.energy_history.push_back(energy);
  GridFunction g = model.gradient(u);
  std::deque<Pair> memory;
  double gd_step = 1.0;

  for (int it = 0;; ++it) {
    stats.grad_norm = sup(g.values());
    if (stats.grad_norm <= opts.grad_tol) {
      stats.converged = true;
      break;
    }
    if (it >= opts.max_iter) {
      std::ostringstream os;
      os << "minimize: no convergence in " << opts.max_iter << " iterations (|g|_inf = " << stats.grad_norm << ")";
      throw NumericalError(os.str());
    }

    bool accepted = false;
    double step = 0.0;
    double delta = 0.0;
    GridFunction dir(lat);
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const bool use_memory = opts.method == Method::LBFGS && attempt == 0 && !memory.empty();
      if (use_memory) {
        dir = GridFunction(lat, lbfgs_direction(memory, g.values()));
        model.project_gradient(dir);
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -g[i];
      }
      double slope = dot(g.values(), dir.values());
      if (!(slope < 0.0)) {
        memory.clear();
        for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -g[i];
        slope = dot(g.values(), dir.values());
      }

      double t = 1.0;
      if (!use_memory) t = opts.method == Method::GradientDescent ? gd_step : 1.0 / stats.grad_norm;
      for (int bt = 0; bt < opts.max_backtracks; ++bt) {
        const double inc = model.increment(u, dir, t);
        if (inc <= opts.sufficient_decrease * t * slope) {
          accepted = true;
          step = t;
          delta = inc;
          break;
        }
        t *= opts.shrink;
      }
      if (!accepted) memory.clear();
    }
    if (!accepted) {
      std::ostringstream os;
      os << "minimize: line search failed (step underflow) at iteration " << it << ", |g|_inf = " << stats.grad_norm;
      throw NumericalError(os.str());
    }

    GridFunction u_new = u;
    for (std::size_t i = 0; i < u.size(); ++i) u_new[i] += step * dir[i];
    if (constraint == Constraint::MeanZero) u_new = project_constraint(u_new, constraint);
    GridFunction g_new = model.gradient(u_new);

    if (opts.method == Method::LBFGS) {
      Pair pr;
      pr.s.resize(u.size());
      pr.y.resize(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        pr.s[i] = u_new[i] - u[i];
        pr.y[i] = g_new[i] - g[i];
      }
      const double sy = dot(pr.s, pr.y);
      if (sy > 1e-12 * std::sqrt(dot(pr.s, pr.s) * dot(pr.y, pr.y))) {
        pr.rho = 1.0 / sy;
        memory.push_back(std::move(pr));
        if (memory.size() > static_cast<std::size_t>(opts.memory)) memory.pop_front();
      }
    } else {
      gd_step = 2.0 * step;
    }

    u = std::move(u_new);
    g = std::move(g_new);
    energy += delta;
    stats.energy_history.push_back(energy);
    stats.iters = it + 1;
  }
  stats.final_energy = model.value(u);
  return {std::move(u), std::move(stats)};
}

}  // namespace fraclat
