#include "fraclat/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "fraclat/errors.hpp"
#include "fraclat/linear_ops.hpp"
#include "fraclat/minimize.hpp"
#include "fraclat/parallel.hpp"
#include "fraclat/version.hpp"

namespace fraclat {
namespace {

std::shared_ptr<const PairWeights> borrow(const PairWeights& w) {
  return std::shared_ptr<const PairWeights>(std::shared_ptr<void>(), &w);
}

std::string kv(const std::string& k, double v) { return k + "=" + format_double(v); }

double spread(const std::vector<double>& v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return *mx - *mn;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

EnergySpec energy_spec(const StudyConfig& cfg, const LatticeDomain& lattice, Constraint constraint) {
  EnergySpec spec;
  spec.p = cfg.p;
  spec.s = cfg.s;
  spec.V = cfg.potential();
  spec.G = cfg.zero_order();
  spec.f = cfg.forcing(lattice);
  spec.flavor = cfg.flavor;
  spec.constraint = constraint;
  return spec;
}

bool linear_path(const StudyConfig& cfg) {
  return cfg.p == 2.0 && cfg.V_kind == "power" && cfg.G_kind == "none" &&
         (cfg.constraint == Constraint::DirichletZero || cfg.constraint == Constraint::MeanZero);
}

WeightField constant_field() { return WeightField(WeightDistribution::constant(1.0), 0); }

// Nonlocal energy of a sampled function; constraints are not imposed.
double sampled_nonlocal(const StudyConfig& cfg, const ContinuumFunction& u, const LatticeDomain& lattice,
                        const PairWeights& w) {
  EnergySpec spec;
  spec.p = cfg.p;
  spec.s = cfg.s;
  spec.V = cfg.potential();
  spec.flavor = cfg.flavor;
  spec.constraint = Constraint::None;
  const EnergyModel model(spec, borrow(w), lattice);
  return model.nonlocal_value(sample(u, lattice));
}

void add_divergence(StudyReport& rep, const StudyConfig& cfg, const WeightField& field, const std::string& metric,
                    std::optional<std::uint64_t> seed) {
  const auto vals = divergence_probe(field, cfg.d, cfg.p, cfg.s, cfg.divergence_radii, cfg.divergence_origins);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    rep.add(std::nullopt, seed, metric, vals[i], kv("R", cfg.divergence_radii[i]));
  }
}

void add_divergence_reference(StudyReport& rep, const StudyConfig& cfg, double mean) {
  if (cfg.d != 1) return;
  for (int R : cfg.divergence_radii) {
    rep.add(std::nullopt, std::nullopt, "divergence_reference",
            2.0 * mean * (std::log(static_cast<double>(R)) + std::numbers::egamma), kv("R", R));
  }
}

// Cosine of the largest principal angle between span{a_i} and span{b_i}, both
// eps^d-orthonormal.
double subspace_alignment(const std::vector<const GridFunction*>& a, const std::vector<const GridFunction*>& b) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd M(n, n);
  const double ed = a.front()->lattice().cell_volume();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      const auto& x = *a[static_cast<std::size_t>(i)];
      const auto& y = *b[static_cast<std::size_t>(j)];
      for (std::size_t id = 0; id < x.size(); ++id) acc += x[id] * y[id];
      M(i, j) = ed * acc;
    }
  }
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues().minCoeff();
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LatticeDomain study_lattice(const StudyConfig& cfg, double eps) {
  return build_lattice(cfg.d, eps, cfg.domain, cfg.halo_box());
}

ProblemSolution solve_problem(const StudyConfig& cfg, const LatticeDomain& lattice, const PairWeights& weights) {
  if (linear_path(cfg)) {
    const auto sys = assemble(lattice, weights, cfg.s, cfg.constraint, cfg.flavor, cfg.forcing(lattice));
    auto res = solve(sys, {cfg.solver_tol, cfg.solver_max_iter, cfg.solver_jacobi});
    return {std::move(res.u), "linear", res.stats.iters, res.stats.residual};
  }
  MinimizeOptions opts;
  opts.grad_tol = cfg.minimize_grad_tol;
  opts.max_iter = cfg.minimize_max_iter;
  opts.method = cfg.minimize_method;
  auto res = minimize(energy_spec(cfg, lattice, cfg.constraint), weights, lattice, opts);
  return {std::move(res.u), "minimize", res.stats.iters, res.stats.grad_norm};
}

ContinuumFunction study_function(const StudyConfig& cfg) {
  if (cfg.gamma_function == "tent") return ContinuumFunction::tent(cfg.d, cfg.gamma_height, cfg.gamma_radius);
  if (cfg.gamma_function == "zero") return ContinuumFunction::constant(cfg.d, 0.0);
  throw ConfigError("unknown gamma.function '" + cfg.gamma_function + "'");
}

ContinuumFunction embedding_function(const std::string& name, const Box& domain) {
  const int dim = domain.dim;
  Point c{};
  Point h{};
  for (int i = 0; i < dim; ++i) {
    c[i] = 0.5 * (domain.lo[i] + domain.hi[i]);
    h[i] = 0.5 * (domain.hi[i] - domain.lo[i]);
  }
  auto local = [c, h, dim](const Point& x) {
    Point t{};
    for (int i = 0; i < dim; ++i) t[i] = (x[i] - c[i]) / h[i];
    return t;
  };
  if (name == "tent") {
    return {dim,
            [local, dim](const Point& x) {
              const Point t = local(x);
              double m = 0.0;
              for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(t[i]));
              return std::max(0.0, 1.0 - m);
            },
            domain, Smoothness::C0};
  }
  if (name == "bump") {
    return {dim,
            [local, dim](const Point& x) {
              const Point t = local(x);
              double r2 = 0.0;
              for (int i = 0; i < dim; ++i) r2 += t[i] * t[i];
              return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
            },
            domain, Smoothness::C1};
  }
  if (name == "comb") {
    // Three octaves with coefficients fixed by a seeded generator.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.5, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::array<double, 3> a{};
    std::array<double, 3> ph{};
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] = U(rng) * std::ldexp(1.0, -static_cast<int>(j));
      ph[j] = phase(rng);
    }
    return {dim,
            [local, dim, a, ph](const Point& x) {
              const Point t = local(x);
              double env = 1.0;
              for (int i = 0; i < dim; ++i) env *= std::max(0.0, 1.0 - t[i] * t[i]);
              double osc = 0.0;
              for (std::size_t j = 0; j < a.size(); ++j) {
                osc += a[j] * std::sin(std::ldexp(std::numbers::pi, static_cast<int>(j) + 1) * t[0] + ph[j]);
              }
              return env * (1.0 + osc);
            },
            domain, Smoothness::C0};
  }
  throw ConfigError("unknown embedding test function '" + name + "'");
}

StudyReport run_solve(const StudyConfig& cfg) {
  StudyReport rep;
  rep.study = to_string(StudyKind::Solve);
  const WeightDistribution dist = cfg.dist.build();
  for (double eps : cfg.eps_list) {
    const auto lat = study_lattice(cfg, eps);
    for (std::uint64_t seed : cfg.seeds) {
      const WeightField w(dist, seed);
      const auto sol = solve_problem(cfg, lat, w);
      const std::string aux = "method=" + sol.method;
      rep.add(eps, seed, "l2_norm", embedding_l2_norm(sol.u, cfg.domain), aux);
      rep.add(eps, seed, "sup_norm", sol.u.sup_norm(), aux);
      rep.add(eps, seed, "energy", energy_value(energy_spec(cfg, lat, cfg.constraint), w, sol.u), aux);
      rep.add(eps, seed, "iterations", sol.iters, aux);
      rep.add(eps, seed, "residual", sol.residual, aux);
    }
  }
  return rep;
}

StudyReport run_homogenize(const StudyConfig& cfg) {
  StudyReport rep;
  rep.study = to_string(StudyKind::Homogenize);
  const WeightDistribution dist = cfg.dist.build();
  const WeightField unit = constant_field();
  const double fine_eps = cfg.eps_list.back();
  const auto fine = study_lattice(cfg, fine_eps);
  const GridFunction ref = solve_problem(cfg, fine, unit).u;
  const double ref_norm = embedding_l2_norm(ref, cfg.domain);
  rep.add(fine_eps, std::nullopt, "ref_l2_norm", ref_norm);

  for (double eps : cfg.eps_list) {
    const auto lat = study_lattice(cfg, eps);
    const auto uc = eps == fine_eps ? ref : solve_problem(cfg, lat, unit).u;
    rep.add(eps, std::nullopt, "const_error", embedding_l2_distance(uc, ref, cfg.domain));
    std::vector<double> errs;
    for (std::uint64_t seed : cfg.seeds) {
      const WeightField w(dist, seed);
      const auto sol = solve_problem(cfg, lat, w);
      const double e = embedding_l2_distance(sol.u, ref, cfg.domain);
      errs.push_back(e);
      rep.add(eps, seed, "l2_error", e, "method=" + sol.method);
    }
    rep.add(eps, std::nullopt, "l2_error_median", median(errs));
    rep.add(eps, std::nullopt, "seed_spread", spread(errs));
  }
  return rep;
}

StudyReport run_gamma_limit(const StudyConfig& cfg, const std::optional<ContinuumFunction>& u_in) {
  StudyReport rep;
  rep.study = to_string(StudyKind::GammaLimit);
  const ContinuumFunction u = u_in ? *u_in : study_function(cfg);
  if (u.dim() != cfg.d) throw std::invalid_argument("gamma_limit: function dimension differs from d");
  if (u.smoothness() != Smoothness::Lipschitz) throw std::invalid_argument("gamma_limit needs a Lipschitz function");
  if (u.support()) {
    for (int i = 0; i < cfg.d; ++i) {
      if (u.support()->lo[i] < cfg.domain.lo[i] || u.support()->hi[i] > cfg.domain.hi[i]) {
        throw std::invalid_argument("gamma_limit: support of u leaves the closed domain");
      }
    }
  } else if (u.lipschitz_constant() != 0.0) {
    throw std::invalid_argument("gamma_limit: u needs a support box inside the domain");
  }
  const WeightDistribution dist = cfg.dist.build();
  const double mean = dist.mean();
  const Box cont_domain = cfg.flavor == Flavor::LocalQ ? cfg.domain : cfg.halo_box();
  const auto br = continuum_energy(u, cfg.s, cfg.p, cfg.potential(), cont_domain, cfg.gamma_quad_n, cfg.gamma_xi);
  const std::string aux = kv("xi", cfg.gamma_xi) + ";quad_n=" + std::to_string(cfg.gamma_quad_n);
  rep.add(std::nullopt, std::nullopt, "mean_weight", mean);
  rep.add(std::nullopt, std::nullopt, "bracket_low", mean * br.low, aux);
  rep.add(std::nullopt, std::nullopt, "bracket_high", mean * br.high, aux);
  rep.add(std::nullopt, std::nullopt, "bracket_far", mean * br.far, aux);
  rep.add(std::nullopt, std::nullopt, "bracket_far_error", mean * br.far_error, aux);
  rep.add(std::nullopt, std::nullopt, "bracket_near_high", mean * br.near_high, aux);
  const double mid = 0.5 * mean * (br.low + br.high);
  for (double eps : cfg.eps_list) {
    const auto lat = study_lattice(cfg, eps);
    std::vector<double> vals;
    for (std::uint64_t seed : cfg.seeds) {
      const WeightField w(dist, seed);
      const double e = sampled_nonlocal(cfg, u, lat, w);
      vals.push_back(e);
      rep.add(eps, seed, "discrete_energy", e);
    }
    const double m = median(vals);
    rep.add(eps, std::nullopt, "discrete_energy_median", m);
    rep.add(eps, std::nullopt, "midpoint_gap", std::abs(m - mid));
  }
  return rep;
}

StudyReport run_spectral(const StudyConfig& cfg) {
  StudyReport rep;
  rep.study = to_string(StudyKind::Spectral);
  const WeightDistribution dist = cfg.dist.build();
  const WeightField unit = constant_field();
  const auto system_for = [&](const LatticeDomain& lat, const PairWeights& w) {
    return assemble(lat, w, cfg.s, cfg.constraint, cfg.flavor, std::nullopt);
  };
  const auto fine_lat = study_lattice(cfg, cfg.eps_list.back());
  const auto fine_sys = system_for(fine_lat, unit);
  const std::size_t K = std::min<std::size_t>(static_cast<std::size_t>(cfg.spectral_k), fine_sys.free_ids.size());
  const auto fine = spectrum(fine_sys, K);
  for (std::size_t k = 0; k < K; ++k) {
    rep.add(cfg.eps_list.back(), std::nullopt, "mu_const_fine", fine.eigenvalues[k], "k=" + std::to_string(k + 1));
  }

  for (double eps : cfg.eps_list) {
    const auto lat = study_lattice(cfg, eps);
    const auto csys = system_for(lat, unit);
    const std::size_t Ke = std::min(K, csys.free_ids.size());
    const auto cref = spectrum(csys, Ke);
    // Clusters of numerically equal constant-weight eigenvalues.
    std::vector<std::size_t> cluster(Ke, 0);
    for (std::size_t k = 1; k < Ke; ++k) {
      const bool same = std::abs(cref.eigenvalues[k] - cref.eigenvalues[k - 1]) <= 1e-8 * cref.eigenvalues[k - 1];
      cluster[k] = same ? cluster[k - 1] : k;
    }
    std::vector<std::vector<double>> gaps(Ke);
    std::vector<double> mu1;
    for (std::uint64_t seed : cfg.seeds) {
      const WeightField w(dist, seed);
      const auto sp = spectrum(system_for(lat, w), Ke);
      mu1.push_back(sp.eigenvalues[0] / cref.eigenvalues[0]);
      for (std::size_t k = 0; k < Ke; ++k) {
        const std::string tag = "k=" + std::to_string(k + 1);
        const double mu = sp.eigenvalues[k];
        const double gap = std::abs(mu - cref.eigenvalues[k]) / cref.eigenvalues[k];
        gaps[k].push_back(gap);
        rep.add(eps, seed, "mu", mu, tag);
        rep.add(eps, seed, "gap", gap, tag);
        rep.add(eps, seed, "gap_fine", std::abs(mu - fine.eigenvalues[k]) / fine.eigenvalues[k], tag);
        std::vector<const GridFunction*> a;
        std::vector<const GridFunction*> b;
        for (std::size_t j = 0; j < Ke; ++j) {
          if (cluster[j] != cluster[k]) continue;
          a.push_back(&sp.eigenvectors[j]);
          b.push_back(&cref.eigenvectors[j]);
        }
        rep.add(eps, seed, "alignment", subspace_alignment(a, b), tag + ";multiplicity=" + std::to_string(a.size()));
      }
    }
    for (std::size_t k = 0; k < Ke; ++k) {
      const std::string tag = "k=" + std::to_string(k + 1);
      rep.add(eps, std::nullopt, "mu_const", cref.eigenvalues[k], tag);
      rep.add(eps, std::nullopt, "gap_median", median(gaps[k]), tag);
    }
    rep.add(eps, std::nullopt, "mu1_spread", spread(mu1));
  }
  return rep;
}

StudyReport run_embeddings(const StudyConfig& cfg) {
  StudyReport rep;
  rep.study = to_string(StudyKind::Embeddings);
  const WeightDistribution dist = cfg.dist.build();
  std::vector<double> qs = cfg.embeddings_q_list;
  if (qs.empty()) {
    double pstar = kInfinity;
    try {
      pstar = critical_exponent(cfg.p, cfg.s, cfg.d, cfg.embeddings_weighted ? cfg.lower_moment() : kInfinity);
    } catch (const std::domain_error&) {
      throw ConfigError("critical exponent is infinite; set embeddings.q_list explicitly");
    }
    qs = {cfg.p, 0.5 * (cfg.p + pstar)};
  }
  std::vector<std::optional<std::uint64_t>> seeds;
  if (cfg.embeddings_weighted) {
    for (auto s : cfg.seeds) seeds.emplace_back(s);
  } else {
    seeds.emplace_back(std::nullopt);
  }
  for (const auto& name : cfg.embeddings_functions) {
    const ContinuumFunction fn = embedding_function(name, cfg.domain);
    for (double q : qs) {
      for (const auto& seed : seeds) {
        const std::string tag = "function=" + name + ";" + kv("q", q);
        std::vector<double> ratios;
        for (double eps : cfg.eps_list) {
          const auto lat = study_lattice(cfg, eps);
          const auto u = sample(fn, lat);
          double r = 0.0;
          if (seed) {
            const WeightField w(dist, *seed);
            r = embedding_ratio(u, cfg.s, cfg.p, q, &w, SumRange::Q);
          } else {
            r = embedding_ratio(u, cfg.s, cfg.p, q, nullptr, SumRange::Q);
          }
          ratios.push_back(r);
          rep.add(eps, seed, "ratio", r, tag);
        }
        const auto [mn, mx] = std::minmax_element(ratios.begin(), ratios.end());
        const double drift = *mx / *mn;
        rep.add(std::nullopt, seed, "drift", drift, tag + (drift > 2.0 ? ";flag=drift" : ""));
      }
    }
  }
  return rep;
}

StudyReport run_ergodic(const StudyConfig& cfg) {
  StudyReport rep;
  rep.study = to_string(StudyKind::Ergodic);
  const WeightDistribution dist = cfg.dist.build();
  rep.add(std::nullopt, std::nullopt, "analytic_moment", dist.moment(cfg.ergodic_q), kv("q", cfg.ergodic_q));
  for (std::uint64_t seed : cfg.seeds) {
    const WeightField field(dist, seed);
    for (int R : cfg.ergodic_radii) {
      const auto est = empirical_moment(field, cfg.d, cfg.ergodic_q, R, cfg.ergodic_origins);
      const std::string tag = kv("R", R) + ";count=" + std::to_string(est.count);
      rep.add(std::nullopt, seed, "box_mean", est.mean, tag);
      rep.add(std::nullopt, seed, "box_stderr", est.std_error, tag);
    }
    for (double alpha : cfg.ergodic_alpha_list) {
      std::vector<double> sums;
      for (double xi : cfg.ergodic_xi_list) {
        const double v = local_weighted_sum(field, cfg.domain, cfg.ergodic_eps, xi, alpha);
        sums.push_back(v);
        rep.add(cfg.ergodic_eps, seed, "xi_sum", v, kv("alpha", alpha) + ";" + kv("xi", xi));
      }
      if (sums.size() >= 2) {
        rep.add(cfg.ergodic_eps, seed, "xi_exponent", loglog_slope(cfg.ergodic_xi_list, sums), kv("alpha", alpha));
      }
    }
    add_divergence(rep, cfg, field, "divergence", seed);
  }
  add_divergence_reference(rep, cfg, dist.mean());
  return rep;
}

StudyReport run_vanish(const StudyConfig& cfg) {
  StudyReport rep;
  rep.study = to_string(StudyKind::Vanish);
  const WeightDistribution dist = cfg.dist.build();
  const ContinuumFunction u = study_function(cfg);
  std::vector<double> medians;
  for (double eps : cfg.eps_list) {
    const auto lat = study_lattice(cfg, eps);
    std::vector<double> vals;
    for (std::uint64_t seed : cfg.seeds) {
      const WeightField w(dist, seed);
      const double e = sampled_nonlocal(cfg, u, lat, w);
      vals.push_back(e);
      rep.add(eps, seed, "nonlocal_energy", e);
    }
    medians.push_back(median(vals));
    rep.add(eps, std::nullopt, "nonlocal_energy_median", medians.back());
  }
  if (medians.front() > 0.0) {
    rep.add(cfg.eps_list.back(), std::nullopt, "decay_ratio", medians.back() / medians.front(),
            kv("eps_ref", cfg.eps_list.front()));
  }
  for (std::uint64_t seed : cfg.seeds) add_divergence(rep, cfg, WeightField(dist, seed), "divergence", seed);
  add_divergence(rep, cfg, constant_field(), "divergence_constant", std::nullopt);
  add_divergence_reference(rep, cfg, 1.0);
  return rep;
}

StudyReport run_study(const StudyConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  StudyReport rep;
  switch (cfg.study) {
    case StudyKind::Solve: rep = run_solve(cfg); break;
    case StudyKind::Homogenize: rep = run_homogenize(cfg); break;
    case StudyKind::GammaLimit: rep = run_gamma_limit(cfg); break;
    case StudyKind::Spectral: rep = run_spectral(cfg); break;
    case StudyKind::Embeddings: rep = run_embeddings(cfg); break;
    case StudyKind::Ergodic: rep = run_ergodic(cfg); break;
    case StudyKind::Vanish: rep = run_vanish(cfg); break;
  }
  rep.check_finite();
  rep.meta.version = version_string();
  rep.meta.config = serialize(cfg);
  rep.meta.threads = thread_count();
  rep.meta.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace fraclat
