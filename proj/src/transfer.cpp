#include "fraclat/transfer.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fraclat/parallel.hpp"

namespace fraclat {
namespace {

// Gauss-Legendre 5-point rule on [-1, 1].
constexpr std::array<double, 5> kNode = {-0.90617984593866399, -0.53846931010568309, 0.0, 0.53846931010568309,
                                         0.90617984593866399};
constexpr std::array<double, 5> kWeight = {0.23692688505618909, 0.47862867049936647, 0.56888888888888889,
                                           0.47862867049936647, 0.23692688505618909};

constexpr double kSnap = 1e-10;

double bump(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

// Integral of the unnormalized bump over the unit ball in R^d.
double bump_mass(int dim) {
  static const double m1 = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double t) { return bump(t * t); }, -1.0, 1.0, 20, 1e-15);
  static const double m2 = 2.0 * std::numbers::pi *
                           boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                               [](double r) { return r * bump(r * r); }, 0.0, 1.0, 20, 1e-15);
  return dim == 1 ? m1 : m2;
}

double sphere_measure(int dim) { return dim == 1 ? 2.0 : 2.0 * std::numbers::pi; }

void require_defined(const std::optional<Box>& box, const Point& x, double tol) {
  if (box && !box->contains_closed(x, tol)) throw std::out_of_range("evaluation outside the halo box");
}

// Composite GL5 nodes/weights over [a, b] split at the given sorted breakpoints.
void panel_rule(const std::vector<double>& breaks, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.clear();
  weights.clear();
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = breaks[i];
    const double hi = breaks[i + 1];
    if (!(hi > lo)) continue;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t k = 0; k < kNode.size(); ++k) {
      nodes.push_back(mid + half * kNode[k]);
      weights.push_back(half * kWeight[k]);
    }
  }
}

// Panels for a radial variable on [xi, H]: geometric near xi, uniform beyond.
std::vector<double> radial_breaks(double xi, double H, int n) {
  std::vector<double> b;
  for (double r = xi; r < H; r *= 2.0) b.push_back(r);
  for (int j = 1; j <= n; ++j) b.push_back(xi + (H - xi) * j / n);
  std::sort(b.begin(), b.end());
  std::vector<double> out;
  for (double v : b) {
    if (out.empty() || v - out.back() > 1e-14 * H) out.push_back(v);
  }
  return out;
}

std::vector<double> uniform_breaks(double lo, double hi, int n) {
  std::vector<double> b(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) b[static_cast<std::size_t>(j)] = lo + (hi - lo) * j / n;
  return b;
}

double block_sum(std::size_t n, const std::function<double(std::size_t)>& body) {
  const std::size_t nb = block_count(n);
  std::vector<double> partial(nb, 0.0);
  parallel_for_blocks(nb, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kReductionBlock);
    double acc = 0.0;
    for (std::size_t i = b * kReductionBlock; i < end; ++i) acc += body(i);
    partial[b] = acc;
  });
  double t = 0.0;
  for (double v : partial) t += v;
  return t;
}

double far_part(const ContinuumFunction& f, double ps, const Potential& V, const Box& q, int n, double xi) {
  const int dim = q.dim;
  const double expo = static_cast<double>(dim) + ps;
  if (dim == 1) {
    std::vector<double> xn;
    std::vector<double> xw;
    // The inner ranges switch on at distance xi from either end.
    auto xb = uniform_breaks(q.lo[0], q.hi[0], n);
    for (double e : {q.lo[0] + xi, q.hi[0] - xi}) {
      if (e > q.lo[0] && e < q.hi[0]) xb.push_back(e);
    }
    std::sort(xb.begin(), xb.end());
    panel_rule(xb, xn, xw);
    return block_sum(xn.size(), [&](std::size_t i) {
      const double x = xn[i];
      const double fx = f({x, 0.0});
      double inner = 0.0;
      std::vector<double> hn;
      std::vector<double> hw;
      for (double sign : {1.0, -1.0}) {
        const double H = sign > 0 ? q.hi[0] - x : x - q.lo[0];
        if (!(H > xi)) continue;
        panel_rule(radial_breaks(xi, H, n), hn, hw);
        for (std::size_t k = 0; k < hn.size(); ++k) {
          const double h = hn[k];
          inner += hw[k] * V.value(fx - f({x + sign * h, 0.0})) * std::pow(h, -expo);
        }
      }
      return xw[i] * inner;
    });
  }

  std::vector<double> an;
  std::vector<double> aw;
  std::vector<double> bn;
  std::vector<double> bw;
  panel_rule(uniform_breaks(q.lo[0], q.hi[0], n), an, aw);
  panel_rule(uniform_breaks(q.lo[1], q.hi[1], n), bn, bw);
  std::vector<double> tn;
  std::vector<double> tw;
  panel_rule(uniform_breaks(0.0, 2.0 * std::numbers::pi, 4 * n), tn, tw);
  const std::size_t nx = an.size() * bn.size();
  return block_sum(nx, [&](std::size_t idx) {
    const std::size_t ia = idx / bn.size();
    const std::size_t ib = idx % bn.size();
    const Point x{an[ia], bn[ib]};
    const double fx = f(x);
    double inner = 0.0;
    std::vector<double> rn;
    std::vector<double> rw;
    for (std::size_t t = 0; t < tn.size(); ++t) {
      const double c = std::cos(tn[t]);
      const double s = std::sin(tn[t]);
      // Exit distance of the ray x + r (c, s) from the box.
      double H = kInfinity;
      if (c > 0) H = std::min(H, (q.hi[0] - x[0]) / c);
      if (c < 0) H = std::min(H, (q.lo[0] - x[0]) / c);
      if (s > 0) H = std::min(H, (q.hi[1] - x[1]) / s);
      if (s < 0) H = std::min(H, (q.lo[1] - x[1]) / s);
      if (!(H > xi)) continue;
      panel_rule(radial_breaks(xi, H, n), rn, rw);
      double ray = 0.0;
      for (std::size_t k = 0; k < rn.size(); ++k) {
        const double r = rn[k];
        // dh = r dr dtheta.
        ray += rw[k] * V.value(fx - f({x[0] + r * c, x[1] + r * s})) * r * std::pow(r, -expo);
      }
      inner += tw[t] * ray;
    }
    return aw[ia] * bw[ib] * inner;
  });
}

double near_bound(double L, double ps, double p, const Potential& V, double xi) {
  if (L == 0.0) return 0.0;
  if (V.kind() == Potential::Kind::PowerP) return std::pow(L, p) * std::pow(xi, p - ps) / (p - ps);
  if (V.kind() == Potential::Kind::Custom) {
    if (V.growth().c_v != 0.0) {
      throw std::invalid_argument("near-diagonal bound needs c_V = 0 for custom potentials");
    }
    return V.growth().beta * std::pow(L, p) * std::pow(xi, p - ps) / (p - ps);
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([&](double r) { return V.value(L * r) * std::pow(r, -1.0 - ps); }, 0.0, xi);
}

double piecewise_l2(const GridFunction& u, const GridFunction* v, const Box& q) {
  const int dim = q.dim;
  if (u.lattice().dim() != dim || (v != nullptr && v->lattice().dim() != dim)) {
    throw std::invalid_argument("embedding_l2: dimension mismatch");
  }
  const ContinuumFunction eu = embed(u);
  const std::optional<ContinuumFunction> ev = v ? std::optional(embed(*v)) : std::nullopt;

  std::array<std::vector<double>, kMaxDim> breaks;
  for (int i = 0; i < dim; ++i) {
    auto& b = breaks[static_cast<std::size_t>(i)];
    b.push_back(q.lo[i]);
    b.push_back(q.hi[i]);
    for (const GridFunction* g : {&u, v}) {
      if (g == nullptr) continue;
      const double eps = g->lattice().eps();
      for (auto z = g->lattice().axis_min(i); z <= g->lattice().axis_max(i) + 1; ++z) {
        const double e = eps * (static_cast<double>(z) - 0.5);
        if (e > q.lo[i] && e < q.hi[i]) b.push_back(e);
      }
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
  }
  if (dim == 1) breaks[1] = {0.0, 1.0};

  double acc = 0.0;
  const auto& bx = breaks[0];
  const auto& by = breaks[1];
  for (std::size_t i = 0; i + 1 < bx.size(); ++i) {
    for (std::size_t j = 0; j + 1 < by.size(); ++j) {
      const Point mid{0.5 * (bx[i] + bx[i + 1]), dim == 2 ? 0.5 * (by[j] + by[j + 1]) : 0.0};
      const double d = eu(mid) - (ev ? (*ev)(mid) : 0.0);
      const double vol = (bx[i + 1] - bx[i]) * (dim == 2 ? by[j + 1] - by[j] : 1.0);
      acc += d * d * vol;
    }
  }
  return std::sqrt(acc);
}

}  // namespace

ContinuumFunction::ContinuumFunction(int dim, Fn f, std::optional<Box> support, Smoothness smoothness,
                                     double lipschitz)
    : dim_(dim), f_(std::move(f)), support_(std::move(support)), smoothness_(smoothness), lipschitz_(lipschitz) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("ContinuumFunction dimension must be 1 or 2");
  if (!f_) throw std::invalid_argument("ContinuumFunction needs a callable");
  if (support_ && support_->dim != dim) throw std::invalid_argument("support box dimension mismatch");
  if (smoothness_ != Smoothness::Lipschitz) lipschitz_ = kInfinity;
  if (smoothness_ == Smoothness::Lipschitz && !(lipschitz_ >= 0.0 && std::isfinite(lipschitz_))) {
    throw std::invalid_argument("Lipschitz tag needs a finite constant");
  }
}

ContinuumFunction ContinuumFunction::constant(int dim, double v) {
  return {dim, [v](const Point&) { return v; }, std::nullopt, Smoothness::Lipschitz, 0.0};
}

ContinuumFunction ContinuumFunction::tent(int dim, double height, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("tent radius must be positive");
  auto f = [dim, height, r](const Point& x) {
    double m = 0.0;
    for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(x[i]));
    return height * std::max(0.0, 1.0 - m / r);
  };
  const Box support = dim == 1 ? interval(-r, r) : square(-r, r);
  return {dim, f, support, Smoothness::Lipschitz, std::abs(height) / r};
}

ContinuumFunction& ContinuumFunction::restrict_definition(const Box& b) {
  defined_on_ = b;
  return *this;
}

double ContinuumFunction::operator()(const Point& x) const {
  if (defined_on_ && !defined_on_->contains_closed(x, 1e-12)) {
    throw std::out_of_range("ContinuumFunction evaluated outside its domain of definition");
  }
  if (support_ && !support_->contains_closed(x)) return 0.0;
  return f_(x);
}

Site cell_of(const Point& x, double eps, int dim) {
  Site z{};
  for (int i = 0; i < dim; ++i) z[i] = static_cast<std::int64_t>(std::floor(x[i] / eps + 0.5));
  return z;
}

ContinuumFunction embed(const GridFunction& u) {
  const LatticeDomain lat = u.lattice();
  const auto values = std::make_shared<const std::vector<double>>(u.values().begin(), u.values().end());
  const double tol = 1e-12 * lat.eps();
  auto f = [lat, values, tol](const Point& x) {
    require_defined(lat.halo(), x, tol);
    const auto id = lat.find(cell_of(x, lat.eps(), lat.dim()));
    if (!id) throw std::out_of_range("evaluation outside the lattice cells");
    return (*values)[*id];
  };
  ContinuumFunction out(lat.dim(), f, std::nullopt, Smoothness::C0);
  out.restrict_definition(lat.halo().expanded(tol));
  return out;
}

GridFunction average(const ContinuumFunction& f, const LatticeDomain& lattice) {
  const double h = 0.5 * lattice.eps();
  std::vector<double> vals(lattice.size());
  for (std::size_t id = 0; id < lattice.size(); ++id) {
    const Point c = lattice.point(id);
    double acc = 0.0;
    if (lattice.dim() == 1) {
      for (std::size_t a = 0; a < kNode.size(); ++a) acc += kWeight[a] * f({c[0] + h * kNode[a], 0.0});
      acc *= 0.5;
    } else {
      for (std::size_t a = 0; a < kNode.size(); ++a) {
        for (std::size_t b = 0; b < kNode.size(); ++b) {
          acc += kWeight[a] * kWeight[b] * f({c[0] + h * kNode[a], c[1] + h * kNode[b]});
        }
      }
      acc *= 0.25;
    }
    vals[id] = acc;
  }
  return GridFunction(lattice, std::move(vals));
}

ContinuumFunction fe_interpolate(const GridFunction& u) {
  const LatticeDomain lat = u.lattice();
  const int dim = lat.dim();
  const auto values = std::make_shared<const std::vector<double>>(u.values().begin(), u.values().end());
  const double tol = 1e-12 * lat.eps();

  double max_edge = 0.0;
  for (std::size_t id = 0; id < lat.size(); ++id) {
    for (int i = 0; i < dim; ++i) {
      Site z = lat.site(id);
      z[i] += 1;
      if (const auto nb = lat.find(z)) max_edge = std::max(max_edge, std::abs(u[*nb] - u[id]));
    }
  }
  const double lip = std::sqrt(static_cast<double>(dim)) * max_edge / lat.eps();

  auto f = [lat, values, tol, dim](const Point& x) {
    require_defined(lat.halo(), x, tol);
    Site z{};
    Point theta{};
    for (int i = 0; i < dim; ++i) {
      const double t = x[i] / lat.eps();
      const double r = std::round(t);
      if (std::abs(t - r) < kSnap) {
        z[i] = static_cast<std::int64_t>(r);
        theta[i] = 0.0;
      } else {
        z[i] = static_cast<std::int64_t>(std::floor(t));
        theta[i] = t - static_cast<double>(z[i]);
      }
    }
    double acc = 0.0;
    const int corners = 1 << dim;
    for (int k = 0; k < corners; ++k) {
      double w = 1.0;
      Site c = z;
      for (int i = 0; i < dim; ++i) {
        const bool up = ((k >> i) & 1) != 0;
        w *= up ? theta[i] : 1.0 - theta[i];
        if (up) c[i] += 1;
      }
      if (w == 0.0) continue;
      const auto id = lat.find(c);
      if (!id) throw std::out_of_range("interpolation stencil leaves the lattice");
      acc += w * (*values)[*id];
    }
    return acc;
  };
  ContinuumFunction out(dim, f, std::nullopt, Smoothness::Lipschitz, lip);
  out.restrict_definition(lat.halo().expanded(tol));
  return out;
}

GridFunction sample(const ContinuumFunction& f, const LatticeDomain& lattice) {
  return GridFunction::from_function(lattice, [&](const Point& x) { return f(x); });
}

ContinuumFunction mollified_recovery(const ContinuumFunction& f, int k) {
  if (k < 1) throw std::invalid_argument("mollified_recovery needs k >= 1");
  if (!f.support()) throw std::invalid_argument("mollified_recovery needs f with a compact support box");
  const int dim = f.dim();
  const Box supp = *f.support();
  // Boundedness check on a sample grid.
  constexpr int kProbe = 33;
  for (int a = 0; a < kProbe; ++a) {
    for (int b = 0; b < (dim == 2 ? kProbe : 1); ++b) {
      Point x{};
      x[0] = supp.lo[0] + (supp.hi[0] - supp.lo[0]) * a / (kProbe - 1);
      if (dim == 2) x[1] = supp.lo[1] + (supp.hi[1] - supp.lo[1]) * b / (kProbe - 1);
      if (!std::isfinite(f(x))) throw std::invalid_argument("mollified_recovery needs a bounded f");
    }
  }

  const double mass = bump_mass(dim);
  const double inv_k = 1.0 / static_cast<double>(k);
  auto g = [f, dim, mass, inv_k](const Point& x) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    constexpr double kTol = 1e-10;
    if (dim == 1) {
      return GK::integrate([&](double t) { return bump(t * t) * f({x[0] - inv_k * t, 0.0}); }, -1.0, 1.0, 15,
                           kTol) /
             mass;
    }
    auto row = [&](double t1) {
      const double w = std::sqrt(std::max(0.0, 1.0 - t1 * t1));
      if (w == 0.0) return 0.0;
      return GK::integrate(
          [&](double t2) { return bump(t1 * t1 + t2 * t2) * f({x[0] - inv_k * t1, x[1] - inv_k * t2}); }, -w, w,
          10, kTol);
    };
    return GK::integrate(row, -1.0, 1.0, 10, kTol) / mass;
  };
  const Smoothness tag = f.smoothness() == Smoothness::Lipschitz ? Smoothness::Lipschitz : Smoothness::C1;
  return {dim, g, supp.expanded(inv_k), tag, f.lipschitz_constant()};
}

bool EnergyBracket::contains(double v, double inflate) const {
  return v >= low * (1.0 - inflate) && v <= high * (1.0 + inflate);
}

EnergyBracket continuum_energy(const ContinuumFunction& f, double s, double p, const Potential& V, const Box& domain,
                               int quad_n, double xi) {
  if (f.smoothness() != Smoothness::Lipschitz) {
    throw std::invalid_argument("continuum_energy needs a Lipschitz-tagged f for the near-diagonal bracket");
  }
  if (f.dim() != domain.dim) throw std::invalid_argument("continuum_energy: dimension mismatch");
  if (quad_n < 2 || quad_n % 2 != 0) throw std::invalid_argument("continuum_energy needs an even quad_n >= 2");
  if (!(xi > 0.0)) throw std::invalid_argument("continuum_energy needs xi > 0");
  if (!(s > 0.0 && s < 1.0) || !(p > 1.0)) throw std::invalid_argument("continuum_energy needs s in (0,1), p > 1");
  const double ps = p * s;
  EnergyBracket out;
  out.far = far_part(f, ps, V, domain, quad_n, xi);
  const double coarse = far_part(f, ps, V, domain, quad_n / 2, xi);
  out.far_error = std::abs(out.far - coarse);
  out.near_high =
      domain.volume() * sphere_measure(domain.dim) * near_bound(f.lipschitz_constant(), ps, p, V, xi);
  out.low = std::max(0.0, out.far - out.far_error);
  out.high = out.far + out.far_error + out.near_high;
  return out;
}

double embedding_l2_distance(const GridFunction& u, const GridFunction& v, const Box& q) {
  return piecewise_l2(u, &v, q);
}

double embedding_l2_norm(const GridFunction& u, const Box& q) { return piecewise_l2(u, nullptr, q); }

}  // namespace fraclat
