#include "fraclat/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fraclat/errors.hpp"
#include "fraclat/parallel.hpp"

namespace fraclat {
namespace {

// Gauss-Legendre 5-point rule mapped to [0, 1].
constexpr std::array<double, 5> kGlNode = {0.04691007703066802, 0.23076534494715845, 0.5,
                                           0.76923465505284155, 0.95308992296933198};
constexpr std::array<double, 5> kGlWeight = {0.11846344252809454, 0.23931433524968324,
                                             0.28444444444444444, 0.23931433524968324,
                                             0.11846344252809454};

double signed_pow(double xi, double e) {
  const double m = std::pow(std::abs(xi), e);
  return xi < 0.0 ? -m : m;
}

// V(a+h) - V(a) given V'. Uses the integral form where V' is smooth.
template <class Value, class Deriv>
double stable_difference(double a, double h, const Value& value, const Deriv& deriv, bool smooth) {
  if (h == 0.0) return 0.0;
  if (!smooth || !(a * (a + h) > 0.0)) return value(a + h) - value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < kGlNode.size(); ++i) acc += kGlWeight[i] * deriv(a + kGlNode[i] * h);
  return h * acc;
}

struct NoopDeleter {
  void operator()(const PairWeights*) const {}
};

std::shared_ptr<const PairWeights> borrow(const PairWeights& w) {
  return std::shared_ptr<const PairWeights>(&w, NoopDeleter{});
}

// Deterministic blocked sum of body(a) over a in [0, n).
template <class Body>
double blocked_sum(std::size_t n, const Body& body) {
  const std::size_t n_blocks = block_count(n);
  std::vector<double> partial(n_blocks, 0.0);
  parallel_for_blocks(n_blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kReductionBlock);
    double acc = 0.0;
    for (std::size_t a = b * kReductionBlock; a < end; ++a) acc += body(a);
    partial[b] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

[[noreturn]] void report_pair(const LatticeDomain& lattice, std::size_t i, std::size_t j,
                              const char* what) {
  const Site& a = lattice.site(i);
  const Site& b = lattice.site(j);
  std::ostringstream os;
  os << what << " at pair (" << a[0] << "," << a[1] << ")-(" << b[0] << "," << b[1] << ")";
  throw NumericalError(os.str());
}

}  // namespace

std::string to_string(Flavor f) { return f == Flavor::LocalQ ? "local" : "global"; }

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::None:
      return "none";
    case Constraint::DirichletZero:
      return "dirichlet";
    case Constraint::MeanZero:
      return "mean_zero";
    case Constraint::ZeroOutsideQ:
      return "zero_outside";
  }
  return "none";
}

Flavor parse_flavor(const std::string& s) {
  if (s == "global") return Flavor::GlobalHaloTruncated;
  if (s == "local") return Flavor::LocalQ;
  throw ConfigError("unknown flavor '" + s + "' (expected global|local)");
}

Constraint parse_constraint(const std::string& s) {
  for (Constraint c : {Constraint::None, Constraint::DirichletZero, Constraint::MeanZero,
                       Constraint::ZeroOutsideQ}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown constraint '" + s + "' (expected none|dirichlet|mean_zero|zero_outside)");
}

// ---- Potential ----------------------------------------------------------

Potential Potential::power(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("PowerP needs p > 1");
  Potential v;
  v.kind_ = Kind::PowerP;
  v.p_ = p;
  v.growth_ = {1.0, 1.0, 0.0};
  return v;
}

Potential Potential::smoothed_power(double p, double delta) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("SmoothedPowerP needs p > 1");
  if (!(delta > 0.0)) throw std::invalid_argument("SmoothedPowerP needs delta > 0");
  Potential v;
  v.kind_ = Kind::SmoothedPowerP;
  v.p_ = p;
  v.delta_ = delta;
  const double dp = std::pow(delta, p);
  if (p >= 2.0) {
    const double b = std::pow(2.0, 0.5 * p - 1.0);
    v.growth_ = {1.0, b, (b - 1.0) * dp};
  } else {
    const double t0 = delta / 1e-3;
    v.growth_ = {std::pow(1.0 + t0 * t0, 0.5 * p) - std::pow(t0, p), 1.0, 0.0};
  }
  return v;
}

Potential Potential::custom(Fn value, Fn derivative, double p, GrowthConstants growth) {
  if (!value) throw std::invalid_argument("custom potential needs a value function");
  Potential v;
  v.kind_ = Kind::Custom;
  v.p_ = p;
  v.growth_ = growth;
  v.value_ = std::move(value);
  v.derivative_ = std::move(derivative);
  return v;
}

std::string Potential::name() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::PowerP:
      os << "power(" << p_ << ")";
      break;
    case Kind::SmoothedPowerP:
      os << "smoothed_power(" << p_ << "," << delta_ << ")";
      break;
    case Kind::Custom:
      os << "custom(" << p_ << ")";
      break;
  }
  return os.str();
}

double Potential::value(double xi) const {
  switch (kind_) {
    case Kind::PowerP:
      if (p_ == 2.0) return xi * xi;
      return std::pow(std::abs(xi), p_);
    case Kind::SmoothedPowerP: {
      // delta^p ((1 + t^2)^{p/2} - 1), exact zero at the origin.
      const double t = xi / delta_;
      return std::pow(delta_, p_) * std::expm1(0.5 * p_ * std::log1p(t * t));
    }
    case Kind::Custom:
      return value_(xi);
  }
  return 0.0;
}

double Potential::derivative(double xi) const {
  switch (kind_) {
    case Kind::PowerP:
      if (p_ == 2.0) return 2.0 * xi;
      return p_ * signed_pow(xi, p_ - 1.0);
    case Kind::SmoothedPowerP:
      return p_ * xi * std::pow(xi * xi + delta_ * delta_, 0.5 * p_ - 1.0);
    case Kind::Custom:
      if (!derivative_) throw std::invalid_argument("custom potential has no derivative");
      return derivative_(xi);
  }
  return 0.0;
}

bool Potential::differentiable() const {
  switch (kind_) {
    case Kind::PowerP:
      return p_ >= 2.0;
    case Kind::SmoothedPowerP:
      return true;
    case Kind::Custom:
      return static_cast<bool>(derivative_);
  }
  return false;
}

double Potential::difference(double a, double h) const {
  if (kind_ == Kind::PowerP && p_ == 2.0) return h * (2.0 * a + h);
  const bool smooth = kind_ != Kind::Custom || static_cast<bool>(derivative_);
  return stable_difference(
      a, h, [this](double x) { return value(x); }, [this](double x) { return derivative(x); }, smooth);
}

bool Potential::check_growth() const {
  constexpr double kRel = 1e-12;
  for (int k = 0; k <= 20; ++k) {
    for (double sign : {1.0, -1.0}) {
      const double xi = sign * std::ldexp(1e-3, k);
      const double v = value(xi);
      const double m = std::pow(std::abs(xi), p_);
      if (!std::isfinite(v)) return false;
      if (growth_.alpha * m > v * (1.0 + kRel) + kRel * m) return false;
      if (v > (growth_.c_v + growth_.beta * m) * (1.0 + kRel)) return false;
    }
  }
  return true;
}

// ---- ZeroOrderTerm ------------------------------------------------------

ZeroOrderTerm ZeroOrderTerm::power(double alpha, double k) {
  if (!(alpha >= 0.0) || !(k >= 1.0)) throw std::invalid_argument("PowerK needs alpha >= 0 and k >= 1");
  ZeroOrderTerm g;
  g.kind_ = Kind::PowerK;
  g.alpha_ = alpha;
  g.k_ = k;
  return g;
}

ZeroOrderTerm ZeroOrderTerm::custom(Fn value, Fn derivative) {
  if (!value) throw std::invalid_argument("custom zero-order term needs a value function");
  ZeroOrderTerm g;
  g.kind_ = Kind::Custom;
  g.value_ = std::move(value);
  g.derivative_ = std::move(derivative);
  return g;
}

std::string ZeroOrderTerm::name() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::None:
      return "none";
    case Kind::PowerK:
      os << "power(" << alpha_ << "," << k_ << ")";
      return os.str();
    case Kind::Custom:
      return "custom";
  }
  return "none";
}

double ZeroOrderTerm::value(double xi) const {
  switch (kind_) {
    case Kind::None:
      return 0.0;
    case Kind::PowerK:
      if (k_ == 2.0) return alpha_ * xi * xi;
      return alpha_ * std::pow(std::abs(xi), k_);
    case Kind::Custom:
      return value_(xi);
  }
  return 0.0;
}

double ZeroOrderTerm::derivative(double xi) const {
  switch (kind_) {
    case Kind::None:
      return 0.0;
    case Kind::PowerK:
      if (k_ == 2.0) return 2.0 * alpha_ * xi;
      if (xi == 0.0) return 0.0;
      return alpha_ * k_ * signed_pow(xi, k_ - 1.0);
    case Kind::Custom:
      if (!derivative_) throw std::invalid_argument("custom zero-order term has no derivative");
      return derivative_(xi);
  }
  return 0.0;
}

double ZeroOrderTerm::difference(double a, double h) const {
  switch (kind_) {
    case Kind::None:
      return 0.0;
    case Kind::PowerK:
      if (k_ == 2.0) return alpha_ * h * (2.0 * a + h);
      break;
    case Kind::Custom:
      break;
  }
  const bool smooth = kind_ == Kind::PowerK || static_cast<bool>(derivative_);
  return stable_difference(
      a, h, [this](double x) { return value(x); }, [this](double x) { return derivative(x); }, smooth);
}

// ---- helpers ------------------------------------------------------------

std::vector<std::size_t> summation_ids(const LatticeDomain& lattice, Flavor flavor) {
  return summation_ids(lattice, flavor == Flavor::LocalQ ? SumRange::Q : SumRange::Global);
}

std::vector<std::size_t> summation_ids(const LatticeDomain& lattice, SumRange range) {
  if (range == SumRange::Q) {
    const auto q = lattice.domain_ids();
    return {q.begin(), q.end()};
  }
  std::vector<std::size_t> all(lattice.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

void check_constraint(const GridFunction& u, Constraint constraint) {
  const LatticeDomain& lat = u.lattice();
  switch (constraint) {
    case Constraint::None:
      return;
    case Constraint::DirichletZero:
      for (std::size_t id = 0; id < u.size(); ++id) {
        if (lat.region(id) != SiteRegion::Interior && u[id] != 0.0) {
          throw std::invalid_argument("u violates the Dirichlet constraint at site id " +
                                      std::to_string(id));
        }
      }
      return;
    case Constraint::ZeroOutsideQ:
      for (std::size_t id = 0; id < u.size(); ++id) {
        if (!lat.in_domain(id) && u[id] != 0.0) {
          throw std::invalid_argument("u is nonzero outside Q at site id " + std::to_string(id));
        }
      }
      return;
    case Constraint::MeanZero: {
      double sum = 0.0;
      double sup = 0.0;
      for (std::size_t id : lat.domain_ids()) {
        sum += u[id];
        sup = std::max(sup, std::abs(u[id]));
      }
      const auto n = static_cast<double>(lat.domain_ids().size());
      if (std::abs(sum) > 1e-12 * n * sup) {
        throw std::invalid_argument("u violates the mean-zero constraint (sum " + std::to_string(sum) + ")");
      }
      return;
    }
  }
}

// ---- PairKernel ---------------------------------------------------------

PairKernel::PairKernel(const LatticeDomain& lattice, std::shared_ptr<const PairWeights> weights,
                       std::vector<std::size_t> ids, double exponent, bool allow_cache)
    : lattice_(lattice), weights_(std::move(weights)), ids_(std::move(ids)), exponent_(exponent) {
  const std::size_t n = ids_.size();
  if (!allow_cache || n > kCacheLimit || n == 0) return;
  std::vector<double> dense(n * n, 0.0);
  parallel_for_blocks(block_count(n), [&](std::size_t blk) {
    const std::size_t end = std::min(n, (blk + 1) * kReductionBlock);
    for (std::size_t a = blk * kReductionBlock; a < end; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b) dense[a * n + b] = compute(a, b);
      }
    }
  });
  dense_ = std::move(dense);
}

double PairKernel::compute(std::size_t a, std::size_t b) const {
  const Site& za = lattice_.site(ids_[a]);
  const Site& zb = lattice_.site(ids_[b]);
  const double r = pair_distance(za, zb, lattice_.eps());
  return (*weights_)(za, zb) * std::pow(r, -exponent_);
}

double PairKernel::operator()(std::size_t a, std::size_t b) const {
  if (!dense_.empty()) return dense_[a * ids_.size() + b];
  return compute(a, b);
}

void PairKernel::row(std::size_t a, std::vector<double>& out) const {
  const std::size_t n = ids_.size();
  out.resize(n);
  if (!dense_.empty()) {
    std::copy_n(dense_.begin() + static_cast<std::ptrdiff_t>(a * n), n, out.begin());
    return;
  }
  for (std::size_t b = 0; b < n; ++b) out[b] = a == b ? 0.0 : compute(a, b);
}

// ---- EnergyModel --------------------------------------------------------

EnergyModel::EnergyModel(EnergySpec spec, std::shared_ptr<const PairWeights> weights,
                         const LatticeDomain& lattice, bool allow_cache)
    : spec_(std::move(spec)),
      weights_(std::move(weights)),
      lattice_(lattice),
      kernel_(lattice, weights_, summation_ids(lattice, spec_.flavor),
              static_cast<double>(lattice.dim()) + spec_.p * spec_.s, allow_cache) {
  if (!(spec_.p > 1.0)) throw std::invalid_argument("energy needs p > 1");
  if (!(spec_.s > 0.0 && spec_.s < 1.0)) throw std::invalid_argument("energy needs s in (0,1)");
  if (spec_.constraint == Constraint::MeanZero && spec_.flavor != Flavor::LocalQ) {
    throw std::invalid_argument("the mean-zero constraint requires the local flavor");
  }
  forcing_.assign(kernel_.size(), 0.0);
  if (spec_.f) {
    if (spec_.f->size() != lattice.size()) {
      throw std::invalid_argument("forcing f lives on a different lattice");
    }
    for (std::size_t a = 0; a < kernel_.size(); ++a) forcing_[a] = (*spec_.f)[kernel_.ids()[a]];
  }
}

double EnergyModel::nonlocal_value(const GridFunction& u) const {
  check_constraint(u, spec_.constraint);
  const auto& ids = kernel_.ids();
  const std::size_t n = ids.size();
  const double total = blocked_sum(n, [&](std::size_t a) {
    thread_local std::vector<double> row;
    kernel_.row(a, row);
    const double ua = u[ids[a]];
    double acc = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a) acc += row[b] * spec_.V.value(ua - u[ids[b]]);
    }
    if (!std::isfinite(acc)) {
      for (std::size_t b = 0; b < n; ++b) {
        if (b != a && !std::isfinite(row[b] * spec_.V.value(ua - u[ids[b]]))) {
          report_pair(lattice_, ids[a], ids[b], "non-finite energy term");
        }
      }
      report_pair(lattice_, ids[a], ids[a], "energy overflow");
    }
    return acc;
  });
  return std::pow(lattice_.eps(), 2 * lattice_.dim()) * total;
}

double EnergyModel::value(const GridFunction& u) const {
  const double nonlocal = nonlocal_value(u);
  const auto& ids = kernel_.ids();
  double local = 0.0;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    const double ua = u[ids[a]];
    local += spec_.G.value(ua) - ua * forcing_[a];
  }
  return nonlocal + lattice_.cell_volume() * local;
}

GridFunction EnergyModel::gradient(const GridFunction& u) const {
  if (!spec_.V.differentiable()) {
    throw std::invalid_argument("energy gradient needs a differentiable potential, got " + spec_.V.name());
  }
  check_constraint(u, spec_.constraint);
  const auto& ids = kernel_.ids();
  const std::size_t n = ids.size();
  const double e2d = std::pow(lattice_.eps(), 2 * lattice_.dim());
  const double ed = lattice_.cell_volume();
  GridFunction g(lattice_);
  parallel_for_blocks(block_count(n), [&](std::size_t blk) {
    thread_local std::vector<double> row;
    const std::size_t end = std::min(n, (blk + 1) * kReductionBlock);
    for (std::size_t a = blk * kReductionBlock; a < end; ++a) {
      kernel_.row(a, row);
      const double ua = u[ids[a]];
      double acc = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        if (b == a) continue;
        const double d = ua - u[ids[b]];
        acc += row[b] * (spec_.V.derivative(d) - spec_.V.derivative(-d));
      }
      const double ga = e2d * acc + ed * (spec_.G.derivative(ua) - forcing_[a]);
      if (!std::isfinite(ga)) report_pair(lattice_, ids[a], ids[a], "non-finite gradient");
      g[ids[a]] = ga;
    }
  });
  project_gradient(g);
  return g;
}

double EnergyModel::increment(const GridFunction& u, const GridFunction& h, double t) const {
  const auto& ids = kernel_.ids();
  const std::size_t n = ids.size();
  const double total = blocked_sum(n, [&](std::size_t a) {
    thread_local std::vector<double> row;
    kernel_.row(a, row);
    const double ua = u[ids[a]];
    const double ha = h[ids[a]];
    double acc = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a) acc += row[b] * spec_.V.difference(ua - u[ids[b]], t * (ha - h[ids[b]]));
    }
    return acc;
  });
  double local = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const double ua = u[ids[a]];
    const double ha = h[ids[a]];
    local += spec_.G.difference(ua, t * ha) - t * ha * forcing_[a];
  }
  return std::pow(lattice_.eps(), 2 * lattice_.dim()) * total + lattice_.cell_volume() * local;
}

void EnergyModel::project_gradient(GridFunction& g) const {
  switch (spec_.constraint) {
    case Constraint::None:
      return;
    case Constraint::DirichletZero:
      for (std::size_t id = 0; id < g.size(); ++id) {
        if (lattice_.region(id) != SiteRegion::Interior) g[id] = 0.0;
      }
      return;
    case Constraint::ZeroOutsideQ:
      for (std::size_t id = 0; id < g.size(); ++id) {
        if (!lattice_.in_domain(id)) g[id] = 0.0;
      }
      return;
    case Constraint::MeanZero: {
      const auto q = lattice_.domain_ids();
      double mean = 0.0;
      for (std::size_t id : q) mean += g[id];
      mean /= static_cast<double>(q.size());
      for (std::size_t id = 0; id < g.size(); ++id) g[id] = lattice_.in_domain(id) ? g[id] - mean : 0.0;
      return;
    }
  }
}

double energy_value(const EnergySpec& spec, const PairWeights& weights, const GridFunction& u) {
  return EnergyModel(spec, borrow(weights), u.lattice(), false).value(u);
}

GridFunction energy_gradient(const EnergySpec& spec, const PairWeights& weights, const GridFunction& u) {
  return EnergyModel(spec, borrow(weights), u.lattice(), false).gradient(u);
}

// ---- norms --------------------------------------------------------------

namespace {

double power_sum(const PairWeights& weights, const GridFunction& u, double s, double p, SumRange range) {
  if (!(p >= 1.0) || !(s > 0.0 && s < 1.0)) throw std::invalid_argument("seminorm needs p >= 1, s in (0,1)");
  const LatticeDomain& lat = u.lattice();
  const PairKernel kernel(lat, borrow(weights), summation_ids(lat, range),
                          static_cast<double>(lat.dim()) + s * p, false);
  const auto& ids = kernel.ids();
  const std::size_t n = ids.size();
  const double total = blocked_sum(n, [&](std::size_t a) {
    const double ua = u[ids[a]];
    double acc = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const double d = std::abs(ua - u[ids[b]]);
      if (d == 0.0) continue;
      acc += kernel(a, b) * (p == 2.0 ? d * d : std::pow(d, p));
    }
    return acc;
  });
  return std::pow(lat.eps(), 2 * lat.dim()) * total;
}

}  // namespace

double gagliardo_seminorm(const GridFunction& u, double s, double p, SumRange range) {
  return std::pow(power_sum(UnitWeights{}, u, s, p, range), 1.0 / p);
}

double weighted_seminorm(const PairWeights& weights, const GridFunction& u, double s, double p,
                         SumRange range) {
  return std::pow(power_sum(weights, u, s, p, range), 1.0 / p);
}

double lq_norm(const GridFunction& u, double q, SumRange range) {
  if (!(q >= 1.0)) throw std::invalid_argument("lq_norm needs q >= 1");
  const auto ids = summation_ids(u.lattice(), range);
  if (std::isinf(q)) {
    double m = 0.0;
    for (std::size_t id : ids) m = std::max(m, std::abs(u[id]));
    return m;
  }
  double acc = 0.0;
  for (std::size_t id : ids) {
    const double a = std::abs(u[id]);
    acc += q == 2.0 ? a * a : std::pow(a, q);
  }
  return std::pow(u.lattice().cell_volume() * acc, 1.0 / q);
}

double embedding_ratio(const GridFunction& u, double s, double p, double q, const PairWeights* weights,
                       SumRange range) {
  const double num = lq_norm(u, q, range);
  double den = 0.0;
  if (weights != nullptr) {
    den = weighted_seminorm(*weights, u, s, p, range);
  } else {
    den = std::pow(std::pow(lq_norm(u, p, range), p) + power_sum(UnitWeights{}, u, s, p, range), 1.0 / p);
  }
  if (!(den > 0.0)) throw std::domain_error("embedding_ratio: zero denominator");
  return num / den;
}

double holder_chain_constant(const LatticeDomain& lattice, const PairWeights& weights, double s,
                             double p, double s2, double r) {
  if (!(r >= 1.0 && r < p)) throw std::invalid_argument("holder_chain_constant needs 1 <= r < p");
  if (!(s2 > 0.0)) throw std::invalid_argument("holder_chain_constant needs s2 > 0");
  const double d = static_cast<double>(lattice.dim());
  const double weight_exp = -r / (p - r);
  const double dist_exp = -d + r * p * (s - s2) / (p - r);
  const auto ids = summation_ids(lattice, SumRange::Q);
  const std::size_t n = ids.size();
  const double total = blocked_sum(n, [&](std::size_t a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const Site& za = lattice.site(ids[a]);
      const Site& zb = lattice.site(ids[b]);
      acc += std::pow(weights(za, zb), weight_exp) * std::pow(pair_distance(za, zb, lattice.eps()), dist_exp);
    }
    return acc;
  });
  return std::pow(std::pow(lattice.eps(), 2 * lattice.dim()) * total, (p - r) / (p * r));
}

TailBound truncation_tail_bound(const PairWeights& weights, const Box& support, int dim, double eps,
                                double p, double s, double R, int levels, double v_sup) {
  if (support.dim != dim) throw std::invalid_argument("support box dimension mismatch");
  if (!(eps > 0.0) || !(R > 0.0) || levels < 1) {
    throw std::invalid_argument("truncation_tail_bound needs eps > 0, R > 0, levels >= 1");
  }
  const double tol = 1e-9 * eps;
  std::vector<Site> xs;
  std::array<std::int64_t, kMaxDim> lo{};
  std::array<std::int64_t, kMaxDim> hi{};
  for (int i = 0; i < dim; ++i) {
    lo[i] = static_cast<std::int64_t>(std::floor(support.lo[i] / eps)) - 1;
    hi[i] = static_cast<std::int64_t>(std::ceil(support.hi[i] / eps)) + 1;
  }
  for (auto a = lo[0]; a <= hi[0]; ++a) {
    for (auto b = dim == 2 ? lo[1] : 0; b <= (dim == 2 ? hi[1] : 0); ++b) {
      const Point x{eps * static_cast<double>(a), eps * static_cast<double>(b)};
      if (support.contains_open(x, tol)) xs.push_back({a, b});
    }
  }

  const double omega = dim == 1 ? 2.0 : std::numbers::pi;
  const double vol = support.volume();
  TailBound out;
  for (int k = 0; k < levels; ++k) {
    const double rho = std::ldexp(R, k + 1);
    const auto m = static_cast<std::int64_t>(std::floor(rho / eps + 1e-9));
    const double rho_int2 = (rho / eps) * (rho / eps) * (1.0 + 1e-12);
    const double total = blocked_sum(xs.size(), [&](std::size_t i) {
      double acc = 0.0;
      const Site& x = xs[i];
      for (std::int64_t a = -m; a <= m; ++a) {
        const std::int64_t bm = dim == 2 ? m : 0;
        for (std::int64_t b = -bm; b <= bm; ++b) {
          const auto n2 = static_cast<double>(a * a + b * b);
          if (n2 == 0.0 || n2 > rho_int2) continue;
          const Site y{x[0] + a, x[1] + b};
          acc += weights(x, y) + weights(y, x);
        }
      }
      return acc;
    });
    const double density = std::pow(eps, 2 * dim) * total / (vol * omega * std::pow(rho, dim));
    out.density = std::max(out.density, density);
  }
  const double ps = p * s;
  out.bound = v_sup * out.density * vol * omega * std::pow(2.0, dim) * std::pow(R, -ps) /
              (1.0 - std::pow(2.0, -ps));
  return out;
}

}  // namespace fraclat
