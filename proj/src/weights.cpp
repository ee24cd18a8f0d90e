#include "fraclat/weights.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fraclat/errors.hpp"
#include "fraclat/parallel.hpp"

namespace fraclat {

namespace dist {
bool operator==(const DecayingProduct& a, const DecayingProduct& b) {
  if (a.alpha != b.alpha) return false;
  if (!a.base || !b.base) return a.base == b.base;
  return *a.base == *b.base;
}
}  // namespace dist

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t word) { return mix64(h ^ mix64(word)); }

constexpr double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11U) + 0.5) * 0x1.0p-53;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void pair_uniforms(std::uint64_t seed, const Site& z1, const Site& z2, double& u1, double& u2) {
  const bool first_smaller = z1 < z2;
  const Site& lo = first_smaller ? z1 : z2;
  const Site& hi = first_smaller ? z2 : z1;
  std::uint64_t h = mix64(seed);
  for (int i = 0; i < kMaxDim; ++i) h = absorb(h, static_cast<std::uint64_t>(lo[i]));
  for (int i = 0; i < kMaxDim; ++i) h = absorb(h, static_cast<std::uint64_t>(hi[i] - lo[i]));
  u1 = to_unit_open(absorb(h, 1));
  u2 = to_unit_open(absorb(h, 2));
}

WeightDistribution::WeightDistribution(Kind kind, bool normalized)
    : kind_(std::move(kind)), normalized_(normalized) {
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, dist::Constant>) {
          require_positive(k.value, "constant weight");
        } else if constexpr (std::is_same_v<T, dist::LogNormal>) {
          require_positive(k.sigma, "lognormal sigma");
        } else if constexpr (std::is_same_v<T, dist::UnitPowerLaw>) {
          require_positive(k.a, "power-law exponent a");
        } else if constexpr (std::is_same_v<T, dist::ShiftedPareto>) {
          require_positive(k.a, "Pareto exponent a");
          if (k.a <= 1.0) throw std::invalid_argument("ShiftedPareto requires a > 1 for a finite mean");
        } else {
          if (!k.base) throw std::invalid_argument("DecayingProduct needs a base distribution");
          if (std::holds_alternative<dist::DecayingProduct>(k.base->kind())) {
            throw std::invalid_argument("DecayingProduct base must be stationary");
          }
          require_positive(k.alpha, "decay exponent alpha");
        }
      },
      kind_);
}

WeightDistribution WeightDistribution::constant(double v) { return WeightDistribution(dist::Constant{v}); }

WeightDistribution WeightDistribution::lognormal(double sigma, bool normalized) {
  return WeightDistribution(dist::LogNormal{sigma}, normalized);
}

WeightDistribution WeightDistribution::unit_power_law(double a, bool normalized) {
  return WeightDistribution(dist::UnitPowerLaw{a}, normalized);
}

WeightDistribution WeightDistribution::shifted_pareto(double a, bool normalized) {
  return WeightDistribution(dist::ShiftedPareto{a}, normalized);
}

WeightDistribution WeightDistribution::decaying_product(WeightDistribution base, double alpha) {
  return WeightDistribution(
      dist::DecayingProduct{std::make_shared<const WeightDistribution>(std::move(base)), alpha});
}

std::string WeightDistribution::name() const {
  return std::visit(
      [this](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        const std::string tag = normalized_ ? "" : ",raw";
        if constexpr (std::is_same_v<T, dist::Constant>) {
          return "constant(" + format_number(k.value) + ")";
        } else if constexpr (std::is_same_v<T, dist::LogNormal>) {
          return "lognormal(" + format_number(k.sigma) + tag + ")";
        } else if constexpr (std::is_same_v<T, dist::UnitPowerLaw>) {
          return "unit_power_law(" + format_number(k.a) + tag + ")";
        } else if constexpr (std::is_same_v<T, dist::ShiftedPareto>) {
          return "shifted_pareto(" + format_number(k.a) + tag + ")";
        } else {
          return "decaying_product(" + k.base->name() + "," + format_number(k.alpha) + ")";
        }
      },
      kind_);
}

double WeightDistribution::scale() const {
  if (!normalized_) return 1.0;
  return std::visit(
      [](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, dist::LogNormal>) {
          return std::exp(-0.5 * k.sigma * k.sigma);
        } else if constexpr (std::is_same_v<T, dist::UnitPowerLaw>) {
          return (k.a + 1.0) / k.a;
        } else if constexpr (std::is_same_v<T, dist::ShiftedPareto>) {
          return 1.0 / (1.0 + k.a / (k.a - 1.0));
        } else {
          return 1.0;
        }
      },
      kind_);
}

double WeightDistribution::transform(double u1, double u2, double int_distance) const {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, dist::Constant>) {
          return k.value;
        } else if constexpr (std::is_same_v<T, dist::LogNormal>) {
          const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
          return scale() * std::exp(k.sigma * z);
        } else if constexpr (std::is_same_v<T, dist::UnitPowerLaw>) {
          return scale() * std::pow(u1, 1.0 / k.a);
        } else if constexpr (std::is_same_v<T, dist::ShiftedPareto>) {
          return scale() * (1.0 + std::pow(u1, -1.0 / k.a));
        } else {
          return k.base->transform(u1, u2, int_distance) * std::pow(1.0 + int_distance, -k.alpha);
        }
      },
      kind_);
}

double WeightDistribution::moment(double q) const {
  const double sq = std::pow(scale(), q);
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, dist::Constant>) {
          return std::pow(k.value, q);
        } else if constexpr (std::is_same_v<T, dist::LogNormal>) {
          return sq * std::exp(0.5 * q * q * k.sigma * k.sigma);
        } else if constexpr (std::is_same_v<T, dist::UnitPowerLaw>) {
          if (q <= -k.a) return kInfinity;
          return sq * k.a / (k.a + q);
        } else if constexpr (std::is_same_v<T, dist::ShiftedPareto>) {
          if (q >= k.a) return kInfinity;
          if (q == 1.0) return sq * (1.0 + k.a / (k.a - 1.0));
          // E(1 + U^{-1/a})^q over U in (0,1); integrable endpoint singularity.
          boost::math::quadrature::tanh_sinh<double> integrator;
          const double a = k.a;
          const double raw =
              integrator.integrate([a, q](double u) { return std::pow(1.0 + std::pow(u, -1.0 / a), q); },
                                   0.0, 1.0);
          return sq * raw;
        } else {
          return k.base->moment(q);
        }
      },
      kind_);
}

double WeightDistribution::lower_moment_exponent() const {
  return std::visit(
      [](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, dist::UnitPowerLaw>) {
          return std::nextafter(k.a, 0.0);
        } else if constexpr (std::is_same_v<T, dist::DecayingProduct>) {
          return 0.0;
        } else {
          return kInfinity;
        }
      },
      kind_);
}

double WeightField::operator()(const Site& z1, const Site& z2) const {
  if (z1 == z2) throw std::invalid_argument("weight(): diagonal pair z1 == z2 is excluded");
  double u1 = 0.0;
  double u2 = 0.0;
  pair_uniforms(seed_, z1, z2, u1, u2);
  const bool decays = std::holds_alternative<dist::DecayingProduct>(dist_.kind());
  const double r = decays ? std::sqrt(static_cast<double>(squared_distance(z1, z2))) : 0.0;
  return dist_.transform(u1, u2, r);
}

MomentEstimate empirical_moment(const WeightField& field, int dim, double q, int box_radius,
                                int origin_samples, const Site& shift) {
  if (box_radius < 1 || origin_samples < 1) {
    throw std::invalid_argument("empirical_moment needs box_radius >= 1 and origin_samples >= 1");
  }
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension must be 1 or 2");

  const std::int64_t radius = box_radius;
  std::vector<Site> box;
  for (std::int64_t a = -radius; a <= radius; ++a) {
    if (dim == 1) {
      box.push_back({a, 0});
    } else {
      for (std::int64_t b = -radius; b <= radius; ++b) box.push_back({a, b});
    }
  }

  // Welford accumulation in a fixed order.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (int m = 0; m < origin_samples; ++m) {
    Site origin = shift;
    origin[0] += static_cast<std::int64_t>(m) * (2 * radius + 2);
    for (std::size_t i = 0; i < box.size(); ++i) {
      for (std::size_t j = i + 1; j < box.size(); ++j) {
        Site z1 = box[i];
        Site z2 = box[j];
        for (int k = 0; k < kMaxDim; ++k) {
          z1[k] += origin[k];
          z2[k] += origin[k];
        }
        const double v = std::pow(field(z1, z2), q);
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "non-finite c^q at pair (" << z1[0] << "," << z1[1] << ")-(" << z2[0] << "," << z2[1]
             << ")";
          throw NumericalError(os.str());
        }
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
      }
    }
  }
  MomentEstimate est;
  est.mean = mean;
  est.count = n;
  est.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return est;
}

AssumptionReport check_assumption(double p, double s, int d, double q_max) {
  if (!(p > 1.0) || !(s > 0.0 && s < 1.0) || d < 1 || std::isnan(q_max)) {
    throw std::invalid_argument("check_assumption needs p > 1, s in (0,1), d >= 1");
  }
  AssumptionReport report;
  const double threshold = static_cast<double>(d) / (p * s);
  if (!(q_max > threshold)) return report;

  // r/(p-r) is increasing in r, so both inequalities are bounds on r.
  const double r_lo = std::max(1.0, p * threshold / (1.0 + threshold));
  const double r_hi = std::isinf(q_max) ? p : p * q_max / (1.0 + q_max);
  if (!(r_lo < r_hi)) return report;

  report.satisfied = true;
  report.witness_r = std::min(r_hi, 0.5 * (r_lo + r_hi));
  return report;
}

double critical_exponent(double p, double s, int d, double q_max) {
  if (!check_assumption(p, s, d, q_max).satisfied) {
    throw std::invalid_argument("critical_exponent: lower-moment assumption not satisfied");
  }
  const double dd = static_cast<double>(d);
  if (std::isinf(q_max)) {
    const double denom = dd - s * p;
    if (!(denom > 0.0)) throw std::domain_error("critical exponent is infinite (s p >= d)");
    return dd * p / denom;
  }
  const double denom = 2.0 * dd + dd * q_max - s * p * q_max;
  if (!(denom > 0.0)) throw std::domain_error("critical exponent formula leaves admissible range");
  return dd * p * q_max / denom;
}

std::vector<double> divergence_probe(const WeightField& field, int dim, double p, double s,
                                     std::span<const int> radii, int origins) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension must be 1 or 2");
  if (origins < 1) throw std::invalid_argument("divergence_probe needs at least one origin");
  (void)p;
  (void)s;  // omega |z|^{ps} = c |z|^{-d}: the ps factors cancel.
  std::int64_t r_max = 0;
  for (int r : radii) {
    if (r < 1) throw std::invalid_argument("divergence_probe radii must be >= 1");
    r_max = std::max<std::int64_t>(r_max, r);
  }

  std::vector<double> out;
  out.reserve(radii.size());
  for (int r_int : radii) {
    const std::int64_t r = r_int;
    double total = 0.0;
    for (int m = 0; m < origins; ++m) {
      const Site o{static_cast<std::int64_t>(m) * (2 * r_max + 2), 0};
      double acc = 0.0;
      auto visit = [&](const Site& z) {
        const std::int64_t n2 = z[0] * z[0] + z[1] * z[1];
        if (n2 == 0 || n2 > r * r) return;
        const Site y{o[0] + z[0], o[1] + z[1]};
        acc += field(o, y) / std::pow(std::sqrt(static_cast<double>(n2)), dim);
      };
      for (std::int64_t a = -r; a <= r; ++a) {
        if (dim == 1) {
          visit({a, 0});
        } else {
          for (std::int64_t b = -r; b <= r; ++b) visit({a, b});
        }
      }
      total += acc;
    }
    out.push_back(total / static_cast<double>(origins));
  }
  return out;
}

double local_weighted_sum(const PairWeights& weights, const Box& domain, double eps, double xi,
                          double alpha) {
  require_positive(eps, "eps");
  require_positive(xi, "xi");
  const int dim = domain.dim;
  const double tol = 1e-9 * eps;

  std::vector<Site> xs;
  std::array<std::int64_t, kMaxDim> lo{};
  std::array<std::int64_t, kMaxDim> hi{};
  for (int i = 0; i < dim; ++i) {
    lo[i] = static_cast<std::int64_t>(std::floor(domain.lo[i] / eps)) - 1;
    hi[i] = static_cast<std::int64_t>(std::ceil(domain.hi[i] / eps)) + 1;
  }
  auto keep = [&](const Site& z) {
    Point x{};
    for (int i = 0; i < dim; ++i) x[i] = eps * static_cast<double>(z[i]);
    if (domain.contains_open(x, tol)) xs.push_back(z);
  };
  for (auto a = lo[0]; a <= hi[0]; ++a) {
    if (dim == 1) {
      keep({a, 0});
    } else {
      for (auto b = lo[1]; b <= hi[1]; ++b) keep({a, b});
    }
  }

  const auto kmax = static_cast<std::int64_t>(std::ceil(xi / eps));
  std::vector<Site> offsets;
  std::vector<double> offset_factor;
  auto add_offset = [&](const Site& k) {
    const std::int64_t n2 = k[0] * k[0] + k[1] * k[1];
    if (n2 == 0) return;
    const double r = eps * std::sqrt(static_cast<double>(n2));
    if (!(r < xi)) return;
    offsets.push_back(k);
    offset_factor.push_back(std::pow(r, -static_cast<double>(dim) + alpha));
  };
  for (auto a = -kmax; a <= kmax; ++a) {
    if (dim == 1) {
      add_offset({a, 0});
    } else {
      for (auto b = -kmax; b <= kmax; ++b) add_offset({a, b});
    }
  }

  const std::size_t n_blocks = block_count(xs.size());
  std::vector<double> partial(n_blocks, 0.0);
  parallel_for_blocks(n_blocks, [&](std::size_t b) {
    const std::size_t end = std::min(xs.size(), (b + 1) * kReductionBlock);
    double acc = 0.0;
    for (std::size_t i = b * kReductionBlock; i < end; ++i) {
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        const Site y{xs[i][0] + offsets[k][0], xs[i][1] + offsets[k][1]};
        acc += weights(xs[i], y) * offset_factor[k];
      }
    }
    partial[b] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;
  return std::pow(eps, 2 * dim) * total;
}

}  // namespace fraclat
