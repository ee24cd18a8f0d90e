#include "fraclat/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fraclat/errors.hpp"

namespace fraclat {
namespace {

// Relative tolerance (in units of eps) used when comparing eps*z to box faces,
// so that e.g. 0.1 * 10 counts as lying on a face at 1.0.
constexpr double kFaceTol = 1e-9;

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("lattice dimension must be 1 or 2, got " + std::to_string(dim));
  }
}

}  // namespace

double Box::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
  return v;
}

double Box::perimeter() const {
  if (dim == 1) return 2.0;
  return 2.0 * ((hi[0] - lo[0]) + (hi[1] - lo[1]));
}

bool Box::contains_closed(const Point& x, double tol) const {
  for (int i = 0; i < dim; ++i) {
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  }
  return true;
}

bool Box::contains_open(const Point& x, double tol) const {
  for (int i = 0; i < dim; ++i) {
    if (x[i] <= lo[i] + tol || x[i] >= hi[i] - tol) return false;
  }
  return true;
}

Box Box::expanded(double margin) const {
  Box b = *this;
  for (int i = 0; i < dim; ++i) {
    b.lo[i] -= margin;
    b.hi[i] += margin;
  }
  return b;
}

Box make_box(int dim, std::span<const double> lo, std::span<const double> hi) {
  check_dim(dim);
  if (lo.size() != static_cast<std::size_t>(dim) || hi.size() != static_cast<std::size_t>(dim)) {
    throw std::invalid_argument("box corner arity does not match dimension");
  }
  Box b;
  b.dim = dim;
  for (int i = 0; i < dim; ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("box must have lo < hi on every axis");
    b.lo[i] = lo[i];
    b.hi[i] = hi[i];
  }
  return b;
}

Box interval(double lo, double hi) {
  const double l[] = {lo};
  const double h[] = {hi};
  return make_box(1, l, h);
}

Box square(double lo, double hi) {
  const double l[] = {lo, lo};
  const double h[] = {hi, hi};
  return make_box(2, l, h);
}

Point LatticeDomain::point(std::size_t id) const {
  const Site& z = data_->sites[id];
  Point x{};
  for (int i = 0; i < data_->dim; ++i) x[i] = data_->eps * static_cast<double>(z[i]);
  return x;
}

std::optional<std::size_t> LatticeDomain::find(const Site& z) const {
  std::size_t id = 0;
  for (int i = 0; i < data_->dim; ++i) {
    if (z[i] < data_->zmin[i] || z[i] > data_->zmax[i]) return std::nullopt;
    const auto extent = static_cast<std::size_t>(data_->zmax[i] - data_->zmin[i] + 1);
    id = id * extent + static_cast<std::size_t>(z[i] - data_->zmin[i]);
  }
  for (int i = data_->dim; i < kMaxDim; ++i) {
    if (z[i] != 0) return std::nullopt;
  }
  return id;
}

double LatticeDomain::cell_volume() const { return std::pow(data_->eps, data_->dim); }

double LatticeDomain::discrete_volume() const {
  return cell_volume() * static_cast<double>(data_->domain_sites.size());
}

LatticeDomain build_lattice(int dim, double eps, const Box& domain, const Box& halo,
                            std::size_t max_sites) {
  check_dim(dim);
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("lattice spacing eps must be positive and finite");
  }
  if (domain.dim != dim || halo.dim != dim) {
    throw std::invalid_argument("domain and halo boxes must match the lattice dimension");
  }
  const double tol = kFaceTol * eps;
  for (int i = 0; i < dim; ++i) {
    if (halo.lo[i] > domain.lo[i] + tol || halo.hi[i] < domain.hi[i] - tol) {
      throw std::invalid_argument("halo box must contain the closed domain");
    }
  }

  auto data = std::make_shared<LatticeDomain::Data>();
  data->dim = dim;
  data->eps = eps;
  data->domain = domain;
  data->halo = halo;

  std::size_t count = 1;
  for (int i = 0; i < dim; ++i) {
    data->zmin[i] = static_cast<std::int64_t>(std::ceil(halo.lo[i] / eps - kFaceTol));
    data->zmax[i] = static_cast<std::int64_t>(std::floor(halo.hi[i] / eps + kFaceTol));
    const auto extent = static_cast<double>(data->zmax[i] - data->zmin[i] + 1);
    if (extent < 1.0) throw std::invalid_argument("halo box contains no lattice sites");
    if (static_cast<double>(count) * extent > static_cast<double>(max_sites)) {
      throw CapacityError("lattice would hold more than " + std::to_string(max_sites) + " sites");
    }
    count *= static_cast<std::size_t>(extent);
  }

  data->sites.reserve(count);
  if (dim == 1) {
    for (auto z0 = data->zmin[0]; z0 <= data->zmax[0]; ++z0) data->sites.push_back({z0, 0});
  } else {
    for (auto z0 = data->zmin[0]; z0 <= data->zmax[0]; ++z0) {
      for (auto z1 = data->zmin[1]; z1 <= data->zmax[1]; ++z1) data->sites.push_back({z0, z1});
    }
  }

  data->region.resize(count);
  data->in_domain.resize(count);
  for (std::size_t id = 0; id < count; ++id) {
    Point x{};
    for (int i = 0; i < dim; ++i) x[i] = eps * static_cast<double>(data->sites[id][i]);

    // The closed cube x + [-eps, eps]^d is connected, so it meets the domain
    // boundary iff it meets the closed domain and is not inside the open one.
    bool meets_closure = true;
    bool leaves_open = false;
    for (int i = 0; i < dim; ++i) {
      if (x[i] - eps > domain.hi[i] + tol || x[i] + eps < domain.lo[i] - tol) meets_closure = false;
      if (x[i] - eps <= domain.lo[i] + tol || x[i] + eps >= domain.hi[i] - tol) leaves_open = true;
    }
    const bool inside = domain.contains_open(x, tol);
    data->in_domain[id] = inside ? 1 : 0;
    if (inside) data->domain_sites.push_back(id);

    if (meets_closure && leaves_open) {
      data->region[id] = SiteRegion::Boundary;
      data->boundary.push_back(id);
    } else if (inside) {
      data->region[id] = SiteRegion::Interior;
      data->interior.push_back(id);
    } else {
      data->region[id] = SiteRegion::Exterior;
      data->exterior.push_back(id);
    }
  }

  LatticeDomain lattice;
  lattice.data_ = std::move(data);
  return lattice;
}

std::int64_t squared_distance(const Site& z1, const Site& z2) {
  std::int64_t acc = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    const std::int64_t d = z1[i] - z2[i];
    acc += d * d;
  }
  return acc;
}

double pair_distance(const Site& z1, const Site& z2, double eps) {
  return eps * std::sqrt(static_cast<double>(squared_distance(z1, z2)));
}

}  // namespace fraclat
