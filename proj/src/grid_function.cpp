#include "fraclat/grid_function.hpp"

#include <cmath>
#include <stdexcept>

namespace fraclat {

GridFunction::GridFunction(LatticeDomain lattice)
    : lattice_(std::move(lattice)), values_(lattice_.size(), 0.0) {}

GridFunction::GridFunction(LatticeDomain lattice, std::vector<double> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (values_.size() != lattice_.size()) {
    throw std::invalid_argument("GridFunction length does not match the lattice site count");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("GridFunction entries must be finite");
  }
}

GridFunction GridFunction::constant(const LatticeDomain& lattice, double v) {
  return GridFunction(lattice, std::vector<double>(lattice.size(), v));
}

GridFunction GridFunction::from_function(const LatticeDomain& lattice,
                                         const std::function<double(const Point&)>& f) {
  std::vector<double> values(lattice.size());
  for (std::size_t id = 0; id < values.size(); ++id) values[id] = f(lattice.point(id));
  return GridFunction(lattice, std::move(values));
}

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace fraclat
