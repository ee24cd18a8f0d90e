#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fraclat/lattice.hpp"

namespace fraclat {

/// Real values on the sites of a lattice, indexed by site id.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(LatticeDomain lattice);  // zeros
  /// Throws std::invalid_argument on length mismatch or non-finite entries.
  GridFunction(LatticeDomain lattice, std::vector<double> values);

  static GridFunction constant(const LatticeDomain& lattice, double v);
  static GridFunction from_function(const LatticeDomain& lattice,
                                    const std::function<double(const Point&)>& f);

  [[nodiscard]] const LatticeDomain& lattice() const { return lattice_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::vector<double>& data() { return values_; }

  double& operator[](std::size_t id) { return values_[id]; }
  double operator[](std::size_t id) const { return values_[id]; }

  [[nodiscard]] double sup_norm() const;

 private:
  LatticeDomain lattice_;
  std::vector<double> values_;
};

}  // namespace fraclat
