#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace fraclat {

inline constexpr int kMaxDim = 2;

/// Integer lattice coordinates z; the physical position is eps * z. Unused
/// trailing coordinates are zero (d = 1 uses only z[0]).
using Site = std::array<std::int64_t, kMaxDim>;
using Point = std::array<double, kMaxDim>;

/// Axis-aligned box. Whether it is read as open or closed depends on context:
/// domains are open, halos are closed.
struct Box {
  int dim = 1;
  Point lo{};
  Point hi{};

  [[nodiscard]] double volume() const;
  [[nodiscard]] double perimeter() const;  // boundary measure (2 in d = 1)
  [[nodiscard]] bool contains_closed(const Point& x, double tol = 0.0) const;
  [[nodiscard]] bool contains_open(const Point& x, double tol = 0.0) const;
  [[nodiscard]] Box expanded(double margin) const;

  friend bool operator==(const Box&, const Box&) = default;
};

Box make_box(int dim, std::span<const double> lo, std::span<const double> hi);
Box interval(double lo, double hi);
Box square(double lo, double hi);

enum class SiteRegion : std::uint8_t { Interior, Boundary, Exterior };

inline constexpr std::size_t kDefaultMaxSites = std::size_t{1} << 20;

/// eps-lattice restricted to a halo box, split into Q^eps \ dQ^eps (interior),
/// the Dirichlet layer dQ^eps (boundary) and the rest of the halo (exterior).
///
/// A site z is a boundary site iff the closed cube eps*z + [-eps, eps]^d meets
/// the boundary of the domain. Boundary sites may lie outside the open domain;
/// `domain_ids()` lists exactly the sites with eps*z inside the open domain.
///
/// Sites are ordered lexicographically by integer coordinates. Copies share the
/// immutable site tables.
class LatticeDomain {
 public:
  [[nodiscard]] int dim() const { return data_->dim; }
  [[nodiscard]] double eps() const { return data_->eps; }
  [[nodiscard]] const Box& domain() const { return data_->domain; }
  [[nodiscard]] const Box& halo() const { return data_->halo; }
  [[nodiscard]] std::size_t size() const { return data_->sites.size(); }

  [[nodiscard]] const Site& site(std::size_t id) const { return data_->sites[id]; }
  [[nodiscard]] Point point(std::size_t id) const;
  [[nodiscard]] std::span<const Site> sites() const { return data_->sites; }

  /// Dense id of a site, or nothing when it lies outside the halo.
  [[nodiscard]] std::optional<std::size_t> find(const Site& z) const;

  [[nodiscard]] SiteRegion region(std::size_t id) const { return data_->region[id]; }
  [[nodiscard]] bool in_domain(std::size_t id) const { return data_->in_domain[id] != 0; }

  [[nodiscard]] std::span<const std::size_t> interior_ids() const { return data_->interior; }
  [[nodiscard]] std::span<const std::size_t> boundary_ids() const { return data_->boundary; }
  [[nodiscard]] std::span<const std::size_t> exterior_ids() const { return data_->exterior; }
  /// Q^eps: sites whose position lies in the open domain.
  [[nodiscard]] std::span<const std::size_t> domain_ids() const { return data_->domain_sites; }

  /// Inclusive integer coordinate range along an axis.
  [[nodiscard]] std::int64_t axis_min(int axis) const { return data_->zmin[axis]; }
  [[nodiscard]] std::int64_t axis_max(int axis) const { return data_->zmax[axis]; }

  /// |Q|_eps = eps^d * #(Q cap Z_eps^d).
  [[nodiscard]] double discrete_volume() const;
  [[nodiscard]] double cell_volume() const;

  friend LatticeDomain build_lattice(int dim, double eps, const Box& domain, const Box& halo,
                                     std::size_t max_sites);

 private:
  struct Data {
    int dim = 1;
    double eps = 1.0;
    Box domain;
    Box halo;
    std::array<std::int64_t, kMaxDim> zmin{};
    std::array<std::int64_t, kMaxDim> zmax{};
    std::vector<Site> sites;
    std::vector<SiteRegion> region;
    std::vector<std::uint8_t> in_domain;
    std::vector<std::size_t> interior, boundary, exterior, domain_sites;
  };
  std::shared_ptr<const Data> data_;
};

/// Throws std::invalid_argument for eps <= 0, unsupported dimension or a halo
/// that does not contain the closed domain, and CapacityError when the site
/// count would exceed max_sites.
LatticeDomain build_lattice(int dim, double eps, const Box& domain, const Box& halo,
                            std::size_t max_sites = kDefaultMaxSites);

/// eps * |z1 - z2|_2, with the squared distance formed in integer arithmetic.
double pair_distance(const Site& z1, const Site& z2, double eps);

/// Squared integer distance |z1 - z2|^2.
std::int64_t squared_distance(const Site& z1, const Site& z2);

}  // namespace fraclat
