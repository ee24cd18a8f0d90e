#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fraclat/energy.hpp"
#include "fraclat/lattice.hpp"
#include "fraclat/minimize.hpp"
#include "fraclat/weights.hpp"

namespace fraclat {

enum class StudyKind { Solve, Homogenize, GammaLimit, Spectral, Embeddings, Ergodic, Vanish };

std::string to_string(StudyKind k);
/// Accepts both gamma_limit and gamma-limit. Throws ConfigError.
StudyKind parse_study(const std::string& s);

/// Flat weight-law descriptor; `build()` turns it into a WeightDistribution.
struct DistConfig {
  std::string kind = "constant";  // constant|lognormal|unit_power_law|shifted_pareto|decaying_product
  bool normalized = true;
  double value = 1.0;
  double sigma = 1.0;
  double a = 2.0;
  double alpha = 1.0;  // decaying_product only
  std::string base_kind = "lognormal";
  double base_value = 1.0;
  double base_sigma = 1.0;
  double base_a = 2.0;

  [[nodiscard]] WeightDistribution build() const;
  friend bool operator==(const DistConfig&, const DistConfig&) = default;
};

struct StudyConfig {
  StudyKind study = StudyKind::Solve;
  int d = 1;
  double s = 0.5;
  double p = 2.0;
  /// Lower moment exponent; empty means the distribution's own value.
  std::optional<double> q_max;
  std::vector<double> eps_list{0.0625};
  Box domain = interval(-1.0, 1.0);
  std::optional<Box> halo;  // empty: the closed domain
  DistConfig dist;
  std::vector<std::uint64_t> seeds{1};

  std::string f_kind = "constant";  // zero|constant|tent|sin
  double f_value = 1.0;
  std::string V_kind = "power";  // power|smoothed
  double V_delta = 1e-3;
  std::string G_kind = "none";  // none|power
  double G_alpha = 1.0;
  double G_k = 2.0;
  Constraint constraint = Constraint::DirichletZero;
  Flavor flavor = Flavor::GlobalHaloTruncated;

  double solver_tol = 1e-10;
  int solver_max_iter = 10000;
  bool solver_jacobi = false;
  double minimize_grad_tol = 1e-9;
  int minimize_max_iter = 20000;
  Method minimize_method = Method::LBFGS;

  int spectral_k = 5;

  std::string gamma_function = "tent";  // tent|zero
  double gamma_height = 1.0;
  double gamma_radius = 1.0;
  int gamma_quad_n = 128;
  double gamma_xi = 1.0 / 4096;

  std::vector<double> embeddings_q_list;  // empty: {p, (p + p*)/2}
  bool embeddings_weighted = false;
  std::vector<std::string> embeddings_functions{"tent", "bump", "comb"};

  std::vector<int> ergodic_radii{4, 8, 16, 32};
  int ergodic_origins = 20;
  double ergodic_q = 1.0;
  double ergodic_eps = 1.0 / 256;
  std::vector<double> ergodic_xi_list{0.125, 0.25, 0.5, 1.0};
  std::vector<double> ergodic_alpha_list{0.5, 1.0};

  std::vector<int> divergence_radii{10, 100, 1000};
  int divergence_origins = 1;

  std::string out;
  std::string format = "csv";

  [[nodiscard]] Box halo_box() const { return halo ? *halo : domain; }
  [[nodiscard]] double lower_moment() const { return q_max ? *q_max : dist.build().lower_moment_exponent(); }
  [[nodiscard]] Potential potential() const;
  [[nodiscard]] ZeroOrderTerm zero_order() const;
  /// The forcing sampled at the lattice sites, or nothing for f_kind = zero.
  [[nodiscard]] std::optional<GridFunction> forcing(const LatticeDomain& lattice) const;

  friend bool operator==(const StudyConfig&, const StudyConfig&) = default;
};

/// Parses `key=value` lines; '#' starts a comment. Unknown keys, duplicate keys
/// and malformed values throw ConfigError naming the line. The result is
/// validated with `validate`. A given `study` fills in a missing study key and
/// must agree with a present one.
StudyConfig parse_config(const std::string& text, std::optional<StudyKind> study = std::nullopt);
StudyConfig load_config(const std::string& path, std::optional<StudyKind> study = std::nullopt);
/// Every key in a fixed order, doubles in shortest round-trip form.
std::string serialize(const StudyConfig& cfg);

/// Checks the invariants: strictly decreasing eps_list, nonempty seeds, matching
/// box dimensions, dyadic eps ratios for homogenize, and the lower-moment
/// assumption for weighted homogenize/spectral/embeddings. Throws ConfigError.
void validate(const StudyConfig& cfg);

}  // namespace fraclat
