#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fraclat {

/// One long-format result. Empty eps/seed mean the metric is not tied to a
/// single spacing or seed.
struct ReportRow {
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
  std::string metric;
  double value = 0.0;
  std::string aux;  // semicolon-separated key=value annotations

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportMeta {
  std::string version;
  std::string config;  // serialized StudyConfig
  double wall_time_s = 0.0;
  int threads = 1;

  friend bool operator==(const ReportMeta&, const ReportMeta&) = default;
};

struct StudyReport {
  std::string study;
  std::vector<ReportRow> rows;
  ReportMeta meta;

  void add(std::optional<double> eps, std::optional<std::uint64_t> seed, std::string metric, double value,
           std::string aux = {});
  /// Rows matching the metric (and eps/seed when given), in insertion order.
  [[nodiscard]] std::vector<ReportRow> select(const std::string& metric, std::optional<double> eps = std::nullopt,
                                              std::optional<std::uint64_t> seed = std::nullopt) const;
  /// The single value for (metric, eps, seed); throws std::out_of_range when absent.
  [[nodiscard]] double value(const std::string& metric, std::optional<double> eps = std::nullopt,
                             std::optional<std::uint64_t> seed = std::nullopt) const;
  /// Throws NumericalError naming the first non-finite row.
  void check_finite() const;
};

inline constexpr const char* kCsvHeader = "study,eps,seed,metric,value,aux";

std::string to_csv(const StudyReport& r);
std::string to_jsonl(const StudyReport& r);
/// Inverse of to_csv (metadata is not part of the CSV). Throws std::invalid_argument.
StudyReport from_csv(const std::string& text);
StudyReport from_jsonl(const std::string& text);

std::string meta_to_json(const StudyReport& r);
ReportMeta meta_from_json(const std::string& text);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace fraclat
