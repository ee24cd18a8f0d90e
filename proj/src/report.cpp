#include "fraclat/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fraclat/errors.hpp"
#include "json.hpp"

namespace fraclat {
namespace {

using nlohmann::json;

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quote in CSV line");
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("bad seed '" + s + "'");
  return v;
}

json row_json(const std::string& study, const ReportRow& row) {
  json j;
  j["study"] = study;
  j["eps"] = row.eps ? json(*row.eps) : json(nullptr);
  j["seed"] = row.seed ? json(*row.seed) : json(nullptr);
  j["metric"] = row.metric;
  j["value"] = row.value;
  j["aux"] = row.aux;
  return j;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void StudyReport::add(std::optional<double> eps, std::optional<std::uint64_t> seed, std::string metric, double value,
                      std::string aux) {
  rows.push_back({eps, seed, std::move(metric), value, std::move(aux)});
}

std::vector<ReportRow> StudyReport::select(const std::string& metric, std::optional<double> eps,
                                           std::optional<std::uint64_t> seed) const {
  std::vector<ReportRow> out;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    if (eps && r.eps != eps) continue;
    if (seed && r.seed != seed) continue;
    out.push_back(r);
  }
  return out;
}

double StudyReport::value(const std::string& metric, std::optional<double> eps,
                          std::optional<std::uint64_t> seed) const {
  const auto rs = select(metric, eps, seed);
  if (rs.size() != 1) {
    throw std::out_of_range("expected one row for metric '" + metric + "', found " + std::to_string(rs.size()));
  }
  return rs.front().value;
}

void StudyReport::check_finite() const {
  for (const auto& r : rows) {
    if (!std::isfinite(r.value)) {
      throw NumericalError("non-finite value for metric '" + r.metric + "'" +
                           (r.eps ? " at eps " + format_double(*r.eps) : std::string()) +
                           (r.seed ? " seed " + std::to_string(*r.seed) : std::string()));
    }
  }
}

std::string to_csv(const StudyReport& r) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& row : r.rows) {
    out += csv_field(r.study) + ",";
    out += (row.eps ? format_double(*row.eps) : "") + ",";
    out += (row.seed ? std::to_string(*row.seed) : "") + ",";
    out += csv_field(row.metric) + ",";
    out += format_double(row.value) + ",";
    out += csv_field(row.aux) + "\n";
  }
  return out;
}

std::string to_jsonl(const StudyReport& r) {
  std::string out;
  for (const auto& row : r.rows) out += row_json(r.study, row).dump() + "\n";
  return out;
}

StudyReport from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("missing CSV header");
  StudyReport r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 6) throw std::invalid_argument("CSV row needs 6 fields: " + line);
    r.study = f[0];
    ReportRow row;
    if (!f[1].empty()) row.eps = to_double(f[1]);
    if (!f[2].empty()) row.seed = to_u64(f[2]);
    row.metric = f[3];
    row.value = to_double(f[4]);
    row.aux = f[5];
    r.rows.push_back(std::move(row));
  }
  return r;
}

StudyReport from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  StudyReport r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    r.study = j.at("study").get<std::string>();
    ReportRow row;
    if (!j.at("eps").is_null()) row.eps = j.at("eps").get<double>();
    if (!j.at("seed").is_null()) row.seed = j.at("seed").get<std::uint64_t>();
    row.metric = j.at("metric").get<std::string>();
    row.value = j.at("value").get<double>();
    row.aux = j.at("aux").get<std::string>();
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string meta_to_json(const StudyReport& r) {
  json j;
  j["study"] = r.study;
  j["version"] = r.meta.version;
  j["config"] = r.meta.config;
  j["wall_time_s"] = r.meta.wall_time_s;
  j["threads"] = r.meta.threads;
  j["rows"] = r.rows.size();
  return j.dump(2) + "\n";
}

ReportMeta meta_from_json(const std::string& text) {
  const json j = json::parse(text);
  ReportMeta m;
  m.version = j.at("version").get<std::string>();
  m.config = j.at("config").get<std::string>();
  m.wall_time_s = j.at("wall_time_s").get<double>();
  m.threads = j.at("threads").get<int>();
  return m;
}

}  // namespace fraclat
