#include "fraclat/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "fraclat/errors.hpp"
#include "fraclat/parallel.hpp"
#include "fraclat/study.hpp"

namespace fraclat {
namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

std::string summary(const StudyReport& rep, const ReportRow& row) {
  std::string line = rep.study;
  if (row.eps) line += " eps=" + format_double(*row.eps);
  if (row.seed) line += " seed=" + std::to_string(*row.seed);
  line += " " + row.metric + "=" + format_double(row.value);
  if (!row.aux.empty()) line += " [" + row.aux + "]";
  return line;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Random-weight fractional lattice energies: convergence studies", "fraclat"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> threads;
  std::optional<std::string> format;
  const std::vector<std::string> names = {"solve", "homogenize", "gamma-limit", "spectral",
                                          "embeddings", "ergodic", "vanish"};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name, "run the " + name + " study");
    sub->add_option("--config", config_path, "key=value study configuration")->required();
    sub->add_option("--out", out_dir, "output directory for the report and meta.json");
    sub->add_option("--seed-override", seed_override, "replace the configured seeds by this one");
    sub->add_option("--threads", threads, "worker threads (default: FRACLAT_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "jsonl"}));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  const auto chosen = app.get_subcommands().front()->get_name();
  try {
    StudyConfig cfg = load_config(config_path, parse_study(chosen));
    if (seed_override) cfg.seeds = {*seed_override};
    if (format) cfg.format = *format;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (threads) set_thread_count(*threads);
    const StudyReport rep = run_study(cfg);
    const std::string body = cfg.format == "csv" ? to_csv(rep) : to_jsonl(rep);
    if (cfg.out.empty()) {
      out << body;
    } else {
      const std::filesystem::path dir(cfg.out);
      std::filesystem::create_directories(dir);
      write_file(dir / (rep.study + "." + cfg.format), body);
      write_file(dir / "meta.json", meta_to_json(rep));
    }
    for (const auto& row : rep.rows) err << summary(rep, row) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "output error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fraclat
