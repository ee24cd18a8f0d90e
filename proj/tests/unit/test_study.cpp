#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fraclat/cli.hpp"
#include "fraclat/errors.hpp"
#include "fraclat/parallel.hpp"
#include "fraclat/study.hpp"
#include "fraclat/version.hpp"

using namespace fraclat;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kTiny = std::string(FRACLAT_TEST_DIR) + "/configs/tiny_solve.cfg";

/// Defaults for the small one-dimensional configs; "k=v" overrides replace or extend them.
std::string base_config(const std::vector<std::string>& overrides = {}) {
  std::vector<std::pair<std::string, std::string>> kv = {
      {"d", "1"},           {"s", "0.5"},         {"p", "2"},           {"eps_list", "0.25,0.125"},
      {"domain.lo", "-1"},  {"domain.hi", "1"},   {"halo.lo", "-1.5"},  {"halo.hi", "1.5"},
      {"constraint", "dirichlet"}, {"seeds", "1,2"}};
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto key = o.substr(0, eq);
    const auto it = std::find_if(kv.begin(), kv.end(), [&](const auto& e) { return e.first == key; });
    if (it != kv.end()) {
      it->second = o.substr(eq + 1);
    } else {
      kv.emplace_back(key, o.substr(eq + 1));
    }
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const std::vector<std::string> texts = {
      base_config({"study=homogenize", "dist.kind=lognormal", "dist.sigma=0.7"}),
      base_config({"study=embeddings", "dist.kind=unit_power_law", "dist.a=4", "embeddings.weighted=true", "embeddings.q_list=2,2.5", "q_max=inf"}),
      base_config({"study=vanish", "dist.kind=decaying_product", "dist.alpha=3", "dist.base.kind=constant", "flavor=local", "constraint=none", "gamma.xi=0.001", "eps_list=0.1,0.03"}),
      "study=ergodic\nd=2\ndomain.lo=-1,-1\ndomain.hi=1,1\ndist.kind=shifted_pareto\ndist.a=3\n"
      "ergodic.radii=2,4\n# comment\n\n  s = 0.3 \n",
  };
  for (const auto& t : texts) {
    const auto a = parse_config(t);
    const auto b = parse_config(serialize(a));
    EXPECT_EQ(a, b) << t;
    EXPECT_EQ(serialize(a), serialize(b));
  }
  const auto c = parse_config(texts[0]);
  EXPECT_EQ(c.study, StudyKind::Homogenize);
  EXPECT_EQ(c.eps_list, (std::vector<double>{0.25, 0.125}));
  EXPECT_EQ(c.halo_box(), interval(-1.5, 1.5));
  EXPECT_EQ(c.dist.build(), WeightDistribution::lognormal(0.7));
  EXPECT_EQ(parse_config(texts[3]).s, 0.3);
}

TEST(Config, RejectsBadInput) {
  const auto bad = [](const std::string& extra) { return base_config() + extra; };
  EXPECT_THROW(parse_config(bad("colour=blue\n")), ConfigError);
  EXPECT_THROW(parse_config(bad("s=0.4\n")), ConfigError);  // duplicate
  EXPECT_THROW(parse_config("p=two\n"), ConfigError);
  EXPECT_THROW(parse_config("just a line\n"), ConfigError);
  EXPECT_THROW(parse_config("eps_list=0.1,0.2\n"), ConfigError);
  EXPECT_THROW(parse_config("eps_list=0.1,0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("seeds=\n"), ConfigError);
  EXPECT_THROW(parse_config("s=1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("d=2\n"), ConfigError);  // default domain is one-dimensional
  EXPECT_THROW(parse_config("domain.lo=-1\n"), ConfigError);
  EXPECT_THROW(parse_config("dist.kind=gamma\n"), ConfigError);
  EXPECT_THROW(parse_config("dist.kind=lognormal\ndist.sigma=-1\n"), ConfigError);
  EXPECT_THROW(parse_config("format=xml\n"), ConfigError);
  EXPECT_THROW(parse_config("study=homogenize\neps_list=0.25,0.1\n"), ConfigError);  // not dyadic
  // fq just below 0.5 < d/(ps) = 1.
  EXPECT_THROW(parse_config("study=spectral\ndist.kind=unit_power_law\ndist.a=0.5\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("study=solve\ndist.kind=unit_power_law\ndist.a=0.5\n"));
  EXPECT_THROW(parse_config("study=spectral\np=3\n"), ConfigError);
  EXPECT_THROW(parse_config("study=solve\n", StudyKind::Spectral), ConfigError);
  EXPECT_EQ(parse_config("s=0.5\n", StudyKind::Vanish).study, StudyKind::Vanish);
  try {
    parse_config("s=0.5\n\nbogus=1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Report, CsvJsonAndMetaRoundTrip) {
  StudyReport r;
  r.study = "solve";
  r.add(0.0625, 3, "l2_norm", 0.1 + 0.2, "method=linear");
  r.add(std::nullopt, std::nullopt, "ref", -1.5e-300, "a=1;b=\"x,y\"");
  r.add(0.1, std::nullopt, "count", 42);
  r.meta = {"v1-2-gabc", "s=0.5\np=2\n", 1.25, 4};
  const auto csv = to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  const auto back = from_csv(csv);
  EXPECT_EQ(back.study, r.study);
  EXPECT_EQ(back.rows, r.rows);
  const auto jb = from_jsonl(to_jsonl(r));
  EXPECT_EQ(jb.rows, r.rows);
  EXPECT_EQ(meta_from_json(meta_to_json(r)), r.meta);
  EXPECT_DOUBLE_EQ(r.value("count", 0.1), 42.0);
  EXPECT_THROW((void)r.value("missing"), std::out_of_range);
  EXPECT_NO_THROW(r.check_finite());
  r.add(0.5, 1, "bad", std::nan(""));
  EXPECT_THROW(r.check_finite(), NumericalError);
}

TEST(Study, TinySolveMatchesHandValues) {
  const auto cfg = load_config(kTiny);
  const auto rep = run_study(cfg);
  EXPECT_NEAR(rep.value("sup_norm", 0.5, 1), 0.1, 1e-13);
  // Only the centre cell [-0.25, 0.25) is nonzero.
  EXPECT_NEAR(rep.value("l2_norm", 0.5, 1), std::sqrt(0.5 * 0.01), 1e-13);
  EXPECT_EQ(rep.meta.version, version_string());
  EXPECT_EQ(parse_config(rep.meta.config), cfg);
}

TEST(Study, HomogenizeSpreadAndConstantSelfConvergence) {
  auto cfg = parse_config(base_config({"study=homogenize", "eps_list=0.125,0.0625,0.03125,0.015625", "dist.kind=constant"}));
  const auto rc = run_homogenize(cfg);
  for (double eps : cfg.eps_list) EXPECT_EQ(rc.value("seed_spread", eps), 0.0);
  for (std::size_t i = 1; i + 1 < cfg.eps_list.size(); ++i) {
    EXPECT_LT(rc.value("const_error", cfg.eps_list[i]), rc.value("const_error", cfg.eps_list[i - 1]));
  }
  EXPECT_EQ(rc.value("const_error", cfg.eps_list.back()), 0.0);

  cfg.dist.kind = "lognormal";
  const auto rr = run_homogenize(cfg);
  for (double eps : cfg.eps_list) EXPECT_GT(rr.value("seed_spread", eps), 0.0);
}

TEST(Study, GammaLimitZeroAndPreconditions) {
  auto cfg = parse_config(base_config({"study=gamma_limit", "flavor=local", "constraint=none", "gamma.function=zero", "gamma.quad_n=8", "dist.kind=lognormal"}));
  const auto rep = run_gamma_limit(cfg);
  for (const auto& row : rep.select("discrete_energy")) EXPECT_EQ(row.value, 0.0);
  EXPECT_EQ(rep.value("bracket_high"), 0.0);

  EXPECT_THROW(run_gamma_limit(cfg, ContinuumFunction::tent(1, 1.0, 1.5)), std::invalid_argument);
  const ContinuumFunction rough(1, [](const Point& x) { return std::abs(x[0]); }, interval(-1, 1));
  EXPECT_THROW(run_gamma_limit(cfg, rough), std::invalid_argument);
}

TEST(Study, GammaLimitConstantWeightsTentBracket) {
  const auto cfg = parse_config(
      "study=gamma_limit\nd=1\ns=0.5\np=2\neps_list=0.0078125,0.00390625\ndomain.lo=-1\ndomain.hi=1\n"
      "flavor=local\nconstraint=none\ngamma.function=tent\ngamma.quad_n=64\ngamma.xi=0.000244140625\n");
  const auto rep = run_gamma_limit(cfg);
  const double low = rep.value("bracket_low");
  const double high = rep.value("bracket_high");
  const double e = rep.value("discrete_energy", 0.00390625, 1);
  EXPECT_GE(e, 0.95 * low);
  EXPECT_LE(e, 1.05 * high);
}

TEST(Study, SpectralHomogeneityAndStability) {
  auto cfg = parse_config(base_config({"study=spectral", "eps_list=0.03125,0.015625", "spectral.k=3"}));
  const auto one = run_spectral(cfg);
  cfg.dist.value = 2.0;
  const auto two = run_spectral(cfg);
  for (const auto& row : one.select("mu")) {
    const auto other = two.select("mu", row.eps, row.seed);
    const auto it = std::find_if(other.begin(), other.end(), [&](const ReportRow& r) { return r.aux == row.aux; });
    ASSERT_NE(it, other.end());
    EXPECT_NEAR(it->value, 0.5 * row.value, 1e-12 * row.value);
  }
  // Constant weights: mu_1 at two spacings within a few percent.
  const auto m1 = one.select("mu_const", 0.03125).front().value;
  const auto m2 = one.select("mu_const", 0.015625).front().value;
  EXPECT_LT(std::abs(m1 - m2) / m2, 0.05);
  for (const auto& row : one.select("alignment")) EXPECT_NEAR(row.value, 1.0, 1e-10);
}

TEST(Study, EmbeddingsRatioBelowOneAtQEqualsP) {
  const auto cfg = parse_config(base_config({"study=embeddings", "s=0.25", "embeddings.q_list=2,3"}));
  const auto rep = run_embeddings(cfg);
  ASSERT_FALSE(rep.select("ratio").empty());
  for (const auto& row : rep.select("ratio")) {
    if (row.aux.find(";q=2") != std::string::npos) EXPECT_LE(row.value, 1.0);
  }
  EXPECT_EQ(rep.select("drift").size(), 6U);
  // Default q list: {p, (p + p*)/2} with p* = 4.
  const auto def = run_embeddings(parse_config(base_config({"study=embeddings", "s=0.25"})));
  EXPECT_EQ(def.select("drift").size(), 6U);
  EXPECT_NE(def.select("drift")[1].aux.find("q=3"), std::string::npos);
  // s p = d: the critical exponent is infinite.
  EXPECT_THROW(run_embeddings(parse_config(base_config({"study=embeddings"}))), ConfigError);
}

TEST(Study, ErgodicDelegation) {
  const auto cfg = parse_config(
      "study=ergodic\nd=1\ndist.kind=constant\nergodic.radii=4\nergodic.origins=3\nergodic.xi_list=0.25,0.5\n"
      "ergodic.alpha_list=1\ndivergence.radii=10\nseeds=5\n");
  const auto rep = run_ergodic(cfg);
  EXPECT_EQ(rep.value("box_mean", std::nullopt, 5), 1.0);
  EXPECT_EQ(rep.value("box_stderr", std::nullopt, 5), 0.0);
  double h10 = 0.0;
  for (int k = 1; k <= 10; ++k) h10 += 1.0 / k;
  EXPECT_NEAR(rep.value("divergence", std::nullopt, 5), 2.0 * h10, 1e-12);
  const WeightField w(WeightDistribution::constant(1.0), 5);
  EXPECT_EQ(rep.select("xi_sum")[0].value, local_weighted_sum(w, cfg.domain, cfg.ergodic_eps, 0.25, 1.0));
}

TEST(Cli, MissingConfigIsUsageError) {
  const auto r = cli({"solve"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"solve", "--config", "/nonexistent/file.cfg"}).code, 2);
  EXPECT_EQ(cli({"solvee", "--config", kTiny}).code, 2);
  EXPECT_EQ(cli({"spectral", "--config", kTiny}).code, 2);  // config declares study=solve
}

TEST(Cli, TinyConfigMatchesGolden) {
  const auto r = cli({"solve", "--config", kTiny});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, read_file(std::string(FRACLAT_TEST_DIR) + "/golden/tiny_solve.csv"));
  // One summary line per row on stderr.
  const auto rows = std::count(r.out.begin(), r.out.end(), '\n') - 1;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), rows);
}

TEST(Cli, OutDirectoryAndJsonl) {
  const std::string dir = ::testing::TempDir() + "fraclat_cli_out";
  const auto r = cli({"solve", "--config", kTiny, "--out", dir, "--format", "jsonl", "--seed-override", "9"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = from_jsonl(read_file(dir + "/solve.jsonl"));
  ASSERT_FALSE(rep.rows.empty());
  for (const auto& row : rep.rows) EXPECT_EQ(row.seed, std::optional<std::uint64_t>(9));
  const auto meta = meta_from_json(read_file(dir + "/meta.json"));
  EXPECT_EQ(meta.version, version_string());
  EXPECT_EQ(parse_config(meta.config).seeds, std::vector<std::uint64_t>{9});
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  const std::string cfg = std::string(FRACLAT_TEST_DIR) + "/configs/small_homogenize.cfg";
  const auto a = cli({"homogenize", "--config", cfg, "--threads", "1"});
  const auto b = cli({"homogenize", "--config", cfg, "--threads", "8"});
  set_thread_count(1);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, NumericalFailureExitCode) {
  const std::string path = ::testing::TempDir() + "fraclat_fail.cfg";
  std::ofstream(path) << base_config() << "study=solve\nsolver.max_iter=1\nsolver.tol=1e-14\n"
                      << "dist.kind=lognormal\n";
  const auto r = cli({"solve", "--config", path});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}
