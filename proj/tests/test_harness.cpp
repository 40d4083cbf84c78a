#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "karlin/error.hpp"
#include "karlin/harness.hpp"

using namespace karlin;
using namespace karlin::harness;

TEST(Config, ParsesSectionsAndDefaults) {
  const auto cfg = parse_config(R"(
kind = "mc_fdd"
seed = 7
[model]
alpha = 0.4
weights = "odd_indicator"
[run]
n = 5000
grid = [0.5, 1]
reps = 100
[tolerances]
z_max = 3.5
)");
  EXPECT_EQ(cfg.kind, ExperimentKind::mc_fdd);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_DOUBLE_EQ(cfg.alpha, 0.4);
  EXPECT_EQ(cfg.grid, (std::vector<double>{0.5, 1.0}));
  EXPECT_DOUBLE_EQ(cfg.tol.z_max, 3.5);
  EXPECT_DOUBLE_EQ(cfg.tol.ks_p_min, 1e-3);
  const auto j = config_to_json(cfg);
  EXPECT_TRUE(j.contains("tolerances"));
  EXPECT_DOUBLE_EQ(j["tolerances"]["z_max"].get<double>(), 3.5);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("kind = \"mc_fdd\"\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"nope\"\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"mc_fdd\"\n[model]\nalpha = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"mc_fdd\"\n[run]\ngrid = [0.5, 0.25]\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"mc_fdd\"\n[run]\nreps = \"many\"\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = \"mc_fdd\"\n[model\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST(Report, Relations) {
  Report r;
  r.add_check("a", 1.0, "<=", 1.0);
  EXPECT_TRUE(r.pass);
  r.add_check("b", 1.0, "<", 1.0);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.body["checks"].size(), 2u);
  EXPECT_THROW(r.add_check("c", 0, "~", 0), DomainError);
}

TEST(Experiments, ZeroWeightsAreDegenerate) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::mc_fdd;
  cfg.weights = "zero";
  cfg.n = 2000;
  cfg.reps = 20;
  const auto rep = run_experiment(cfg);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.body["results"]["degenerate"].get<bool>());
  EXPECT_TRUE(rep.body["results"]["ks"].is_string());
}

TEST(Experiments, OddOccupancyFdd) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::mc_fdd;
  cfg.weights = "odd_indicator";
  cfg.seed = 9;
  const auto rep = run_experiment(cfg);
  EXPECT_TRUE(rep.pass) << finalize(cfg, rep, std::nullopt)["checks"].dump();
}

TEST(Experiments, ReportsAreDeterministic) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::mc_fdd;
  cfg.n = 3000;
  cfg.reps = 50;
  const auto a = finalize(cfg, run_experiment(cfg), std::nullopt).dump();
  const auto b = finalize(cfg, run_experiment(cfg), std::nullopt).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.find("timing"), std::string::npos);
  EXPECT_NE(finalize(cfg, run_experiment(cfg), 1.5).dump().find("timing"), std::string::npos);
}

TEST(TechEst, AgainstIndependentSums) {
  const double alpha = 0.6, eps = 0.5, t = 1.0;
  const FrequencyModel law(alpha);
  const auto b = weights_ones();
  for (std::uint64_t n : {1000ULL, 100000ULL}) {
    const auto row = techest_upper(law, b, eps, t, n);
    const std::uint64_t v = law.counting_v(double(n));
    const auto ell = static_cast<std::uint64_t>(std::floor(eps * double(v)));
    EXPECT_EQ(row.v, v);
    EXPECT_EQ(row.ell_n, ell);
    long double lhs = 0.0L;
    const std::uint64_t cut = 50000000;
    for (std::uint64_t l = std::max<std::uint64_t>(ell, 1); l <= cut; ++l) lhs += -std::expm1(-double(n) * t * law.prob(l));
    lhs += double(n) * t * law.tail_mass(cut);
    EXPECT_NEAR(row.lhs, double(lhs), 1e-6 * double(lhs)) << n;
    const double x = t * std::pow(eps, -1.0 / alpha);
    auto g = [alpha](double z) { return std::pow(z, -alpha) * (z > 0.0 ? -std::expm1(-z) / z : 1.0); };
    const double integral = boost::math::quadrature::tanh_sinh<double>().integrate(g, 0.0, x);
    EXPECT_NEAR(row.rhs, double(v) * alpha * std::pow(t, alpha) * integral, 1e-8 * row.rhs);
  }
}

TEST(TechEst, TimeZeroVanishes) {
  const FrequencyModel law(0.6);
  const auto row = techest_upper(law, weights_ones(), 0.5, 0.0, 10000);
  EXPECT_EQ(row.lhs, 0.0);
  EXPECT_EQ(row.rhs, 0.0);
  EXPECT_FALSE(row.ratio.has_value());
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::techest;
  cfg.alpha = 0.6;
  cfg.t = 0.0;
  EXPECT_TRUE(run_experiment(cfg).pass);
}

TEST(TechEst, LargeEpsStillCompared) {
  const FrequencyModel law(0.6);
  const auto row = techest_upper(law, weights_ones(), 20.0, 1.0, 10000);
  ASSERT_TRUE(row.ratio.has_value());
  EXPECT_GT(row.lhs, 0.0);
  EXPECT_GT(row.rhs, 0.0);
  EXPECT_NEAR(*row.ratio, 1.0, 0.2);
}

TEST(TechEst, WeightedGammaSumForOnes) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto g = [](double z) { return std::pow(z, -0.4) * (z > 0.0 ? -std::expm1(-z) / z : 1.0); };
  for (double x : {0.5, 2.0, 9.0}) {
    const double want = ts.integrate(g, 0.0, x);
    EXPECT_NEAR(weighted_incomplete_gamma_sum(weights_ones(), 0.4, x), want, 1e-9);
  }
}

TEST(Experiments, CouplingSmall) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::coupling;
  cfg.n_list = {1000, 10000};
  cfg.reps = 30;
  const auto rep = run_experiment(cfg);
  EXPECT_EQ(rep.body["checks"][0]["value"].get<double>(), 0.0);
}

TEST(Experiments, CovTableMatchesClosedForm) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::cov_table;
  cfg.alpha = 0.3;
  cfg.weights = "odd_indicator";
  cfg.cov_method = "quadrature";
  cfg.cov_tol = 1e-8;
  EXPECT_TRUE(run_experiment(cfg).pass);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 12345.678}) EXPECT_EQ(std::stod(format_double(x)), x);
}
