#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include "karlin/crpspectra.hpp"
#include "karlin/error.hpp"
#include "karlin/harness.hpp"

using namespace karlin;
using namespace karlin::harness;

namespace {

struct Outputs {
  std::string report;
  std::string csv;
  bool timing = false;
};

void emit(const ExperimentConfig& cfg, const Report& rep, const Outputs& out, std::optional<double> seconds) {
  const Json doc = finalize(cfg, rep, out.timing ? seconds : std::nullopt);
  const std::string report_path = !out.report.empty() ? out.report : cfg.report_path;
  const std::string csv_path = !out.csv.empty() ? out.csv : cfg.csv_path;
  if (report_path.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::ofstream f(report_path);
    if (!f) throw ConfigError("cannot write '" + report_path + "'");
    f << doc.dump(2) << '\n';
  }
  if (!csv_path.empty() && !rep.csv.empty()) write_csv(csv_path, rep.csv);
}

int run_and_emit(const ExperimentConfig& cfg, const Outputs& out) {
  const auto start = std::chrono::steady_clock::now();
  const Report rep = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit(cfg, rep, out, secs);
  std::cerr << to_string(cfg.kind) << ": " << (rep.pass ? "pass" : "FAIL") << '\n';
  return rep.pass ? 0 : 1;
}

void add_outputs(CLI::App* cmd, Outputs& out) {
  cmd->add_option("--report", out.report, "JSON report path (default: standard output)");
  cmd->add_option("--csv", out.csv, "CSV data path");
  cmd->add_flag("--timing", out.timing, "Record wall-clock time in the report");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Karlin infinite-urn toolkit"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  Outputs out;
  std::string config_path;
  std::optional<std::uint64_t> seed;

  // cov
  auto* cov = app.add_subcommand("cov", "Limit covariance on a grid");
  cov->add_option("--alpha", cfg.alpha, "Index in (0,1)")->required();
  cov->add_option("--weights", cfg.weights, "ones | odd_indicator | zero | single_index J | power B | riemann <f>");
  cov->add_option("--grid", cfg.grid, "Comma-separated times")->delimiter(',');
  cov->add_option("--method", cfg.cov_method, "series | quadrature | closed_form");
  cov->add_option("--k-max", cfg.k_max, "Series truncation");
  cov->add_option("--tol", cfg.cov_tol, "Quadrature tolerance");
  std::string cov_out;
  cov->add_option("--out", cov_out, "CSV path (default: standard output)");
  cov->add_option("--report", out.report, "JSON report path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate normalized fluctuation paths to CSV");
  sim->add_option("--config", config_path, "TOML config");
  sim->add_option("--alpha", cfg.alpha, "Index in (0,1)");
  sim->add_option("--weights", cfg.weights, "Weight sequence");
  sim->add_option("--n", cfg.n, "Balls at t = 1");
  sim->add_option("--grid", cfg.grid, "Comma-separated times")->delimiter(',');
  sim->add_option("--reps", cfg.reps, "Replicates");
  sim->add_option("--seed", seed, "Master seed");
  sim->add_flag("--poissonized", cfg.poissonized, "Poisson arrivals instead of fixed n");
  std::string sim_out;
  sim->add_option("--out", sim_out, "CSV path")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Run the experiment described by a config");
  verify->add_option("--config", config_path, "TOML config")->required();
  verify->add_option("--seed", seed, "Override the config seed");
  add_outputs(verify, out);

  // crp
  auto* crp = app.add_subcommand("crp", "Chinese restaurant experiments or cycle-type export");
  crp->add_option("--config", config_path, "TOML config of kind kingman or crp_fclt");
  crp->add_option("--seed", seed, "Override the config seed");
  std::uint64_t cycles = 0;
  std::string cycles_out;
  crp->add_option("--cycles", cycles, "Export cycle types of this many CRP runs instead");
  crp->add_option("--cycles-out", cycles_out, "CSV path for --cycles (replicate,j,count)");
  crp->add_option("--alpha", cfg.alpha, "Discount in (0,1)");
  crp->add_option("--theta", cfg.theta, "Concentration > -alpha");
  crp->add_option("--n", cfg.n, "Customers for --cycles");
  add_outputs(crp, out);

  // localclt
  auto* lclt = app.add_subcommand("localclt", "Poisson-binomial local limit checks");
  lclt->add_option("--config", config_path, "TOML config of kind localclt");
  lclt->add_option("--p-points", cfg.p_points, "p values per n");
  lclt->add_option("--n-list", cfg.n_list, "Comma-separated n values")->delimiter(',');
  add_outputs(lclt, out);

  // techest
  auto* tech = app.add_subcommand("techest", "Tail-sum asymptotics against the incomplete-gamma series");
  tech->add_option("--config", config_path, "TOML config of kind techest");
  tech->add_option("--alpha", cfg.alpha, "Index in (0,1)");
  tech->add_option("--weights", cfg.weights, "Sequence b");
  tech->add_option("--eps", cfg.eps, "Cut level");
  tech->add_option("--t", cfg.t, "Time in [0,1]");
  tech->add_option("--n-list", cfg.n_list, "Comma-separated n values")->delimiter(',');
  add_outputs(tech, out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    auto load = [&](ExperimentKind fallback, std::initializer_list<ExperimentKind> allowed) {
      if (!config_path.empty()) {
        auto c = load_config(config_path);
        bool ok = false;
        for (auto k : allowed) ok = ok || c.kind == k;
        if (!ok) throw ConfigError("config kind '" + to_string(c.kind) + "' does not fit this subcommand");
        cfg = c;
      } else {
        cfg.kind = fallback;
      }
      if (seed) cfg.seed = *seed;
      cfg.validate();
    };

    if (*cov) {
      cfg.kind = ExperimentKind::cov_table;
      cfg.validate();
      const Report rep = run_experiment(cfg);
      if (cov_out.empty()) {
        for (const auto& row : rep.csv) {
          for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? "," : "") << row[i];
          std::cout << '\n';
        }
      } else {
        write_csv(cov_out, rep.csv);
      }
      if (!out.report.empty()) {
        std::ofstream f(out.report);
        if (!f) throw ConfigError("cannot write '" + out.report + "'");
        f << finalize(cfg, rep, std::nullopt).dump(2) << '\n';
      }
      return rep.pass ? 0 : 1;
    }
    if (*sim) {
      // A config replaces the model flags; --seed still applies.
      if (!config_path.empty()) cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      cfg.validate();
      write_csv(sim_out, simulate_paths_csv(cfg));
      return 0;
    }
    if (*verify) {
      cfg = load_config(config_path);
      if (seed) cfg.seed = *seed;
      return run_and_emit(cfg, out);
    }
    if (*crp) {
      if (cycles > 0) {
        if (cycles_out.empty()) throw ConfigError("--cycles needs --cycles-out");
        if (seed) cfg.seed = *seed;
        std::vector<std::vector<std::string>> rows{{"replicate", "j", "count"}};
        for (std::uint64_t r = 0; r < cycles; ++r) {
          Rng rng = make_stream(cfg.seed, r);
          const auto ct = cycle_type(crp_run(cfg.alpha, cfg.theta, cfg.n, rng));
          for (const auto& [j, c] : ct.counts) rows.push_back({std::to_string(r), std::to_string(j), std::to_string(c)});
        }
        write_csv(cycles_out, rows);
        return 0;
      }
      load(ExperimentKind::kingman, {ExperimentKind::kingman, ExperimentKind::crp_fclt});
      return run_and_emit(cfg, out);
    }
    if (*lclt) {
      load(ExperimentKind::localclt, {ExperimentKind::localclt});
      return run_and_emit(cfg, out);
    }
    if (*tech) {
      load(ExperimentKind::techest, {ExperimentKind::techest});
      return run_and_emit(cfg, out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const PrecisionError& e) {
    std::cerr << "precision failure: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
