#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "karlin/freqs.hpp"
#include "karlin/weights.hpp"

namespace karlin::harness {

inline constexpr const char* kLibraryVersion = "0.1.0";

using Json = nlohmann::ordered_json;

enum class ExperimentKind { mc_variance, mc_fdd, techest, coupling, kingman, crp_fclt, localclt, cov_table };

std::string to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

/// Every pass/fail threshold used by an experiment.
struct Tolerances {
  double z_max = 4.0;
  double ks_p_min = 1e-3;
  double variance_rel_tol = 0.05;
  double techest_rel_tol = 0.05;
  double techest_lower_max = 10.0;
  double chi_p_min = 1e-3;
  double crp_variance_rel_tol = 0.10;
  double crp_ratio_rel_tol = 0.20;
  double localclt_stability = 0.25;
  double cov_abs_tol = 1e-5;
  double coupling_residual_max = 0.0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::mc_fdd;
  std::uint64_t seed = 42;

  // [model]
  double alpha = 0.5;
  std::string weights = "ones";
  bool poissonized = false;

  // [run]
  std::uint64_t n = 100000;
  std::vector<std::uint64_t> n_list{1000, 10000, 100000};
  std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
  std::uint64_t reps = 2000;

  // [cov]
  std::string cov_method = "series";
  std::int64_t k_max = std::int64_t{1} << 14;
  double cov_tol = 1e-6;

  // [techest]
  double eps = 0.5;
  double t = 1.0;
  std::vector<double> t_list{0.25, 0.5, 1.0};
  std::vector<double> eps_list{0.25, 0.5, 0.75};
  std::optional<double> alpha_prime;  // defaults to the growth exponent of the weights

  // [crp]
  double theta = 0.5;
  std::string test_function = "indicator 0 0.5";
  std::uint64_t n_small = 5;
  bool check_n2 = true;
  double kingman_trunc_mass = 5e-3;
  double fclt_trunc_mass = 1e-6;
  std::uint64_t paintboxes = 2;

  // [localclt]
  int p_points = 8;
  double lemma_eps = 0.9;

  Tolerances tol;

  // [output]
  std::string report_path;
  std::string csv_path;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::string& path);
Json config_to_json(const ExperimentConfig& cfg);

/// Outcome of one experiment. Every flag in `checks` is a comparison of a
/// recorded value against a threshold taken from the config.
struct Report {
  // Both keys exist up front: ordered_json stores members in a vector, so adding
  // a top-level key later would invalidate references into "results".
  Json body = Json{{"results", Json::object()}, {"checks", Json::array()}};
  std::vector<std::vector<std::string>> csv;  // first row is the header
  bool pass = true;

  void add_check(const std::string& name, double value, const std::string& relation, double threshold);
  void add_flag(const std::string& name, bool ok, const std::string& detail);
};

/// Assembled JSON document: config echo, results, checks, pass, version.
Json finalize(const ExperimentConfig& cfg, const Report& report, std::optional<double> seconds);

Report run_experiment(const ExperimentConfig& cfg);

/// W_n(t)/sigma_n at the grid points for cfg.reps replicates, as CSV rows
/// (replicate, t, W) after a header row.
std::vector<std::vector<std::string>> simulate_paths_csv(const ExperimentConfig& cfg);

Report mc_variance_experiment(const ExperimentConfig& cfg);
Report mc_fdd_experiment(const ExperimentConfig& cfg);
Report techest_experiment(const ExperimentConfig& cfg);
Report coupling_experiment(const ExperimentConfig& cfg);
Report kingman_experiment(const ExperimentConfig& cfg);
Report crp_fclt_experiment(const ExperimentConfig& cfg);
Report localclt_experiment(const ExperimentConfig& cfg);
Report cov_table_experiment(const ExperimentConfig& cfg);

struct TechEstRow {
  std::uint64_t n = 0;
  std::uint64_t v = 0;
  std::uint64_t ell_n = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  std::optional<double> ratio;  // empty when both sides vanish (t = 0)
  double lhs_error_bound = 0.0;
};

/// sum_{ell >= ell_n} E b_{N_ell(nt)}, ell_n = floor(eps v(n)), against
/// v(n) alpha t^alpha sum_j b_j gamma(j - alpha, t eps^(-1/alpha)) / j!.
TechEstRow techest_upper(const FrequencyModel& law, const WeightSequence& b, double eps, double t,
                         std::uint64_t n);

/// sum_{ell < ell_n} E b_{N_ell(nt)} / (v(n) t^alpha' eps^(1 - alpha'/alpha)).
double techest_lower_ratio(const FrequencyModel& law, const WeightSequence& b, double eps, double t,
                           std::uint64_t n, double alpha_prime);

/// sum_{j >= 1} b_j gamma(j - alpha, x) / j!.
double weighted_incomplete_gamma_sum(const WeightSequence& b, double alpha, double x);

void write_csv(const std::string& path, const std::vector<std::vector<std::string>>& rows);
std::string format_double(double x);

}  // namespace karlin::harness
