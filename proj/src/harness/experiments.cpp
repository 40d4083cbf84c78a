#include <algorithm>
#include <cmath>
#include <random>

#include "karlin/crpspectra.hpp"
#include "karlin/error.hpp"
#include "karlin/harness.hpp"
#include "karlin/limitproc.hpp"
#include "karlin/localclt.hpp"
#include "karlin/parallel.hpp"
#include "karlin/specfun.hpp"
#include "karlin/stats.hpp"
#include "karlin/urnsim.hpp"
#include "../pmf_walk.hpp"

namespace karlin::harness {

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix to_nested(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

std::string grid_label(double t) { return format_double(t); }

CovMethod parse_method(const std::string& s) {
  if (s == "series") return CovMethod::series;
  if (s == "quadrature") return CovMethod::quadrature;
  if (s == "closed_form") return CovMethod::closed_form;
  throw ConfigError("unknown covariance method '" + s + "'");
}

CovMatrix target_matrix(const ExperimentConfig& cfg, const WeightSequence& w) {
  const auto method = parse_method(cfg.cov_method);
  if (method == CovMethod::closed_form) return closed_form_matrix(w.label(), cfg.alpha, cfg.grid);
  const CovarianceSpec spec(cfg.alpha, w, cfg.k_max, cfg.cov_tol);
  return build_cov_matrix(spec, cfg.grid, method);
}

// Normalized fluctuation paths W_n(t)/sigma_n, one row per replicate.
struct McPaths {
  Matrix rows;
  double sigma = 1.0;
  std::vector<double> centers;
};

McPaths simulate_paths(const ExperimentConfig& cfg, const FrequencyModel& law, const WeightSequence& w) {
  McPaths out;
  const std::size_t d = cfg.grid.size();
  out.centers.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    out.centers[i] = cfg.poissonized
                         ? centering_term_poisson(law, w, static_cast<double>(cfg.n) * cfg.grid[i])
                         : centering_term(law, w, balls_at(cfg.n, cfg.grid[i]));
  }
  // v(n) = 0 leaves the scale undefined; the unnormalized value is reported.
  out.sigma = std::max(1.0, sigma_n(law, cfg.n));
  out.rows.resize(cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t r) {
    Rng rng = make_stream(cfg.seed, r);
    auto sums = cfg.poissonized ? simulate_sums_poisson(law, w, cfg.n, cfg.grid, rng)
                                : simulate_sums(law, w, cfg.n, cfg.grid, rng);
    for (std::size_t i = 0; i < d; ++i) sums[i] = (sums[i] - out.centers[i]) / out.sigma;
    out.rows[r] = std::move(sums);
  });
  return out;
}

std::vector<std::vector<std::string>> path_csv(const ExperimentConfig& cfg, const McPaths& paths) {
  std::vector<std::vector<std::string>> csv{{"replicate", "t", "W"}};
  for (std::size_t r = 0; r < paths.rows.size(); ++r)
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
      csv.push_back({std::to_string(r), grid_label(cfg.grid[i]), format_double(paths.rows[r][i])});
  return csv;
}

bool exploratory(const ExperimentConfig& cfg, const WeightSequence& w) {
  return !w.certified() || !(w.beta() < cfg.alpha * cfg.alpha / 2.0);
}

Json model_summary(const ExperimentConfig& cfg, const FrequencyModel& law, const WeightSequence& w,
                   const McPaths& paths) {
  return Json{{"v_n", law.counting_v(static_cast<double>(cfg.n))},
              {"sigma_n", paths.sigma},
              {"centering", paths.centers},
              {"weights", w.label()},
              {"weights_beta", w.beta()},
              {"weights_certified", w.certified()},
              {"exploratory", exploratory(cfg, w)}};
}

std::vector<std::uint64_t> refine_n_grid(const std::vector<std::uint64_t>& ns) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (i > 0) out.push_back(static_cast<std::uint64_t>(std::llround(std::sqrt(double(ns[i - 1]) * double(ns[i])))));
    out.push_back(ns[i]);
  }
  return out;
}

// Integer-valued weights put W_n on a lattice of spacing 1/sigma_n.
bool integer_weights(const WeightSequence& w) {
  for (std::uint64_t j = 1; j <= 4096; ++j) {
    const double v = w.evaluate(j);
    if (v != std::round(v)) return false;
  }
  return true;
}

double alpha_prime_for(const ExperimentConfig& cfg, const WeightSequence& b) {
  const double ap = cfg.alpha_prime ? *cfg.alpha_prime : b.beta();
  if (!(ap >= 0.0 && ap < cfg.alpha)) throw ConfigError("the growth exponent alpha' must lie in [0, alpha)");
  return ap;
}

}  // namespace

Report mc_variance_experiment(const ExperimentConfig& cfg) {
  const FrequencyModel law(cfg.alpha);
  const auto w = parse_weights(cfg.weights);
  const auto target = target_matrix(cfg, w);
  const auto paths = simulate_paths(cfg, law, w);
  const std::size_t last = cfg.grid.size() - 1;
  std::vector<double> x(paths.rows.size());
  for (std::size_t r = 0; r < x.size(); ++r) x[r] = paths.rows[r][last];
  const double emp = stats::variance(x);
  const double tgt = target.entries(static_cast<Eigen::Index>(last), static_cast<Eigen::Index>(last));

  Report rep;
  auto& res = rep.body["results"];
  res["model"] = model_summary(cfg, law, w, paths);
  res["t"] = cfg.grid[last];
  res["empirical_variance"] = emp;
  res["target_variance"] = tgt;
  res["target_method"] = to_string(target.method);
  res["target_est_error"] = target.est_error;
  res["relative_mc_standard_error"] = std::sqrt(2.0 / static_cast<double>(cfg.reps));
  if (tgt == 0.0) {
    res["degenerate"] = true;
    rep.add_check("empirical_variance_abs", std::abs(emp), "<=", 0.0);
  } else {
    res["degenerate"] = false;
    const double rel = std::abs(emp / tgt - 1.0);
    res["relative_error"] = rel;
    rep.add_check("variance_relative_error", rel, "<=", cfg.tol.variance_rel_tol);
  }
  rep.csv = path_csv(cfg, paths);
  return rep;
}

Report mc_fdd_experiment(const ExperimentConfig& cfg) {
  const FrequencyModel law(cfg.alpha);
  const auto w = parse_weights(cfg.weights);
  const auto target = target_matrix(cfg, w);
  const auto paths = simulate_paths(cfg, law, w);
  const Matrix tgt = to_nested(target.entries);
  const Matrix emp = stats::second_moments(paths.rows);
  const std::size_t d = cfg.grid.size();

  Report rep;
  auto& res = rep.body["results"];
  res["model"] = model_summary(cfg, law, w, paths);
  res["grid"] = cfg.grid;
  res["empirical_cov"] = emp;
  res["target_cov"] = tgt;
  res["target_method"] = to_string(target.method);
  res["target_est_error"] = target.est_error;

  bool degenerate = true;
  for (std::size_t i = 0; i < d; ++i) degenerate = degenerate && tgt[i][i] == 0.0;
  res["degenerate"] = degenerate;
  if (degenerate) {
    double m = 0.0;
    for (const auto& row : emp)
      for (double v : row) m = std::max(m, std::abs(v));
    res["ks"] = "skipped: zero variance";
    rep.add_check("empirical_second_moment_max_abs", m, "<=", 0.0);
    rep.csv = path_csv(cfg, paths);
    return rep;
  }

  const Matrix z = stats::covariance_z_scores(emp, tgt, cfg.reps);
  res["z_scores"] = z;
  double zmax = 0.0;
  for (const auto& row : z)
    for (double v : row) zmax = std::max(zmax, std::abs(v));
  rep.add_check("covariance_max_abs_z", zmax, "<=", cfg.tol.z_max);

  const bool lattice = integer_weights(w);
  res["ks_lattice_correction"] = lattice;
  Json ks = Json::array();
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> x(paths.rows.size());
    for (std::size_t r = 0; r < x.size(); ++r) x[r] = paths.rows[r][i];
    const double sd = std::sqrt(tgt[i][i]);
    if (sd == 0.0) {
      ks.push_back(Json{{"t", cfg.grid[i]}, {"skipped", "zero variance"}});
      continue;
    }
    const auto cdf = [sd](double v) { return stats::normal_cdf(v / sd); };
    const auto raw = stats::ks_test(x, cdf);
    Json entry{{"t", cfg.grid[i]}, {"statistic", raw.statistic}, {"p_value", raw.p_value}};
    auto k = raw;
    if (lattice) {
      // Randomized continuity correction: spread each lattice atom uniformly over its cell.
      for (std::size_t r = 0; r < x.size(); ++r) {
        Rng rng = make_stream(splitmix64(cfg.seed ^ 0x6a69747465720000ULL), r * d + i);
        x[r] += (std::uniform_real_distribution<double>(0.0, 1.0)(rng) - 0.5) / paths.sigma;
      }
      k = stats::ks_test(x, cdf);
      entry["statistic_continuity_corrected"] = k.statistic;
      entry["p_value_continuity_corrected"] = k.p_value;
    }
    ks.push_back(entry);
    rep.add_check("ks_p_value_t=" + grid_label(cfg.grid[i]), k.p_value, ">=", cfg.tol.ks_p_min);
  }
  res["ks"] = ks;
  rep.csv = path_csv(cfg, paths);
  return rep;
}

double weighted_incomplete_gamma_sum(const WeightSequence& b, double alpha, double x) {
  if (x <= 0.0) return 0.0;
  detail::NeumaierSum sum;
  double magnitude = 0.0;
  for (std::int64_t j = 1; j < 10'000'000; ++j) {
    const double bj = b(static_cast<std::uint64_t>(j));
    const double term =
        bj == 0.0 ? 0.0
                  : bj * std::exp(specfun::log_gamma_ratio(j, alpha)) *
                        specfun::regularized_lower_gamma(static_cast<double>(j) - alpha, x);
    sum.add(term);
    magnitude += std::abs(term);
    if (static_cast<double>(j) > 2.0 * x + 20.0 && std::abs(term) <= 1e-17 * magnitude) break;
  }
  return sum.value();
}

TechEstRow techest_upper(const FrequencyModel& law, const WeightSequence& b, double eps, double t,
                         std::uint64_t n) {
  TechEstRow row;
  row.n = n;
  row.v = law.counting_v(static_cast<double>(n));
  row.ell_n = static_cast<std::uint64_t>(std::floor(eps * static_cast<double>(row.v)));
  if (t == 0.0) return row;
  const double u = static_cast<double>(n) * t;
  const auto total = centering_poisson(law, b, u);
  detail::NeumaierSum head;
  for (std::uint64_t ell = 1; ell < row.ell_n; ++ell) head.add(poisson_expectation(b, u * law.prob(ell)));
  row.lhs = total.value - head.value();
  row.lhs_error_bound = total.error_bound;
  const double alpha = law.alpha();
  const double x = t * std::pow(eps, -1.0 / alpha);
  row.rhs = static_cast<double>(row.v) * alpha * std::pow(t, alpha) * weighted_incomplete_gamma_sum(b, alpha, x);
  if (row.rhs != 0.0) row.ratio = row.lhs / row.rhs;
  return row;
}

double techest_lower_ratio(const FrequencyModel& law, const WeightSequence& b, double eps, double t,
                           std::uint64_t n, double alpha_prime) {
  if (t == 0.0) return 0.0;
  const auto v = law.counting_v(static_cast<double>(n));
  const auto ell_n = static_cast<std::uint64_t>(std::floor(eps * static_cast<double>(v)));
  const double u = static_cast<double>(n) * t;
  detail::NeumaierSum lower;
  for (std::uint64_t ell = 1; ell < ell_n; ++ell) lower.add(poisson_expectation(b, u * law.prob(ell)));
  const double denom = std::max(1.0, static_cast<double>(v)) * std::pow(t, alpha_prime) *
                       std::pow(eps, 1.0 - alpha_prime / law.alpha());
  return lower.value() / denom;
}

Report techest_experiment(const ExperimentConfig& cfg) {
  const FrequencyModel law(cfg.alpha);
  const auto b = parse_weights(cfg.weights);
  const double ap = alpha_prime_for(cfg, b);
  Report rep;
  auto& res = rep.body["results"];
  res["alpha_prime"] = ap;
  res["ell_n"] = "floor(eps * v(n))";

  std::vector<TechEstRow> rows(cfg.n_list.size());
  parallel_for(rows.size(), [&](std::size_t i) { rows[i] = techest_upper(law, b, cfg.eps, cfg.t, cfg.n_list[i]); });
  Json upper = Json::array();
  rep.csv = {{"n", "v", "ell_n", "lhs", "rhs", "ratio"}};
  for (const auto& r : rows) {
    upper.push_back(Json{{"n", r.n},
                         {"v", r.v},
                         {"ell_n", r.ell_n},
                         {"lhs", r.lhs},
                         {"lhs_error_bound", r.lhs_error_bound},
                         {"rhs", r.rhs},
                         {"ratio", r.ratio ? Json(*r.ratio) : Json(nullptr)}});
    rep.csv.push_back({std::to_string(r.n), std::to_string(r.v), std::to_string(r.ell_n), format_double(r.lhs),
                       format_double(r.rhs), r.ratio ? format_double(*r.ratio) : "nan"});
  }
  res["upper"] = upper;

  if (cfg.t == 0.0) {
    double m = 0.0;
    for (const auto& r : rows) m = std::max({m, std::abs(r.lhs), std::abs(r.rhs)});
    rep.add_check("both_sides_max_abs_at_t0", m, "==", 0.0);
  } else {
    const auto& lastrow = rows.back();
    if (!lastrow.ratio) throw PrecisionError("TechEst right-hand side vanished", 0.0);
    rep.add_check("ratio_minus_one_at_largest_n", std::abs(*lastrow.ratio - 1.0), "<=", cfg.tol.techest_rel_tol);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double prev = std::abs(*rows[i - 1].ratio - 1.0);
      const double cur = std::abs(*rows[i].ratio - 1.0);
      rep.add_check("abs_ratio_minus_one_increase_n=" + std::to_string(rows[i].n), cur - prev, "<=", 0.0);
    }
  }

  struct Cell {
    double t, eps;
    std::uint64_t n;
    double ratio = 0.0;
  };
  std::vector<Cell> cells;
  for (double t : cfg.t_list)
    for (double e : cfg.eps_list)
      for (auto n : cfg.n_list) cells.push_back(Cell{t, e, n});
  parallel_for(cells.size(), [&](std::size_t i) {
    cells[i].ratio = techest_lower_ratio(law, b, cells[i].eps, cells[i].t, cells[i].n, ap);
  });
  Json lower = Json::array();
  double lmax = 0.0;
  for (const auto& c : cells) {
    lower.push_back(Json{{"t", c.t}, {"eps", c.eps}, {"n", c.n}, {"ratio", c.ratio}});
    lmax = std::max(lmax, std::abs(c.ratio));
  }
  res["lower"] = lower;
  res["lower_max_ratio"] = lmax;
  rep.add_check("lower_ratio_max", lmax, "<=", cfg.tol.techest_lower_max);
  return rep;
}

Report coupling_experiment(const ExperimentConfig& cfg) {
  const FrequencyModel law(cfg.alpha);
  const auto w = parse_weights(cfg.weights);
  const std::size_t d = cfg.grid.size();
  Report rep;
  auto& res = rep.body["results"];
  Json per_n = Json::array();
  std::vector<double> medians;
  double worst_residual = 0.0;
  rep.csv = {{"n", "replicate", "raw_residual_max", "centering_gap_sup"}};
  for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    const auto n = cfg.n_list[ni];
    std::vector<double> discrete_centers(d);
    for (std::size_t i = 0; i < d; ++i) discrete_centers[i] = centering_term(law, w, balls_at(n, cfg.grid[i]));
    const double sigma = std::max(1.0, sigma_n(law, n));
    std::vector<double> residual(cfg.reps);
    std::vector<double> gap(cfg.reps);
    const std::uint64_t stream_seed = splitmix64(cfg.seed + n);
    parallel_for(cfg.reps, [&](std::size_t r) {
      Rng rng = make_stream(stream_seed, r);
      const auto pair = coupled_pair(law, n, cfg.grid, rng);
      double res_max = 0.0;
      double g = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double lhs = weighted_sum(pair.poisson_at_lambda[i], w);
        const double rhs = weighted_sum(pair.discrete_path, w, i);
        res_max = std::max(res_max, std::abs(lhs - rhs));
        const double poisson_center =
            centering_term_poisson(law, w, static_cast<double>(n) * pair.lambda[i]);
        g = std::max(g, std::abs(discrete_centers[i] - poisson_center) / sigma);
      }
      residual[r] = res_max;
      gap[r] = g;
    });
    for (std::size_t r = 0; r < cfg.reps; ++r)
      rep.csv.push_back({std::to_string(n), std::to_string(r), format_double(residual[r]), format_double(gap[r])});
    const double rmax = *std::max_element(residual.begin(), residual.end());
    worst_residual = std::max(worst_residual, rmax);
    medians.push_back(stats::median(gap));
    per_n.push_back(Json{{"n", n}, {"raw_residual_max", rmax}, {"gap_median", medians.back()},
                         {"gap_max", *std::max_element(gap.begin(), gap.end())}});
  }
  res["per_n"] = per_n;
  rep.add_check("raw_identity_residual_max", worst_residual, "<=", cfg.tol.coupling_residual_max);
  for (std::size_t i = 1; i < medians.size(); ++i)
    rep.add_check("gap_median_ratio_n=" + std::to_string(cfg.n_list[i]), medians[i] / medians[i - 1], "<", 1.0);
  return rep;
}

Report kingman_experiment(const ExperimentConfig& cfg) {
  Report rep;
  auto& res = rep.body["results"];
  auto describe = [](const KingmanReport& k) {
    Json cells = Json::array();
    for (std::size_t i = 0; i < k.partitions.size(); ++i)
      cells.push_back(Json{{"partition", k.partitions[i]}, {"crp", k.crp_counts[i]}, {"urn", k.urn_counts[i]}});
    return Json{{"n", k.n},
                {"reps", k.reps},
                {"cells", cells},
                {"chi_square", k.chi_square},
                {"dof", k.dof},
                {"p_value", k.p_value},
                {"p_single_block_exact", k.p_single_block_exact},
                {"z_crp", k.z_crp},
                {"z_urn", k.z_urn},
                {"max_residual", k.max_residual},
                {"max_residual_balls", k.max_residual_balls},
                {"share_multi_residual", k.share_multi_residual},
                {"residual_warning", k.residual_warning}};
  };
  const auto main = kingman_check(cfg.alpha, cfg.theta, cfg.n_small, cfg.reps, cfg.seed, cfg.kingman_trunc_mass);
  res["main"] = describe(main);
  rep.add_check("chi_square_p_value", main.p_value, ">=", cfg.tol.chi_p_min);
  rep.csv = {{"n", "partition", "crp_count", "urn_count"}};
  for (std::size_t i = 0; i < main.partitions.size(); ++i)
    rep.csv.push_back({std::to_string(main.n), main.partitions[i], std::to_string(main.crp_counts[i]),
                       std::to_string(main.urn_counts[i])});
  if (cfg.check_n2) {
    const auto two = kingman_check(cfg.alpha, cfg.theta, 2, cfg.reps, splitmix64(cfg.seed), cfg.kingman_trunc_mass);
    res["n2"] = describe(two);
    rep.add_check("n2_abs_z_crp", std::abs(two.z_crp), "<=", cfg.tol.z_max);
    rep.add_check("n2_abs_z_urn", std::abs(two.z_urn), "<=", cfg.tol.z_max);
    for (std::size_t i = 0; i < two.partitions.size(); ++i)
      rep.csv.push_back({"2", two.partitions[i], std::to_string(two.crp_counts[i]), std::to_string(two.urn_counts[i])});
  }
  return rep;
}

Report crp_fclt_experiment(const ExperimentConfig& cfg) {
  const auto f = parse_test_function(cfg.test_function);
  CrpFcltOptions opt;
  opt.trunc_mass = cfg.fclt_trunc_mass;
  opt.series_k_max = cfg.k_max;
  Report rep;
  auto& res = rep.body["results"];
  const std::size_t last = cfg.grid.size() - 1;
  std::vector<CrpFcltReport> runs;
  rep.csv = {{"paintbox", "s", "t", "empirical", "target", "z", "empirical_vpb", "z_vpb"}};
  Json boxes = Json::array();
  for (std::uint64_t b = 0; b < cfg.paintboxes; ++b) {
    runs.push_back(crp_fluctuation_path(f, cfg.alpha, cfg.theta, cfg.n, cfg.grid, cfg.reps, cfg.seed + b, opt));
    const auto& r = runs.back();
    double zmax = 0.0;
    double zmax_vpb = 0.0;
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
      for (std::size_t j = 0; j < cfg.grid.size(); ++j) {
        zmax = std::max(zmax, std::abs(r.z_scores[i][j]));
        zmax_vpb = std::max(zmax_vpb, std::abs(r.z_scores_vpb[i][j]));
        rep.csv.push_back({std::to_string(b), grid_label(cfg.grid[i]), grid_label(cfg.grid[j]),
                           format_double(r.empirical_cov[i][j]), format_double(r.target_cov[i][j]),
                           format_double(r.z_scores[i][j]), format_double(r.empirical_cov_vpb[i][j]),
                           format_double(r.z_scores_vpb[i][j])});
      }
    boxes.push_back(Json{{"seed", cfg.seed + b},
                         {"alpha", r.alpha},
                         {"theta", r.theta},
                         {"n", r.n},
                         {"grid", r.grid},
                         {"s_hat", r.s_hat},
                         {"s_window", {r.s_window_lo, r.s_window_hi}},
                         {"v_paintbox", r.v_paintbox},
                         {"paintbox_residual", r.paintbox_residual},
                         {"max_residual_balls", r.max_residual_balls},
                         {"residual_warning", r.residual_warning},
                         {"limit_cov", r.limit_cov},
                         {"empirical_cov", r.empirical_cov},
                         {"target_cov", r.target_cov},
                         {"z_scores", r.z_scores},
                         {"max_abs_z", zmax},
                         {"empirical_cov_vpb", r.empirical_cov_vpb},
                         {"z_scores_vpb", r.z_scores_vpb},
                         {"max_abs_z_vpb", zmax_vpb},
                         {"degenerate", r.degenerate}});
    const std::string tag = "paintbox" + std::to_string(b);
    if (r.degenerate) {
      rep.add_check(tag + "_empirical_variance_abs", std::abs(r.empirical_cov[last][last]), "<=", 0.0);
    } else {
      const double rel = std::abs(r.empirical_cov[last][last] / r.target_cov[last][last] - 1.0);
      rep.add_check(tag + "_variance_relative_error", rel, "<=", cfg.tol.crp_variance_rel_tol);
    }
  }
  res["paintboxes"] = boxes;
  res["normalization"] = "n^(alpha/2) with target (s_hat/Gamma(1-alpha)) * limit_cov; v_pb(n)^(1/2) with target limit_cov";
  if (runs.size() >= 2 && !runs[0].degenerate && !runs[1].degenerate) {
    const double var_ratio = runs[0].empirical_cov[last][last] / runs[1].empirical_cov[last][last];
    const double s_ratio = runs[0].s_hat / runs[1].s_hat;
    res["variance_ratio"] = var_ratio;
    res["s_hat_ratio"] = s_ratio;
    rep.add_check("variance_ratio_vs_s_hat_ratio", std::abs(var_ratio / s_ratio - 1.0), "<=",
                  cfg.tol.crp_ratio_rel_tol);
  }
  return rep;
}

Report localclt_experiment(const ExperimentConfig& cfg) {
  LocalCltOptions opt;
  opt.n_grid = cfg.n_list;
  opt.n_grid_refined = refine_n_grid(cfg.n_list);
  opt.p_points = cfg.p_points;
  opt.eps = cfg.lemma_eps;
  opt.stability_tol = cfg.tol.localclt_stability;
  Report rep;
  auto& res = rep.body["results"];
  res["log_base"] = "natural";
  res["x_grid_caveat"] = "sup over x taken on a 43-point grid including both endpoints";
  rep.csv = {{"which", "n", "p", "lhs", "envelope", "ratio"}};
  for (auto which : {Envelope::poisson_binomial, Envelope::shifted}) {
    const auto r = local_clt_report(which, opt);
    Json j{{"c_fit", r.c_fit},
           {"c_fit_refined", r.c_fit_refined},
           {"refinement_change", r.refinement_change},
           {"stable", r.stable},
           {"pass", r.pass}};
    bool positive = true;
    std::size_t empty = 0;
    for (const auto& row : r.rows) {
      positive = positive && row.lhs > 0.0 && row.envelope > 0.0;
      if (row.empty_window) ++empty;
      rep.csv.push_back({to_string(which), std::to_string(row.n), format_double(row.p), format_double(row.lhs),
                         format_double(row.envelope), format_double(row.ratio)});
    }
    j["empty_windows"] = empty;
    if (which == Envelope::shifted) {
      j["endpoint_max_share"] = r.endpoint_max_share;
      j["dense_spot_check_max_excess"] = r.dense_max_excess;
    }
    res[to_string(which)] = j;
    rep.add_flag(to_string(which) + "_lhs_and_envelope_positive", positive, "every grid cell");
    rep.add_check(to_string(which) + "_c_fit_refinement_change", r.refinement_change, "<=",
                  cfg.tol.localclt_stability);
  }
  const auto tv = tv_report(opt);
  Json tvj = Json::array();
  for (const auto& row : tv.rows) tvj.push_back(Json{{"n", row.n}, {"p", row.p}, {"tv", row.tv}, {"bound", row.bound}});
  res["tv"] = tvj;
  rep.add_check("tv_over_bound_max", tv.max_tv_over_bound, "<=", 1.0);
  return rep;
}

Report cov_table_experiment(const ExperimentConfig& cfg) {
  const auto w = parse_weights(cfg.weights);
  const auto m = target_matrix(cfg, w);
  Report rep;
  auto& res = rep.body["results"];
  res["grid"] = cfg.grid;
  res["method"] = to_string(m.method);
  res["cov"] = to_nested(m.entries);
  res["est_error"] = m.est_error;
  rep.csv = {{"s", "t", "cov"}};
  const bool has_closed = w.label() == "ones" || w.label() == "odd_indicator";
  std::optional<CovMatrix> closed;
  if (has_closed) closed = closed_form_matrix(w.label(), cfg.alpha, cfg.grid);
  if (closed) rep.csv.front().push_back("closed_form");
  double diff = 0.0;
  for (std::size_t i = 0; i < cfg.grid.size(); ++i)
    for (std::size_t j = 0; j < cfg.grid.size(); ++j) {
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      std::vector<std::string> row{grid_label(cfg.grid[i]), grid_label(cfg.grid[j]), format_double(m.entries(a, b))};
      if (closed) {
        row.push_back(format_double(closed->entries(a, b)));
        diff = std::max(diff, std::abs(m.entries(a, b) - closed->entries(a, b)));
      }
      rep.csv.push_back(std::move(row));
    }
  if (closed) {
    res["max_abs_diff_closed_form"] = diff;
    rep.add_check("max_abs_diff_closed_form", diff, "<=", cfg.tol.cov_abs_tol);
  }
  return rep;
}

std::vector<std::vector<std::string>> simulate_paths_csv(const ExperimentConfig& cfg) {
  cfg.validate();
  const FrequencyModel law(cfg.alpha);
  const auto w = parse_weights(cfg.weights);
  return path_csv(cfg, simulate_paths(cfg, law, w));
}

Report run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case ExperimentKind::mc_variance: return mc_variance_experiment(cfg);
    case ExperimentKind::mc_fdd: return mc_fdd_experiment(cfg);
    case ExperimentKind::techest: return techest_experiment(cfg);
    case ExperimentKind::coupling: return coupling_experiment(cfg);
    case ExperimentKind::kingman: return kingman_experiment(cfg);
    case ExperimentKind::crp_fclt: return crp_fclt_experiment(cfg);
    case ExperimentKind::localclt: return localclt_experiment(cfg);
    case ExperimentKind::cov_table: return cov_table_experiment(cfg);
  }
  throw ConfigError("unhandled experiment kind");
}

}  // namespace karlin::harness
