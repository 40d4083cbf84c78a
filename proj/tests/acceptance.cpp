// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "karlin/crpspectra.hpp"
#include "karlin/error.hpp"
#include "karlin/freqs.hpp"
#include "karlin/harness.hpp"
#include "karlin/limitproc.hpp"
#include "karlin/specfun.hpp"
#include "karlin/urnsim.hpp"

using namespace karlin;
using namespace karlin::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Outcome from_report(const Report& rep) {
  std::ostringstream os;
  bool first = true;
  for (const auto& c : rep.body["checks"]) {
    if (!first) os << "; ";
    first = false;
    os << c["name"].get<std::string>();
    if (c.contains("value")) os << '=' << fmt(c["value"].get<double>()) << ' ' << c["relation"].get<std::string>() << ' ' << fmt(c["threshold"].get<double>());
    if (!c["pass"].get<bool>()) os << " (failed)";
  }
  return {rep.pass, os.str()};
}

// 1. Series and quadrature against both closed forms.
Outcome closed_form_covariance() {
  const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
  double worst = 0.0;
  for (double alpha : {0.3, 0.5, 0.7}) {
    for (const std::string label : {"ones", "odd_indicator"}) {
      const auto w = parse_weights(label);
      const CovarianceSpec series(alpha, w);
      const CovarianceSpec quad(alpha, w, CovarianceSpec::kDefaultKMax, 1e-8);
      for (double s : grid) {
        for (double t : grid) {
          const double exact = label == "ones" ? cov_closed_occupancy(alpha, s, t) : cov_closed_odd(alpha, s, t);
          worst = std::max({worst, std::abs(cov_series(series, s, t) - exact), std::abs(cov_quadrature(quad, s, t) - exact)});
        }
      }
    }
  }
  const double v11 = cov_series(CovarianceSpec(0.5, weights_ones()), 1, 1);
  const double o11 = cov_series(CovarianceSpec(0.5, weights_odd_indicator()), 1, 1);
  return {worst <= 1e-5, "max |method - closed form| = " + fmt(worst) + " <= 1e-05; ones(1,1) = " +
                             std::to_string(v11) + ", odd(1,1) = " + std::to_string(o11)};
}

// 2. Sibuya normalization, generating identity, incomplete-gamma recurrence.
Outcome sibuya_gamma_identities() {
  double mass_err = 0.0, gen_err = 0.0, rec_err = 0.0;
  for (double alpha = 0.1; alpha < 0.95; alpha += 0.1) {
    const std::int64_t K = 1000000;
    double s = 0.0;
    for (std::int64_t k = K; k >= 1; --k) s += specfun::sibuya_pmf(k, alpha);
    s += alpha / std::tgamma(1.0 - alpha) * specfun::gamma_ratio_tail(K, alpha);
    mass_err = std::max(mass_err, double(std::abs(s - 1.0L)));
    for (double z = 0.05; z < 1.0; z += 0.05) {
      double e = 0.0;
      for (std::int64_t k = 1; k <= 4000; ++k) e += specfun::sibuya_pmf(k, alpha) * std::pow(1.0 - z, double(k));
      gen_err = std::max(gen_err, std::abs(std::pow(z, alpha) - (1.0 - e)));
    }
  }
  for (double s = 0.3; s <= 5.0 + 1e-9; s += 0.1) {
    for (double x : {0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0}) {
      const double lhs = s * specfun::lower_incomplete_gamma(s, x) - specfun::lower_incomplete_gamma(s + 1.0, x);
      rec_err = std::max(rec_err, std::abs(lhs - std::pow(x, s) * std::exp(-x)));
    }
  }
  const bool ok = mass_err <= 1e-6 && gen_err <= 1e-6 && rec_err <= 1e-6;
  return {ok, "|sum pmf - 1| = " + fmt(mass_err) + ", generating identity " + fmt(gen_err) + ", recurrence " +
                  fmt(rec_err) + " (all <= 1e-06)"};
}

ExperimentConfig base(ExperimentKind kind, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  cfg.alpha = 0.5;
  cfg.weights = "ones";
  return cfg;
}

// 3. Variance of W_n(1)/sigma_n.
Outcome mc_variance() {
  auto cfg = base(ExperimentKind::mc_variance, 20240601);
  cfg.n = 100000;
  cfg.grid = {1.0};
  cfg.reps = 2000;
  return from_report(run_experiment(cfg));
}

// 4. Grid covariance z-scores and marginal normality.
Outcome mc_fdd() {
  auto cfg = base(ExperimentKind::mc_fdd, 20240602);
  cfg.n = 100000;
  cfg.grid = {0.25, 0.5, 0.75, 1.0};
  cfg.reps = 2000;
  return from_report(run_experiment(cfg));
}

// 5. Coupling identity and shrinking centering gap.
Outcome coupling() {
  auto cfg = base(ExperimentKind::coupling, 20240603);
  cfg.n_list = {1000, 10000, 100000};
  cfg.reps = 100;
  return from_report(run_experiment(cfg));
}

// 6. Tail-sum asymptotics.
Outcome techest() {
  auto cfg = base(ExperimentKind::techest, 1);
  cfg.alpha = 0.6;
  cfg.eps = 0.5;
  cfg.t = 1.0;
  cfg.n_list = {1000, 10000, 100000};
  return from_report(run_experiment(cfg));
}

// 7. TV bound and envelope stability.
Outcome localclt() { return from_report(run_experiment(base(ExperimentKind::localclt, 1))); }

// 8. CRP cycle types against the paintbox urn scheme.
Outcome kingman() {
  auto cfg = base(ExperimentKind::kingman, 20240605);
  cfg.theta = 0.5;
  cfg.n_small = 5;
  cfg.reps = 100000;
  cfg.check_n2 = true;
  return from_report(run_experiment(cfg));
}

// 9. Linear eigenvalue statistics against explicit permutation matrices.
Outcome spectral_identity() {
  const std::vector<TestFunction> indicators{make_indicator(0.0, 0.5), make_indicator(0.25, 0.75)};
  const std::vector<TestFunction> smooth{make_poly({0.3, -1.0, 2.0}), make_fourier(1), make_fourier(3)};
  std::uint64_t mismatches = 0;
  double smooth_err = 0.0;
  std::uint64_t cases = 0;
  for (std::uint64_t n = 4; n <= 12; ++n) {
    for (std::uint64_t r = 0; r < 100; ++r) {
      Rng rng = make_stream(0x5eed + n, r);
      std::vector<std::uint64_t> sizes;
      for (std::uint64_t left = n; left > 0;) {
        const std::uint64_t s = 1 + rng() % left;
        sizes.push_back(s);
        left -= s;
      }
      const auto ct = cycle_type_from_sizes(sizes);
      auto angles = brute_force_eigenangles(ct);
      for (double& a : angles) a = snap_to_fraction(a, n);
      ++cases;
      for (const auto& f : indicators) {
        double brute = 0.0;
        for (double a : angles) brute += f(a);
        const auto s = eigen_linear_statistic(ct, f);
        if (s.direct != brute || s.decomposed != brute) ++mismatches;
      }
      for (const auto& f : smooth) {
        double brute = 0.0;
        for (double a : angles) brute += f(a);
        const auto s = eigen_linear_statistic(ct, f);
        smooth_err = std::max({smooth_err, std::abs(s.direct - brute), std::abs(s.decomposed - brute)});
      }
    }
  }
  return {mismatches == 0 && smooth_err <= 1e-8, std::to_string(cases) + " cycle types, indicator mismatches = " +
                                                      std::to_string(mismatches) + ", smooth max error = " + fmt(smooth_err) +
                                                      " <= 1e-08"};
}

// 10. Conditional fluctuations of the paintbox urn scheme.
Outcome crp_fclt() {
  auto cfg = base(ExperimentKind::crp_fclt, 20240606);
  cfg.theta = 0.5;
  cfg.test_function = "indicator 0 0.5";
  cfg.n = 100000;
  cfg.grid = {0.25, 0.5, 0.75, 1.0};
  cfg.reps = 2000;
  cfg.paintboxes = 2;
  return from_report(run_experiment(cfg));
}

// 11. Properties on fixed seeds.
Outcome properties() {
  std::vector<std::string> failed;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  // Ball conservation on fixed-n and Poissonized paths.
  bool balls_ok = true;
  for (double alpha : {0.3, 0.5, 0.8}) {
    const FrequencyModel law(alpha);
    for (std::uint64_t r = 0; r < 20; ++r) {
      Rng rng = make_stream(101, r);
      const std::uint64_t n = 1 + rng() % 50000;
      const std::vector<double> grid{0.1, 0.37, 0.5, 0.99, 1.0};
      const auto fixed = simulate_fixed_n(law, n, grid, rng);
      const auto pois = simulate_poissonized(law, n, grid, rng);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        for (const auto* path : {&fixed, &pois}) {
          std::uint64_t total = 0;
          for (const auto& [j, d] : path->occupancy_numbers(i)) total += j * d;
          balls_ok = balls_ok && total == path->balls[i];
        }
        balls_ok = balls_ok && fixed.balls[i] == balls_at(n, grid[i]);
      }
    }
  }
  require(balls_ok, "ball conservation");

  // Mass conservation for the frequency model and for sampled paintboxes.
  double mass_err = 0.0;
  for (double alpha : {0.3, 0.5, 0.8}) {
    const FrequencyModel law(alpha);
    for (std::uint64_t L : {1ULL, 10ULL, 1000ULL}) {
      double s = 0.0;
      for (std::uint64_t l = 1; l <= L; ++l) s += law.prob(l);
      mass_err = std::max(mass_err, std::abs(s + law.tail_mass(L) - 1.0));
    }
    Rng rng = make_stream(102, 0);
    const auto pb = stick_breaking_paintbox(alpha, 0.5, 1e-4, rng);
    long double s = pb.residual();
    for (auto it = pb.frequencies().rbegin(); it != pb.frequencies().rend(); ++it) s += *it;
    mass_err = std::max(mass_err, double(std::abs(s - 1.0L)));
  }
  require(mass_err <= 1e-12, "mass conservation (" + fmt(mass_err) + ")");

  // Determinism of paths, CRP runs and reports.
  {
    const FrequencyModel law(0.5);
    Rng a = make_stream(103, 4), b = make_stream(103, 4);
    const bool same_path = simulate_fixed_n(law, 20000, {0.5, 1.0}, a).counts_at ==
                           simulate_fixed_n(law, 20000, {0.5, 1.0}, b).counts_at;
    Rng c = make_stream(104, 0), d = make_stream(104, 0);
    const bool same_crp = crp_run(0.5, 0.5, 1000, c).table_sizes == crp_run(0.5, 0.5, 1000, d).table_sizes;
    auto cfg = base(ExperimentKind::mc_fdd, 105);
    cfg.n = 5000;
    cfg.reps = 100;
    const bool same_report = finalize(cfg, run_experiment(cfg), std::nullopt).dump() ==
                             finalize(cfg, run_experiment(cfg), std::nullopt).dump();
    require(same_path && same_crp && same_report, "determinism");
  }

  // Positive semidefiniteness on random grids of up to 64 points.
  double min_eig = 0.0;
  for (std::uint64_t r = 0; r < 6; ++r) {
    Rng rng = make_stream(106, r);
    const std::size_t m = 2 + rng() % 63;
    std::vector<double> grid(m);
    for (auto& g : grid) g = 1e-3 + (1.0 - 1e-3) * uniform01(rng);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (const std::string label : {"ones", "odd_indicator", "power 0.05"}) {
      const CovarianceSpec spec(0.3 + 0.1 * double(r), parse_weights(label), 1024, 1e-2);
      const auto cm = build_cov_matrix(spec, grid, CovMethod::series);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cm.entries);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
  }
  require(min_eig >= -1e-8, "positive semidefiniteness (" + fmt(min_eig) + ")");

  // Increment domination on Poissonized paths.
  bool incr_ok = true;
  {
    const FrequencyModel law(0.5);
    const std::vector<double> grid{0.1, 0.2, 0.4, 0.5, 0.8, 1.0};
    const std::uint64_t n = 20000;
    for (const std::string label : {"ones", "odd_indicator", "power 0.2", "riemann indicator 0 0.5"}) {
      const auto w = parse_weights(label);
      const double C = w.c_incr();
      std::vector<double> center(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) center[i] = centering_term_poisson(law, w, double(n) * grid[i]);
      for (std::uint64_t r = 0; r < 20; ++r) {
        Rng rng = make_stream(107, r);
        const auto path = simulate_poissonized(law, n, grid, rng);
        for (std::size_t i = 0; i < grid.size(); ++i) {
          for (std::size_t k = i + 1; k < grid.size(); ++k) {
            const double dw = (weighted_sum(path, w, k) - center[k]) - (weighted_sum(path, w, i) - center[i]);
            const double dN = double(path.balls[k] - path.balls[i]);
            const double ndt = double(n) * (grid[k] - grid[i]);
            incr_ok = incr_ok && std::abs(dw) <= C * (dN + ndt) + 2.0 * C * ndt;
          }
        }
      }
    }
  }
  require(incr_ok, "increment domination");

  // Second moments of limit increments against (t-s)^alpha on dyadic grids.
  double holder_change = 0.0;
  for (const std::string label : {"ones", "odd_indicator"}) {
    const double alpha = 0.5;
    const CovarianceSpec spec(alpha, parse_weights(label), 4096, 1e-4);
    std::vector<double> fitted;
    for (int level = 3; level <= 6; ++level) {
      const int m = 1 << level;
      double c = 0.0;
      for (int i = 1; i < m; ++i) {
        const double s = double(i) / m, t = double(i + 1) / m;
        const double d2 = cov_series(spec, t, t) + cov_series(spec, s, s) - 2.0 * cov_series(spec, s, t);
        c = std::max(c, d2 / std::pow(t - s, alpha));
      }
      fitted.push_back(c);
    }
    for (std::size_t i = 1; i < fitted.size(); ++i)
      holder_change = std::max(holder_change, std::abs(fitted[i] / fitted[i - 1] - 1.0));
  }
  require(holder_change <= 0.2, "Holder probe (" + fmt(holder_change) + ")");

  std::string detail = "ball and mass conservation, determinism, PSD (min eig " + fmt(min_eig) +
                       "), increment domination, Holder probe (max change " + fmt(holder_change) + ")";
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form covariance", closed_form_covariance},
      {"sibuya and gamma identities", sibuya_gamma_identities},
      {"monte carlo variance", mc_variance},
      {"fdd covariance", mc_fdd},
      {"poissonization coupling", coupling},
      {"tail-sum asymptotics", techest},
      {"local limit bounds", localclt},
      {"kingman correspondence", kingman},
      {"spectral identity", spectral_identity},
      {"conditional crp fluctuations", crp_fclt},
      {"property suite", properties}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
