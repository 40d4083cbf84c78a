#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "karlin/freqs.hpp"
#include "karlin/rng.hpp"
#include "karlin/weights.hpp"

namespace karlin {

struct CrpState {
  double alpha = 0.0;
  double theta = 0.0;
  std::vector<std::uint64_t> table_sizes;  // in order of creation
  std::uint64_t n = 0;
};

/// Probabilities for the next customer: one entry per existing table, then the new table.
std::vector<double> seating_probabilities(const CrpState& state);

/// Seats n customers: table i with probability (n_i - alpha)/(m + theta), a new
/// table with probability (theta + k alpha)/(m + theta).
CrpState crp_run(double alpha, double theta, std::uint64_t n, Rng& rng);

struct CycleType {
  std::map<std::uint64_t, std::uint64_t> counts;  // cycle length -> number of cycles
  std::uint64_t n = 0;
};

CycleType cycle_type(const CrpState& state);
CycleType cycle_type_from_sizes(const std::vector<std::uint64_t>& sizes);

struct LinearStatistic {
  double direct = 0.0;      // sum_j C_j sum_{k<j} f(k/j)
  double decomposed = 0.0;  // sum_j a_j(f) C_j + n * mean(f)
};

LinearStatistic eigen_linear_statistic(const CycleType& ct, const TestFunction& f);

/// {k/j : 0 <= k < j} repeated C_j times, sorted.
std::vector<double> analytic_eigenangles(const CycleType& ct);
/// Eigenangles in [0,1) of an explicit permutation matrix with this cycle type (n <= 64).
std::vector<double> brute_force_eigenangles(const CycleType& ct);
/// The fraction p/q (q <= max_den) nearest to x when within tol, else x itself.
double snap_to_fraction(double x, std::uint64_t max_den, double tol = 1e-8);

/// Finitely many decreasing frequencies plus unrepresented residual mass.
/// Draws landing in the residual come back as kFreshUrn.
class Paintbox final : public UrnLaw {
 public:
  Paintbox(std::vector<double> frequencies, double residual, double alpha, double theta);

  const std::vector<double>& frequencies() const noexcept { return freq_; }
  double residual() const noexcept { return residual_; }
  double alpha() const noexcept { return alpha_; }
  double theta() const noexcept { return theta_; }

  double prob(std::uint64_t ell) const override;
  double tail_power_sum(std::uint64_t L, int r) const override;
  std::uint64_t counting(double x) const override;
  std::uint64_t sample(Rng& rng) const override;
  std::uint64_t atom_count() const override { return freq_.size(); }
  std::uint64_t dense_bound() const override { return freq_.size() + 1; }

 private:
  std::vector<double> freq_;
  double residual_;
  double alpha_;
  double theta_;
  std::vector<double> alias_prob_;
  std::vector<std::uint32_t> alias_;
};

/// Residual allocation V_i ~ Beta(1 - alpha, theta + i alpha), stopped once the
/// residual drops below trunc_mass (or after max_sticks), then sorted.
Paintbox stick_breaking_paintbox(double alpha, double theta, double trunc_mass, Rng& rng,
                                 std::uint64_t max_sticks = 50'000'000);

/// Gamma(1 - alpha) * mean over j in [j_lo, j_hi] of P_j^alpha * j.
double alpha_diversity_estimate(const Paintbox& pb, std::uint64_t j_lo, std::uint64_t j_hi);

struct KingmanReport {
  std::uint64_t n = 0;
  std::uint64_t reps = 0;
  std::vector<std::string> partitions;
  std::vector<std::uint64_t> crp_counts;
  std::vector<std::uint64_t> urn_counts;
  double chi_square = 0.0;
  int dof = 0;
  double p_value = 1.0;
  // P(one block) = prod_{m<n} (m - alpha)/(m + theta); (1 - alpha)/(1 + theta) for n = 2.
  double p_single_block_exact = 0.0;
  double z_crp = 0.0;
  double z_urn = 0.0;
  std::uint64_t max_residual_balls = 0;
  double max_residual = 0.0;
  double share_multi_residual = 0.0;  // replicates with two or more balls in the residual
  bool residual_warning = false;
};

/// Cycle-type law of the CRP against block-size law of the urn scheme run with a
/// fresh paintbox per replicate; chi-square homogeneity test over partitions of n.
KingmanReport kingman_check(double alpha, double theta, std::uint64_t n_small, std::uint64_t reps,
                            std::uint64_t seed, double trunc_mass = 5e-3);

struct CrpFcltOptions {
  double trunc_mass = 1e-6;
  std::int64_t series_k_max = std::int64_t{1} << 14;
};

struct CrpFcltReport {
  double alpha = 0.0;
  double theta = 0.0;
  std::uint64_t n = 0;
  std::uint64_t reps = 0;
  std::vector<double> grid;
  double s_hat = 0.0;
  std::uint64_t s_window_lo = 0;
  std::uint64_t s_window_hi = 0;
  std::uint64_t v_paintbox = 0;
  double paintbox_residual = 0.0;
  std::uint64_t max_residual_balls = 0;
  bool residual_warning = false;
  std::vector<std::vector<double>> limit_cov;      // cov of the limit process for a_j(f)
  // Normalization n^(alpha/2), target (s_hat / Gamma(1 - alpha)) * limit_cov.
  std::vector<std::vector<double>> empirical_cov;
  std::vector<std::vector<double>> target_cov;
  std::vector<std::vector<double>> z_scores;
  // Normalization v_pb(n)^(1/2), target limit_cov.
  std::vector<std::vector<double>> empirical_cov_vpb;
  std::vector<std::vector<double>> z_scores_vpb;
  bool degenerate = false;
};

/// Fixes one paintbox, runs the urn scheme `reps` times with it and compares the
/// grid covariance of (S - E[S | paintbox]) against the scaled limit covariance.
CrpFcltReport crp_fluctuation_path(const TestFunction& f, double alpha, double theta,
                                   std::uint64_t n, const std::vector<double>& grid,
                                   std::uint64_t reps, std::uint64_t seed,
                                   const CrpFcltOptions& options = {});

}  // namespace karlin
