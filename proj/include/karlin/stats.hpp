#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace karlin::stats {

/// P(D_n < d) for the one-sample Kolmogorov-Smirnov statistic, by the
/// Marsaglia-Tsang-Wang matrix method (asymptotic series for n > 20000).
double ks_cdf(std::uint64_t n, double d);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sided test of the sample against a continuous cdf.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Goodness of fit of counts to probabilities; cells with expected count below
/// min_expected are pooled into one.
ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& observed,
                               const std::vector<double>& probs, double min_expected = 5.0);

/// Homogeneity of two count vectors over the same categories (2 x K table),
/// pooling categories whose combined count is below min_count.
ChiSquareResult chi_square_homogeneity(const std::vector<std::uint64_t>& a,
                                       const std::vector<std::uint64_t>& b,
                                       double min_count = 10.0);

double chi_square_sf(double statistic, int dof);
double normal_cdf(double x);

/// Row-major samples x[r][i]; (1/R) sum_r x_i x_j (zero mean known).
std::vector<std::vector<double>> second_moments(const std::vector<std::vector<double>>& x);
/// Usual unbiased covariance with estimated mean.
std::vector<std::vector<double>> sample_covariance(const std::vector<std::vector<double>>& x);

/// (emp - target) / sqrt((T_ii T_jj + T_ij^2) / R): Gaussian standard errors of
/// zero-mean second moments, evaluated at the target.
std::vector<std::vector<double>> covariance_z_scores(const std::vector<std::vector<double>>& emp,
                                                     const std::vector<std::vector<double>>& target,
                                                     std::uint64_t reps);

double mean(const std::vector<double>& x);
double variance(const std::vector<double>& x);
double median(std::vector<double> x);

}  // namespace karlin::stats
