#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace karlin {

/// log P(Poisson(lambda) = k) and log P(Bin(n, p) = k), via Stirling remainders
/// and the deviance bd0 so that large arguments keep full relative accuracy.
double log_poisson_pmf(std::uint64_t k, double lambda);
double log_binomial_pmf(std::uint64_t k, std::uint64_t n, double p);
double poisson_pmf(std::uint64_t k, double lambda);
double binomial_pmf(std::uint64_t k, std::uint64_t n, double p);

struct IntWindow {
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  bool empty() const noexcept { return hi < lo; }
};

/// [m - sqrt(m) ln m, m + sqrt(m) ln m] intersected with the nonnegative integers.
IntWindow window_J(double m);

struct GapResult {
  double value = 0.0;
  IntWindow window;
  bool empty_window = false;
  double argmax_x = 0.0;        // shifted gap only
  bool endpoint_max = false;    // shifted gap only: the max sits at x = -d_n or +d_n
};

/// max over k in J_{np} (clipped to [0, n]) of |P(N(np) = k) - P(Bin(n,p) = k)|.
GapResult local_gap_poisson_binomial(std::uint64_t n, double p);

/// max over x on a symmetric grid of [-d_n, d_n] (d_n = sqrt(n) ln n) with
/// `x_points` points including both endpoints, and over k in J_{np}, of
/// |P(N((n+x)p) = k) - P(N(np) = k)|.
GapResult local_gap_shifted_poisson(std::uint64_t n, double p, int x_points = 43);

struct TvResult {
  double tv = 0.0;
  double bound = 0.0;  // 2 n p^2
};

/// Half the l1 distance between Poisson(np) and Bin(n,p), summed until both
/// laws have accumulated mass 1 - 1e-14.
TvResult tv_poisson_binomial(std::uint64_t n, double p);

enum class Envelope { poisson_binomial, shifted };
std::string to_string(Envelope e);

/// Bracketed right-hand sides without the constant:
///   poisson_binomial: (p ln^2 n + ln^4 n / (np)) / sqrt(np)
///   shifted:          (sqrt(p) ln^2 n + ln^3 n / sqrt(np)) / sqrt(np)
/// Throws DomainError unless n^(-eps) <= p <= 1/2.
double bound_envelope(std::uint64_t n, double p, Envelope which, double eps = 0.9);

/// Log-spaced p from n^(-eps) to 1/2, endpoints exact.
std::vector<double> p_grid(std::uint64_t n, int points, double eps = 0.9);

struct LocalCltRow {
  std::uint64_t n = 0;
  double p = 0.0;
  double lhs = 0.0;
  double envelope = 0.0;
  double ratio = 0.0;
  bool empty_window = false;
  bool endpoint_max = false;
  double dense_lhs = -1.0;  // shifted only: 5x denser x-grid, on every tenth cell
};

struct TvRow {
  std::uint64_t n = 0;
  double p = 0.0;
  double tv = 0.0;
  double bound = 0.0;
};

struct LocalCltOptions {
  std::vector<std::uint64_t> n_grid{1000, 10000, 100000};
  /// Refined grid: n values interleaved, p spacing halved.
  std::vector<std::uint64_t> n_grid_refined{1000, 3162, 10000, 31623, 100000};
  int p_points = 8;
  double eps = 0.9;
  double stability_tol = 0.25;
};

struct LocalCltReport {
  Envelope which = Envelope::poisson_binomial;
  std::string log_base = "natural";
  std::vector<LocalCltRow> rows;
  std::vector<LocalCltRow> rows_refined;
  double c_fit = 0.0;
  double c_fit_refined = 0.0;
  double refinement_change = 0.0;  // |c_fit_refined / c_fit - 1|
  bool stable = false;
  double max_ratio = 0.0;
  bool pass = false;
  // Shifted gap only.
  double endpoint_max_share = 0.0;
  double dense_max_excess = 0.0;  // max (dense_lhs / lhs - 1) over spot checks
};

LocalCltReport local_clt_report(Envelope which, const LocalCltOptions& options = {});

struct TvReport {
  std::vector<TvRow> rows;
  double max_tv_over_bound = 0.0;
  bool pass = false;  // tv <= bound at every row, no tolerance
};

TvReport tv_report(const LocalCltOptions& options = {});

}  // namespace karlin
