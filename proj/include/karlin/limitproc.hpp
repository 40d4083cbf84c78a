#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "karlin/rng.hpp"
#include "karlin/weights.hpp"

namespace karlin {

/// Configuration of the limit-covariance engine. Construction refuses weights
/// whose growth exponent reaches alpha/2 or whose increment bound is uncertified.
class CovarianceSpec {
 public:
  static constexpr std::int64_t kDefaultKMax = std::int64_t{1} << 14;
  static constexpr double kDefaultTol = 1e-6;

  CovarianceSpec(double alpha, WeightSequence weights, std::int64_t k_max = kDefaultKMax,
                 double tol = kDefaultTol, std::optional<double> eps = std::nullopt);

  double alpha() const noexcept { return alpha_; }
  const WeightSequence& weights() const noexcept { return weights_; }
  std::int64_t k_max() const noexcept { return k_max_; }
  double tol() const noexcept { return tol_; }
  const std::optional<double>& eps() const noexcept { return eps_; }

  /// Same spec with a different epsilon (nullopt for the untruncated process).
  CovarianceSpec with_eps(std::optional<double> eps) const;

  /// Gamma(k - alpha)/k! for 1 <= k <= k_max.
  const std::vector<double>& gamma_ratios() const { return cache_->ratios; }
  /// sum_{k > K} k^(2 beta) Gamma(k - alpha)/k! for K = k_max and K = k_max/2.
  double weighted_tail(std::int64_t K) const;

 private:
  struct Cache {
    std::vector<double> ratios;
    double tail_full = 0.0;
    double tail_half = 0.0;
  };

  double alpha_;
  WeightSequence weights_;
  std::int64_t k_max_;
  double tol_;
  std::optional<double> eps_;
  std::shared_ptr<const Cache> cache_;
};

/// sum_{j=1}^{k} C(k,j) x^j (1-x)^(k-j) a_j a_k with x = s/t.
double F1(std::int64_t k, double s, double t, const WeightSequence& w);
/// sum_{j=1}^{k-1} C(k,j) y^j (1-y)^(k-j) a_j a_{k-j} with y = s/(s+t).
double F2(std::int64_t k, double s, double t, const WeightSequence& w);

struct CovEstimate {
  double value = 0.0;
  double est_error = 0.0;
};

/// Series evaluation with plateau tail correction; symmetric in (s, t).
CovEstimate cov_series_detail(const CovarianceSpec& spec, double s, double t);
double cov_series(const CovarianceSpec& spec, double s, double t);

/// Adaptive quadrature of the integral representation over r in (0, inf).
CovEstimate cov_quadrature_detail(const CovarianceSpec& spec, double s, double t);
double cov_quadrature(const CovarianceSpec& spec, double s, double t);

/// Gamma(1-alpha) ((s+t)^alpha - max(s,t)^alpha).
double cov_closed_occupancy(double alpha, double s, double t);
/// Gamma(1-alpha) 2^(alpha-2) ((s+t)^alpha - |t-s|^alpha).
double cov_closed_odd(double alpha, double s, double t);

/// Covariance of the epsilon-truncated process: Gamma(k - alpha) replaced by the
/// lower incomplete gamma at t eps^(-1/alpha) and (s+t) eps^(-1/alpha).
CovEstimate cov_truncated_eps_detail(const CovarianceSpec& spec, double s, double t);
double cov_truncated_eps(const CovarianceSpec& spec, double s, double t);

enum class CovMethod { series, quadrature, closed_form };
std::string to_string(CovMethod m);

struct CovMatrix {
  std::vector<double> grid;
  Eigen::MatrixXd entries;
  CovMethod method = CovMethod::series;
  double est_error = 0.0;
};

/// Entries assembled in parallel; the lower triangle mirrors the upper one.
CovMatrix build_cov_matrix(const CovarianceSpec& spec, const std::vector<double>& grid,
                           CovMethod method);
/// Closed forms for `ones` and `odd_indicator`; other weights are rejected.
CovMatrix closed_form_matrix(const std::string& weights_label, double alpha,
                             const std::vector<double>& grid);

/// Factorizes a covariance once (LDLT, diagonal jitter from 1e-12 up to 1e-8)
/// and draws zero-mean Gaussian vectors from it.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Eigen::MatrixXd& cov);

  std::vector<double> sample(Rng& rng) const;
  double jitter() const noexcept { return jitter_; }

 private:
  Eigen::MatrixXd transform_;
  double jitter_ = 0.0;
};

std::vector<double> sample_gaussian_path(const CovMatrix& cov, Rng& rng);

}  // namespace karlin
