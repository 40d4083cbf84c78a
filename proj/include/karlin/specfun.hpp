#pragma once

#include <cstdint>
#include <vector>

/// Special-function kernels shared by the covariance, centering and
/// verification code. Everything here is a pure function of its arguments.
namespace karlin::specfun {

/// ln(Gamma(k - alpha) / k!) for k >= 1 and 0 < alpha < 1.
///
/// Evaluated as a difference of log-gamma values for small k and through the
/// Stirling series of the difference (with log1p) for large k, so the result
/// keeps full relative accuracy up to k = 1e9 and beyond.
double log_gamma_ratio(std::int64_t k, double alpha);

/// Precomputed ln(Gamma(k - alpha) / k!) for 1 <= k <= max_k. Immutable.
class GammaRatioTable {
 public:
  GammaRatioTable(double alpha, std::int64_t max_k);

  double alpha() const noexcept { return alpha_; }
  std::int64_t max_k() const noexcept { return max_k_; }

  double log_ratio(std::int64_t k) const { return values_.at(static_cast<std::size_t>(k)); }
  double ratio(std::int64_t k) const;

  /// Entry k holds ln(Gamma(k - alpha)/k!); entry 0 is unused (NaN).
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  double alpha_;
  std::int64_t max_k_;
  std::vector<double> values_;
};

/// Lower incomplete gamma gamma(a, x) = int_0^x t^(a-1) e^(-t) dt.
///
/// Series for x < a + 1, Lentz continued fraction otherwise. The result is
/// accurate to ~1e-14 relative; where Gamma(a) itself overflows (a > 171)
/// the result overflows too, use regularized_lower_gamma instead.
double lower_incomplete_gamma(double a, double x);

/// P(a, x) = gamma(a, x) / Gamma(a).
double regularized_lower_gamma(double a, double x);

/// Q(a, x) = 1 - P(a, x), computed without cancellation for large x.
double regularized_upper_gamma(double a, double x);

/// Sum_{k > K} Gamma(k - alpha)/k! = Gamma(K + 1 - alpha) / (alpha K!).
/// Follows from telescoping j Gamma(j - alpha) - Gamma(j + 1 - alpha) = alpha Gamma(j - alpha).
double gamma_ratio_tail(std::int64_t K, double alpha);

/// Sum_{k >= 1} gamma(k - alpha, x) / k!, i.e. int_0^x z^(-alpha-1) (1 - e^-z) dz.
/// Tends to Gamma(1 - alpha)/alpha as x -> infinity.
double truncated_gamma_ratio_total(double alpha, double x);

/// P(Q_alpha = k) for the alpha-Sibuya law: alpha/Gamma(1-alpha) * Gamma(k-alpha)/Gamma(k+1).
double sibuya_pmf(std::int64_t k, double alpha);

/// Hurwitz zeta sum_{m >= 0} (m + q)^(-s), s > 1, q > 0.
double hurwitz_zeta(double s, double q);

inline double riemann_zeta(double s) { return hurwitz_zeta(s, 1.0); }

}  // namespace karlin::specfun
