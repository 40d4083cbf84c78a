#include "karlin/specfun.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_zeta.h>

#include <cmath>
#include <limits>
#include <string>

#include "karlin/error.hpp"

namespace karlin::specfun {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIterations = 100000;

// GSL aborts on error by default; status codes are checked instead.
const bool gsl_handler_disabled = [] {
  gsl_set_error_handler_off();
  return true;
}();

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
}

// B_{2j} / (2j (2j - 1)), j = 1..7.
constexpr double kStirling[] = {1.0 / 12.0,  -1.0 / 360.0,        1.0 / 1260.0, -1.0 / 1680.0,
                                1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0};

// lnGamma(x) - lnGamma(x + d) for x >= 10, d > 0.
double log_gamma_difference_large(double x, double d) {
  const double y = x + d;
  double result = -(x - 0.5) * std::log1p(d / x) - d * std::log(y) + d;
  const double ix = 1.0 / x;
  const double iy = 1.0 / y;
  const double ix2 = ix * ix;
  const double iy2 = iy * iy;
  double px = ix;
  double py = iy;
  for (double c : kStirling) {
    result += c * (px - py);
    px *= ix2;
    py *= iy2;
  }
  return result;
}

// Series for P(a,x), valid and fast for x < a + 1.
double lower_series_sum(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) return sum;
  }
  throw PrecisionError("incomplete gamma series did not converge", std::abs(term / sum));
}

// Continued fraction for Gamma(a,x) e^x x^-a (modified Lentz), x >= a + 1.
double upper_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw PrecisionError("incomplete gamma continued fraction did not converge", 0.0);
}

void check_incomplete_args(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma requires a > 0");
  if (!(x >= 0.0)) throw DomainError("incomplete gamma requires x >= 0");
}

}  // namespace

double log_gamma_ratio(std::int64_t k, double alpha) {
  check_alpha(alpha);
  if (k < 1) throw DomainError("log_gamma_ratio requires k >= 1");
  const double x = static_cast<double>(k) - alpha;
  if (k < 20) return std::lgamma(x) - std::lgamma(static_cast<double>(k) + 1.0);
  return log_gamma_difference_large(x, 1.0 + alpha);
}

GammaRatioTable::GammaRatioTable(double alpha, std::int64_t max_k)
    : alpha_(alpha), max_k_(max_k) {
  check_alpha(alpha);
  if (max_k < 1) throw DomainError("GammaRatioTable requires max_k >= 1");
  values_.resize(static_cast<std::size_t>(max_k) + 1);
  values_[0] = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t k = 1; k <= max_k; ++k) {
    values_[static_cast<std::size_t>(k)] = log_gamma_ratio(k, alpha);
  }
}

double GammaRatioTable::ratio(std::int64_t k) const { return std::exp(log_ratio(k)); }

double lower_incomplete_gamma(double a, double x) {
  check_incomplete_args(a, x);
  if (x == 0.0) return 0.0;
  const double log_prefactor = a * std::log(x) - x;
  if (x < a + 1.0) return std::exp(log_prefactor) * lower_series_sum(a, x);
  return std::tgamma(a) - std::exp(log_prefactor) * upper_continued_fraction(a, x);
}

double regularized_lower_gamma(double a, double x) {
  check_incomplete_args(a, x);
  if (x == 0.0) return 0.0;
  const double log_prefactor = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) return std::exp(log_prefactor) * lower_series_sum(a, x);
  return 1.0 - std::exp(log_prefactor) * upper_continued_fraction(a, x);
}

double regularized_upper_gamma(double a, double x) {
  check_incomplete_args(a, x);
  if (x == 0.0) return 1.0;
  const double log_prefactor = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) return 1.0 - std::exp(log_prefactor) * lower_series_sum(a, x);
  return std::exp(log_prefactor) * upper_continued_fraction(a, x);
}

double gamma_ratio_tail(std::int64_t K, double alpha) {
  check_alpha(alpha);
  if (K < 0) throw DomainError("gamma_ratio_tail requires K >= 0");
  // Gamma(K+1-alpha)/K! = (K+1) * Gamma(K+1-alpha)/(K+1)!
  return std::exp(log_gamma_ratio(K + 1, alpha)) * static_cast<double>(K + 1) / alpha;
}

double truncated_gamma_ratio_total(double alpha, double x) {
  check_alpha(alpha);
  if (!(x >= 0.0)) throw DomainError("truncated_gamma_ratio_total requires x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return std::tgamma(1.0 - alpha) / alpha;
  if (x < 1.0) {
    // int_0^x z^(-alpha-1)(1 - e^-z) dz = sum_m (-1)^(m+1) x^(m-alpha) / (m! (m - alpha))
    double sum = 0.0;
    double power_over_factorial = 1.0;  // x^m / m!
    for (int m = 1; m < 200; ++m) {
      power_over_factorial *= x / m;
      const double term = power_over_factorial / (m - alpha);
      sum += (m % 2 == 1) ? term : -term;
      if (term < kEps * std::abs(sum)) break;
    }
    return sum * std::pow(x, -alpha);
  }
  // Gamma(-alpha, x) = (x^-alpha e^-x - Gamma(1-alpha, x)) / alpha
  const double upper_shifted = std::tgamma(1.0 - alpha) * regularized_upper_gamma(1.0 - alpha, x);
  const double x_pow = std::pow(x, -alpha);
  const double upper_negative = (x_pow * std::exp(-x) - upper_shifted) / alpha;
  return std::tgamma(1.0 - alpha) / alpha - x_pow / alpha + upper_negative;
}

double sibuya_pmf(std::int64_t k, double alpha) {
  check_alpha(alpha);
  if (k < 1) throw DomainError("sibuya_pmf requires k >= 1");
  return alpha / std::tgamma(1.0 - alpha) * std::exp(log_gamma_ratio(k, alpha));
}

double hurwitz_zeta(double s, double q) {
  if (!(s > 1.0) || !(q > 0.0)) throw DomainError("hurwitz_zeta requires s > 1 and q > 0");
  gsl_sf_result result;
  const int status = gsl_sf_hzeta_e(s, q, &result);
  if (status == GSL_EUNDRFLW) return 0.0;
  if (status != GSL_SUCCESS) {
    throw PrecisionError(std::string("hurwitz zeta failed: ") + gsl_strerror(status), result.err);
  }
  return result.val;
}

}  // namespace karlin::specfun
