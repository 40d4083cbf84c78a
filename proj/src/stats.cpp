#include "karlin/stats.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "karlin/error.hpp"

namespace karlin::stats {

namespace {

// Matrix power with a separate base-10 exponent so entries stay representable.
void matrix_power(const Eigen::MatrixXd& a, int ea, Eigen::MatrixXd& v, int& ev, std::uint64_t n) {
  if (n == 1) {
    v = a;
    ev = ea;
    return;
  }
  matrix_power(a, ea, v, ev, n / 2);
  Eigen::MatrixXd b = v * v;
  int eb = 2 * ev;
  if (n % 2 == 1) {
    b = a * b;
    eb += ea;
  }
  const std::ptrdiff_t c = (b.rows() - 1) / 2;
  if (b(c, c) > 1e140) {
    b *= 1e-140;
    eb += 140;
  }
  v = std::move(b);
  ev = eb;
}

double kolmogorov_asymptotic(double x) {
  if (x <= 0.0) return 0.0;
  if (x < 1.0) {
    // Jacobi theta form, accurate for small x.
    const double pi = M_PI;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double z = (2 * k - 1) * pi / (2.0 * x);
      s += std::exp(-z * z / 2.0);
    }
    return std::sqrt(2.0 * pi) / x * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return 1.0 - 2.0 * s;
}

}  // namespace

double ks_cdf(std::uint64_t n, double d) {
  if (n == 0) throw DomainError("ks_cdf: n must be positive");
  const double nd = static_cast<double>(n);
  if (d <= 0.5 / nd) return 0.0;
  if (d >= 1.0) return 1.0;
  if (n > 20000) {
    const double sq = std::sqrt(nd);
    return kolmogorov_asymptotic((sq + 0.12 + 0.11 / sq) * d);
  }
  const double s = d * d * nd;
  if (s > 7.24 || (s > 3.76 && n > 99)) {
    return 1.0 - 2.0 * std::exp(-(2.000071 + 0.331 / std::sqrt(nd) + 1.409 / nd) * s);
  }
  const int k = static_cast<int>(nd * d) + 1;
  const int m = 2 * k - 1;
  const double h = k - nd * d;
  Eigen::MatrixXd H(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) H(i, j) = (i - j + 1 < 0) ? 0.0 : 1.0;
  for (int i = 0; i < m; ++i) {
    H(i, 0) -= std::pow(h, i + 1);
    H(m - 1, i) -= std::pow(h, m - i);
  }
  H(m - 1, 0) += (2 * h - 1 > 0 ? std::pow(2 * h - 1, m) : 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i - j + 1 > 0)
        for (int g = 1; g <= i - j + 1; ++g) H(i, j) /= g;
  Eigen::MatrixXd Q;
  int eq = 0;
  matrix_power(H, 0, Q, eq, n);
  double r = Q(k - 1, k - 1);
  for (std::uint64_t i = 1; i <= n; ++i) {
    r = r * static_cast<double>(i) / nd;
    if (r < 1e-140) {
      r *= 1e140;
      eq -= 140;
    }
  }
  return std::clamp(r * std::pow(10.0, eq), 0.0, 1.0);
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("ks_test: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, (i + 1.0) / n - F, F - i / n});
  }
  return {d, 1.0 - ks_cdf(sample.size(), d)};
}

double chi_square_sf(double statistic, int dof) {
  if (dof <= 0) return 1.0;
  if (statistic <= 0.0) return 1.0;
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& observed,
                               const std::vector<double>& probs, double min_expected) {
  if (observed.size() != probs.size()) throw DomainError("chi_square_gof: size mismatch");
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> obs;
  std::vector<double> exp;
  double pool_o = 0.0;
  double pool_e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = probs[i] * total;
    if (e < min_expected) {
      pool_o += static_cast<double>(observed[i]);
      pool_e += e;
    } else {
      obs.push_back(static_cast<double>(observed[i]));
      exp.push_back(e);
    }
  }
  if (pool_e > 0.0) {
    obs.push_back(pool_o);
    exp.push_back(pool_e);
  }
  ChiSquareResult r;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double diff = obs[i] - exp[i];
    r.statistic += diff * diff / exp[i];
  }
  r.dof = static_cast<int>(obs.size()) - 1;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

ChiSquareResult chi_square_homogeneity(const std::vector<std::uint64_t>& a,
                                       const std::vector<std::uint64_t>& b, double min_count) {
  if (a.size() != b.size()) throw DomainError("chi_square_homogeneity: size mismatch");
  std::vector<double> ca;
  std::vector<double> cb;
  double pool_a = 0.0;
  double pool_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    if (x + y < min_count) {
      pool_a += x;
      pool_b += y;
    } else {
      ca.push_back(x);
      cb.push_back(y);
    }
  }
  if (pool_a + pool_b > 0.0) {
    ca.push_back(pool_a);
    cb.push_back(pool_b);
  }
  const double na = std::accumulate(ca.begin(), ca.end(), 0.0);
  const double nb = std::accumulate(cb.begin(), cb.end(), 0.0);
  const double n = na + nb;
  ChiSquareResult r;
  if (na == 0.0 || nb == 0.0) return r;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const double col = ca[i] + cb[i];
    const double ea = col * na / n;
    const double eb = col * nb / n;
    r.statistic += (ca[i] - ea) * (ca[i] - ea) / ea + (cb[i] - eb) * (cb[i] - eb) / eb;
  }
  r.dof = static_cast<int>(ca.size()) - 1;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

std::vector<std::vector<double>> second_moments(const std::vector<std::vector<double>>& x) {
  if (x.empty()) return {};
  const std::size_t d = x.front().size();
  std::vector<std::vector<double>> m(d, std::vector<double>(d, 0.0));
  for (const auto& row : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) m[i][j] += row[i] * row[j];
  const double R = static_cast<double>(x.size());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      m[i][j] /= R;
      m[j][i] = m[i][j];
    }
  return m;
}

std::vector<std::vector<double>> sample_covariance(const std::vector<std::vector<double>>& x) {
  if (x.size() < 2) throw DomainError("sample_covariance: need at least two rows");
  const std::size_t d = x.front().size();
  std::vector<double> mu(d, 0.0);
  for (const auto& row : x)
    for (std::size_t i = 0; i < d; ++i) mu[i] += row[i];
  for (double& v : mu) v /= static_cast<double>(x.size());
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& row : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) c[i][j] += (row[i] - mu[i]) * (row[j] - mu[j]);
  const double denom = static_cast<double>(x.size() - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      c[i][j] /= denom;
      c[j][i] = c[i][j];
    }
  return c;
}

std::vector<std::vector<double>> covariance_z_scores(const std::vector<std::vector<double>>& emp,
                                                     const std::vector<std::vector<double>>& target,
                                                     std::uint64_t reps) {
  const std::size_t d = emp.size();
  std::vector<std::vector<double>> z(d, std::vector<double>(d, 0.0));
  const double R = static_cast<double>(reps);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double se =
          std::sqrt((target[i][i] * target[j][j] + target[i][j] * target[i][j]) / R);
      z[i][j] = se > 0.0 ? (emp[i][j] - target[i][j]) / se : 0.0;
    }
  return z;
}

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double mu = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size() - 1);
}

double median(std::vector<double> x) {
  if (x.empty()) return 0.0;
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
  const double hi = x[mid];
  if (x.size() % 2 == 1) return hi;
  const double lo = *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace karlin::stats
