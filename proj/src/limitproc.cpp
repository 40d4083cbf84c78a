#include "karlin/limitproc.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "karlin/error.hpp"
#include "karlin/parallel.hpp"
#include "karlin/specfun.hpp"
#include "pmf_walk.hpp"

namespace karlin {

namespace {

constexpr int kPlateauWidth = 32;
constexpr double kTailSumLimit = 1e7;

void check_times(double s, double t) {
  if (!(s > 0.0) || !(t > 0.0)) throw DomainError("covariance times must be positive");
}

// sum_{k > K} k^(2 beta) r(k) with r(k) = Gamma(k - alpha)/k!, summed by the
// recurrence r(k+1) = r(k) (k - alpha)/(k + 1) up to 1e7, then the integral remainder.
double power_weighted_tail(double alpha, double beta, std::int64_t K) {
  if (beta == 0.0) return specfun::gamma_ratio_tail(K, alpha);
  const double two_beta = 2.0 * beta;
  double r = std::exp(specfun::log_gamma_ratio(K + 1, alpha));
  detail::NeumaierSum sum;
  double k = static_cast<double>(K + 1);
  const double limit = std::max(kTailSumLimit, 4.0 * static_cast<double>(K));
  for (; k <= limit; k += 1.0) {
    sum.add(std::pow(k, two_beta) * r);
    r *= (k - alpha) / (k + 1.0);
  }
  // r(k) = k^(-1-alpha) (1 + O(1/k)); integrate x^(2beta-1-alpha) from k - 1/2.
  const double expo = two_beta - alpha;
  sum.add(std::pow(k - 0.5, expo) / (-expo));
  return sum.value();
}

struct SeriesTerms {
  std::vector<double> f1;  // index k, entry 0 unused
  std::vector<double> f2;
};

SeriesTerms series_terms(const CovarianceSpec& spec, double s, double t) {
  const auto K = spec.k_max();
  const auto table = spec.weights().table(static_cast<std::uint64_t>(K));
  const auto& a = *table;
  const double x = s / t;
  const double y = s / (s + t);
  SeriesTerms out;
  out.f1.assign(K + 1, 0.0);
  out.f2.assign(K + 1, 0.0);
  auto g = [&a](std::uint64_t j) { return a[j]; };
  constexpr std::size_t chunk = 256;
  const std::size_t chunks = (static_cast<std::size_t>(K) + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t lo = 1 + c * chunk;
    const std::uint64_t hi = std::min<std::uint64_t>(K, lo + chunk - 1);
    for (std::uint64_t k = lo; k <= hi; ++k) {
      out.f1[k] = a[k] == 0.0 ? 0.0 : a[k] * detail::binomial_walk(g, k, x);
      if (k >= 2) {
        out.f2[k] = detail::binomial_walk([&a, k](std::uint64_t j) { return a[j] * a[k - j]; }, k, y);
      }
    }
  });
  return out;
}

// One series: sum_{k=k0}^{K'} F(k) r(k) + plateau(F / k^(2 beta)) * tail(K').
double truncated_series(const std::vector<double>& f, const std::vector<double>& r, std::int64_t k0,
                        std::int64_t Kp, double beta, double tail) {
  detail::NeumaierSum sum;
  for (std::int64_t k = k0; k <= Kp; ++k) sum.add(f[k] * r[k]);
  double plateau = 0.0;
  for (std::int64_t k = Kp - kPlateauWidth + 1; k <= Kp; ++k) {
    plateau += f[k] / std::pow(static_cast<double>(k), 2.0 * beta);
  }
  plateau /= kPlateauWidth;
  sum.add(plateau * tail);
  return sum.value();
}

// Lower regularized gamma P(k - alpha, x) for k = 1..K through the upward
// recurrence Q(a+1, x) = Q(a, x) + x^a e^-x / Gamma(a+1).
std::vector<double> regularized_lower_sequence(double alpha, double x, std::int64_t K) {
  std::vector<double> p(K + 1, 0.0);
  double q = specfun::regularized_upper_gamma(1.0 - alpha, x);
  const double lx = std::log(x);
  for (std::int64_t k = 1; k <= K; ++k) {
    p[k] = std::max(0.0, 1.0 - q);
    const double a = static_cast<double>(k) - alpha;
    q += std::exp(a * lx - x - std::lgamma(a + 1.0));
  }
  return p;
}

// sum_{k > K} k^(2beta) r(k) P(k - alpha, x).
double truncated_weighted_tail(double alpha, double beta, std::int64_t K, double x,
                               double partial_unweighted) {
  if (beta == 0.0) {
    return std::max(0.0, specfun::truncated_gamma_ratio_total(alpha, x) - partial_unweighted);
  }
  const double two_beta = 2.0 * beta;
  double r = std::exp(specfun::log_gamma_ratio(K + 1, alpha));
  double a = static_cast<double>(K + 1) - alpha;
  double q = specfun::regularized_upper_gamma(a, x);
  const double lx = std::log(x);
  detail::NeumaierSum sum;
  double k = static_cast<double>(K + 1);
  for (; k <= kTailSumLimit; k += 1.0) {
    const double p = std::max(0.0, 1.0 - q);
    if (p < 1e-18 && k > x) break;
    sum.add(std::pow(k, two_beta) * r * p);
    q += std::exp(a * lx - x - std::lgamma(a + 1.0));
    a += 1.0;
    r *= (k - alpha) / (k + 1.0);
  }
  const double p_end = std::max(0.0, 1.0 - q);
  const double expo = two_beta - alpha;
  sum.add(p_end * std::pow(k - 0.5, expo) / (-expo));
  return sum.value();
}

CovEstimate combine(double alpha, double s, double t, double s1_full, double s2_full,
                    double s1_half, double s2_half) {
  const double c1 = alpha * std::pow(t, alpha);
  const double c2 = alpha * std::pow(s + t, alpha);
  CovEstimate out;
  out.value = c1 * s1_full - c2 * s2_full;
  const double half = c1 * s1_half - c2 * s2_half;
  out.est_error = std::abs(out.value - half) + 1e-14 * (c1 * std::abs(s1_full) + c2 * std::abs(s2_full));
  return out;
}

// Weight lookup with snapshot refresh, for the quadrature integrand.
class WeightReader {
 public:
  explicit WeightReader(const WeightSequence& w) : w_(w), table_(w.table(256)) {}
  void reserve(std::uint64_t k) {
    if (k >= table_->size()) table_ = w_.table(k);
  }
  double operator[](std::uint64_t k) const { return (*table_)[k]; }

 private:
  const WeightSequence& w_;
  WeightSequence::Table table_;
};

// Cov(a_X, a_{X+Y}) with X ~ Poisson(lam1), Y ~ Poisson(lam2) independent.
double bivariate_cov(WeightReader& a, double lam1, double lam2) {
  const auto px = detail::poisson_window(lam1);
  const auto py = detail::poisson_window(lam2);
  a.reserve(px.first + px.pmf.size() + py.first + py.pmf.size() + 1);
  std::vector<double> h(px.pmf.size());
  for (std::size_t i = 0; i < px.pmf.size(); ++i) {
    const std::uint64_t x = px.first + i;
    double v = 0.0;
    for (std::size_t j = 0; j < py.pmf.size(); ++j) v += py.pmf[j] * a[x + py.first + j];
    h[i] = v;
  }
  double mu2 = 0.0;
  for (std::size_t i = 0; i < px.pmf.size(); ++i) mu2 += px.pmf[i] * h[i];
  double cov = 0.0;
  for (std::size_t i = 0; i < px.pmf.size(); ++i) {
    cov += px.pmf[i] * a[px.first + i] * (h[i] - mu2);
  }
  return cov;
}

}  // namespace

CovarianceSpec::CovarianceSpec(double alpha, WeightSequence weights, std::int64_t k_max, double tol,
                               std::optional<double> eps)
    : alpha_(alpha), weights_(std::move(weights)), k_max_(k_max), tol_(tol), eps_(eps) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (k_max < 4 * kPlateauWidth) throw DomainError("k_max too small for the plateau window");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  if (eps && !(*eps > 0.0)) throw DomainError("eps must be positive");
  if (!weights_.certified()) throw DomainError("weights carry no certified increment bound");
  if (!(2.0 * weights_.beta() < alpha)) {
    throw DomainError("weight growth exponent must satisfy 2 beta < alpha");
  }
  auto cache = std::make_shared<Cache>();
  const specfun::GammaRatioTable table(alpha, k_max);
  cache->ratios.resize(k_max + 1, 0.0);
  for (std::int64_t k = 1; k <= k_max; ++k) cache->ratios[k] = table.ratio(k);
  const double beta = weights_.beta();
  cache->tail_full = power_weighted_tail(alpha, beta, k_max);
  double between = 0.0;
  for (std::int64_t k = k_max / 2 + 1; k <= k_max; ++k) {
    between += std::pow(static_cast<double>(k), 2.0 * beta) * cache->ratios[k];
  }
  cache->tail_half = cache->tail_full + between;
  cache_ = std::move(cache);
}

CovarianceSpec CovarianceSpec::with_eps(std::optional<double> eps) const {
  CovarianceSpec copy = *this;
  if (eps && !(*eps > 0.0)) throw DomainError("eps must be positive");
  copy.eps_ = eps;
  return copy;
}

double CovarianceSpec::weighted_tail(std::int64_t K) const {
  if (K == k_max_) return cache_->tail_full;
  if (K == k_max_ / 2) return cache_->tail_half;
  return power_weighted_tail(alpha_, weights_.beta(), K);
}

double F1(std::int64_t k, double s, double t, const WeightSequence& w) {
  check_times(s, t);
  if (s > t) throw DomainError("F1 requires s <= t");
  if (k < 1) throw DomainError("F1 requires k >= 1");
  const auto table = w.table(static_cast<std::uint64_t>(k));
  const auto& a = *table;
  return a[k] * detail::binomial_walk([&a](std::uint64_t j) { return a[j]; }, k, s / t);
}

double F2(std::int64_t k, double s, double t, const WeightSequence& w) {
  check_times(s, t);
  if (s > t) throw DomainError("F2 requires s <= t");
  if (k < 2) throw DomainError("F2 requires k >= 2");
  const auto table = w.table(static_cast<std::uint64_t>(k));
  const auto& a = *table;
  const auto kk = static_cast<std::uint64_t>(k);
  return detail::binomial_walk([&a, kk](std::uint64_t j) { return a[j] * a[kk - j]; }, kk,
                               s / (s + t));
}

CovEstimate cov_series_detail(const CovarianceSpec& spec, double s, double t) {
  if (spec.eps()) return cov_truncated_eps_detail(spec, s, t);
  if (s > t) std::swap(s, t);
  if (s == 0.0 && t >= 0.0) return {};
  check_times(s, t);
  const auto terms = series_terms(spec, s, t);
  const auto& r = spec.gamma_ratios();
  const auto K = spec.k_max();
  const double beta = spec.weights().beta();
  const double tail_full = spec.weighted_tail(K);
  const double tail_half = spec.weighted_tail(K / 2);
  auto out = combine(spec.alpha(), s, t,
                     truncated_series(terms.f1, r, 1, K, beta, tail_full),
                     truncated_series(terms.f2, r, 2, K, beta, tail_full),
                     truncated_series(terms.f1, r, 1, K / 2, beta, tail_half),
                     truncated_series(terms.f2, r, 2, K / 2, beta, tail_half));
  if (out.est_error > spec.tol()) {
    throw PrecisionError("covariance series tail estimate exceeds tolerance", out.est_error);
  }
  return out;
}

double cov_series(const CovarianceSpec& spec, double s, double t) {
  return cov_series_detail(spec, s, t).value;
}

CovEstimate cov_truncated_eps_detail(const CovarianceSpec& spec, double s, double t) {
  if (!spec.eps()) throw DomainError("cov_truncated_eps needs eps");
  if (s > t) std::swap(s, t);
  if (s == 0.0 && t >= 0.0) return {};
  check_times(s, t);
  const double alpha = spec.alpha();
  const double scale = std::pow(*spec.eps(), -1.0 / alpha);
  const double x1 = t * scale;
  const double x2 = (s + t) * scale;
  const auto K = spec.k_max();
  const double beta = spec.weights().beta();
  const auto terms = series_terms(spec, s, t);
  const auto& r = spec.gamma_ratios();
  const auto p1 = regularized_lower_sequence(alpha, x1, K);
  const auto p2 = regularized_lower_sequence(alpha, x2, K);
  std::vector<double> r1(K + 1, 0.0);
  std::vector<double> r2(K + 1, 0.0);
  for (std::int64_t k = 1; k <= K; ++k) {
    r1[k] = r[k] * p1[k];
    r2[k] = r[k] * p2[k];
  }
  auto partial = [](const std::vector<double>& v, std::int64_t upto) {
    detail::NeumaierSum sum;
    for (std::int64_t k = 1; k <= upto; ++k) sum.add(v[k]);
    return sum.value();
  };
  const double t1_full = truncated_weighted_tail(alpha, beta, K, x1, partial(r1, K));
  const double t2_full = truncated_weighted_tail(alpha, beta, K, x2, partial(r2, K));
  const double t1_half = truncated_weighted_tail(alpha, beta, K / 2, x1, partial(r1, K / 2));
  const double t2_half = truncated_weighted_tail(alpha, beta, K / 2, x2, partial(r2, K / 2));
  auto out = combine(alpha, s, t, truncated_series(terms.f1, r1, 1, K, beta, t1_full),
                     truncated_series(terms.f2, r2, 2, K, beta, t2_full),
                     truncated_series(terms.f1, r1, 1, K / 2, beta, t1_half),
                     truncated_series(terms.f2, r2, 2, K / 2, beta, t2_half));
  if (out.est_error > spec.tol()) {
    throw PrecisionError("truncated covariance tail estimate exceeds tolerance", out.est_error);
  }
  return out;
}

double cov_truncated_eps(const CovarianceSpec& spec, double s, double t) {
  return cov_truncated_eps_detail(spec, s, t).value;
}

CovEstimate cov_quadrature_detail(const CovarianceSpec& spec, double s, double t) {
  if (s > t) std::swap(s, t);
  if (s == 0.0 && t >= 0.0) return {};
  check_times(s, t);
  using boost::math::quadrature::gauss_kronrod;
  const double alpha = spec.alpha();
  const double beta = spec.weights().beta();
  WeightReader a(spec.weights());
  auto g = [&](double r) { return bivariate_cov(a, r * s, r * (t - s)); };

  CovEstimate out;
  double err = 0.0;
  // r in (0,1] with r = v^(1/(1-alpha)): the integrand becomes g(r)/r * alpha/(1-alpha).
  auto inner = [&](double v) {
    const double r = std::pow(v, 1.0 / (1.0 - alpha));
    if (r <= 0.0) return 0.0;
    return g(r) / r * alpha / (1.0 - alpha);
  };
  out.value += gauss_kronrod<double, 31>::integrate(inner, 0.0, 1.0, 15, 1e-11, &err);
  out.est_error += err;

  // r in [1, R] with u = r^-alpha: alpha r^(-alpha-1) dr = -du.
  const double shape = 1.0 - 2.0 * beta / alpha;
  auto scaled = [&](double R) { return g(R) / std::pow(R, 2.0 * beta); };
  double R = 64.0;
  double c_prev = scaled(R);
  double c_next = c_prev;
  double tail_err = 0.0;
  for (;;) {
    R *= 2.0;
    c_next = scaled(R);
    tail_err = std::abs(c_next - c_prev) * std::pow(R, -alpha * shape) / shape;
    if (tail_err <= 0.25 * spec.tol() || R >= 16384.0) break;
    c_prev = c_next;
  }
  const double tail = c_next * std::pow(R, -alpha * shape) / shape;
  auto outer = [&](double u) { return g(std::pow(u, -1.0 / alpha)); };
  out.value += gauss_kronrod<double, 31>::integrate(outer, std::pow(R, -alpha), 1.0, 15, 1e-11, &err);
  out.est_error += err + tail_err;
  out.value += tail;
  if (out.est_error > spec.tol()) {
    throw PrecisionError("covariance quadrature did not converge", out.est_error);
  }
  return out;
}

double cov_quadrature(const CovarianceSpec& spec, double s, double t) {
  return cov_quadrature_detail(spec, s, t).value;
}

double cov_closed_occupancy(double alpha, double s, double t) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (!(s >= 0.0) || !(t >= 0.0)) throw DomainError("times must be nonnegative");
  if (s == 0.0 || t == 0.0) return 0.0;
  return std::tgamma(1.0 - alpha) * (std::pow(s + t, alpha) - std::pow(std::max(s, t), alpha));
}

double cov_closed_odd(double alpha, double s, double t) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (!(s >= 0.0) || !(t >= 0.0)) throw DomainError("times must be nonnegative");
  return std::tgamma(1.0 - alpha) * std::pow(2.0, alpha - 2.0) *
         (std::pow(s + t, alpha) - std::pow(std::abs(t - s), alpha));
}

std::string to_string(CovMethod m) {
  switch (m) {
    case CovMethod::series: return "series";
    case CovMethod::quadrature: return "quadrature";
    case CovMethod::closed_form: return "closed_form";
  }
  return "unknown";
}

CovMatrix build_cov_matrix(const CovarianceSpec& spec, const std::vector<double>& grid,
                           CovMethod method) {
  if (method == CovMethod::closed_form) {
    return closed_form_matrix(spec.weights().label(), spec.alpha(), grid);
  }
  const std::size_t m = grid.size();
  CovMatrix out;
  out.grid = grid;
  out.method = method;
  out.entries = Eigen::MatrixXd::Zero(m, m);
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) cells.emplace_back(i, j);
  }
  std::vector<CovEstimate> values(cells.size());
  // The series already spreads over workers internally.
  const auto eval = [&](std::size_t c) {
    const auto [i, j] = cells[c];
    values[c] = method == CovMethod::series ? cov_series_detail(spec, grid[i], grid[j])
                                            : cov_quadrature_detail(spec, grid[i], grid[j]);
  };
  if (method == CovMethod::series) {
    for (std::size_t c = 0; c < cells.size(); ++c) eval(c);
  } else {
    parallel_for(cells.size(), eval);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto [i, j] = cells[c];
    out.entries(i, j) = values[c].value;
    out.entries(j, i) = values[c].value;
    out.est_error = std::max(out.est_error, values[c].est_error);
  }
  return out;
}

CovMatrix closed_form_matrix(const std::string& weights_label, double alpha,
                             const std::vector<double>& grid) {
  double (*fn)(double, double, double) = nullptr;
  if (weights_label == "ones") fn = cov_closed_occupancy;
  else if (weights_label == "odd_indicator") fn = cov_closed_odd;
  else throw DomainError("no closed form for weights '" + weights_label + "'");
  const std::size_t m = grid.size();
  CovMatrix out;
  out.grid = grid;
  out.method = CovMethod::closed_form;
  out.entries.resize(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      out.entries(i, j) = out.entries(j, i) = fn(alpha, grid[i], grid[j]);
    }
  }
  return out;
}

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw DomainError("covariance must be square");
  const Eigen::Index m = cov.rows();
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  const double jitters[] = {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8};
  for (double jitter : jitters) {
    Eigen::MatrixXd a = cov;
    a.diagonal().array() += jitter * scale;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) continue;
    Eigen::VectorXd d = ldlt.vectorD();
    if (m > 0 && d.minCoeff() < -1e-14 * scale) continue;
    d = d.cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd l = ldlt.matrixL();
    Eigen::MatrixXd ld = l * d.asDiagonal();
    transform_ = ldlt.transpositionsP().transpose() * ld;
    jitter_ = jitter;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  throw PrecisionError("covariance not positive semidefinite after maximal jitter; minimum eigenvalue " +
                           std::to_string(eig.eigenvalues().minCoeff()),
                       eig.eigenvalues().minCoeff());
}

std::vector<double> GaussianSampler::sample(Rng& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(transform_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd x = transform_ * z;
  return {x.data(), x.data() + x.size()};
}

std::vector<double> sample_gaussian_path(const CovMatrix& cov, Rng& rng) {
  return GaussianSampler(cov.entries).sample(rng);
}

}  // namespace karlin
