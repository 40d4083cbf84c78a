#include "karlin/localclt.hpp"

#include <algorithm>
#include <cmath>

#include "karlin/error.hpp"
#include "karlin/parallel.hpp"
#include "pmf_walk.hpp"

namespace karlin {

namespace {

constexpr double kLn2Pi = 1.8378770664093454836;

// log(n!) - ((n + 1/2) log n - n + log sqrt(2 pi)).
double stirlerr(double n) {
  constexpr double S0 = 1.0 / 12.0;
  constexpr double S1 = 1.0 / 360.0;
  constexpr double S2 = 1.0 / 1260.0;
  constexpr double S3 = 1.0 / 1680.0;
  constexpr double S4 = 1.0 / 1188.0;
  if (n <= 15.0) return std::lgamma(n + 1.0) - (n + 0.5) * std::log(n) + n - 0.5 * kLn2Pi;
  const double nn = n * n;
  if (n > 500.0) return (S0 - S1 / nn) / n;
  if (n > 80.0) return (S0 - (S1 - S2 / nn) / nn) / n;
  if (n > 35.0) return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
  return (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n;
}

// x log(x / m) + m - x, without cancellation near x = m.
double bd0(double x, double m) {
  if (std::abs(x - m) < 0.1 * (x + m)) {
    double v = (x - m) / (x + m);
    double s = (x - m) * v;
    double ej = 2.0 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
    return s;
  }
  return x * std::log(x / m) + m - x;
}

void check_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0,1)");
}

}  // namespace

double log_poisson_pmf(std::uint64_t k, double lambda) {
  if (lambda < 0.0) throw DomainError("Poisson intensity must be nonnegative");
  if (lambda == 0.0) return k == 0 ? 0.0 : -INFINITY;
  if (k == 0) return -lambda;
  const double x = static_cast<double>(k);
  return -stirlerr(x) - bd0(x, lambda) - 0.5 * (kLn2Pi + std::log(x));
}

double log_binomial_pmf(std::uint64_t k, std::uint64_t n, double p) {
  check_p(p);
  if (k > n) return -INFINITY;
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  if (k == 0) return nd * std::log1p(-p);
  if (k == n) return nd * std::log(p);
  const double x = static_cast<double>(k);
  const double lc = stirlerr(nd) - stirlerr(x) - stirlerr(nd - x) - bd0(x, nd * p) - bd0(nd - x, nd * q);
  const double lf = kLn2Pi + std::log(x) + std::log1p(-x / nd);
  return lc - 0.5 * lf;
}

double poisson_pmf(std::uint64_t k, double lambda) { return std::exp(log_poisson_pmf(k, lambda)); }

double binomial_pmf(std::uint64_t k, std::uint64_t n, double p) {
  return std::exp(log_binomial_pmf(k, n, p));
}

IntWindow window_J(double m) {
  if (!(m > 1.0)) throw DomainError("window_J needs m > 1");
  const double half = std::sqrt(m) * std::log(m);
  IntWindow w;
  w.lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(m - half)));
  w.hi = static_cast<std::int64_t>(std::floor(m + half));
  return w;
}

namespace {

IntWindow gap_window(std::uint64_t n, double p, bool clip_to_n) {
  const double m = static_cast<double>(n) * p;
  if (!(m > 1.0)) return IntWindow{};
  IntWindow w = window_J(m);
  if (clip_to_n) w.hi = std::min<std::int64_t>(w.hi, static_cast<std::int64_t>(n));
  return w;
}

}  // namespace

GapResult local_gap_poisson_binomial(std::uint64_t n, double p) {
  if (n < 2) throw DomainError("local gap needs n >= 2");
  if (!(p > 0.0 && p <= 0.5)) throw DomainError("local gap needs p in (0, 1/2]");
  GapResult r;
  r.window = gap_window(n, p, true);
  r.empty_window = r.window.empty();
  const double lambda = static_cast<double>(n) * p;
  for (std::int64_t k = r.window.lo; k <= r.window.hi; ++k) {
    const auto ku = static_cast<std::uint64_t>(k);
    r.value = std::max(r.value, std::abs(poisson_pmf(ku, lambda) - binomial_pmf(ku, n, p)));
  }
  return r;
}

GapResult local_gap_shifted_poisson(std::uint64_t n, double p, int x_points) {
  if (n < 2) throw DomainError("local gap needs n >= 2");
  if (!(p > 0.0 && p <= 0.5)) throw DomainError("local gap needs p in (0, 1/2]");
  if (x_points < 3 || x_points % 2 == 0) throw DomainError("x grid needs an odd number >= 3 of points");
  GapResult r;
  r.window = gap_window(n, p, false);
  r.empty_window = r.window.empty();
  if (r.empty_window) return r;
  const double nd = static_cast<double>(n);
  const double dn = std::sqrt(nd) * std::log(nd);
  const double lambda = nd * p;
  std::vector<double> base;
  for (std::int64_t k = r.window.lo; k <= r.window.hi; ++k)
    base.push_back(poisson_pmf(static_cast<std::uint64_t>(k), lambda));
  for (int i = 0; i < x_points; ++i) {
    const double x = -dn + 2.0 * dn * i / (x_points - 1);
    const double shifted = std::max(0.0, (nd + x) * p);
    double g = 0.0;
    for (std::int64_t k = r.window.lo; k <= r.window.hi; ++k)
      g = std::max(g, std::abs(poisson_pmf(static_cast<std::uint64_t>(k), shifted) -
                               base[static_cast<std::size_t>(k - r.window.lo)]));
    if (g > r.value) {
      r.value = g;
      r.argmax_x = x;
    }
  }
  r.endpoint_max = std::abs(r.argmax_x) == dn;
  return r;
}

TvResult tv_poisson_binomial(std::uint64_t n, double p) {
  if (n < 1) throw DomainError("tv needs n >= 1");
  check_p(p);
  const double lambda = static_cast<double>(n) * p;
  detail::NeumaierSum diff;
  detail::NeumaierSum mass_pois;
  detail::NeumaierSum mass_bin;
  constexpr double target = 1.0 - 1e-14;
  for (std::uint64_t k = 0;; ++k) {
    const double a = poisson_pmf(k, lambda);
    const double b = k <= n ? binomial_pmf(k, n, p) : 0.0;
    diff.add(std::abs(a - b));
    mass_pois.add(a);
    mass_bin.add(b);
    if (static_cast<double>(k) > lambda && mass_pois.value() >= target && mass_bin.value() >= target) break;
  }
  return {0.5 * diff.value(), 2.0 * static_cast<double>(n) * p * p};
}

std::string to_string(Envelope e) {
  return e == Envelope::poisson_binomial ? "poisson_binomial" : "shifted";
}

double bound_envelope(std::uint64_t n, double p, Envelope which, double eps) {
  if (n < 2) throw DomainError("bound_envelope needs n >= 2");
  const double nd = static_cast<double>(n);
  const double lo = std::pow(nd, -eps);
  if (!(p >= lo * (1.0 - 1e-12) && p <= 0.5)) throw DomainError("p outside [n^-eps, 1/2]");
  const double L = std::log(nd);
  const double np = nd * p;
  if (which == Envelope::poisson_binomial) return (p * L * L + L * L * L * L / np) / std::sqrt(np);
  return (std::sqrt(p) * L * L + L * L * L / std::sqrt(np)) / std::sqrt(np);
}

std::vector<double> p_grid(std::uint64_t n, int points, double eps) {
  if (points < 2) throw DomainError("p grid needs at least two points");
  const double a = -eps * std::log(static_cast<double>(n));
  const double b = std::log(0.5);
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  out.front() = std::pow(static_cast<double>(n), -eps);
  out.back() = 0.5;
  return out;
}

namespace {

std::vector<LocalCltRow> evaluate_grid(Envelope which, const std::vector<std::uint64_t>& ns, int points,
                                       double eps, bool spot_checks) {
  std::vector<LocalCltRow> rows;
  for (auto n : ns)
    for (double p : p_grid(n, points, eps)) rows.push_back(LocalCltRow{n, p});
  parallel_for(rows.size(), [&](std::size_t i) {
    auto& row = rows[i];
    const GapResult g = which == Envelope::poisson_binomial ? local_gap_poisson_binomial(row.n, row.p)
                                                            : local_gap_shifted_poisson(row.n, row.p);
    row.lhs = g.value;
    row.empty_window = g.empty_window;
    row.endpoint_max = g.endpoint_max;
    row.envelope = bound_envelope(row.n, row.p, which, eps);
    row.ratio = row.lhs / row.envelope;
    if (spot_checks && which == Envelope::shifted && i % 10 == 0)
      row.dense_lhs = local_gap_shifted_poisson(row.n, row.p, 5 * 42 + 1).value;
  });
  return rows;
}

double max_ratio(const std::vector<LocalCltRow>& rows) {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.ratio);
  return m;
}

}  // namespace

LocalCltReport local_clt_report(Envelope which, const LocalCltOptions& options) {
  LocalCltReport rep;
  rep.which = which;
  rep.rows = evaluate_grid(which, options.n_grid, options.p_points, options.eps, true);
  rep.rows_refined = evaluate_grid(which, options.n_grid_refined, 2 * options.p_points - 1, options.eps, false);
  rep.c_fit = max_ratio(rep.rows);
  rep.c_fit_refined = max_ratio(rep.rows_refined);
  rep.refinement_change = rep.c_fit > 0.0 ? std::abs(rep.c_fit_refined / rep.c_fit - 1.0) : INFINITY;
  rep.stable = rep.refinement_change <= options.stability_tol;
  rep.max_ratio = rep.c_fit;
  bool positive = true;
  for (const auto& r : rep.rows) positive = positive && r.lhs > 0.0 && r.envelope > 0.0;
  rep.pass = positive && rep.stable && rep.max_ratio <= rep.c_fit * (1.0 + 1e-6);
  if (which == Envelope::shifted) {
    std::size_t endpoint = 0;
    for (const auto& r : rep.rows) {
      if (r.endpoint_max) ++endpoint;
      if (r.dense_lhs >= 0.0 && r.lhs > 0.0)
        rep.dense_max_excess = std::max(rep.dense_max_excess, r.dense_lhs / r.lhs - 1.0);
    }
    rep.endpoint_max_share = static_cast<double>(endpoint) / static_cast<double>(rep.rows.size());
  }
  return rep;
}

TvReport tv_report(const LocalCltOptions& options) {
  TvReport rep;
  for (auto n : options.n_grid_refined)
    for (double p : p_grid(n, 2 * options.p_points - 1, options.eps)) rep.rows.push_back(TvRow{n, p});
  parallel_for(rep.rows.size(), [&](std::size_t i) {
    const auto t = tv_poisson_binomial(rep.rows[i].n, rep.rows[i].p);
    rep.rows[i].tv = t.tv;
    rep.rows[i].bound = t.bound;
  });
  rep.pass = true;
  for (const auto& r : rep.rows) {
    rep.pass = rep.pass && r.tv <= r.bound;
    rep.max_tv_over_bound = std::max(rep.max_tv_over_bound, r.tv / r.bound);
  }
  return rep;
}

}  // namespace karlin
