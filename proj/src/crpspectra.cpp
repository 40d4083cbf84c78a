#include "karlin/crpspectra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <random>

#include "karlin/error.hpp"
#include "karlin/limitproc.hpp"
#include "karlin/parallel.hpp"
#include "karlin/stats.hpp"
#include "karlin/urnsim.hpp"
#include "pmf_walk.hpp"

namespace karlin {

namespace {

void check_crp_params(double alpha, double theta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (!(theta > -alpha)) throw DomainError("theta must exceed -alpha");
}

std::string partition_key(const std::vector<std::uint64_t>& desc) {
  std::string s;
  for (std::size_t i = 0; i < desc.size(); ++i) {
    if (i > 0) s += '+';
    s += std::to_string(desc[i]);
  }
  return s;
}

void enumerate_partitions(std::uint64_t rest, std::uint64_t max_part,
                          std::vector<std::uint64_t>& cur,
                          std::vector<std::vector<std::uint64_t>>& out) {
  if (rest == 0) {
    out.push_back(cur);
    return;
  }
  for (std::uint64_t k = std::min(rest, max_part); k >= 1; --k) {
    cur.push_back(k);
    enumerate_partitions(rest - k, k, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<double> seating_probabilities(const CrpState& state) {
  const double m = static_cast<double>(state.n);
  const double k = static_cast<double>(state.table_sizes.size());
  if (state.n == 0) return {1.0};
  std::vector<double> p;
  p.reserve(state.table_sizes.size() + 1);
  for (auto size : state.table_sizes) p.push_back((static_cast<double>(size) - state.alpha) / (m + state.theta));
  p.push_back((state.theta + k * state.alpha) / (m + state.theta));
  return p;
}

CrpState crp_run(double alpha, double theta, std::uint64_t n, Rng& rng) {
  check_crp_params(alpha, theta);
  if (n < 1) throw DomainError("crp_run needs n >= 1");
  CrpState s{alpha, theta, {1}, 1};
  for (std::uint64_t m = 1; m < n; ++m) {
    const double md = static_cast<double>(m);
    const double k = static_cast<double>(s.table_sizes.size());
    double u = uniform01(rng) * (md + theta);
    const double fresh = theta + k * alpha;
    if (u < fresh) {
      s.table_sizes.push_back(1);
    } else {
      u -= fresh;
      std::size_t i = 0;
      for (; i + 1 < s.table_sizes.size(); ++i) {
        const double w = static_cast<double>(s.table_sizes[i]) - alpha;
        if (u < w) break;
        u -= w;
      }
      ++s.table_sizes[i];
    }
    ++s.n;
  }
  return s;
}

CycleType cycle_type_from_sizes(const std::vector<std::uint64_t>& sizes) {
  CycleType ct;
  for (auto s : sizes) {
    if (s == 0) throw DomainError("cycle lengths must be positive");
    ++ct.counts[s];
    ct.n += s;
  }
  return ct;
}

CycleType cycle_type(const CrpState& state) { return cycle_type_from_sizes(state.table_sizes); }

LinearStatistic eigen_linear_statistic(const CycleType& ct, const TestFunction& f) {
  LinearStatistic out;
  detail::NeumaierSum direct;
  detail::NeumaierSum decomposed;
  for (const auto& [j, c] : ct.counts) {
    if (c == 0) continue;
    detail::NeumaierSum inner;
    const double jd = static_cast<double>(j);
    for (std::uint64_t k = 0; k < j; ++k) inner.add(f(static_cast<double>(k) / jd));
    direct.add(static_cast<double>(c) * inner.value());
    decomposed.add(static_cast<double>(c) * riemann_weights(f, j));
  }
  decomposed.add(static_cast<double>(ct.n) * f.mean);
  out.direct = direct.value();
  out.decomposed = decomposed.value();
  return out;
}

std::vector<double> analytic_eigenangles(const CycleType& ct) {
  std::vector<double> out;
  out.reserve(ct.n);
  for (const auto& [j, c] : ct.counts)
    for (std::uint64_t r = 0; r < c; ++r)
      for (std::uint64_t k = 0; k < j; ++k) out.push_back(static_cast<double>(k) / static_cast<double>(j));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> brute_force_eigenangles(const CycleType& ct) {
  if (ct.n == 0) return {};
  if (ct.n > 64) throw DomainError("brute_force_eigenangles is limited to n <= 64");
  const auto n = static_cast<Eigen::Index>(ct.n);
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index start = 0;
  for (const auto& [j, c] : ct.counts)
    for (std::uint64_t r = 0; r < c; ++r) {
      const auto len = static_cast<Eigen::Index>(j);
      for (Eigen::Index i = 0; i < len; ++i) perm(start + (i + 1) % len, start + i) = 1.0;
      start += len;
    }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(perm, false);
  if (solver.info() != Eigen::Success) throw PrecisionError("eigensolver failed", 1.0);
  std::vector<double> out;
  out.reserve(ct.n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> z = solver.eigenvalues()(i);
    double a = std::arg(z) / (2.0 * M_PI);
    if (a < 0.0) a += 1.0;
    if (a >= 1.0 - 1e-12) a = 0.0;
    out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double snap_to_fraction(double x, std::uint64_t max_den, double tol) {
  for (std::uint64_t q = 1; q <= max_den; ++q) {
    const double qd = static_cast<double>(q);
    const double p = std::round(x * qd);
    if (std::abs(x - p / qd) <= tol) return p / qd;
  }
  return x;
}

Paintbox::Paintbox(std::vector<double> frequencies, double residual, double alpha, double theta)
    : freq_(std::move(frequencies)), residual_(residual), alpha_(alpha), theta_(theta) {
  if (!(residual_ >= 0.0 && residual_ < 1.0)) throw DomainError("paintbox residual must lie in [0,1)");
  if (freq_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw DomainError("paintbox has too many atoms");
  detail::NeumaierSum total;
  for (std::size_t i = 0; i < freq_.size(); ++i) {
    if (!(freq_[i] > 0.0)) throw DomainError("paintbox frequencies must be positive");
    if (i > 0 && freq_[i] > freq_[i - 1]) throw DomainError("paintbox frequencies must be decreasing");
    total.add(freq_[i]);
  }
  total.add(residual_);
  const double mass = total.value();
  if (!(mass > 0.0) || mass > 1.0 + 1e-9) throw DomainError("paintbox mass must lie in (0,1]");

  // Vose alias table; the last category is the residual when present.
  const std::size_t cats = freq_.size() + (residual_ > 0.0 ? 1 : 0);
  alias_prob_.assign(cats, 1.0);
  alias_.resize(cats);
  std::vector<double> scaled(cats);
  for (std::size_t i = 0; i < cats; ++i) {
    const double p = i < freq_.size() ? freq_[i] : residual_;
    scaled[i] = p / mass * static_cast<double>(cats);
    alias_[i] = static_cast<std::uint32_t>(i);
  }
  std::vector<std::uint32_t> small;
  std::vector<std::uint32_t> large;
  for (std::size_t i = 0; i < cats; ++i)
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    alias_prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : small) alias_prob_[i] = 1.0;
  for (auto i : large) alias_prob_[i] = 1.0;
}

double Paintbox::prob(std::uint64_t ell) const {
  if (ell == 0 || ell > freq_.size()) return 0.0;
  return freq_[ell - 1];
}

double Paintbox::tail_power_sum(std::uint64_t L, int r) const {
  if (r < 1) throw DomainError("tail_power_sum needs r >= 1");
  detail::NeumaierSum s;
  for (std::size_t i = static_cast<std::size_t>(std::min<std::uint64_t>(L, freq_.size())); i < freq_.size(); ++i)
    s.add(std::pow(freq_[i], r));
  if (r == 1) s.add(residual_);
  return s.value();
}

std::uint64_t Paintbox::counting(double x) const {
  if (!(x > 0.0)) return 0;
  const auto it = std::partition_point(freq_.begin(), freq_.end(), [x](double p) { return 1.0 / p <= x; });
  return static_cast<std::uint64_t>(it - freq_.begin());
}

std::uint64_t Paintbox::sample(Rng& rng) const {
  const auto cats = alias_.size();
  const double u = uniform01(rng) * static_cast<double>(cats);
  auto i = static_cast<std::size_t>(u);
  if (i >= cats) i = cats - 1;
  const double frac = u - static_cast<double>(i);
  const std::size_t pick = frac < alias_prob_[i] ? i : alias_[i];
  return pick < freq_.size() ? pick + 1 : kFreshUrn;
}

Paintbox stick_breaking_paintbox(double alpha, double theta, double trunc_mass, Rng& rng,
                                 std::uint64_t max_sticks) {
  check_crp_params(alpha, theta);
  if (!(trunc_mass > 0.0 && trunc_mass < 1.0)) throw DomainError("trunc_mass must lie in (0,1)");
  std::gamma_distribution<double> g1(1.0 - alpha, 1.0);
  std::vector<double> freq;
  double rest = 1.0;
  for (std::uint64_t i = 1; rest >= trunc_mass && i <= max_sticks; ++i) {
    std::gamma_distribution<double> g2(theta + static_cast<double>(i) * alpha, 1.0);
    const double x = g1(rng);
    const double y = g2(rng);
    const double v = (x + y) > 0.0 ? x / (x + y) : 0.0;
    const double p = rest * v;
    rest *= (1.0 - v);
    if (p > 0.0) freq.push_back(p);
  }
  std::sort(freq.begin(), freq.end(), std::greater<>());
  // The running product drifts by one rounding per stick; take the exact complement instead.
  detail::NeumaierSum total;
  for (auto it = freq.rbegin(); it != freq.rend(); ++it) total.add(*it);
  const double residual = std::max(0.0, 1.0 - total.value());
  return Paintbox(std::move(freq), residual, alpha, theta);
}

double alpha_diversity_estimate(const Paintbox& pb, std::uint64_t j_lo, std::uint64_t j_hi) {
  if (j_lo < 1 || j_hi < j_lo || j_hi > pb.frequencies().size())
    throw DomainError("diversity window outside the generated range");
  detail::NeumaierSum s;
  for (std::uint64_t j = j_lo; j <= j_hi; ++j)
    s.add(std::pow(pb.frequencies()[j - 1], pb.alpha()) * static_cast<double>(j));
  return std::tgamma(1.0 - pb.alpha()) * s.value() / static_cast<double>(j_hi - j_lo + 1);
}

KingmanReport kingman_check(double alpha, double theta, std::uint64_t n_small, std::uint64_t reps,
                            std::uint64_t seed, double trunc_mass) {
  check_crp_params(alpha, theta);
  if (n_small < 1 || n_small > 8) throw DomainError("kingman_check needs 1 <= n <= 8");
  if (reps < 1) throw DomainError("kingman_check needs reps >= 1");

  std::vector<std::vector<std::uint64_t>> parts;
  std::vector<std::uint64_t> cur;
  enumerate_partitions(n_small, n_small, cur, parts);
  std::map<std::vector<std::uint64_t>, std::size_t> index;
  for (std::size_t i = 0; i < parts.size(); ++i) index[parts[i]] = i;

  std::vector<std::uint32_t> crp_cell(reps);
  std::vector<std::uint32_t> urn_cell(reps);
  std::vector<std::uint32_t> dust(reps);
  std::vector<double> resid(reps);
  const std::uint64_t urn_seed = splitmix64(seed ^ 0x6b696e676d616e00ULL);

  parallel_for(reps, [&](std::size_t r) {
    Rng a = make_stream(seed, r);
    auto state = crp_run(alpha, theta, n_small, a);
    auto sizes = state.table_sizes;
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    crp_cell[r] = static_cast<std::uint32_t>(index.at(sizes));

    Rng b = make_stream(urn_seed, r);
    const auto pb = stick_breaking_paintbox(alpha, theta, trunc_mass, b);
    std::map<std::uint64_t, std::uint64_t> blocks;
    std::vector<std::uint64_t> urn_sizes;
    std::uint32_t fresh = 0;
    for (std::uint64_t i = 0; i < n_small; ++i) {
      const auto label = pb.sample(b);
      if (label == kFreshUrn) {
        ++fresh;
        urn_sizes.push_back(1);
      } else {
        ++blocks[label];
      }
    }
    for (const auto& kv : blocks) urn_sizes.push_back(kv.second);
    std::sort(urn_sizes.begin(), urn_sizes.end(), std::greater<>());
    urn_cell[r] = static_cast<std::uint32_t>(index.at(urn_sizes));
    dust[r] = fresh;
    resid[r] = pb.residual();
  });

  KingmanReport rep;
  rep.n = n_small;
  rep.reps = reps;
  rep.crp_counts.assign(parts.size(), 0);
  rep.urn_counts.assign(parts.size(), 0);
  std::uint64_t multi = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    ++rep.crp_counts[crp_cell[r]];
    ++rep.urn_counts[urn_cell[r]];
    rep.max_residual_balls = std::max<std::uint64_t>(rep.max_residual_balls, dust[r]);
    rep.max_residual = std::max(rep.max_residual, resid[r]);
    if (dust[r] >= 2) ++multi;
  }
  for (const auto& p : parts) rep.partitions.push_back(partition_key(p));
  const auto chi = stats::chi_square_homogeneity(rep.crp_counts, rep.urn_counts);
  rep.chi_square = chi.statistic;
  rep.dof = chi.dof;
  rep.p_value = chi.p_value;

  double p1 = 1.0;
  for (std::uint64_t m = 1; m < n_small; ++m)
    p1 *= (static_cast<double>(m) - alpha) / (static_cast<double>(m) + theta);
  rep.p_single_block_exact = p1;
  const double R = static_cast<double>(reps);
  const double se = std::sqrt(p1 * (1.0 - p1) / R);
  const std::size_t single = index.at({n_small});
  if (se > 0.0) {
    rep.z_crp = (static_cast<double>(rep.crp_counts[single]) / R - p1) / se;
    rep.z_urn = (static_cast<double>(rep.urn_counts[single]) / R - p1) / se;
  }
  rep.share_multi_residual = static_cast<double>(multi) / R;
  // Only replicates with two or more residual balls can have a distorted partition.
  rep.residual_warning = rep.share_multi_residual > 1e-2;
  return rep;
}

CrpFcltReport crp_fluctuation_path(const TestFunction& f, double alpha, double theta,
                                   std::uint64_t n, const std::vector<double>& grid,
                                   std::uint64_t reps, std::uint64_t seed,
                                   const CrpFcltOptions& options) {
  check_crp_params(alpha, theta);
  validate_grid(grid);
  if (n < 1) throw DomainError("crp_fluctuation_path needs n >= 1");
  if (reps < 2) throw DomainError("crp_fluctuation_path needs reps >= 2");

  CrpFcltReport rep;
  rep.alpha = alpha;
  rep.theta = theta;
  rep.n = n;
  rep.reps = reps;
  rep.grid = grid;

  Rng pb_rng = make_stream(seed, std::numeric_limits<std::uint64_t>::max());
  const auto pb = stick_breaking_paintbox(alpha, theta, options.trunc_mass, pb_rng);
  rep.paintbox_residual = pb.residual();
  rep.v_paintbox = pb.counting(static_cast<double>(n));
  const std::uint64_t atoms = pb.frequencies().size();
  rep.s_window_lo = std::clamp<std::uint64_t>(rep.v_paintbox / 4, 1, atoms);
  rep.s_window_hi = std::clamp<std::uint64_t>(4 * rep.v_paintbox, rep.s_window_lo, atoms);
  rep.s_hat = alpha_diversity_estimate(pb, rep.s_window_lo, rep.s_window_hi);

  const auto w = weights_riemann(f);
  const std::size_t d = grid.size();
  std::vector<double> centers(d);
  for (std::size_t i = 0; i < d; ++i) centers[i] = centering_term(pb, w, balls_at(n, grid[i]));

  const CovarianceSpec spec(alpha, w, options.series_k_max);
  rep.limit_cov.assign(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      rep.limit_cov[i][j] = cov_series(spec, grid[i], grid[j]);
      rep.limit_cov[j][i] = rep.limit_cov[i][j];
    }

  std::vector<std::vector<double>> raw(reps);
  std::vector<std::uint64_t> dust(reps, 0);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng = make_stream(seed, r);
    auto sums = simulate_sums(pb, w, n, grid, rng, &dust[r]);
    for (std::size_t i = 0; i < d; ++i) sums[i] -= centers[i];
    raw[r] = std::move(sums);
  });
  rep.max_residual_balls = *std::max_element(dust.begin(), dust.end());
  rep.residual_warning = rep.max_residual_balls > 10;

  const double scale = std::pow(static_cast<double>(n), alpha / 2.0);
  const double scale_vpb = std::sqrt(std::max<double>(1.0, static_cast<double>(rep.v_paintbox)));
  std::vector<std::vector<double>> x(reps, std::vector<double>(d));
  std::vector<std::vector<double>> y(reps, std::vector<double>(d));
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      x[r][i] = raw[r][i] / scale;
      y[r][i] = raw[r][i] / scale_vpb;
    }
  rep.empirical_cov = stats::second_moments(x);
  rep.empirical_cov_vpb = stats::second_moments(y);

  const double factor = rep.s_hat / std::tgamma(1.0 - alpha);
  rep.target_cov = rep.limit_cov;
  for (auto& row : rep.target_cov)
    for (double& v : row) v *= factor;
  rep.z_scores = stats::covariance_z_scores(rep.empirical_cov, rep.target_cov, reps);
  rep.z_scores_vpb = stats::covariance_z_scores(rep.empirical_cov_vpb, rep.limit_cov, reps);

  bool all_zero = true;
  for (const auto& row : raw)
    for (double v : row) all_zero = all_zero && std::abs(v) < 1e-9;
  bool target_zero = true;
  for (const auto& row : rep.limit_cov)
    for (double v : row) target_zero = target_zero && v == 0.0;
  rep.degenerate = all_zero && target_zero;
  return rep;
}

}  // namespace karlin
