#include "karlin/urnsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "karlin/error.hpp"
#include "pmf_walk.hpp"

namespace karlin {

namespace {

constexpr std::uint64_t kFreshBase = std::uint64_t{1} << 63;

using detail::NeumaierSum;

// Weight lookup that refreshes its memo snapshot when an index runs past it.
class WeightReader {
 public:
  WeightReader(const WeightSequence& w, std::uint64_t hint) : w_(w), table_(w.table(hint)) {}

  double operator()(std::uint64_t k) {
    if (k >= table_->size()) table_ = w_.table(std::max<std::uint64_t>(k, 2 * table_->size()));
    return (*table_)[k];
  }

 private:
  const WeightSequence& w_;
  WeightSequence::Table table_;
};

double binomial_expectation_impl(WeightReader& a, std::uint64_t m, double p) {
  return detail::binomial_walk([&a](std::uint64_t k) { return a(k); }, m, p);
}

double poisson_expectation_impl(WeightReader& a, double u) {
  return detail::poisson_walk([&a](std::uint64_t k) { return a(k); }, u);
}

// Forward difference (Delta^r a)_0 = sum_i (-1)^(r-i) C(r,i) a_i.
double forward_difference_at_zero(WeightReader& a, int r) {
  double sum = 0.0;
  double binom = 1.0;
  for (int i = 0; i <= r; ++i) {
    const double term = binom * a(static_cast<std::uint64_t>(i));
    sum += ((r - i) % 2 == 0) ? term : -term;
    binom = binom * (r - i) / (i + 1);
  }
  return sum;
}

// Shared driver: exact per-urn expectations while intensity * p >= cutoff,
// Newton series E a_K = sum_r c_r (Delta^r a)_0 p^r for the rest, where
// c_r = C(m, r) (binomial) or u^r / r! (Poisson). The remainder after R terms
// is at most 2^R max|Delta a| c_{R+1} sum p^{R+1}.
template <class PerUrn, class Coef>
CenteringResult centering_impl(const UrnLaw& law, const WeightSequence& w, double intensity,
                               WeightReader& a, PerUrn per_urn, Coef coef) {
  CenteringResult result;
  result.budget = kCenteringRelBudget *
                  std::max(1.0, static_cast<double>(law.counting(intensity)));
  std::uint64_t head = law.counting(intensity / kCenteringCutoff);
  head = std::min(head, law.atom_count());
  NeumaierSum sum;
  for (std::uint64_t ell = 1; ell <= head; ++ell) sum.add(per_urn(law.prob(ell)));
  result.head_urns = head;

  const double c1 = w.c_incr();
  double tail = 0.0;
  for (int r = 1; r <= 6; ++r) {
    const double cr = coef(r);
    if (cr == 0.0) {
      result.tail_order = r - 1;
      result.error_bound = 0.0;
      break;
    }
    tail += cr * forward_difference_at_zero(a, r) * law.tail_power_sum(head, r);
    const double next = coef(r + 1);
    const double bound =
        next == 0.0 ? 0.0 : std::ldexp(c1, r) * next * law.tail_power_sum(head, r + 1);
    result.tail_order = r;
    result.error_bound = bound;
    if (bound <= result.budget) break;
  }
  sum.add(tail);
  result.value = sum.value();
  if (!(result.error_bound <= result.budget)) {
    throw PrecisionError("centering tail misses its error budget", result.error_bound);
  }
  return result;
}

}  // namespace

void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw DomainError("grid must be nonempty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw DomainError("grid points must lie in [0,1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("grid must be strictly increasing");
  }
}

std::uint64_t balls_at(std::uint64_t n, double t) {
  const double x = static_cast<double>(n) * t;
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(std::floor(x));
}

std::map<std::uint64_t, std::uint64_t> OccupancyPath::occupancy_numbers(std::size_t i) const {
  std::map<std::uint64_t, std::uint64_t> d;
  for (const auto& [label, count] : counts_at.at(i)) ++d[count];
  return d;
}

OccupancyCounter::OccupancyCounter(std::uint64_t dense_bound)
    : dense_bound_(std::min<std::uint64_t>(dense_bound, std::uint64_t{1} << 26)),
      dense_(dense_bound_, 0) {}

std::uint64_t OccupancyCounter::add(std::uint64_t label) {
  if (label == kFreshUrn) label = kFreshBase + fresh_++;
  if (label < dense_bound_) {
    auto& c = dense_[label];
    if (c == 0) {
      touched_.push_back(label);
      ++occupied_;
    }
    return ++c;
  }
  auto& c = sparse_[label];
  if (c == 0) ++occupied_;
  return ++c;
}

void OccupancyCounter::clear() {
  for (auto label : touched_) dense_[label] = 0;
  touched_.clear();
  sparse_.clear();
  fresh_ = 0;
  occupied_ = 0;
}

UrnCounts OccupancyCounter::snapshot() const {
  UrnCounts out;
  for (auto label : touched_) out.emplace(label, dense_[label]);
  for (const auto& [label, count] : sparse_) out.emplace(label, count);
  return out;
}

double weighted_sum(const UrnCounts& counts, const WeightSequence& w) {
  std::uint64_t max_count = 0;
  for (const auto& kv : counts) max_count = std::max(max_count, kv.second);
  const auto table = w.table(max_count);
  double sum = 0.0;
  for (const auto& kv : counts) sum += (*table)[kv.second];
  return sum;
}

double weighted_sum(const OccupancyPath& path, const WeightSequence& w, std::size_t grid_index) {
  return weighted_sum(path.counts_at.at(grid_index), w);
}

namespace {

// Snapshots of the first k balls for each requested k (nondecreasing).
std::vector<UrnCounts> prefix_snapshots(const UrnLaw& law, const std::vector<std::uint64_t>& labels,
                                        const std::vector<std::uint64_t>& ks) {
  OccupancyCounter counter(law.dense_bound());
  std::vector<UrnCounts> out;
  out.reserve(ks.size());
  std::uint64_t done = 0;
  for (auto k : ks) {
    while (done < k) counter.add(labels[done++]);
    out.push_back(counter.snapshot());
  }
  return out;
}

struct Arrivals {
  std::vector<double> times;
  std::vector<std::uint64_t> labels;
};

// Per ball: one exponential spacing, then one urn draw. Stops once at least
// min_balls balls exist and the last arrival is past `horizon`.
Arrivals draw_arrivals(const UrnLaw& law, double horizon, std::uint64_t min_balls, Rng& rng) {
  Arrivals a;
  a.times.reserve(static_cast<std::size_t>(horizon + 6.0 * std::sqrt(horizon) + 16.0));
  a.labels.reserve(a.times.capacity());
  double tau = 0.0;
  for (;;) {
    tau += standard_exponential(rng);
    a.times.push_back(tau);
    a.labels.push_back(law.sample(rng));
    if (a.times.size() >= min_balls && tau > horizon) break;
  }
  return a;
}

std::uint64_t arrivals_up_to(const std::vector<double>& times, double time) {
  return static_cast<std::uint64_t>(std::upper_bound(times.begin(), times.end(), time) -
                                    times.begin());
}

}  // namespace

OccupancyPath simulate_fixed_n(const UrnLaw& law, std::uint64_t n, const std::vector<double>& grid,
                               Rng& rng) {
  if (n < 1) throw DomainError("n must be >= 1");
  validate_grid(grid);
  OccupancyPath path;
  path.n = n;
  path.grid = grid;
  for (double t : grid) path.balls.push_back(balls_at(n, t));
  std::vector<std::uint64_t> labels(path.balls.back());
  for (auto& l : labels) l = law.sample(rng);
  path.counts_at = prefix_snapshots(law, labels, path.balls);
  return path;
}

OccupancyPath simulate_poissonized(const UrnLaw& law, std::uint64_t n,
                                   const std::vector<double>& grid, Rng& rng) {
  if (n < 1) throw DomainError("n must be >= 1");
  validate_grid(grid);
  const auto arrivals = draw_arrivals(law, static_cast<double>(n), n, rng);
  OccupancyPath path;
  path.n = n;
  path.grid = grid;
  for (double t : grid) path.balls.push_back(arrivals_up_to(arrivals.times, n * t));
  path.counts_at = prefix_snapshots(law, arrivals.labels, path.balls);
  path.arrival_times = arrivals.times;
  return path;
}

CoupledPair coupled_pair(const UrnLaw& law, std::uint64_t n, const std::vector<double>& grid,
                         Rng& rng) {
  if (n < 1) throw DomainError("n must be >= 1");
  validate_grid(grid);
  const auto arrivals = draw_arrivals(law, static_cast<double>(n), n, rng);
  CoupledPair pair;

  auto& pp = pair.poisson_path;
  pp.n = n;
  pp.grid = grid;
  for (double t : grid) pp.balls.push_back(arrivals_up_to(arrivals.times, n * t));
  pp.counts_at = prefix_snapshots(law, arrivals.labels, pp.balls);
  pp.arrival_times = arrivals.times;

  auto& dp = pair.discrete_path;
  dp.n = n;
  dp.grid = grid;
  for (double t : grid) dp.balls.push_back(balls_at(n, t));
  dp.counts_at = prefix_snapshots(law, arrivals.labels, dp.balls);

  std::vector<std::uint64_t> at_lambda;
  for (auto m : dp.balls) {
    const double tau = m == 0 ? 0.0 : arrivals.times[m - 1];
    pair.lambda.push_back(tau / static_cast<double>(n));
    at_lambda.push_back(arrivals_up_to(arrivals.times, tau));
  }
  pair.poisson_at_lambda = prefix_snapshots(law, arrivals.labels, at_lambda);
  return pair;
}

namespace {

class SumTracker {
 public:
  SumTracker(const UrnLaw& law, const WeightSequence& w) : counter_(law.dense_bound()), a_(w, 64) {}

  void add(std::uint64_t label) {
    const auto c = counter_.add(label);
    sum_ += a_(c) - a_(c - 1);
  }
  double sum() const { return sum_; }

 private:
  OccupancyCounter counter_;
  WeightReader a_;
  double sum_ = 0.0;
};

}  // namespace

std::vector<double> simulate_sums(const UrnLaw& law, const WeightSequence& w, std::uint64_t n,
                                  const std::vector<double>& grid, Rng& rng,
                                  std::uint64_t* fresh_balls) {
  validate_grid(grid);
  SumTracker tracker(law, w);
  std::vector<double> out;
  out.reserve(grid.size());
  std::uint64_t done = 0;
  std::uint64_t fresh = 0;
  for (double t : grid) {
    const auto m = balls_at(n, t);
    for (; done < m; ++done) {
      const auto label = law.sample(rng);
      if (label == kFreshUrn) ++fresh;
      tracker.add(label);
    }
    out.push_back(tracker.sum());
  }
  if (fresh_balls != nullptr) *fresh_balls = fresh;
  return out;
}

std::vector<double> simulate_sums_poisson(const UrnLaw& law, const WeightSequence& w,
                                          std::uint64_t n, const std::vector<double>& grid,
                                          Rng& rng) {
  validate_grid(grid);
  SumTracker tracker(law, w);
  std::vector<double> out;
  out.reserve(grid.size());
  std::size_t next = 0;
  double tau = 0.0;
  const double nd = static_cast<double>(n);
  for (;;) {
    tau += standard_exponential(rng);
    const auto label = law.sample(rng);
    while (next < grid.size() && tau > nd * grid[next]) {
      out.push_back(tracker.sum());
      ++next;
    }
    if (next == grid.size()) break;
    tracker.add(label);
  }
  return out;
}

double binomial_expectation(const WeightSequence& w, std::uint64_t m, double p) {
  WeightReader a(w, 64);
  return binomial_expectation_impl(a, m, p);
}

double poisson_expectation(const WeightSequence& w, double u) {
  WeightReader a(w, 64);
  return poisson_expectation_impl(a, u);
}

CenteringResult centering_binomial(const UrnLaw& law, const WeightSequence& w, std::uint64_t m) {
  CenteringResult result;
  if (m == 0) return result;
  WeightReader a(w, std::min<std::uint64_t>(m, 1 << 20));
  if (m == 1) {
    // sum_ell a_1 p_ell = a_1
    result.value = a(1);
    return result;
  }
  const double md = static_cast<double>(m);
  return centering_impl(
      law, w, md, a, [&](double p) { return binomial_expectation_impl(a, m, p); },
      [md](int r) {
        double c = 1.0;
        for (int i = 0; i < r; ++i) c *= (md - i) / (i + 1.0);
        return std::max(c, 0.0);
      });
}

CenteringResult centering_poisson(const UrnLaw& law, const WeightSequence& w, double u) {
  if (!(u >= 0.0)) throw DomainError("Poisson intensity must be >= 0");
  CenteringResult result;
  if (u == 0.0) return result;
  WeightReader a(w, static_cast<std::uint64_t>(std::min(u, 1048576.0)) + 64);
  return centering_impl(
      law, w, u, a, [&](double p) { return poisson_expectation_impl(a, u * p); },
      [u](int r) {
        double c = 1.0;
        for (int i = 1; i <= r; ++i) c *= u / i;
        return c;
      });
}

double centering_term(const UrnLaw& law, const WeightSequence& w, std::uint64_t m) {
  return centering_binomial(law, w, m).value;
}

double centering_term_poisson(const UrnLaw& law, const WeightSequence& w, double u) {
  return centering_poisson(law, w, u).value;
}

CenteringTable build_centering_table(const UrnLaw& law, const WeightSequence& w,
                                     const std::vector<std::uint64_t>& ms) {
  CenteringTable table;
  table.law = &law;
  table.weights = &w;
  int max_order = 0;
  for (auto m : ms) {
    if (table.values.count(m)) continue;
    const auto r = centering_binomial(law, w, m);
    table.values[m] = r.value;
    max_order = std::max(max_order, r.tail_order);
  }
  std::ostringstream os;
  os << "exact per-urn sums while m p >= " << kCenteringCutoff << ", Newton series of order "
     << max_order << " beyond";
  table.tail_order = os.str();
  return table;
}

double sigma_n(const UrnLaw& law, std::uint64_t n) {
  return std::sqrt(static_cast<double>(law.counting(static_cast<double>(n))));
}

std::vector<double> path_W(const UrnLaw& law, const WeightSequence& w, std::uint64_t n,
                           const std::vector<double>& grid, Rng& rng) {
  auto sums = simulate_sums(law, w, n, grid, rng);
  // v(n) = 0 leaves the scale undefined; the unnormalized value is reported.
  const double sigma = std::max(1.0, sigma_n(law, n));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sums[i] = (sums[i] - centering_term(law, w, balls_at(n, grid[i]))) / sigma;
  }
  return sums;
}

std::vector<double> path_W_poisson(const UrnLaw& law, const WeightSequence& w, std::uint64_t n,
                                   const std::vector<double>& grid, Rng& rng) {
  auto sums = simulate_sums_poisson(law, w, n, grid, rng);
  // v(n) = 0 leaves the scale undefined; the unnormalized value is reported.
  const double sigma = std::max(1.0, sigma_n(law, n));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sums[i] = (sums[i] - centering_term_poisson(law, w, static_cast<double>(n) * grid[i])) / sigma;
  }
  return sums;
}

}  // namespace karlin
