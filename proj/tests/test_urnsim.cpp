#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "karlin/freqs.hpp"
#include "karlin/stats.hpp"
#include "karlin/urnsim.hpp"

using namespace karlin;

namespace {

// Forces a fixed label sequence.
class ScriptedLaw final : public UrnLaw {
 public:
  explicit ScriptedLaw(std::vector<std::uint64_t> seq) : seq_(std::move(seq)) {}
  double prob(std::uint64_t) const override { return 0.0; }
  double tail_power_sum(std::uint64_t, int) const override { return 0.0; }
  std::uint64_t counting(double) const override { return 0; }
  std::uint64_t sample(Rng&) const override { return seq_[pos_++ % seq_.size()]; }
  std::uint64_t atom_count() const override { return 100; }
  std::uint64_t dense_bound() const override { return 101; }

 private:
  std::vector<std::uint64_t> seq_;
  mutable std::size_t pos_ = 0;
};

// Mean and variance of the number of occupied urns after n draws.
// Pairs with an urn beyond the head use the first-order expansion of the cross term.
std::pair<double, double> occupied_moments(const FrequencyModel& law, std::uint64_t n, std::uint64_t head) {
  const double dn = double(n);
  std::vector<double> p, q;
  double mean = 0.0, var = 0.0, a_all = 0.0, b_all = 0.0, a_head = 0.0, b_head = 0.0;
  for (std::uint64_t l = 1; l <= 20000000; ++l) {
    const double pl = law.prob(l);
    const double ql = std::exp(dn * std::log1p(-pl));
    mean += 1.0 - ql;
    var += ql * (1.0 - ql);
    a_all += pl * ql;
    b_all += pl * pl * ql * ql;
    if (l <= head) {
      p.push_back(pl);
      q.push_back(ql);
      a_head += pl * ql;
      b_head += pl * pl * ql * ql;
    }
  }
  mean += dn * law.tail_mass(20000000);
  double cross = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (i != j) cross += std::exp(dn * std::log1p(-p[i] - p[j])) - q[i] * q[j];
  cross += -dn * ((a_all * a_all - b_all) - (a_head * a_head - b_head));
  return {mean, var + cross};
}

}  // namespace

TEST(Urnsim, SingleBall) {
  const FrequencyModel law(0.5);
  Rng rng = make_stream(1, 0);
  const auto path = simulate_fixed_n(law, 1, {1.0}, rng);
  ASSERT_EQ(path.counts_at[0].size(), 1u);
  EXPECT_EQ(path.counts_at[0].begin()->second, 1u);
}

TEST(Urnsim, HandEnumeratedOdd) {
  const ScriptedLaw law({1, 1, 2});
  Rng rng = make_stream(1, 0);
  const auto path = simulate_fixed_n(law, 3, {1.0}, rng);
  const auto d = path.occupancy_numbers(0);
  EXPECT_EQ(d, (std::map<std::uint64_t, std::uint64_t>{{1, 1}, {2, 1}}));
  EXPECT_EQ(weighted_sum(path, weights_odd_indicator(), 0), 1.0);
  EXPECT_EQ(weighted_sum(path, weights_ones(), 0), 2.0);
  EXPECT_EQ(weighted_sum(path, weights_single_index(1), 0), 1.0);
}

TEST(Urnsim, OccupiedUrnsMatchExactMoments) {
  const FrequencyModel law(0.5);
  const std::uint64_t n = 100000;
  const auto [mean, var] = occupied_moments(law, n, 1500);
  // Centering with ones is the same expectation.
  EXPECT_NEAR(centering_term(law, weights_ones(), n), mean, 1e-6 * mean);
  const int reps = 200;
  std::vector<double> x(reps);
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_stream(2024, r);
    x[r] = simulate_sums(law, weights_ones(), n, {1.0}, rng)[0];
  }
  EXPECT_LT(std::abs(stats::mean(x) - mean), 5.0 * std::sqrt(var / reps));
  EXPECT_NEAR(stats::variance(x) / var, 1.0, 5.0 * std::sqrt(2.0 / reps));
  // A single replicate is also within 5 sigma.
  EXPECT_LT(std::abs(x[0] - mean), 5.0 * std::sqrt(var));
}

TEST(Urnsim, SameSeedSamePath) {
  const FrequencyModel law(0.6);
  Rng a = make_stream(5, 1), b = make_stream(5, 1);
  const auto pa = simulate_fixed_n(law, 5000, {0.3, 1.0}, a);
  const auto pb = simulate_fixed_n(law, 5000, {0.3, 1.0}, b);
  EXPECT_EQ(pa.counts_at, pb.counts_at);
  EXPECT_EQ(pa.balls, pb.balls);
}

TEST(Urnsim, WeightedSumSpecialCases) {
  const FrequencyModel law(0.5);
  Rng rng = make_stream(3, 0);
  const auto path = simulate_fixed_n(law, 20000, {0.5, 1.0}, rng);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto d = path.occupancy_numbers(i);
    std::uint64_t occupied = 0;
    for (const auto& [j, c] : d) occupied += c;
    EXPECT_EQ(weighted_sum(path, weights_ones(), i), double(occupied));
    EXPECT_EQ(weighted_sum(path, weights_single_index(1), i), double(d.count(1) ? d.at(1) : 0));
  }
}

TEST(Centering, SmallCases) {
  const FrequencyModel law(0.5);
  EXPECT_NEAR(centering_term(law, weights_ones(), 1), 1.0, 1e-12);
  // sum_l 2 p_l (1 - p_l) = 2 (1 - zeta(4)/zeta(2)^2)
  const double z2 = M_PI * M_PI / 6.0, z4 = std::pow(M_PI, 4) / 90.0;
  EXPECT_NEAR(centering_term(law, weights_single_index(1), 2), 2.0 * (1.0 - z4 / (z2 * z2)), 1e-9);
}

TEST(Centering, OnesAgainstDirectSum) {
  const FrequencyModel law(0.5);
  for (std::uint64_t m : {100ULL, 5000ULL}) {
    long double s = 0.0L;
    for (std::uint64_t l = 1; l <= 20000000; ++l) {
      const long double p = law.prob(l);
      s += 1.0L - std::exp(static_cast<long double>(m) * std::log1p(-p));
    }
    s += static_cast<long double>(m) * law.tail_mass(20000000);
    EXPECT_NEAR(centering_term(law, weights_ones(), m), double(s), 1e-6 * double(s)) << m;
  }
}

TEST(Centering, PoissonOnesAndOdd) {
  const FrequencyModel law(0.6);
  const double u = 30000.0;
  long double ones = 0.0L, odd = 0.0L;
  for (std::uint64_t l = 1; l <= 20000000; ++l) {
    const long double x = u * law.prob(l);
    ones += -std::expm1(-x);
    odd += -std::expm1(-2.0 * x) / 2.0;
  }
  const double tail = u * law.tail_mass(20000000);
  EXPECT_NEAR(centering_term_poisson(law, weights_ones(), u), double(ones) + tail, 1e-6 * double(ones));
  EXPECT_NEAR(centering_term_poisson(law, weights_odd_indicator(), u), double(odd) + tail, 1e-6 * double(odd));
}

TEST(Centering, SingleUrnExpectations) {
  const auto w = weights_power(0.5);
  // Binomial expectation by direct pmf sum.
  const std::uint64_t m = 40;
  const double p = 0.3;
  double want = 0.0;
  for (std::uint64_t k = 1; k <= m; ++k)
    want += std::sqrt(double(k)) * std::exp(std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0) +
                                            k * std::log(p) + (m - k) * std::log1p(-p));
  EXPECT_NEAR(binomial_expectation(w, m, p), want, 1e-12);
  double pw = 0.0;
  for (int k = 1; k < 200; ++k) pw += std::sqrt(double(k)) * std::exp(-7.0 + k * std::log(7.0) - std::lgamma(k + 1.0));
  EXPECT_NEAR(poisson_expectation(w, 7.0), pw, 1e-12);
}

TEST(Poissonized, TotalBallsArePoisson) {
  const FrequencyModel law(0.5);
  const std::uint64_t n = 1000;
  const int reps = 10000;
  std::vector<double> total(reps), first(reps), lo(reps), hi(reps);
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_stream(77, r);
    const auto path = simulate_poissonized(law, n, {0.5, 1.0}, rng);
    total[r] = double(path.balls[1]);
    const auto& c1 = path.counts_at[1];
    first[r] = c1.count(1) ? double(c1.at(1)) : 0.0;
    lo[r] = double(path.balls[0]);
    hi[r] = double(path.balls[1] - path.balls[0]);
  }
  const double se_mean = std::sqrt(double(n) / reps);
  EXPECT_LT(std::abs(stats::mean(total) - double(n)), 5.0 * se_mean);
  // Var of the sample variance of Poisson(n) is about 2 n^2 / R.
  EXPECT_LT(std::abs(stats::variance(total) - double(n)), 5.0 * std::sqrt(2.0 * n * n / reps + double(n) / reps));

  const double lam = double(n) * law.prob(1);
  const auto cdf = [lam](double x) {
    if (x < 0) return 0.0;
    double s = 0.0, term = std::exp(-lam);
    for (int k = 0; k <= int(std::floor(x)); ++k) {
      s += term;
      term *= lam / (k + 1);
    }
    return std::min(1.0, s);
  };
  EXPECT_GT(stats::ks_test(first, cdf).p_value, 1e-3);

  const double m_lo = stats::mean(lo), m_hi = stats::mean(hi);
  double cov = 0.0;
  for (int r = 0; r < reps; ++r) cov += (lo[r] - m_lo) * (hi[r] - m_hi);
  const double corr = cov / (reps - 1) / std::sqrt(stats::variance(lo) * stats::variance(hi));
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(double(reps)));
}

TEST(Coupling, IdentityAndLambda) {
  const FrequencyModel law(0.5);
  const std::vector<double> grid{0.1, 0.25, 0.5, 0.75, 1.0};
  const std::uint64_t n = 100000;
  for (int r = 0; r < 5; ++r) {
    Rng rng = make_stream(314, r);
    const auto cp = coupled_pair(law, n, grid, rng);
    for (const auto& w : {weights_ones(), weights_odd_indicator(), weights_power(0.2)}) {
      for (std::size_t i = 0; i < grid.size(); ++i)
        ASSERT_EQ(weighted_sum(cp.discrete_path, w, i), weighted_sum(cp.poisson_at_lambda[i], w));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) ASSERT_EQ(cp.discrete_path.balls[i], balls_at(n, grid[i]));
    EXPECT_LT(std::abs(cp.lambda.back() - 1.0), 5.0 / std::sqrt(double(n)));
  }
}

TEST(Coupling, Reproducible) {
  const FrequencyModel law(0.7);
  Rng a = make_stream(8, 8), b = make_stream(8, 8);
  const auto x = coupled_pair(law, 3000, {0.5, 1.0}, a);
  const auto y = coupled_pair(law, 3000, {0.5, 1.0}, b);
  EXPECT_EQ(x.lambda, y.lambda);
  EXPECT_EQ(x.discrete_path.counts_at, y.discrete_path.counts_at);
}

TEST(Urnsim, CenteringExactness) {
  const FrequencyModel law(0.5);
  const std::vector<double> grid{0.5, 1.0};
  const std::uint64_t n = 20000;
  const int reps = 1000;
  for (const auto& w : {weights_ones(), weights_odd_indicator(), weights_single_index(2)}) {
    std::vector<std::vector<double>> x(grid.size(), std::vector<double>(reps));
    for (int r = 0; r < reps; ++r) {
      Rng rng = make_stream(55, r);
      const auto v = path_W(law, w, n, grid, rng);
      for (std::size_t i = 0; i < grid.size(); ++i) x[i][r] = v[i];
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
      EXPECT_LT(std::abs(stats::mean(x[i])), 4.0 * std::sqrt(stats::variance(x[i]) / reps)) << w.label();
  }
}

TEST(Urnsim, PoissonizedAndDiscreteVariancesAgree) {
  const FrequencyModel law(0.5);
  const std::uint64_t n = 100000;
  const int reps = 1000;
  std::vector<double> d(reps), p(reps);
  for (int r = 0; r < reps; ++r) {
    Rng a = make_stream(606, r);
    d[r] = path_W(law, weights_ones(), n, {1.0}, a)[0];
    Rng b = make_stream(607, r);
    p[r] = path_W_poisson(law, weights_ones(), n, {1.0}, b)[0];
  }
  const double vd = stats::variance(d), vp = stats::variance(p);
  const double se = std::sqrt(2.0 / reps * (vd * vd + vp * vp));
  EXPECT_LT(std::abs(vd - vp), 3.0 * se);
}

TEST(Urnsim, GridValidation) {
  EXPECT_NO_THROW(validate_grid({0.0, 0.5, 1.0}));
  EXPECT_ANY_THROW(validate_grid({}));
  EXPECT_ANY_THROW(validate_grid({0.5, 0.5}));
  EXPECT_ANY_THROW(validate_grid({0.2, 1.2}));
  EXPECT_EQ(balls_at(10, 0.3), 3u);
  EXPECT_EQ(balls_at(100000, 0.29), 29000u);
}
