#include <gtest/gtest.h>

#include <boost/math/special_functions/zeta.hpp>
#include <cmath>

#include "karlin/freqs.hpp"
#include "karlin/stats.hpp"

using namespace karlin;

TEST(FrequencyModel, ProbValues) {
  const FrequencyModel m(0.5);
  const double z2 = M_PI * M_PI / 6.0;
  EXPECT_NEAR(m.prob(1), 1.0 / z2, 1e-15);
  EXPECT_NEAR(m.prob(2), 0.25 / z2, 1e-15);
  EXPECT_NEAR(m.prob(1000000) * 1e12, 1.0 / z2, 1e-12);
  const FrequencyModel m7(0.7);
  EXPECT_NEAR(m7.c0(), 1.0 / boost::math::zeta(1.0 / 0.7), 1e-14);
}

TEST(FrequencyModel, CountingValues) {
  const FrequencyModel m(0.5);
  EXPECT_EQ(m.counting_v(100.0), 7u);
  EXPECT_EQ(m.counting_v(1e6), 779u);
  EXPECT_EQ(m.counting_v(1e5), 246u);
  EXPECT_EQ(m.counting_v(1.0 / m.prob(1) * 0.999), 0u);
  EXPECT_EQ(m.counting_v(0.0), 0u);
}

TEST(FrequencyModel, CountingMatchesBruteForce) {
  for (double alpha : {0.3, 0.5, 0.6, 0.9}) {
    const FrequencyModel m(alpha);
    const double c0 = 1.0 / boost::math::zeta(1.0 / alpha);
    std::vector<double> inv;
    for (int i = 1; i <= 1000000; ++i) {
      const double v = std::pow(double(i), 1.0 / alpha) / c0;
      if (v > 1e4 * 1.01) break;
      inv.push_back(v);
    }
    for (int x = 1; x <= 10000; ++x) {
      const auto want = static_cast<std::uint64_t>(
          std::upper_bound(inv.begin(), inv.end(), double(x)) - inv.begin());
      // Exact ties with floating thresholds would be ambiguous; none occur on this grid.
      ASSERT_EQ(m.counting_v(double(x)), want) << "alpha=" << alpha << " x=" << x;
    }
  }
}

TEST(FrequencyModel, TailMass) {
  const FrequencyModel m(0.5);
  EXPECT_NEAR(m.tail_mass(0), 1.0, 1e-15);
  EXPECT_NEAR(m.tail_mass(1), 1.0 - 6.0 / (M_PI * M_PI), 1e-14);
  // Integral bracket: sum_{l > L} l^-2 lies between 1/(L+1) and 1/L.
  const double t = m.tail_mass(10000) / m.c0();
  EXPECT_GT(t, 1.0 / 10001.0);
  EXPECT_LT(t, 1.0 / 10000.0);
  EXPECT_NEAR(m.tail_mass(10000), 6.0793e-5, 1e-8);
}

TEST(FrequencyModel, MassConservation) {
  for (double alpha : {0.3, 0.5, 0.8}) {
    const FrequencyModel m(alpha);
    for (std::uint64_t L : {1ULL, 10ULL, 1000ULL}) {
      double s = 0.0;
      for (std::uint64_t l = 1; l <= L; ++l) s += m.prob(l);
      EXPECT_NEAR(s + m.tail_mass(L), 1.0, 1e-12);
    }
  }
}

TEST(FrequencyModel, TailPowerSum) {
  const FrequencyModel m(0.5);
  double brute = 0.0;
  for (std::uint64_t l = 2000000; l > 100; --l) brute += std::pow(m.prob(l), 2);
  EXPECT_NEAR(m.tail_power_sum(100, 2), brute, 1e-6 * brute);
  EXPECT_NEAR(m.tail_power_sum(100, 1), m.tail_mass(100), 1e-15);
}

TEST(FrequencyModel, SamplerFirstAtomAndChiSquare) {
  const FrequencyModel m(0.5);
  Rng rng = make_stream(7, 0);
  const int draws = 1000000;
  std::vector<std::uint64_t> obs(51, 0);
  std::uint64_t over10 = 0, over100 = 0;
  for (int i = 0; i < draws; ++i) {
    const auto l = m.sample(rng);
    obs[std::min<std::uint64_t>(l, 51) - 1]++;
    over10 += l > 10;
    over100 += l > 100;
  }
  EXPECT_NEAR(double(obs[0]) / draws, 0.6079, 3e-3);
  std::vector<double> probs(51);
  for (int l = 1; l <= 50; ++l) probs[l - 1] = m.prob(l);
  probs[50] = m.tail_mass(50);
  EXPECT_GT(stats::chi_square_gof(obs, probs).p_value, 1e-3);
  for (auto [L, cnt] : {std::pair{10ULL, over10}, std::pair{100ULL, over100}}) {
    const double q = m.tail_mass(L);
    EXPECT_LT(std::abs(double(cnt) / draws - q), 4.0 * std::sqrt(q * (1 - q) / draws)) << L;
  }
}

TEST(FrequencyModel, DeepTailSampling) {
  // Labels past the dense head come from the tail sampler.
  const FrequencyModel m(0.5, 100);
  Rng rng = make_stream(11, 0);
  const int draws = 400000;
  std::uint64_t over = 0, over4 = 0;
  for (int i = 0; i < draws; ++i) {
    const auto l = m.sample(rng);
    over += l > 1000;
    over4 += l > 4000;
  }
  for (auto [L, cnt] : {std::pair{1000ULL, over}, std::pair{4000ULL, over4}}) {
    const double q = m.tail_mass(L);
    EXPECT_LT(std::abs(double(cnt) / draws - q), 4.0 * std::sqrt(q * (1 - q) / draws)) << L;
  }
}

TEST(FrequencyModel, SamplerDeterminism) {
  const FrequencyModel m(0.6);
  Rng a = make_stream(99, 3), b = make_stream(99, 3);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(m.sample(a), m.sample(b));
}
