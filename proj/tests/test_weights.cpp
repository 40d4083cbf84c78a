#include <gtest/gtest.h>

#include <cmath>

#include "karlin/error.hpp"
#include "karlin/weights.hpp"

using namespace karlin;

TEST(Weights, Builtins) {
  const auto ones = weights_ones();
  EXPECT_EQ(ones(5), 1.0);
  EXPECT_EQ(ones(0), 0.0);
  const auto odd = weights_odd_indicator();
  EXPECT_EQ(odd(4), 0.0);
  EXPECT_EQ(odd(7), 1.0);
  EXPECT_NEAR(weights_power(0.1)(32), std::pow(32.0, 0.1), 1e-15);
  EXPECT_NEAR(weights_power(0.1)(32), 1.4142, 1e-4);
  EXPECT_EQ(weights_single_index(3)(3), 1.0);
  EXPECT_EQ(weights_single_index(3)(4), 0.0);
  EXPECT_EQ(weights_zero()(9), 0.0);
}

TEST(Weights, ParseLabels) {
  EXPECT_EQ(parse_weights("ones").label(), "ones");
  EXPECT_EQ(parse_weights("single_index 2")(2), 1.0);
  EXPECT_NEAR(parse_weights("power 0.2")(10), std::pow(10.0, 0.2), 1e-15);
  EXPECT_EQ(parse_weights("riemann indicator 0 0.5")(3), 0.5);
  EXPECT_THROW(parse_weights("bogus"), ConfigError);
  EXPECT_THROW(parse_weights("power -1"), ConfigError);
  EXPECT_THROW(parse_test_function("indicator 0.7 0.2"), ConfigError);
}

TEST(Weights, PowerAboveOneIsUncertified) {
  EXPECT_TRUE(weights_power(0.9).certified());
  EXPECT_FALSE(weights_power(1.5).certified());
}

TEST(RiemannWeights, SpecValues) {
  const auto half = make_indicator(0.0, 0.5);
  EXPECT_EQ(riemann_weights(half, 3), 0.5);
  EXPECT_EQ(riemann_weights(half, 4), 0.0);
  const auto id = make_poly({0.0, 1.0});
  for (std::uint64_t j : {1, 2, 7, 1000, 123456}) EXPECT_NEAR(riemann_weights(id, j), -0.5, 1e-12);
  const auto c = make_poly({3.0});
  for (std::uint64_t j : {1, 5, 99}) EXPECT_NEAR(riemann_weights(c, j), 0.0, 1e-12);
}

TEST(RiemannWeights, ClosedFormsMatchDirectSum) {
  const std::vector<TestFunction> fs{make_indicator(0.0, 0.5), make_indicator(0.2, 0.7),
                                     make_indicator(1.0 / 3.0, 1.0), make_poly({0.0, 0.0, 1.0}),
                                     make_poly({1.0, -2.0, 0.5, 3.0}), make_fourier(1), make_fourier(3)};
  for (const auto& f : fs) {
    for (std::uint64_t j = 1; j <= 600; ++j) {
      // Direct oracle computed here rather than through the library.
      double s = 0.0;
      for (std::uint64_t k = 0; k < j; ++k) s += f(double(k) / double(j));
      const double want = s - double(j) * f.mean;
      ASSERT_NEAR(riemann_weights(f, j), want, 1e-9 * std::max(1.0, std::abs(s))) << f.label << " j=" << j;
      ASSERT_NEAR(riemann_weight_direct(f, j), want, 1e-9 * std::max(1.0, std::abs(s)));
    }
  }
}

TEST(RiemannWeights, HalfIndicatorIsHalfOddOccupancy) {
  const auto w = weights_riemann(make_indicator(0.0, 0.5));
  const auto odd = weights_odd_indicator();
  for (std::uint64_t j = 1; j <= 1000; ++j) ASSERT_EQ(w(j), 0.5 * odd(j)) << j;
}

TEST(IncrementCondition, SpecValues) {
  auto r = verify_increment_condition(weights_ones(), 0.0, 10000);
  EXPECT_DOUBLE_EQ(r.c_hat, 1.0);
  EXPECT_TRUE(r.pass);
  r = verify_increment_condition(weights_odd_indicator(), 0.0, 10000);
  EXPECT_DOUBLE_EQ(r.c_hat, 1.0);
  EXPECT_TRUE(r.pass);
  r = verify_increment_condition(weights_riemann(make_poly({0.0, 1.0})), 0.0, 10000);
  EXPECT_NEAR(r.c_hat, 0.5, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(IncrementCondition, DeclaredBoundsHoldForShippedFamilies) {
  const std::vector<WeightSequence> ws{
      weights_ones(),
      weights_odd_indicator(),
      weights_single_index(1),
      weights_single_index(17),
      weights_power(0.1),
      weights_power(0.5),
      weights_power(1.0),
      weights_zero(),
      weights_riemann(make_indicator(0.0, 0.5)),
      weights_riemann(make_indicator(0.25, 0.6)),
      weights_riemann(make_poly({0.0, 1.0})),
      weights_riemann(make_poly({1.0, -3.0, 2.0})),
      weights_riemann(make_fourier(2))};
  for (const auto& w : ws) {
    ASSERT_TRUE(w.certified()) << w.label();
    const auto r = verify_increment_condition(w, w.beta(), 10000);
    EXPECT_TRUE(r.pass) << w.label() << " c_hat=" << r.c_hat << " C=" << w.c_incr();
    // |a_j| <= C j^beta is the case i = 0.
    for (std::uint64_t j = 1; j <= 10000; j += 37)
      ASSERT_LE(std::abs(w(j)), w.c_incr() * std::pow(double(j), w.beta()) * (1 + 1e-12)) << w.label();
  }
}

TEST(Weights, TableSnapshotIsConsistent) {
  const auto w = weights_power(0.3);
  const auto t = w.table(5000);
  ASSERT_GE(t->size(), 5001u);
  for (std::uint64_t j = 0; j <= 5000; j += 111) EXPECT_EQ((*t)[j], w.evaluate(j));
}
