#include "karlin/weights.hpp"

#include <boost/math/special_functions/bernoulli.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "karlin/error.hpp"

namespace karlin {

namespace {

double poly_value(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

// Variation of a polynomial on [0,1]: split at sign changes of p' on a fine grid.
double poly_variation(const std::vector<double>& c) {
  if (c.size() < 2) return 0.0;
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = c[i] * static_cast<double>(i);
  constexpr int cells = 20000;
  std::vector<double> breaks{0.0};
  double prev = poly_value(d, 0.0);
  for (int i = 1; i <= cells; ++i) {
    const double x = static_cast<double>(i) / cells;
    const double cur = poly_value(d, x);
    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
      double lo = static_cast<double>(i - 1) / cells;
      double hi = x;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((poly_value(d, mid) > 0.0) == (prev > 0.0)) lo = mid; else hi = mid;
      }
      breaks.push_back(0.5 * (lo + hi));
    }
    if (cur != 0.0) prev = cur;
  }
  breaks.push_back(1.0);
  double tv = 0.0;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    tv += std::abs(poly_value(c, breaks[i]) - poly_value(c, breaks[i - 1]));
  }
  return tv;
}

// First k in [0, j] with double(k)/double(j) >= a.
std::uint64_t first_at_least(double a, std::uint64_t j) {
  const double jd = static_cast<double>(j);
  double guess = std::ceil(a * jd);
  guess = std::clamp(guess, 0.0, jd);
  auto k = static_cast<std::uint64_t>(guess);
  while (k > 0 && static_cast<double>(k - 1) / jd >= a) --k;
  while (k < j && static_cast<double>(k) / jd < a) ++k;
  return k;
}

double bernoulli(int i) {
  if (i == 0) return 1.0;
  if (i == 1) return -0.5;
  if (i % 2 == 1) return 0.0;
  return boost::math::bernoulli_b2n<double>(i / 2);
}

// j R_j(x^d) = 1/(d+1) sum_{i=1}^{d} C(d+1, i) B_i j^(1-i)
double monomial_riemann(int d, double j) {
  double sum = 0.0;
  double jp = 1.0;
  for (int i = 1; i <= d; ++i) {
    sum += boost::math::binomial_coefficient<double>(d + 1, i) * bernoulli(i) * jp;
    jp /= j;
  }
  return sum / (d + 1);
}

}  // namespace

TestFunction make_indicator(double a, double b) {
  if (!(a >= 0.0 && a <= b && b <= 1.0)) throw DomainError("indicator needs 0 <= a <= b <= 1");
  TestFunction f;
  f.eval = [a, b](double x) { return (a <= x && x < b) ? 1.0 : 0.0; };
  f.mean = b - a;
  std::ostringstream os;
  os << "indicator " << a << ' ' << b;
  f.label = os.str();
  f.kind = TestFunction::Kind::indicator;
  f.params = {a, b};
  if (a < b) f.variation = (a > 0.0 ? 1.0 : 0.0) + (b < 1.0 ? 1.0 : 0.0);
  return f;
}

TestFunction make_poly(std::vector<double> coefficients) {
  if (coefficients.empty()) coefficients.push_back(0.0);
  if (coefficients.size() > 21) throw DomainError("poly degree above 20");
  TestFunction f;
  f.eval = [c = coefficients](double x) { return poly_value(c, x); };
  double mean = 0.0;
  std::ostringstream os;
  os << "poly";
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    mean += coefficients[i] / static_cast<double>(i + 1);
    os << ' ' << coefficients[i];
  }
  f.mean = mean;
  f.label = os.str();
  f.kind = TestFunction::Kind::poly;
  f.variation = poly_variation(coefficients);
  f.params = std::move(coefficients);
  return f;
}

TestFunction make_fourier(int k) {
  if (k < 0) throw DomainError("fourier frequency must be >= 0");
  TestFunction f;
  f.eval = [k](double x) { return std::cos(2.0 * std::numbers::pi * k * x); };
  f.mean = k == 0 ? 1.0 : 0.0;
  f.label = "fourier " + std::to_string(k);
  f.kind = TestFunction::Kind::fourier;
  f.params = {static_cast<double>(k)};
  f.variation = 4.0 * k;
  return f;
}

TestFunction parse_test_function(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::vector<double> args;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      args.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw ConfigError("bad number '" + tok + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError("bad number '" + tok + "' in test function '" + text + "'");
    }
  }
  try {
    if (kind == "indicator" && args.size() == 2) return make_indicator(args[0], args[1]);
    if (kind == "poly" && !args.empty()) return make_poly(args);
    if (kind == "fourier" && args.size() == 1 && args[0] == std::floor(args[0])) {
      return make_fourier(static_cast<int>(args[0]));
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("cannot parse test function '" + text + "'");
}

double riemann_weight_direct(const TestFunction& f, std::uint64_t j) {
  if (j < 1) throw DomainError("riemann weights need j >= 1");
  const double jd = static_cast<double>(j);
  double sum = 0.0;
  for (std::uint64_t k = 0; k < j; ++k) sum += f(static_cast<double>(k) / jd);
  return sum - jd * f.mean;
}

double riemann_weights(const TestFunction& f, std::uint64_t j) {
  if (j < 1) throw DomainError("riemann weights need j >= 1");
  const double jd = static_cast<double>(j);
  switch (f.kind) {
    case TestFunction::Kind::indicator: {
      const auto lo = first_at_least(f.params[0], j);
      const auto hi = first_at_least(f.params[1], j);
      const double count = hi > lo ? static_cast<double>(hi - lo) : 0.0;
      return count - jd * f.mean;
    }
    case TestFunction::Kind::poly: {
      double sum = 0.0;
      for (std::size_t d = 1; d < f.params.size(); ++d) {
        sum += f.params[d] * monomial_riemann(static_cast<int>(d), jd);
      }
      return sum;
    }
    case TestFunction::Kind::fourier: {
      const auto k = static_cast<std::uint64_t>(f.params[0]);
      if (k == 0) return 0.0;
      return k % j == 0 ? jd : 0.0;
    }
    case TestFunction::Kind::generic:
      break;
  }
  return riemann_weight_direct(f, j);
}

struct WeightSequence::Memo {
  std::mutex mutex;
  Table snapshot = std::make_shared<const std::vector<double>>(1, 0.0);
};

WeightSequence::WeightSequence(std::string label, Evaluator eval, double beta, double c_incr)
    : label_(std::move(label)),
      eval_(std::move(eval)),
      beta_(beta),
      c_incr_(c_incr),
      memo_(std::make_shared<Memo>()) {
  if (!(beta >= 0.0)) throw DomainError("weight growth exponent must be >= 0");
  if (!(c_incr > 0.0)) throw DomainError("increment constant must be positive");
}

WeightSequence::Table WeightSequence::table(std::uint64_t max_j) const {
  std::lock_guard lock(memo_->mutex);
  const Table& current = memo_->snapshot;
  if (current->size() > max_j) return current;
  const std::size_t size = std::max<std::size_t>(max_j + 1, 2 * current->size());
  auto next = std::make_shared<std::vector<double>>(*current);
  next->reserve(size);
  for (std::size_t j = next->size(); j < size; ++j) next->push_back(eval_(j));
  memo_->snapshot = next;
  return memo_->snapshot;
}

double WeightSequence::operator()(std::uint64_t j) const {
  if (j == 0) return 0.0;
  {
    std::lock_guard lock(memo_->mutex);
    if (memo_->snapshot->size() > j) return (*memo_->snapshot)[j];
  }
  if (j > (1u << 26)) return eval_(j);
  return (*table(j))[j];
}

WeightSequence weights_ones() {
  return WeightSequence("ones", [](std::uint64_t) { return 1.0; }, 0.0, 1.0);
}

WeightSequence weights_odd_indicator() {
  return WeightSequence("odd_indicator", [](std::uint64_t j) { return j % 2 == 1 ? 1.0 : 0.0; },
                        0.0, 1.0);
}

WeightSequence weights_single_index(std::uint64_t j0) {
  if (j0 < 1) throw DomainError("single_index needs j0 >= 1");
  return WeightSequence("single_index " + std::to_string(j0),
                        [j0](std::uint64_t j) { return j == j0 ? 1.0 : 0.0; }, 0.0, 1.0);
}

WeightSequence weights_power(double beta) {
  if (!(beta >= 0.0)) throw DomainError("power weights need beta >= 0");
  std::ostringstream os;
  os << "power " << beta;
  auto eval = [beta](std::uint64_t j) { return std::pow(static_cast<double>(j), beta); };
  if (beta <= 1.0) return WeightSequence(os.str(), eval, beta, 1.0);
  // (i+j)^beta - i^beta is not bounded by C j^beta uniformly in i once beta > 1.
  WeightSequence w(os.str(), eval, beta, std::numeric_limits<double>::max());
  w.set_certified(false);
  return w;
}

WeightSequence weights_zero() {
  return WeightSequence("zero", [](std::uint64_t) { return 0.0; }, 0.0, 1.0);
}

WeightSequence weights_riemann(const TestFunction& f) {
  // Koksma: |R_j(f)| <= V(f)/j, hence |a_j| <= V and increments are at most 2V.
  double c = 2.0 * f.variation;
  bool certified = f.kind != TestFunction::Kind::generic || f.variation > 0.0;
  if (!(c > 0.0)) c = 1.0;
  WeightSequence w("riemann " + f.label, [f](std::uint64_t j) { return riemann_weights(f, j); },
                   0.0, c);
  w.set_certified(certified);
  return w;
}

WeightSequence parse_weights(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::string rest;
  std::getline(in, rest);
  const auto first = rest.find_first_not_of(' ');
  rest = first == std::string::npos ? std::string() : rest.substr(first);
  try {
    if (kind == "ones" && rest.empty()) return weights_ones();
    if ((kind == "odd_indicator" || kind == "odd") && rest.empty()) return weights_odd_indicator();
    if (kind == "zero" && rest.empty()) return weights_zero();
    if (kind == "single_index" && !rest.empty()) return weights_single_index(std::stoull(rest));
    if (kind == "power" && !rest.empty()) return weights_power(std::stod(rest));
    if (kind == "riemann" && !rest.empty()) return weights_riemann(parse_test_function(rest));
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse weights '" + text + "'");
  }
  throw ConfigError("cannot parse weights '" + text + "'");
}

IncrementReport verify_increment_condition(const WeightSequence& w, double beta,
                                           std::uint64_t j_max) {
  if (j_max < 2) throw DomainError("verify_increment_condition needs j_max >= 2");
  const auto table = w.table(j_max);
  const auto& a = *table;
  std::vector<std::uint64_t> steps;
  for (std::uint64_t j = 1; j <= std::min<std::uint64_t>(64, j_max); ++j) steps.push_back(j);
  for (double x = 64.0 * 1.1; x <= static_cast<double>(j_max); x *= 1.1) {
    const auto j = static_cast<std::uint64_t>(x);
    if (j > steps.back()) steps.push_back(j);
  }
  if (steps.back() != j_max) steps.push_back(j_max);
  IncrementReport report;
  for (std::uint64_t j : steps) {
    const double scale = std::pow(static_cast<double>(j), beta);
    for (std::uint64_t i = 0; i + j <= j_max; ++i) {
      report.c_hat = std::max(report.c_hat, std::abs(a[i + j] - a[i]) / scale);
    }
  }
  report.pass = report.c_hat <= w.c_incr() * (1.0 + 1e-9);
  return report;
}

}  // namespace karlin
