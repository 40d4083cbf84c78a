#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace karlin {

/// A real function on [0,1) with its integral.
struct TestFunction {
  enum class Kind { generic, indicator, poly, fourier };

  std::function<double(double)> eval;
  double mean = 0.0;
  std::string label;
  Kind kind = Kind::generic;
  std::vector<double> params;  // indicator: {a, b}; poly: coefficients; fourier: {k}
  double variation = 0.0;      // total variation on [0,1), 0 if unknown

  double operator()(double x) const { return eval(x); }
};

TestFunction make_indicator(double a, double b);
TestFunction make_poly(std::vector<double> coefficients);
TestFunction make_fourier(int k);
/// `indicator a b`, `poly c0 c1 ...`, `fourier k`.
TestFunction parse_test_function(const std::string& text);

/// j * R_j(f) straight from the definition: sum_{k<j} f(k/j) - j * mean. O(j).
double riemann_weight_direct(const TestFunction& f, std::uint64_t j);
/// Same quantity; closed forms for indicator, poly and fourier.
double riemann_weights(const TestFunction& f, std::uint64_t j);

/// Coefficients (a_j) with a_0 = 0 and declared increment bound
/// |a_{i+j} - a_i| <= c_incr * j^beta.
class WeightSequence {
 public:
  using Evaluator = std::function<double(std::uint64_t)>;
  using Table = std::shared_ptr<const std::vector<double>>;

  WeightSequence(std::string label, Evaluator eval, double beta, double c_incr);

  const std::string& label() const noexcept { return label_; }
  double beta() const noexcept { return beta_; }
  double c_incr() const noexcept { return c_incr_; }
  /// True when (beta, c_incr) is a proven bound rather than a placeholder.
  bool certified() const noexcept { return certified_; }
  void set_certified(bool v) { certified_ = v; }

  /// a_j, memoized. Thread safe.
  double operator()(std::uint64_t j) const;
  /// a_j without touching the memo.
  double evaluate(std::uint64_t j) const { return j == 0 ? 0.0 : eval_(j); }

  /// Snapshot of the memo covering at least 0..max_j. Immutable once returned.
  Table table(std::uint64_t max_j) const;

 private:
  struct Memo;
  std::string label_;
  Evaluator eval_;
  double beta_;
  double c_incr_;
  bool certified_ = true;
  std::shared_ptr<Memo> memo_;
};

WeightSequence weights_ones();
WeightSequence weights_odd_indicator();
WeightSequence weights_single_index(std::uint64_t j0);
WeightSequence weights_power(double beta);
WeightSequence weights_zero();
WeightSequence weights_riemann(const TestFunction& f);

/// `ones`, `odd_indicator`, `single_index J`, `power B`, `zero`, `riemann <test function>`.
WeightSequence parse_weights(const std::string& text);

struct IncrementReport {
  double c_hat = 0.0;
  bool pass = false;
};

/// max |a_{i+j} - a_i| / j^beta over a fixed grid of pairs with i + j <= j_max.
IncrementReport verify_increment_condition(const WeightSequence& w, double beta,
                                           std::uint64_t j_max);

}  // namespace karlin
