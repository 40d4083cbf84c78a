#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace karlin::detail {

class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// E g(K) where the pmf of K is walked outward from `mode` via the ratios
/// up(k) = w_{k+1}/w_k and down(k) = w_{k-1}/w_k, starting from weight 1 at the
/// mode and normalizing by the accumulated mass. A direction stops once the
/// geometric bound on its remaining mass drops below 1e-17 of the total.
template <class G, class Up, class Down>
double walk_expectation(G g, std::uint64_t mode, std::uint64_t kmax, Up up, Down down) {
  NeumaierSum mass;
  NeumaierSum value;
  mass.add(1.0);
  value.add(g(mode));
  double wk = 1.0;
  for (std::uint64_t k = mode; k < kmax; ++k) {
    const double r = up(k);
    wk *= r;
    if (wk == 0.0) break;
    mass.add(wk);
    value.add(wk * g(k + 1));
    if (r < 1.0 && wk / (1.0 - r) < 1e-17 * mass.value()) break;
  }
  wk = 1.0;
  for (std::uint64_t k = mode; k > 0; --k) {
    const double r = down(k);
    wk *= r;
    if (wk == 0.0) break;
    mass.add(wk);
    value.add(wk * g(k - 1));
    if (r < 1.0 && wk / (1.0 - r) < 1e-17 * mass.value()) break;
  }
  return value.value() / mass.value();
}

template <class G>
double binomial_walk(G g, std::uint64_t m, double p) {
  if (m == 0 || p <= 0.0) return g(0);
  if (p >= 1.0) return g(m);
  const double odds = p / (1.0 - p);
  const double md = static_cast<double>(m);
  auto mode = static_cast<std::uint64_t>(std::floor((md + 1.0) * p));
  if (mode > m) mode = m;
  return walk_expectation(
      g, mode, m, [md, odds](std::uint64_t k) { return (md - static_cast<double>(k)) / (k + 1.0) * odds; },
      [md, odds](std::uint64_t k) {
        return static_cast<double>(k) / (md - static_cast<double>(k) + 1.0) / odds;
      });
}

template <class G>
double poisson_walk(G g, double u) {
  if (u <= 0.0) return g(0);
  const auto mode = static_cast<std::uint64_t>(std::floor(u));
  return walk_expectation(
      g, mode, std::numeric_limits<std::uint64_t>::max() - 1,
      [u](std::uint64_t k) { return u / (static_cast<double>(k) + 1.0); },
      [u](std::uint64_t k) { return static_cast<double>(k) / u; });
}

/// Normalized Poisson(u) pmf on the window where it is not negligible. The two
/// points above the mode are always kept, so small-u expansions stay intact.
struct PmfWindow {
  std::uint64_t first = 0;
  std::vector<double> pmf;
};

inline PmfWindow poisson_window(double u, double cutoff = 1e-17) {
  PmfWindow w;
  if (u <= 0.0) {
    w.pmf = {1.0};
    return w;
  }
  const auto mode = static_cast<std::uint64_t>(std::floor(u));
  std::vector<double> up{1.0};
  double wk = 1.0;
  for (std::uint64_t k = mode;; ++k) {
    wk *= u / (static_cast<double>(k) + 1.0);
    if (wk < cutoff && k >= mode + 2) break;
    up.push_back(wk);
  }
  std::vector<double> down;
  wk = 1.0;
  for (std::uint64_t k = mode; k > 0; --k) {
    wk *= static_cast<double>(k) / u;
    if (wk < cutoff) break;
    down.push_back(wk);
  }
  w.first = mode - down.size();
  w.pmf.assign(down.rbegin(), down.rend());
  w.pmf.insert(w.pmf.end(), up.begin(), up.end());
  NeumaierSum total;
  for (double x : w.pmf) total.add(x);
  const double inv = 1.0 / total.value();
  for (double& x : w.pmf) x *= inv;
  return w;
}

}  // namespace karlin::detail
