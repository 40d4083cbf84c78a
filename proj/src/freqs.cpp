#include "karlin/freqs.hpp"

#include <cmath>

#include "karlin/error.hpp"
#include "karlin/specfun.hpp"

namespace karlin {

namespace {
constexpr double kTwo63 = 9223372036854775808.0;
}

FrequencyModel::FrequencyModel(double alpha, std::uint64_t head) : alpha_(alpha), head_(head) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (head < 1 || head > (1u << 30)) throw DomainError("head size out of range");
  exponent_ = 1.0 / alpha;
  c0_ = 1.0 / specfun::riemann_zeta(exponent_);

  cdf_.resize(head_);
  double acc = 0.0;
  double comp = 0.0;
  for (std::uint64_t i = 0; i < head_; ++i) {
    const double y = prob(i + 1) - comp;
    const double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
    cdf_[i] = acc;
  }
  head_mass_ = acc;

  guide_.resize(head_);
  std::uint32_t i = 0;
  for (std::uint64_t g = 0; g < head_; ++g) {
    const double u = static_cast<double>(g) / static_cast<double>(head_);
    while (i + 1 < head_ && cdf_[i] <= u) ++i;
    guide_[g] = i;
  }
}

double FrequencyModel::prob(std::uint64_t ell) const {
  if (ell < 1) throw DomainError("prob requires ell >= 1");
  return c0_ * std::pow(static_cast<double>(ell), -exponent_);
}

double FrequencyModel::inverse_prob(std::uint64_t ell) const {
  if (ell < 1) throw DomainError("inverse_prob requires ell >= 1");
  return std::pow(static_cast<double>(ell), exponent_) / c0_;
}

std::uint64_t FrequencyModel::counting_v(double x) const {
  if (!(x >= 0.0)) throw DomainError("counting_v requires x >= 0");
  const double guess = std::pow(x * c0_, alpha_);
  if (guess >= 0x1.0p62) throw DomainError("counting_v argument too large");
  auto k = static_cast<std::uint64_t>(std::floor(guess));
  while (inverse_prob(k + 1) <= x) ++k;
  while (k > 0 && inverse_prob(k) > x) --k;
  return k;
}

double FrequencyModel::tail_mass(std::uint64_t L) const {
  if (L == 0) return 1.0;
  return c0_ * specfun::hurwitz_zeta(exponent_, static_cast<double>(L) + 1.0);
}

double FrequencyModel::tail_power_sum(std::uint64_t L, int r) const {
  if (r < 1) throw DomainError("tail_power_sum requires r >= 1");
  if (r == 1) return tail_mass(L);
  return std::pow(c0_, r) * specfun::hurwitz_zeta(r * exponent_, static_cast<double>(L) + 1.0);
}

double FrequencyModel::sigma(double n) const {
  return std::sqrt(static_cast<double>(counting_v(n)));
}

std::uint64_t FrequencyModel::sample(Rng& rng) const {
  const double u = uniform01(rng);
  if (u >= head_mass_) return sample_tail(rng);
  std::uint32_t i = guide_[static_cast<std::size_t>(u * static_cast<double>(head_))];
  while (cdf_[i] <= u) ++i;
  return static_cast<std::uint64_t>(i) + 1;
}

// Rejection from the continuous envelope x^-s on [H, inf); floor(X) + 1 has
// mass proportional to the integral of x^-s over [l-1, l], which dominates l^-s.
std::uint64_t FrequencyModel::sample_tail(Rng& rng) const {
  const double s = exponent_;
  const double h = static_cast<double>(head_);
  for (;;) {
    const double x = h * std::pow(uniform_open0(rng), -1.0 / (s - 1.0));
    if (!(x < kTwo63)) return kFreshUrn;
    const double l = std::floor(x) + 1.0;
    const double accept = (s - 1.0) / (l * std::expm1((1.0 - s) * std::log1p(-1.0 / l)));
    if (uniform01(rng) < accept) return static_cast<std::uint64_t>(l);
  }
}

}  // namespace karlin
