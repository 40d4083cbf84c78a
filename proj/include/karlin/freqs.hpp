#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "karlin/rng.hpp"

namespace karlin {

/// Label returned by a sampler for a ball that lands outside every stored atom
/// (mass not represented individually). Simulators give each such ball a fresh urn.
inline constexpr std::uint64_t kFreshUrn = std::numeric_limits<std::uint64_t>::max();

/// A law on urn labels 1, 2, ... with nonincreasing probabilities.
class UrnLaw {
 public:
  virtual ~UrnLaw() = default;

  /// p_ell for ell >= 1; 0 past the last atom.
  virtual double prob(std::uint64_t ell) const = 0;

  /// sum_{ell > L} p_ell^r for r >= 1. Unrepresented mass counts towards r = 1 only.
  virtual double tail_power_sum(std::uint64_t L, int r) const = 0;

  /// #{i : 1/p_i <= x}.
  virtual std::uint64_t counting(double x) const = 0;

  /// Draw a label, or kFreshUrn.
  virtual std::uint64_t sample(Rng& rng) const = 0;

  /// Number of stored atoms (max value of uint64 for an infinite family).
  virtual std::uint64_t atom_count() const = 0;

  /// Labels below this bound are small enough for dense per-label storage.
  virtual std::uint64_t dense_bound() const = 0;
};

/// p_j = j^(-1/alpha) / zeta(1/alpha).
class FrequencyModel final : public UrnLaw {
 public:
  static constexpr std::uint64_t kDefaultHead = 10000;

  explicit FrequencyModel(double alpha, std::uint64_t head = kDefaultHead);

  double alpha() const noexcept { return alpha_; }
  double exponent() const noexcept { return exponent_; }
  double c0() const noexcept { return c0_; }

  double prob(std::uint64_t ell) const override;
  /// 1/p_ell, the threshold used by counting_v.
  double inverse_prob(std::uint64_t ell) const;

  double tail_power_sum(std::uint64_t L, int r) const override;
  std::uint64_t counting(double x) const override { return counting_v(x); }
  std::uint64_t sample(Rng& rng) const override;
  std::uint64_t atom_count() const override { return std::numeric_limits<std::uint64_t>::max(); }
  std::uint64_t dense_bound() const override { return head_ + 1; }

  /// Exact #{i : 1/p_i <= x}.
  std::uint64_t counting_v(double x) const;
  /// sum_{ell > L} p_ell.
  double tail_mass(std::uint64_t L) const;
  /// counting_v(n)^(1/2).
  double sigma(double n) const;

 private:
  std::uint64_t sample_tail(Rng& rng) const;

  double alpha_;
  double exponent_;
  double c0_;
  std::uint64_t head_;
  double head_mass_;
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;
};

}  // namespace karlin
