#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "karlin/freqs.hpp"
#include "karlin/rng.hpp"
#include "karlin/weights.hpp"

namespace karlin {

using UrnCounts = std::map<std::uint64_t, std::uint64_t>;

/// Throws DomainError unless grid is nonempty and strictly increasing within [0,1].
void validate_grid(const std::vector<double>& grid);

/// floor(n t), snapping values within 1e-9 of an integer.
std::uint64_t balls_at(std::uint64_t n, double t);

struct OccupancyPath {
  std::uint64_t n = 0;
  std::vector<double> grid;
  /// Balls present at each grid point: floor(n t) for fixed-n paths, N(n t) when Poissonized.
  std::vector<std::uint64_t> balls;
  /// Occupied urns at each grid point, label -> count.
  std::vector<UrnCounts> counts_at;
  std::optional<std::vector<double>> arrival_times;

  /// D_j at grid point i: j -> number of urns holding exactly j balls.
  std::map<std::uint64_t, std::uint64_t> occupancy_numbers(std::size_t i) const;
};

/// Per-urn counts for one running simulation: dense storage for small labels, hash map beyond.
class OccupancyCounter {
 public:
  explicit OccupancyCounter(std::uint64_t dense_bound);

  /// Records a ball in `label` (kFreshUrn opens a new urn); returns the new count.
  std::uint64_t add(std::uint64_t label);
  void clear();
  std::size_t occupied() const noexcept { return occupied_; }
  UrnCounts snapshot() const;

 private:
  std::uint64_t dense_bound_;
  std::vector<std::uint32_t> dense_;
  std::vector<std::uint64_t> touched_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_;
  std::uint64_t fresh_ = 0;
  std::size_t occupied_ = 0;
};

/// sum over occupied urns of a_count, in label order.
double weighted_sum(const UrnCounts& counts, const WeightSequence& w);
double weighted_sum(const OccupancyPath& path, const WeightSequence& w, std::size_t grid_index);

/// n i.i.d. draws; one sample_urn call per ball, in ball order.
OccupancyPath simulate_fixed_n(const UrnLaw& law, std::uint64_t n, const std::vector<double>& grid,
                               Rng& rng);

/// Poisson arrivals of rate 1 on [0, n]: per ball one exponential spacing, then one urn draw.
/// Arrivals continue past n until at least n balls exist, so the path also serves the coupling.
OccupancyPath simulate_poissonized(const UrnLaw& law, std::uint64_t n,
                                   const std::vector<double>& grid, Rng& rng);

struct CoupledPair {
  OccupancyPath poisson_path;
  OccupancyPath discrete_path;
  /// lambda_n(t) = tau_{floor(nt)} / n per grid point.
  std::vector<double> lambda;
  /// Poisson-side urn counts at time n lambda_n(t), found by arrival time.
  std::vector<UrnCounts> poisson_at_lambda;
};

/// Discrete path read off the Poisson path's balls in arrival order.
CoupledPair coupled_pair(const UrnLaw& law, std::uint64_t n, const std::vector<double>& grid,
                         Rng& rng);

/// Weighted sums at the grid ball counts without materializing the path (fixed n).
/// Optionally reports how many balls landed outside the stored atoms.
std::vector<double> simulate_sums(const UrnLaw& law, const WeightSequence& w, std::uint64_t n,
                                  const std::vector<double>& grid, Rng& rng,
                                  std::uint64_t* fresh_balls = nullptr);
/// Same for the Poissonized process at times n t.
std::vector<double> simulate_sums_poisson(const UrnLaw& law, const WeightSequence& w,
                                          std::uint64_t n, const std::vector<double>& grid,
                                          Rng& rng);

struct CenteringResult {
  double value = 0.0;
  double error_bound = 0.0;
  double budget = 0.0;
  std::uint64_t head_urns = 0;  // urns summed exactly
  int tail_order = 0;           // Newton-series terms used for the rest
};

inline constexpr double kCenteringCutoff = 1e-3;
inline constexpr double kCenteringRelBudget = 1e-6;

/// sum_ell E a_{Bin(m, p_ell)}. Throws PrecisionError when the budget
/// 1e-6 * max(v(m), 1) cannot be met.
CenteringResult centering_binomial(const UrnLaw& law, const WeightSequence& w, std::uint64_t m);
/// sum_ell E a_{Poisson(u p_ell)}.
CenteringResult centering_poisson(const UrnLaw& law, const WeightSequence& w, double u);

double centering_term(const UrnLaw& law, const WeightSequence& w, std::uint64_t m);
double centering_term_poisson(const UrnLaw& law, const WeightSequence& w, double u);

/// E a_{Bin(m,p)} and E a_{Poisson(u)} for a single urn.
double binomial_expectation(const WeightSequence& w, std::uint64_t m, double p);
double poisson_expectation(const WeightSequence& w, double u);

struct CenteringTable {
  const UrnLaw* law = nullptr;
  const WeightSequence* weights = nullptr;
  std::map<std::uint64_t, double> values;
  std::string tail_order;
};

CenteringTable build_centering_table(const UrnLaw& law, const WeightSequence& w,
                                     const std::vector<std::uint64_t>& ms);

/// sqrt(v(n)).
double sigma_n(const UrnLaw& law, std::uint64_t n);

/// (weighted_sum - centering_term(floor(nt))) / sigma_n at each grid point.
std::vector<double> path_W(const UrnLaw& law, const WeightSequence& w, std::uint64_t n,
                           const std::vector<double>& grid, Rng& rng);
/// Poissonized analogue with Poisson centering at intensity n t.
std::vector<double> path_W_poisson(const UrnLaw& law, const WeightSequence& w, std::uint64_t n,
                                   const std::vector<double>& grid, Rng& rng);

}  // namespace karlin
