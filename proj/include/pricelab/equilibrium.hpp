#pragma once

#include <array>
#include <span>
#include <vector>

#include "pricelab/environment.hpp"

namespace pricelab {

// The discretized action space shared by every context: `m` equally spaced
// prices spanning the lowest Nash price and the highest monopoly price of the
// parameterization set, each extended by xi times that span.
struct PriceGrid {
  std::vector<double> prices;  // ascending, equally spaced
  double lo = 0.0;
  double hi = 0.0;
  double xi = 0.0;
  std::vector<EconomicParams> derived_from;

  int size() const { return static_cast<int>(prices.size()); }
  double operator[](int i) const { return prices[static_cast<std::size_t>(i)]; }
  double step() const { return size() > 1 ? (hi - lo) / (size() - 1) : 0.0; }
  int nearest_index(double price) const;

  static PriceGrid linspace(double lo, double hi, int m, double xi);
};

struct EquilibriumSolution {
  std::array<double, 2> prices{0.0, 0.0};
  std::array<double, 2> profits{0.0, 0.0};
  int iterations = 0;
  double residual = 0.0;
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  double damping = 0.5;
};

// One-shot Bertrand-Nash prices via damped fixed-point iteration on the
// first-order condition p_i = c_i + mu / (1 - q_i(p)). The residual is the
// sup-norm violation of that condition.
EquilibriumSolution solve_nash(const EconomicParams& params, SolverOptions opts = {});

// Joint-profit-maximizing prices via coordinate ascent with golden-section
// line searches; local concavity is checked at the solution. The residual is
// the sup-norm of the central-difference gradient of joint profit.
EquilibriumSolution solve_monopoly(const EconomicParams& params, SolverOptions opts = {});

PriceGrid build_grid(std::span<const EconomicParams> parameterizations, int m, double xi);

// Expected-profit deltas relative to the one-shot Nash profit, player-1 view,
// each as a proportion of the Nash profit:
//   both_randomize          - both players draw uniformly from the grid;
//   nash_vs_random          - self plays the grid price nearest the Nash price,
//                             opponent draws uniformly;
//   best_response_vs_random - self plays the continuous best response to the
//                             uniform opponent.
// Expectations are exact enumerations over grid points.
struct RandomizationBenchmarks {
  double both_randomize = 0.0;
  double nash_vs_random = 0.0;
  double best_response_vs_random = 0.0;
};

RandomizationBenchmarks randomization_benchmarks(const PriceGrid& grid,
                                                 const EconomicParams& params);

// Price maximizing player's expected profit against an opponent uniform on
// the grid; scalar golden-section search to 1e-8 in price.
double best_response_to_uniform(const PriceGrid& grid, const EconomicParams& params,
                                int player);

}  // namespace pricelab
