#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "pricelab/equilibrium.hpp"

using namespace pricelab;

namespace {

// Independent Nash oracle: alternating discrete best responses on a fine
// price lattice, no first-order conditions involved.
double nash_by_lattice(const EconomicParams& params, double lo, double hi,
                       double step = 1e-4) {
  auto best_reply = [&](double rival) {
    double best_p = lo, best_v = -1.0;
    for (double p = lo; p <= hi; p += step) {
      const double v = profit({p, rival}, params)[0];
      if (v > best_v) {
        best_v = v;
        best_p = p;
      }
    }
    return best_p;
  };
  double p = lo + (hi - lo) / 2;
  for (int it = 0; it < 200; ++it) {
    const double next = best_reply(p);
    if (std::abs(next - p) < step / 2) return next;
    p = next;
  }
  return p;
}

// Independent monopoly oracle: symmetric 1-D scan at fine resolution.
double monopoly_by_symmetric_scan(const EconomicParams& params, double lo, double hi,
                                  double step = 1e-4) {
  double best_p = lo, best_v = -1.0;
  for (double p = lo; p <= hi; p += step) {
    const auto r = profit({p, p}, params);
    if (r[0] + r[1] > best_v) {
      best_v = r[0] + r[1];
      best_p = p;
    }
  }
  return best_p;
}

const std::vector<double> kCosts{1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7};

PriceGrid paper_grid() {
  std::vector<EconomicParams> set;
  for (double c : kCosts) set.push_back(EconomicParams::symmetric(c));
  return build_grid(set, 20, 0.1);
}

}  // namespace

TEST_CASE("one-shot Nash matches the lattice oracle and the known anchor") {
  const auto params = EconomicParams::symmetric(1.0);
  const auto sol = solve_nash(params);
  CHECK(std::abs(sol.prices[0] - 1.47) < 0.01);
  CHECK(sol.prices[0] == doctest::Approx(sol.prices[1]).epsilon(1e-10));
  CHECK(sol.residual <= 1e-10);

  const double oracle = nash_by_lattice(params, 1.0, 2.5);
  CHECK(std::abs(sol.prices[0] - oracle) < 2e-4);
}

TEST_CASE("Nash prices shift with cost while profits stay put") {
  const auto base = solve_nash(EconomicParams::symmetric(1.0));
  const auto moved = solve_nash(EconomicParams::symmetric(1.3));
  CHECK(moved.prices[0] == doctest::Approx(base.prices[0] + 0.3).epsilon(1e-8));
  CHECK(moved.profits[0] == doctest::Approx(base.profits[0]).epsilon(1e-8));
  const double oracle = nash_by_lattice(EconomicParams::symmetric(1.3), 1.3, 2.8);
  CHECK(std::abs(moved.prices[0] - oracle) < 2e-4);
}

TEST_CASE("Nash solver handles weak differentiation limits") {
  const auto params = EconomicParams::symmetric(1.0, 1.0, 10.0);
  const auto sol = solve_nash(params);
  CHECK(sol.residual <= 1e-10);
  // markup far above the mu = 1/4 case
  CHECK(sol.prices[0] - params.cost[0] > 10.0);
  const double oracle = nash_by_lattice(params, 1.0, 60.0, 1e-3);
  CHECK(std::abs(sol.prices[0] - oracle) < 2e-3);
}

TEST_CASE("Nash output is a best response under a fine deviation scan") {
  const auto params = EconomicParams::symmetric(1.2);
  const auto sol = solve_nash(params);
  const double own = profit({sol.prices[0], sol.prices[1]}, params)[0];
  for (double d = -0.5; d <= 0.5; d += 1e-3) {
    const double deviated = profit({sol.prices[0] + d, sol.prices[1]}, params)[0];
    CHECK(deviated - own <= 1e-9);
  }
}

TEST_CASE("joint-profit maximum matches oracles and the known anchor") {
  const auto high = solve_monopoly(EconomicParams::symmetric(1.7));
  CHECK(std::abs(high.prices[0] - 2.62) < 0.01);

  const auto low = solve_monopoly(EconomicParams::symmetric(1.0));
  CHECK(std::abs(low.prices[0] - 1.92) < 0.01);
  CHECK(std::abs(low.prices[0] - monopoly_by_symmetric_scan(
                                     EconomicParams::symmetric(1.0), 1.0, 3.5)) < 2e-4);

  // coarse joint scan without the symmetry assumption
  double best_v = -1.0;
  std::array<double, 2> best_p{0, 0};
  const auto params = EconomicParams::symmetric(1.0);
  for (double p0 = 1.4; p0 <= 2.4; p0 += 1e-3) {
    for (double p1 = 1.4; p1 <= 2.4; p1 += 1e-3) {
      const auto r = profit({p0, p1}, params);
      if (r[0] + r[1] > best_v) {
        best_v = r[0] + r[1];
        best_p = {p0, p1};
      }
    }
  }
  CHECK(std::abs(low.prices[0] - best_p[0]) < 2e-3);
  CHECK(std::abs(low.prices[1] - best_p[1]) < 2e-3);

  // collusion premium is strictly positive
  const auto nash = solve_nash(params);
  CHECK(low.profits[0] + low.profits[1] > nash.profits[0] + nash.profits[1]);
}

TEST_CASE("Nash and monopoly profits are invariant across the cost range") {
  const auto nash_ref = solve_nash(EconomicParams::symmetric(1.0));
  const auto mono_ref = solve_monopoly(EconomicParams::symmetric(1.0));
  for (double c : kCosts) {
    const auto nash = solve_nash(EconomicParams::symmetric(c));
    const auto mono = solve_monopoly(EconomicParams::symmetric(c));
    CHECK(nash.profits[0] == doctest::Approx(nash_ref.profits[0]).epsilon(1e-8));
    CHECK(mono.profits[0] == doctest::Approx(mono_ref.profits[0]).epsilon(1e-8));
    CHECK(nash.prices[0] < mono.prices[0]);
  }
}

TEST_CASE("solver failures carry the last residual") {
  SolverOptions opts;
  opts.max_iter = 2;
  CHECK_THROWS_AS((void)solve_nash(EconomicParams::symmetric(1.0), opts), SolverFailure);
}

TEST_CASE("grid construction spans lowest Nash to highest monopoly price") {
  const auto grid = paper_grid();
  REQUIRE(grid.size() == 20);
  CHECK(std::abs(grid.lo - 1.356) < 0.02);
  CHECK(std::abs(grid.hi - 2.735) < 0.02);

  // equally spaced within 1e-12
  for (int i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] - grid[i - 1] == doctest::Approx(grid.step()).epsilon(1e-12));
  }

  // endpoints follow the extension rule
  const double nash_low = solve_nash(EconomicParams::symmetric(1.0)).prices[0];
  const double mono_high = solve_monopoly(EconomicParams::symmetric(1.7)).prices[0];
  const double span = mono_high - nash_low;
  CHECK(grid.lo == doctest::Approx(nash_low - 0.1 * span).epsilon(1e-12));
  CHECK(grid.hi == doctest::Approx(mono_high + 0.1 * span).epsilon(1e-12));
}

TEST_CASE("grid edge cases") {
  const auto one = EconomicParams::symmetric(1.2);
  const std::vector<EconomicParams> single{one};
  const auto grid2 = build_grid(single, 2, 0.1);
  REQUIRE(grid2.size() == 2);
  CHECK(grid2[0] == grid2.lo);
  CHECK(grid2[1] == grid2.hi);

  const double nash = solve_nash(one).prices[0];
  const double mono = solve_monopoly(one).prices[0];
  CHECK(grid2.lo == doctest::Approx(nash - 0.1 * (mono - nash)).epsilon(1e-10));
  CHECK(grid2.hi == doctest::Approx(mono + 0.1 * (mono - nash)).epsilon(1e-10));

  CHECK_THROWS_AS((void)build_grid({}, 20, 0.1), InvalidInput);
  CHECK_THROWS_AS((void)build_grid(single, 1, 0.1), InvalidInput);
  CHECK_THROWS_AS((void)build_grid(single, 20, 0.0), InvalidInput);
}

TEST_CASE("nearest grid index") {
  const auto grid = paper_grid();
  CHECK(grid.nearest_index(grid[0] - 1.0) == 0);
  CHECK(grid.nearest_index(grid[19] + 1.0) == 19);
  for (int i = 0; i < grid.size(); ++i) {
    CHECK(grid.nearest_index(grid[i]) == i);
    CHECK(grid.nearest_index(grid[i] + 0.49 * grid.step()) == i);
  }
}

TEST_CASE("randomization benchmarks reproduce the published table") {
  // rows: cost, both randomize, self at grid-snapped Nash, continuous best
  // response; all as proportions of the one-shot Nash profit
  const struct {
    double cost, both, nash, best;
  } expected[] = {
      {1.0, 0.13, 0.63, 0.80},  {1.1, 0.09, 0.50, 0.67},   {1.2, 0.02, 0.36, 0.53},
      {1.3, -0.08, 0.32, 0.39}, {1.4, -0.21, 0.17, 0.25},  {1.5, -0.36, 0.04, 0.11},
      {1.6, -0.54, -0.04, -0.02}, {1.7, -0.73, -0.17, -0.15},
  };
  const auto grid = paper_grid();
  double prev_both = 1.0;
  for (const auto& row : expected) {
    const auto b = randomization_benchmarks(grid, EconomicParams::symmetric(row.cost));
    CHECK(std::abs(b.both_randomize - row.both) <= 0.02);
    CHECK(std::abs(b.nash_vs_random - row.nash) <= 0.02);
    CHECK(std::abs(b.best_response_vs_random - row.best) <= 0.02);
    CHECK(b.both_randomize < prev_both);  // strictly decreasing in cost
    prev_both = b.both_randomize;
  }
}

TEST_CASE("best response to a uniform opponent") {
  const auto grid = paper_grid();
  const auto params = EconomicParams::symmetric(1.0);
  const double br = best_response_to_uniform(grid, params, 0);
  CHECK(br > params.cost[0]);

  // beats every grid price against the same opponent (exact enumeration)
  auto expected_profit = [&](double own) {
    double total = 0.0;
    for (double p : grid.prices) total += profit({own, p}, params)[0];
    return total / grid.size();
  };
  const double at_br = expected_profit(br);
  for (double p : grid.prices) CHECK(at_br >= expected_profit(p) - 1e-12);

  // a one-point grid collapses the expectation to a plain best reply,
  // computed here by iterating the first-order condition at fixed rival price
  PriceGrid degenerate;
  degenerate.prices = {1.8};
  degenerate.lo = degenerate.hi = 1.8;
  degenerate.xi = 0.1;
  double reply = 1.9;
  for (int it = 0; it < 200; ++it) {
    const auto q = logit_demand({reply, 1.8}, params);
    reply = 0.5 * reply + 0.5 * (params.cost[0] + params.mu / (1.0 - q[0]));
  }
  CHECK(best_response_to_uniform(degenerate, params, 0) ==
        doctest::Approx(reply).epsilon(1e-6));
}
