#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "pricelab/analysis.hpp"
#include "pricelab/rng.hpp"

using namespace pricelab;

namespace {

const EconomicParams kParams = EconomicParams::symmetric(1.2);

Benchmarks paper_bench() { return Benchmarks::from(kParams); }

PolicyDump dump_from_greedy(std::vector<int> greedy, int player, ObsMode mode) {
  PolicyDump d;
  const int m = mode == ObsMode::FullMemory
                    ? static_cast<int>(std::lround(std::sqrt(double(greedy.size()))))
                    : static_cast<int>(greedy.size());
  d.q = QTable(static_cast<int>(greedy.size()), m);
  for (std::size_t o = 0; o < greedy.size(); ++o) {
    d.q.at(static_cast<int>(o), greedy[o]) = 1.0;
  }
  d.greedy = std::move(greedy);
  d.player = player;
  d.mode = mode;
  d.econ = kParams;
  return d;
}

PriceGrid grid_of(int m) {
  PriceGrid g;
  g.prices.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) g.prices[static_cast<std::size_t>(i)] = 1.0 + 0.1 * i;
  g.lo = g.prices.front();
  g.hi = g.prices.back();
  g.xi = 0.1;
  return g;
}

}  // namespace

TEST_CASE("collusion metrics anchor at Nash and monopoly play") {
  const auto bench = paper_bench();
  const std::vector<double> nash_1(200, bench.nash_profit[0]);
  const std::vector<double> nash_2(200, bench.nash_profit[1]);
  const auto at_nash = collusion_metrics(nash_1, nash_2, bench);
  CHECK(at_nash.index == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(at_nash.profit_gain[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(at_nash.profit_gain[1] == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> mono_1(200, bench.monopoly_profit[0]);
  const std::vector<double> mono_2(200, bench.monopoly_profit[1]);
  const auto at_mono = collusion_metrics(mono_1, mono_2, bench);
  CHECK(at_mono.index == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the collusion index is the mean profit gain when gaps are equal") {
  const auto bench = paper_bench();
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s1(97), s2(97);
    for (std::size_t i = 0; i < s1.size(); ++i) {
      s1[i] = 0.4 * rng.next_double();
      s2[i] = 0.4 * rng.next_double();
    }
    const auto m = collusion_metrics(s1, s2, bench);
    CHECK(std::abs(m.index - 0.5 * (m.profit_gain[0] + m.profit_gain[1])) < 1e-12);
  }
}

TEST_CASE("degenerate benchmarks are rejected") {
  Benchmarks broken;
  broken.nash_profit = {0.2, 0.2};
  broken.monopoly_profit = {0.2, 0.3};
  const std::vector<double> series(200, 0.25);
  CHECK_THROWS_AS((void)collusion_metrics(series, series, broken), InvalidInput);
  CHECK_THROWS_AS((void)collusion_metrics({}, {}, paper_bench()), InvalidInput);
}

TEST_CASE("outcome classification") {
  const int n = 1000;
  std::vector<int> const_12(n, 12), const_14(n, 14);

  SUBCASE("both constant at the same price is symmetric") {
    const auto t = classify_outcome(const_12, const_12);
    CHECK(t.kind == ConvergenceType::Symmetric);
  }
  SUBCASE("constant at different prices is asymmetric") {
    const auto t = classify_outcome(const_12, const_14);
    CHECK(t.kind == ConvergenceType::Asymmetric);
  }
  SUBCASE("one alternating player makes a length-2 cycle") {
    std::vector<int> alt(n);
    for (int i = 0; i < n; ++i) alt[static_cast<std::size_t>(i)] = i % 2 ? 11 : 10;
    const auto t = classify_outcome(alt, const_12);
    CHECK(t.kind == ConvergenceType::Cycle);
    CHECK(t.cycle_length == 2);
  }
  SUBCASE("precedence: a constant pair is symmetric, not a cycle") {
    // a constant series is periodic at every length; symmetric must win
    const auto t = classify_outcome(const_12, const_12, 15, 0.9);
    CHECK(t.kind == ConvergenceType::Symmetric);
  }
  SUBCASE("noise is other") {
    Rng rng(11);
    std::vector<int> noise(n);
    for (auto& v : noise) v = static_cast<int>(rng.next_below(20));
    const auto t = classify_outcome(noise, noise);
    CHECK(t.kind == ConvergenceType::Other);
  }
  SUBCASE("short series are rejected") {
    std::vector<int> tiny(100, 3);
    CHECK_THROWS_AS((void)classify_outcome(tiny, tiny), InvalidInput);
  }
}

TEST_CASE("exactly periodic series are never classified other") {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const int len = 2 + static_cast<int>(rng.next_below(14));  // 2..15
    std::vector<int> block(static_cast<std::size_t>(len));
    for (auto& v : block) v = static_cast<int>(rng.next_below(20));
    std::vector<int> series;
    for (int i = 0; i < 1000; ++i) {
      series.push_back(block[static_cast<std::size_t>(i % len)]);
    }
    std::vector<int> other(1000, 5);
    const auto t = classify_outcome(series, other);
    CHECK(t.kind != ConvergenceType::Other);
    if (t.kind == ConvergenceType::Cycle) CHECK(t.cycle_length <= len);
  }
}

TEST_CASE("classification ignores any prefix shorter than a tenth of the series") {
  const int n = 2000;
  std::vector<int> s1(n, 8), s2(n, 8);
  Rng rng(31);
  for (int i = 0; i < n / 20; ++i) {  // 5% noisy prefix
    s1[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_below(20));
    s2[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_below(20));
  }
  const auto with_prefix = classify_outcome(s1, s2);
  const auto trimmed = classify_outcome(std::span(s1).subspan(n / 20),
                                        std::span(s2).subspan(n / 20));
  CHECK(with_prefix.kind == trimmed.kind);
  CHECK(with_prefix.kind == ConvergenceType::Symmetric);
}

TEST_CASE("constant policies produce a single absorbing node") {
  const int m = 8;
  const auto grid = grid_of(m);
  const int star = 5;
  auto p1 = dump_from_greedy(std::vector<int>(m * m, star), 0, ObsMode::FullMemory);
  auto p2 = dump_from_greedy(std::vector<int>(m * m, star), 1, ObsMode::FullMemory);
  const auto g = build_strategy_graph(p1, p2, grid, ObsMode::FullMemory);

  REQUIRE(g.node_count() == m * m);
  const int absorbing = star * m + star;
  int stable = 0;
  for (int s = 0; s < g.node_count(); ++s) {
    CHECK(g.successor[static_cast<std::size_t>(s)] == absorbing);
    if (g.node_class[static_cast<std::size_t>(s)] == StrategyGraph::NodeClass::StableEnd) {
      ++stable;
      CHECK(s == absorbing);
    } else {
      CHECK(g.node_class[static_cast<std::size_t>(s)] ==
            StrategyGraph::NodeClass::Transient);
    }
  }
  CHECK(stable == 1);
  REQUIRE(g.basin_size.size() == 1);
  CHECK(g.basin_size[0] == m * m);

  const auto stats = graph_stats(g);
  CHECK(stats.stable_end_nodes == 1);
  CHECK(stats.unique_terminal);
}

TEST_CASE("copy-rival policies split into diagonal fixed points and 2-cycles") {
  const int m = 6;
  const auto grid = grid_of(m);
  // player-relative: observation index is own*m + rival, the copied price is
  // the rival component
  std::vector<int> copy_rival(static_cast<std::size_t>(m * m));
  for (int o = 0; o < m * m; ++o) copy_rival[static_cast<std::size_t>(o)] = o % m;
  auto p1 = dump_from_greedy(copy_rival, 0, ObsMode::FullMemory);
  auto p2 = dump_from_greedy(copy_rival, 1, ObsMode::FullMemory);
  const auto g = build_strategy_graph(p1, p2, grid, ObsMode::FullMemory);

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const int node = i * m + j;
      CHECK(g.successor[static_cast<std::size_t>(node)] == j * m + i);
      CHECK(g.node_class[static_cast<std::size_t>(node)] ==
            (i == j ? StrategyGraph::NodeClass::StableEnd
                    : StrategyGraph::NodeClass::UnstableEnd));
    }
  }
  const auto stats = graph_stats(g);
  CHECK(stats.stable_end_nodes == m);
  CHECK(stats.unstable_end_nodes == m * m - m);
  CHECK_FALSE(stats.unique_terminal);
  int basin_total = 0;
  for (int b : stats.basin_sizes) basin_total += b;
  CHECK(basin_total == m * m);
}

TEST_CASE("graph classification agrees with brute-force simulation") {
  const int m = 10;
  const auto grid = grid_of(m);
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> g1(static_cast<std::size_t>(m * m)), g2(g1);
    for (auto& v : g1) v = static_cast<int>(rng.next_below(m));
    for (auto& v : g2) v = static_cast<int>(rng.next_below(m));
    auto p1 = dump_from_greedy(g1, 0, ObsMode::FullMemory);
    auto p2 = dump_from_greedy(g2, 1, ObsMode::FullMemory);
    const auto graph = build_strategy_graph(p1, p2, grid, ObsMode::FullMemory);

    // independent simulator: step the joint policy from every start
    auto step = [&](int s) {
      const int own_1 = s / m, own_2 = s % m;
      const int a1 = g1[static_cast<std::size_t>(own_1 * m + own_2)];
      const int a2 = g2[static_cast<std::size_t>(own_2 * m + own_1)];
      return a1 * m + a2;
    };
    for (int start = 0; start < m * m; ++start) {
      int s = start;
      for (int k = 0; k < m * m + 15; ++k) s = step(s);
      // s now sits on the terminal cycle; walk it to collect members
      std::vector<bool> on_cycle(static_cast<std::size_t>(m * m), false);
      int walker = s;
      int len = 0;
      do {
        on_cycle[static_cast<std::size_t>(walker)] = true;
        walker = step(walker);
        ++len;
      } while (walker != s);

      CHECK(on_cycle[static_cast<std::size_t>(
          graph.cycles[static_cast<std::size_t>(
              graph.terminal_of[static_cast<std::size_t>(start)])][0])]);
      const auto cls = graph.node_class[static_cast<std::size_t>(start)];
      if (on_cycle[static_cast<std::size_t>(start)]) {
        CHECK(cls == (len == 1 ? StrategyGraph::NodeClass::StableEnd
                               : StrategyGraph::NodeClass::UnstableEnd));
      } else {
        CHECK(cls == StrategyGraph::NodeClass::Transient);
      }
    }

    int basin_total = 0;
    for (int b : graph.basin_size) basin_total += b;
    CHECK(basin_total == m * m);
  }
}

TEST_CASE("mode or size mismatches are invalid assignments") {
  const auto grid = grid_of(6);
  auto p1 = dump_from_greedy(std::vector<int>(36, 0), 0, ObsMode::FullMemory);
  auto p2 = dump_from_greedy(std::vector<int>(6, 0), 1, ObsMode::OwnPriceOnly);
  CHECK_THROWS_AS((void)build_strategy_graph(p1, p2, grid, ObsMode::FullMemory),
                  InvalidAssignment);
  auto small = dump_from_greedy(std::vector<int>(25, 0), 1, ObsMode::FullMemory);
  CHECK_THROWS_AS((void)build_strategy_graph(p1, small, grid, ObsMode::FullMemory),
                  InvalidAssignment);
}

TEST_CASE("average proportional loss") {
  using Matrix = std::vector<std::vector<double>>;
  const Matrix flat{{0.8, 0.8}, {0.8, 0.8}};
  CHECK(avg_proportional_loss(flat) == doctest::Approx(0.0));

  const Matrix collapse{{0.8, 0.0}, {0.0, 0.8}};
  CHECK(avg_proportional_loss(collapse) == doctest::Approx(1.0));

  const Matrix zero_diag{{0.0, 0.5}, {0.5, 0.0}};
  CHECK_THROWS_AS((void)avg_proportional_loss(zero_diag), InvalidInput);

  const Matrix ragged{{0.1, 0.2}, {0.3}};
  CHECK_THROWS_AS((void)avg_proportional_loss(ragged), InvalidInput);
}
