#include "pricelab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pricelab {

Benchmarks Benchmarks::from(const EconomicParams& params) {
  Benchmarks b;
  b.nash_profit = solve_nash(params).profits;
  b.monopoly_profit = solve_monopoly(params).profits;
  return b;
}

std::string ConvergenceType::label() const {
  switch (kind) {
    case Symmetric:
      return "symmetric";
    case Asymmetric:
      return "asymmetric";
    case Cycle:
      return "cycle" + std::to_string(cycle_length);
    case Other:
      break;
  }
  return "other";
}

CollusionMetrics collusion_metrics(std::span<const double> profits_1,
                                   std::span<const double> profits_2,
                                   const Benchmarks& bench) {
  if (profits_1.empty() || profits_1.size() != profits_2.size()) {
    throw InvalidInput("collusion_metrics: empty or mismatched profit series");
  }
  const double gap_1 = bench.monopoly_profit[0] - bench.nash_profit[0];
  const double gap_2 = bench.monopoly_profit[1] - bench.nash_profit[1];
  if (gap_1 == 0.0 || gap_2 == 0.0) {
    throw InvalidInput("collusion_metrics: monopoly profit equals Nash profit");
  }

  CollusionMetrics out;
  const double n = static_cast<double>(profits_1.size());
  out.avg_profit[0] = std::accumulate(profits_1.begin(), profits_1.end(), 0.0) / n;
  out.avg_profit[1] = std::accumulate(profits_2.begin(), profits_2.end(), 0.0) / n;
  out.profit_gain[0] = (out.avg_profit[0] - bench.nash_profit[0]) / gap_1;
  out.profit_gain[1] = (out.avg_profit[1] - bench.nash_profit[1]) / gap_2;

  const double sum_nash = bench.nash_profit[0] + bench.nash_profit[1];
  const double sum_mono = bench.monopoly_profit[0] + bench.monopoly_profit[1];
  out.index = (out.avg_profit[0] + out.avg_profit[1] - sum_nash) / (sum_mono - sum_nash);
  return out;
}

namespace {

// Fraction of rounds covered by the single most frequent price.
std::pair<int, double> modal_share(std::span<const int> series) {
  std::map<int, int> counts;
  for (int v : series) ++counts[v];
  int mode = series[0];
  int best = 0;
  for (const auto& [value, count] : counts) {
    if (count > best) {
      best = count;
      mode = value;
    }
  }
  return {mode, static_cast<double>(best) / static_cast<double>(series.size())};
}

// Share of positions whose value repeats with period `len`.
double periodic_share(std::span<const int> series, int len) {
  const std::size_t n = series.size();
  std::size_t hits = 0;
  for (std::size_t t = static_cast<std::size_t>(len); t < n; ++t) {
    if (series[t] == series[t - static_cast<std::size_t>(len)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n - static_cast<std::size_t>(len));
}

}  // namespace

ConvergenceType classify_outcome(std::span<const int> prices_1,
                                 std::span<const int> prices_2,
                                 int max_cycle_len, double threshold) {
  if (prices_1.size() != prices_2.size()) {
    throw InvalidInput("classify_outcome: series length mismatch");
  }
  if (prices_1.size() < static_cast<std::size_t>(10 * max_cycle_len)) {
    throw InvalidInput("classify_outcome: series shorter than 10 x max cycle length");
  }

  const auto [mode_1, share_1] = modal_share(prices_1);
  const auto [mode_2, share_2] = modal_share(prices_2);
  if (share_1 > threshold && share_2 > threshold) {
    return {mode_1 == mode_2 ? ConvergenceType::Symmetric : ConvergenceType::Asymmetric, 0};
  }
  for (int len = 2; len <= max_cycle_len; ++len) {
    if (periodic_share(prices_1, len) > threshold ||
        periodic_share(prices_2, len) > threshold) {
      return {ConvergenceType::Cycle, len};
    }
  }
  return {ConvergenceType::Other, 0};
}

const char* to_string(StrategyGraph::NodeClass c) {
  switch (c) {
    case StrategyGraph::NodeClass::StableEnd:
      return "stable_end";
    case StrategyGraph::NodeClass::UnstableEnd:
      return "unstable_end";
    case StrategyGraph::NodeClass::Transient:
      return "transient";
  }
  return "?";
}

StrategyGraph build_strategy_graph(const PolicyDump& player_1,
                                   const PolicyDump& player_2,
                                   const PriceGrid& grid, ObsMode mode) {
  if (player_1.mode != mode || player_2.mode != mode) {
    throw InvalidAssignment("build_strategy_graph: observation mode mismatch");
  }
  const int m = grid.size();
  if (static_cast<int>(player_1.greedy.size()) != observation_count(mode, m) ||
      static_cast<int>(player_2.greedy.size()) != observation_count(mode, m)) {
    throw InvalidAssignment("build_strategy_graph: policy size does not match grid");
  }

  StrategyGraph g;
  g.m = m;
  const int n = g.node_count();
  g.successor.resize(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const int p1 = s / m;
    const int p2 = s % m;
    const int a1 = player_1.greedy[static_cast<std::size_t>(encode_observation(p1, p2, mode, m))];
    const int a2 = player_2.greedy[static_cast<std::size_t>(encode_observation(p2, p1, mode, m))];
    g.successor[static_cast<std::size_t>(s)] = a1 * m + a2;
  }

  // classify by walking each unresolved path once
  g.node_class.assign(static_cast<std::size_t>(n), StrategyGraph::NodeClass::Transient);
  g.terminal_of.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> visit_mark(static_cast<std::size_t>(n), -1);
  std::vector<int> path;
  for (int start = 0; start < n; ++start) {
    if (g.terminal_of[static_cast<std::size_t>(start)] != -1) continue;
    path.clear();
    int s = start;
    while (g.terminal_of[static_cast<std::size_t>(s)] == -1 &&
           visit_mark[static_cast<std::size_t>(s)] != start) {
      visit_mark[static_cast<std::size_t>(s)] = start;
      path.push_back(s);
      s = g.successor[static_cast<std::size_t>(s)];
    }

    int component;
    std::size_t resolved_from = path.size();
    if (g.terminal_of[static_cast<std::size_t>(s)] != -1) {
      component = g.terminal_of[static_cast<std::size_t>(s)];
    } else {
      // new cycle: the tail of `path` from the first occurrence of s
      std::size_t cycle_start = 0;
      while (path[cycle_start] != s) ++cycle_start;
      std::vector<int> cycle(path.begin() + static_cast<std::ptrdiff_t>(cycle_start),
                             path.end());
      component = static_cast<int>(g.cycles.size());
      const auto node_class = cycle.size() == 1 ? StrategyGraph::NodeClass::StableEnd
                                                : StrategyGraph::NodeClass::UnstableEnd;
      for (int node : cycle) {
        g.node_class[static_cast<std::size_t>(node)] = node_class;
        g.terminal_of[static_cast<std::size_t>(node)] = component;
      }
      g.cycles.push_back(std::move(cycle));
      resolved_from = cycle_start;
    }
    for (std::size_t i = 0; i < resolved_from; ++i) {
      g.terminal_of[static_cast<std::size_t>(path[i])] = component;
    }
  }

  g.basin_size.assign(g.cycles.size(), 0);
  for (int s = 0; s < n; ++s) {
    ++g.basin_size[static_cast<std::size_t>(g.terminal_of[static_cast<std::size_t>(s)])];
  }
  return g;
}

GraphStats graph_stats(const StrategyGraph& graph) {
  GraphStats stats;
  for (const auto& cycle : graph.cycles) {
    stats.cycle_lengths.push_back(static_cast<int>(cycle.size()));
    if (cycle.size() == 1) {
      ++stats.stable_end_nodes;
    } else {
      stats.unstable_end_nodes += static_cast<int>(cycle.size());
    }
  }
  stats.basin_sizes = graph.basin_size;
  stats.unique_terminal = graph.cycles.size() == 1;
  return stats;
}

double avg_proportional_loss(const std::vector<std::vector<double>>& matrix) {
  const std::size_t n = matrix.size();
  if (n == 0) throw InvalidInput("avg_proportional_loss: empty matrix");
  for (const auto& row : matrix) {
    if (row.size() != n) throw InvalidInput("avg_proportional_loss: matrix not square");
  }
  double diag = 0.0, off = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      (r == c ? diag : off) += matrix[r][c];
    }
  }
  diag /= static_cast<double>(n);
  if (diag == 0.0) throw InvalidInput("avg_proportional_loss: zero diagonal mean");
  if (n == 1) return 0.0;
  off /= static_cast<double>(n * n - n);
  return (diag - off) / diag;
}

}  // namespace pricelab
