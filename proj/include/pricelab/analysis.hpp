#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pricelab/equilibrium.hpp"
#include "pricelab/qlearning.hpp"

namespace pricelab {

// Static Nash and joint-monopoly profits per player; the 0/1 anchors of the
// collusion index.
struct Benchmarks {
  std::array<double, 2> nash_profit{0.0, 0.0};
  std::array<double, 2> monopoly_profit{0.0, 0.0};

  static Benchmarks from(const EconomicParams& params);
};

struct ConvergenceType {
  enum Kind { Symmetric, Asymmetric, Cycle, Other };
  Kind kind = Other;
  int cycle_length = 0;  // set when kind == Cycle

  std::string label() const;
};

struct CollusionMetrics {
  double index = 0.0;                        // M, from summed profits
  std::array<double, 2> profit_gain{0, 0};   // Delta_i
  std::array<double, 2> avg_profit{0, 0};
};

// M = (mean summed profit - summed Nash profit) / (summed monopoly profit -
// summed Nash profit); Delta_i the per-player analogue.
CollusionMetrics collusion_metrics(std::span<const double> profits_1,
                                   std::span<const double> profits_2,
                                   const Benchmarks& bench);

// Classifies a converged play series. Precedence: Symmetric before Asymmetric
// before Cycle, since a constant series is also a length-1 cycle. A cycle
// needs only one player to repeat a block of length 2..max_cycle_len covering
// more than `threshold` of the rounds; the smallest qualifying length wins.
ConvergenceType classify_outcome(std::span<const int> prices_1,
                                 std::span<const int> prices_2,
                                 int max_cycle_len = 15, double threshold = 0.9);

// One full training or testing session's worth of outcome metrics.
struct SessionOutcome {
  CollusionMetrics metrics;
  ConvergenceType type;
  std::int64_t time_to_convergence = -1;
  std::int64_t horizon = 0;
  bool converged = false;
};

// The joint greedy transition map of a policy pair: a functional graph on the
// m^2 joint states. Nodes on a self-loop are stable end-nodes, nodes on a
// longer terminal cycle unstable end-nodes, everything else transient.
struct StrategyGraph {
  enum class NodeClass { StableEnd, UnstableEnd, Transient };

  int m = 0;                          // node id = p1 * m + p2
  std::vector<int> successor;         // exactly one outgoing edge per node
  std::vector<NodeClass> node_class;
  std::vector<int> terminal_of;       // terminal-component index per node
  std::vector<std::vector<int>> cycles;  // states of each terminal cycle, in path order
  std::vector<int> basin_size;        // per terminal component, cycle nodes included

  int node_count() const { return m * m; }
};

const char* to_string(StrategyGraph::NodeClass c);

// Uses the dumps' canonical greedy actions (lowest-index tie-break) so the
// graph is a reproducible artifact.
StrategyGraph build_strategy_graph(const PolicyDump& player_1,
                                   const PolicyDump& player_2,
                                   const PriceGrid& grid, ObsMode mode);

struct GraphStats {
  int stable_end_nodes = 0;
  int unstable_end_nodes = 0;
  std::vector<int> cycle_lengths;
  std::vector<int> basin_sizes;
  bool unique_terminal = false;  // one terminal component absorbs everything
};

GraphStats graph_stats(const StrategyGraph& graph);

// (mean diagonal - mean off-diagonal) / mean diagonal of a square matrix of
// collusion indices.
double avg_proportional_loss(const std::vector<std::vector<double>>& matrix);

}  // namespace pricelab
