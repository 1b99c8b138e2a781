#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pricelab/analysis.hpp"

namespace pricelab {

enum class TestMode { FixedPolicy, UpdateNoExploration };

const char* to_string(TestMode mode);

// Per-period rewards for every joint action, own-index-major per player, so
// the learning loop only does table lookups.
struct ProfitTables {
  int m = 0;
  std::array<std::vector<double>, 2> own_major;

  static ProfitTables from(const PriceGrid& grid, const EconomicParams& params);

  double reward(int player, int own, int rival) const {
    return own_major[static_cast<std::size_t>(player)]
                    [static_cast<std::size_t>(own) * m + rival];
  }
};

struct TrainedSession {
  std::array<PolicyDump, 2> policies;
  SessionOutcome outcome;
  GameState final_state;
};

// Two agents learn simultaneously from the same play sequence until the joint
// greedy policy has been quiet for `hyper.window` periods or `hyper.max_periods`
// is hit. Post-convergence metrics are averaged over the exact limit cycle of
// greedy play from the final state.
TrainedSession run_training_session(const ContextSpec& ctx, const PriceGrid& grid,
                                    const Hyperparams& hyper, int session_number,
                                    const Benchmarks& bench);

// Limit-cycle outcome of canonical greedy play from `from`; what training
// reports post-convergence, recomputable from a dumped session.
SessionOutcome converged_outcome(const PolicyDump& policy_1, const PolicyDump& policy_2,
                                 const EconomicParams& econ, const PriceGrid& grid,
                                 const Benchmarks& bench, const GameState& from,
                                 bool converged, std::int64_t periods);

// A pairing of two previously trained policies in a fresh evaluation context.
// The evaluation context must give each seat the economic parameters its
// policy was trained with.
struct TestAssignment {
  const PolicyDump* policy_1 = nullptr;
  const PolicyDump* policy_2 = nullptr;
  ContextSpec eval_context;
  TestMode mode = TestMode::FixedPolicy;
  int session_number = 0;  // pairing number; seeds the evaluation stream
};

struct TestOutcome {
  SessionOutcome first_window;  // first `horizon` periods, transient included
  SessionOutcome reconverged;   // limit cycle (FixedPolicy) or post-convergence
};

TestOutcome run_test_session(const TestAssignment& assignment, std::int64_t horizon,
                             const Hyperparams& hyper, const PriceGrid& grid,
                             const Benchmarks& bench);

// Real prices played around a forced one-period deviation of player 1 to the
// grid price nearest the static Nash price. Entries [0, pre_periods) replay
// the converged cycle; index pre_periods is the deviation period.
struct DeviationPath {
  std::vector<double> deviator;
  std::vector<double> rival;
  int pre_periods = 0;
  int forced_action = 0;
};

DeviationPath run_deviation_experiment(const PolicyDump& policy_1,
                                       const PolicyDump& policy_2,
                                       const ContextSpec& ctx, const PriceGrid& grid,
                                       const GameState& converged_state,
                                       int pre_periods, int post_periods);

// Greedy play of a converged pair in its training context from a given or
// uniformly random initial state; metrics over `horizon` periods.
SessionOutcome run_restart_from(const PolicyDump& policy_1, const PolicyDump& policy_2,
                                const ContextSpec& ctx, const PriceGrid& grid,
                                const Benchmarks& bench, std::int64_t horizon,
                                const GameState& initial);

SessionOutcome run_random_restart(const PolicyDump& policy_1, const PolicyDump& policy_2,
                                  const ContextSpec& ctx, const PriceGrid& grid,
                                  const Benchmarks& bench, std::int64_t horizon,
                                  int session_number);

// ---- orchestration ---------------------------------------------------------

// Runs task(0..n-1) on up to `workers` threads (0 = hardware concurrency).
// Results must be written by index; the schedule never affects outputs.
void parallel_for(int n, int workers, const std::function<void(int)>& task);

struct TrainedContext {
  ContextSpec ctx;
  Benchmarks bench;
  std::vector<TrainedSession> sessions;

  int converged_count() const;
  // Mean collusion index over converged sessions; unconverged sessions are
  // recorded but excluded from aggregates.
  double mean_collusion() const;
};

TrainedContext train_context(const ContextSpec& ctx, const PriceGrid& grid,
                             const Hyperparams& hyper, int sessions, int workers);

struct PairedTestResult {
  int session_number = 0;
  bool both_converged = false;
  TestOutcome outcome;
};

// Pairs player 1 of `a` with player 2 of `b` by equal session number and
// evaluates each pair in a fresh context with the same parameterization.
std::vector<PairedTestResult> run_test_pairing(const TrainedContext& a,
                                               const TrainedContext& b, TestMode mode,
                                               std::int64_t horizon,
                                               const Hyperparams& hyper,
                                               const PriceGrid& grid);

struct CrossCostCell {
  double mean_index = 0.0;
  std::array<double, 2> mean_gain{0.0, 0.0};
  int pairs = 0;
};

struct CrossCostMatrix {
  std::vector<double> costs;
  std::vector<std::vector<CrossCostCell>> cells;  // [row][col]
  double avg_proportional_loss = 0.0;
};

// Diagonal cells repeat the training outcomes; off-diagonal cells pair player
// 1 trained at the row cost with player 2 trained at the column cost, each
// keeping its own parameters, and evaluate the first `horizon` periods of
// fixed-policy play.
CrossCostMatrix run_cross_cost_matrix(std::span<const TrainedContext> by_cost,
                                      std::int64_t horizon, const Hyperparams& hyper,
                                      const PriceGrid& grid);

}  // namespace pricelab
