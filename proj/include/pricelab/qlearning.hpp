#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pricelab/environment.hpp"
#include "pricelab/equilibrium.hpp"
#include "pricelab/rng.hpp"

namespace pricelab {

struct Hyperparams {
  double alpha = 0.15;                     // learning rate
  double delta = 0.95;                     // discount factor
  double beta = 4e-6;                      // exploration decay
  std::int64_t window = 100000;            // W: quiet periods required for convergence
  std::int64_t max_periods = 1000000000;   // T_max

  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// Observation x action value matrix, row-major.
class QTable {
 public:
  QTable() = default;
  QTable(int observation_count, int action_count)
      : actions_(action_count),
        values_(static_cast<std::size_t>(observation_count) * action_count, 0.0) {}

  int observation_count() const {
    return actions_ == 0 ? 0 : static_cast<int>(values_.size()) / actions_;
  }
  int action_count() const { return actions_; }

  double at(int obs, int action) const {
    return values_[static_cast<std::size_t>(obs) * actions_ + action];
  }
  double& at(int obs, int action) {
    return values_[static_cast<std::size_t>(obs) * actions_ + action];
  }
  std::span<const double> row(int obs) const {
    return {values_.data() + static_cast<std::size_t>(obs) * actions_,
            static_cast<std::size_t>(actions_)};
  }

  double row_max(int obs) const;
  // Lowest-index argmax; the canonical tie-break used for dumps and
  // convergence tracking (live play breaks ties at random instead).
  int greedy_action(int obs) const;

  bool operator==(const QTable&) const = default;

 private:
  int actions_ = 0;
  std::vector<double> values_;
};

// Q_0(o, a) = mean over opponent grid prices of the player's one-shot profit
// of action a, discounted to a perpetuity: the value of playing a forever
// against a uniformly randomizing opponent. Identical across observations.
QTable init_q(const PriceGrid& grid, const EconomicParams& params, double delta,
              int player, ObsMode mode);

// epsilon_t = exp(-beta * t)
double epsilon(std::int64_t t, double beta);

struct ActionChoice {
  int action = 0;
  bool explored = false;
};

// Explore (uniform over all actions) with probability eps, otherwise exploit
// the argmax with ties broken uniformly at random.
ActionChoice select_action_with_eps(const QTable& q, int obs, double eps, Rng& rng);
ActionChoice select_action(const QTable& q, int obs, std::int64_t t, double beta,
                           Rng& rng);

// Q(o,a) <- (1-alpha) Q(o,a) + alpha (reward + delta max_a' Q(o',a')).
// The next-row max is taken before the cell is written, as the update reads
// the pre-update table. Touches exactly one cell.
void q_update(QTable& q, int obs, int action, double reward, int next_obs,
              double alpha, double delta);

// Caches the canonical greedy action of every row so a session only
// re-examines the single row each update touches.
class GreedyCache {
 public:
  GreedyCache() = default;
  explicit GreedyCache(const QTable& q);

  // Refresh the cached action of `obs` after a q_update; true if it changed.
  bool refresh(const QTable& q, int obs);

  const std::vector<int>& actions() const { return actions_; }

 private:
  std::vector<int> actions_;
};

// True iff the trailing run of change-free periods is at least `window` long.
// `changed[t]` is whether any greedy action of either player changed in
// period t.
bool check_convergence(const std::vector<bool>& changed, std::int64_t window);

// One agent's converged policy with enough provenance to be replayed or
// paired in a fresh context.
struct PolicyDump {
  std::vector<int> greedy;  // canonical greedy action per observation
  QTable q;
  int player = 0;
  int tie_count = 0;  // rows with a tied maximum at dump time

  std::string context_id;
  EconomicParams econ;
  ObsMode mode = ObsMode::FullMemory;
  std::uint64_t session_seed = 0;
  int session_number = 0;
  bool converged = false;
  std::int64_t periods = 0;

  double own_cost() const { return econ.cost[static_cast<std::size_t>(player)]; }
  double own_quality() const { return econ.quality[static_cast<std::size_t>(player)]; }
};

PolicyDump make_policy_dump(const QTable& q, int player, const ContextSpec& ctx,
                            std::uint64_t session_seed, int session_number,
                            bool converged, std::int64_t periods);

// Per-session stream: hash of (context seed, context id, session number).
std::uint64_t session_seed(const ContextSpec& ctx, int session_number);

}  // namespace pricelab
