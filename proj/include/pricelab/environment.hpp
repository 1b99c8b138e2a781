#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "pricelab/errors.hpp"

namespace pricelab {

inline constexpr int kNumPlayers = 2;

// Logit-demand parameterization of one duopoly context. quality[i] is the
// vertical-differentiation index of player i's good, mu > 0 the horizontal
// one; outside_quality is the quality of the outside good.
struct EconomicParams {
  std::array<double, 2> quality{2.0, 2.0};
  std::array<double, 2> cost{1.0, 1.0};
  double mu = 0.25;
  double outside_quality = 0.0;

  // Both players at the same cost level with quality = cost + markup.
  static EconomicParams symmetric(double cost_level, double markup = 1.0,
                                  double mu = 0.25, double outside_quality = 0.0);

  void validate() const;  // throws InvalidInput

  // True when quality[i] - cost[i] == markup for both players and the outside
  // quality is zero: the regime in which equilibrium profits do not depend on
  // the cost level.
  bool has_uniform_markup(double markup = 1.0, double tol = 1e-12) const;

  bool operator==(const EconomicParams&) const = default;
};

enum class ObsMode { FullMemory, OwnPriceOnly };

const char* to_string(ObsMode mode);

// One fixed context: the economic parameterization plus the seed that roots
// every random stream of its sessions. Immutable once sessions start.
struct ContextSpec {
  std::string id;
  EconomicParams econ;
  std::uint64_t seed = 0;
  ObsMode mode = ObsMode::FullMemory;
  int num_players = kNumPlayers;  // stored for the record; only 2 is implemented

  void validate() const;  // throws UnsupportedConfig / InvalidInput
};

// Last period's price profile, as grid indices. Real prices live in PriceGrid
// only; index equality is what convergence and cycle detection compare.
struct GameState {
  std::array<int, 2> price_index{0, 0};
  std::string context_id;

  bool operator==(const GameState&) const = default;
};

struct Observation {
  ObsMode mode = ObsMode::FullMemory;
  int index = 0;
};

// q_i = exp((quality_i - p_i)/mu) / (sum_j exp((quality_j - p_j)/mu) + exp(outside/mu)).
std::array<double, 2> logit_demand(const std::array<double, 2>& prices,
                                   const EconomicParams& params);

// R_i = (p_i - c_i) * q_i.
std::array<double, 2> profit(const std::array<double, 2>& prices,
                             const EconomicParams& params);

// Next state is this period's actions; the incoming price fields are ignored.
GameState transition(const GameState& state, const std::array<int, 2>& actions,
                     int grid_size);

int observation_count(ObsMode mode, int grid_size);

// Canonical player-relative encoding: row-major over (own index, rival index).
// Both players observe the same joint profile but encode it in their own
// frame, which makes the two Q-tables interchangeable under relabeling.
int encode_observation(int own, int rival, ObsMode mode, int grid_size);
std::pair<int, int> decode_full_observation(int index, int grid_size);

std::array<Observation, 2> observe(const GameState& state, ObsMode mode,
                                   int grid_size);

}  // namespace pricelab
