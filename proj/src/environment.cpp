#include "pricelab/environment.hpp"

#include <cmath>

namespace pricelab {

EconomicParams EconomicParams::symmetric(double cost_level, double markup,
                                         double mu, double outside_quality) {
  EconomicParams p;
  p.cost = {cost_level, cost_level};
  p.quality = {cost_level + markup, cost_level + markup};
  p.mu = mu;
  p.outside_quality = outside_quality;
  p.validate();
  return p;
}

void EconomicParams::validate() const {
  if (!(mu > 0.0)) {
    throw InvalidInput("economic params: mu must be > 0");
  }
  for (int i = 0; i < 2; ++i) {
    if (!std::isfinite(quality[i]) || !std::isfinite(cost[i])) {
      throw InvalidInput("economic params: non-finite quality or cost");
    }
  }
  if (!std::isfinite(mu) || !std::isfinite(outside_quality)) {
    throw InvalidInput("economic params: non-finite mu or outside quality");
  }
}

bool EconomicParams::has_uniform_markup(double markup, double tol) const {
  return std::abs(quality[0] - cost[0] - markup) <= tol &&
         std::abs(quality[1] - cost[1] - markup) <= tol &&
         std::abs(outside_quality) <= tol;
}

const char* to_string(ObsMode mode) {
  return mode == ObsMode::FullMemory ? "full" : "own";
}

void ContextSpec::validate() const {
  econ.validate();
  if (num_players != kNumPlayers) {
    throw UnsupportedConfig("context '" + id + "': only 2-player games are implemented");
  }
  if (id.empty()) {
    throw InvalidInput("context id must be non-empty");
  }
}

std::array<double, 2> logit_demand(const std::array<double, 2>& prices,
                                   const EconomicParams& params) {
  params.validate();
  if (!std::isfinite(prices[0]) || !std::isfinite(prices[1])) {
    throw InvalidInput("logit_demand: non-finite price");
  }
  const double e0 = std::exp((params.quality[0] - prices[0]) / params.mu);
  const double e1 = std::exp((params.quality[1] - prices[1]) / params.mu);
  const double denom = e0 + e1 + std::exp(params.outside_quality / params.mu);
  return {e0 / denom, e1 / denom};
}

std::array<double, 2> profit(const std::array<double, 2>& prices,
                             const EconomicParams& params) {
  const auto q = logit_demand(prices, params);
  return {(prices[0] - params.cost[0]) * q[0], (prices[1] - params.cost[1]) * q[1]};
}

GameState transition(const GameState& state, const std::array<int, 2>& actions,
                     int grid_size) {
  for (int a : actions) {
    if (a < 0 || a >= grid_size) {
      throw InvalidInput("transition: action index out of range");
    }
  }
  return GameState{{actions[0], actions[1]}, state.context_id};
}

int observation_count(ObsMode mode, int grid_size) {
  return mode == ObsMode::FullMemory ? grid_size * grid_size : grid_size;
}

int encode_observation(int own, int rival, ObsMode mode, int grid_size) {
  if (own < 0 || own >= grid_size || rival < 0 || rival >= grid_size) {
    throw InvalidInput("encode_observation: price index out of range");
  }
  return mode == ObsMode::FullMemory ? own * grid_size + rival : own;
}

std::pair<int, int> decode_full_observation(int index, int grid_size) {
  if (index < 0 || index >= grid_size * grid_size) {
    throw InvalidInput("decode_full_observation: index out of range");
  }
  return {index / grid_size, index % grid_size};
}

std::array<Observation, 2> observe(const GameState& state, ObsMode mode,
                                   int grid_size) {
  const int p0 = state.price_index[0];
  const int p1 = state.price_index[1];
  return {Observation{mode, encode_observation(p0, p1, mode, grid_size)},
          Observation{mode, encode_observation(p1, p0, mode, grid_size)}};
}

}  // namespace pricelab
