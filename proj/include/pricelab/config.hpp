#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pricelab/experiments.hpp"

namespace pricelab {

// How the shared price grid is derived: the parameterization set is one
// symmetric duopoly per cost level, all with the same markup and demand
// parameters.
struct GridSpec {
  int m = 20;
  double xi = 0.1;
  double mu = 0.25;
  double markup = 1.0;             // quality - cost, per player
  double outside_quality = 0.0;
  std::vector<double> cost_levels{1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7};

  std::vector<EconomicParams> parameterizations() const;
  PriceGrid build() const;

  bool operator==(const GridSpec&) const = default;
};

struct ExperimentPlan {
  GridSpec grid;
  Hyperparams hyper;

  int sessions_per_context = 210;
  std::int64_t horizon = 1000;
  TestMode test_mode = TestMode::FixedPolicy;
  ObsMode obs_mode = ObsMode::FullMemory;
  std::vector<double> train_costs;  // empty = grid.cost_levels
  int seed_groups = 2;              // independently seeded context groups per cost
  double min_convergence_rate = 0.9;
  int deviation_pre = 10;
  int deviation_post = 50;

  std::uint64_t master_seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";

  std::vector<double> effective_train_costs() const;
  // Contexts generated from train costs x seed groups; ids carry the cost and
  // the group letter, seeds derive from the master seed and the id.
  std::vector<ContextSpec> contexts() const;

  bool operator==(const ExperimentPlan&) const = default;
};

enum class Scale { Paper, Desk };

// Rebinds beta, window, max_periods and the session count to the named
// profile; everything else is untouched.
void apply_scale(ExperimentPlan& plan, Scale scale);

struct LoadedConfig {
  ExperimentPlan plan;
  std::vector<std::string> warnings;
};

// Flat key-value format with [section] headers, '#' comments, UTF-8. Unknown
// sections or keys are rejected; all validation issues are reported together.
LoadedConfig parse_config(std::string_view text);
LoadedConfig load_config(const std::string& path);

// Resolved configuration, reloadable by parse_config into an equal plan.
std::string emit_config(const ExperimentPlan& plan);

}  // namespace pricelab
