#include "pricelab/qlearning.hpp"

#include <algorithm>
#include <cmath>

namespace pricelab {

void Hyperparams::validate() const {
  std::vector<std::string> issues;
  if (!(alpha >= 0.0 && alpha <= 1.0)) issues.push_back("alpha must be in [0, 1]");
  if (!(delta >= 0.0 && delta < 1.0)) issues.push_back("delta must be in [0, 1)");
  if (!(beta > 0.0)) issues.push_back("beta must be > 0");
  if (window < 1) issues.push_back("window must be >= 1");
  if (max_periods < 1) issues.push_back("max_periods must be >= 1");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

double QTable::row_max(int obs) const {
  const auto r = row(obs);
  double best = r[0];
  for (double v : r) best = std::max(best, v);
  return best;
}

int QTable::greedy_action(int obs) const {
  const auto r = row(obs);
  int best = 0;
  for (int a = 1; a < actions_; ++a) {
    if (r[static_cast<std::size_t>(a)] > r[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

QTable init_q(const PriceGrid& grid, const EconomicParams& params, double delta,
              int player, ObsMode mode) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw InvalidInput("init_q: delta must be in [0, 1)");
  }
  if (player < 0 || player >= 2) throw InvalidInput("init_q: bad player");
  const int m = grid.size();
  const int rival = 1 - player;

  std::vector<double> row(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a) {
    double total = 0.0;
    for (int b = 0; b < m; ++b) {
      std::array<double, 2> p;
      p[static_cast<std::size_t>(player)] = grid[a];
      p[static_cast<std::size_t>(rival)] = grid[b];
      total += profit(p, params)[static_cast<std::size_t>(player)];
    }
    row[static_cast<std::size_t>(a)] = total / m / (1.0 - delta);
  }

  QTable q(observation_count(mode, m), m);
  for (int o = 0; o < q.observation_count(); ++o) {
    for (int a = 0; a < m; ++a) {
      q.at(o, a) = row[static_cast<std::size_t>(a)];
    }
  }
  return q;
}

double epsilon(std::int64_t t, double beta) {
  if (t < 0) throw InvalidInput("epsilon: t must be >= 0");
  return std::exp(-beta * static_cast<double>(t));
}

ActionChoice select_action_with_eps(const QTable& q, int obs, double eps, Rng& rng) {
  const int m = q.action_count();
  if (eps > 0.0 && rng.next_double() < eps) {
    return {static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m))), true};
  }
  // single pass; reservoir sampling over tied maxima
  const auto r = q.row(obs);
  int chosen = 0;
  double best = r[0];
  int ties = 1;
  for (int a = 1; a < m; ++a) {
    const double v = r[static_cast<std::size_t>(a)];
    if (v > best) {
      best = v;
      chosen = a;
      ties = 1;
    } else if (v == best) {
      ++ties;
      if (rng.next_below(static_cast<std::uint32_t>(ties)) == 0) chosen = a;
    }
  }
  return {chosen, false};
}

ActionChoice select_action(const QTable& q, int obs, std::int64_t t, double beta,
                           Rng& rng) {
  return select_action_with_eps(q, obs, epsilon(t, beta), rng);
}

void q_update(QTable& q, int obs, int action, double reward, int next_obs,
              double alpha, double delta) {
  const double max_next = q.row_max(next_obs);
  double& cell = q.at(obs, action);
  cell = (1.0 - alpha) * cell + alpha * (reward + delta * max_next);
}

GreedyCache::GreedyCache(const QTable& q) {
  actions_.resize(static_cast<std::size_t>(q.observation_count()));
  for (int o = 0; o < q.observation_count(); ++o) {
    actions_[static_cast<std::size_t>(o)] = q.greedy_action(o);
  }
}

bool GreedyCache::refresh(const QTable& q, int obs) {
  const int fresh = q.greedy_action(obs);
  int& cached = actions_[static_cast<std::size_t>(obs)];
  if (fresh == cached) return false;
  cached = fresh;
  return true;
}

bool check_convergence(const std::vector<bool>& changed, std::int64_t window) {
  std::int64_t quiet = 0;
  for (auto it = changed.rbegin(); it != changed.rend() && !*it; ++it) ++quiet;
  return quiet >= window;
}

PolicyDump make_policy_dump(const QTable& q, int player, const ContextSpec& ctx,
                            std::uint64_t session_seed, int session_number,
                            bool converged, std::int64_t periods) {
  PolicyDump dump;
  dump.q = q;
  dump.player = player;
  dump.context_id = ctx.id;
  dump.econ = ctx.econ;
  dump.mode = ctx.mode;
  dump.session_seed = session_seed;
  dump.session_number = session_number;
  dump.converged = converged;
  dump.periods = periods;

  dump.greedy.resize(static_cast<std::size_t>(q.observation_count()));
  for (int o = 0; o < q.observation_count(); ++o) {
    const int a = q.greedy_action(o);
    dump.greedy[static_cast<std::size_t>(o)] = a;
    const auto r = q.row(o);
    int at_max = 0;
    for (double v : r) {
      if (v == r[static_cast<std::size_t>(a)]) ++at_max;
    }
    if (at_max > 1) ++dump.tie_count;
  }
  return dump;
}

std::uint64_t session_seed(const ContextSpec& ctx, int session_number) {
  std::uint64_t h = hash_combine(ctx.seed, fnv1a64(ctx.id));
  return hash_combine(h, static_cast<std::uint64_t>(session_number));
}

}  // namespace pricelab
