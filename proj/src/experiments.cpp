#include "pricelab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace pricelab {

const char* to_string(TestMode mode) {
  return mode == TestMode::FixedPolicy ? "fixed" : "update";
}

ProfitTables ProfitTables::from(const PriceGrid& grid, const EconomicParams& params) {
  ProfitTables t;
  t.m = grid.size();
  for (auto& v : t.own_major) v.resize(static_cast<std::size_t>(t.m) * t.m);
  for (int a = 0; a < t.m; ++a) {
    for (int b = 0; b < t.m; ++b) {
      const auto r = profit({grid[a], grid[b]}, params);
      t.own_major[0][static_cast<std::size_t>(a) * t.m + b] = r[0];
      t.own_major[1][static_cast<std::size_t>(b) * t.m + a] = r[1];
    }
  }
  return t;
}

namespace {

// Deterministic joint play of two canonical greedy policies.
struct GreedyPair {
  const std::vector<int>* greedy_1;
  const std::vector<int>* greedy_2;
  int m;
  bool full;

  std::array<int, 2> step(const std::array<int, 2>& s) const {
    const int o1 = full ? s[0] * m + s[1] : s[0];
    const int o2 = full ? s[1] * m + s[0] : s[1];
    return {(*greedy_1)[static_cast<std::size_t>(o1)],
            (*greedy_2)[static_cast<std::size_t>(o2)]};
  }
};

struct LimitCycle {
  std::vector<std::array<int, 2>> states;  // joint profiles on the cycle, in order
  std::int64_t entry_time = 0;             // steps from the start to the first cycle state
};

// With deterministic policies on m^2 states a revisit happens within m^2 + 1
// steps; everything from the first visit of the revisited state is the cycle.
LimitCycle find_limit_cycle(const GreedyPair& pair, std::array<int, 2> state) {
  const int n = pair.m * pair.m;
  std::vector<std::int64_t> first_seen(static_cast<std::size_t>(n), -1);
  std::vector<std::array<int, 2>> path;
  std::int64_t t = 0;
  for (;;) {
    const int id = state[0] * pair.m + state[1];
    if (first_seen[static_cast<std::size_t>(id)] != -1) {
      LimitCycle cycle;
      cycle.entry_time = first_seen[static_cast<std::size_t>(id)];
      cycle.states.assign(path.begin() + static_cast<std::ptrdiff_t>(cycle.entry_time),
                          path.end());
      return cycle;
    }
    first_seen[static_cast<std::size_t>(id)] = t++;
    path.push_back(state);
    state = pair.step(state);
  }
}

struct Series {
  std::vector<int> actions_1, actions_2;
  std::vector<double> profits_1, profits_2;

  void record(const std::array<int, 2>& a, const ProfitTables& tables) {
    actions_1.push_back(a[0]);
    actions_2.push_back(a[1]);
    profits_1.push_back(tables.reward(0, a[0], a[1]));
    profits_2.push_back(tables.reward(1, a[1], a[0]));
  }
};

SessionOutcome outcome_from_series(const Series& s, const Benchmarks& bench,
                                   std::int64_t horizon, bool converged,
                                   std::int64_t time_to_convergence) {
  SessionOutcome out;
  out.metrics = collusion_metrics(s.profits_1, s.profits_2, bench);
  out.type = classify_outcome(s.actions_1, s.actions_2);
  out.horizon = horizon;
  out.converged = converged;
  out.time_to_convergence = time_to_convergence;
  return out;
}

// Metrics over the exact cycle; classification over the cycle repeated to a
// comfortable series length.
SessionOutcome outcome_from_cycle(const LimitCycle& cycle, const ProfitTables& tables,
                                  const Benchmarks& bench, bool converged,
                                  std::int64_t time_to_convergence) {
  Series on_cycle;
  for (const auto& s : cycle.states) on_cycle.record(s, tables);

  SessionOutcome out;
  out.metrics = collusion_metrics(on_cycle.profits_1, on_cycle.profits_2, bench);

  const std::size_t len = cycle.states.size();
  const std::size_t reps = (1000 + len - 1) / len;
  Series repeated;
  for (std::size_t r = 0; r < reps; ++r) {
    for (const auto& s : cycle.states) repeated.record(s, tables);
  }
  out.type = classify_outcome(repeated.actions_1, repeated.actions_2);
  out.horizon = static_cast<std::int64_t>(len);
  out.converged = converged;
  out.time_to_convergence = time_to_convergence;
  return out;
}

GreedyPair pair_of(const PolicyDump& p1, const PolicyDump& p2, const PriceGrid& grid,
                   ObsMode mode) {
  return GreedyPair{&p1.greedy, &p2.greedy, grid.size(), mode == ObsMode::FullMemory};
}

void check_assignment(const PolicyDump& p1, const PolicyDump& p2,
                      const ContextSpec& eval, const PriceGrid& grid) {
  if (p1.mode != p2.mode || p1.mode != eval.mode) {
    throw InvalidAssignment("test assignment: observation mode mismatch");
  }
  const int want = observation_count(eval.mode, grid.size());
  if (static_cast<int>(p1.greedy.size()) != want ||
      static_cast<int>(p2.greedy.size()) != want) {
    throw InvalidAssignment("test assignment: policy does not match the price grid");
  }
  const PolicyDump* dumps[2] = {&p1, &p2};
  for (int seat = 0; seat < 2; ++seat) {
    const auto& d = *dumps[seat];
    if (eval.econ.cost[static_cast<std::size_t>(seat)] != d.own_cost() ||
        eval.econ.quality[static_cast<std::size_t>(seat)] != d.own_quality()) {
      throw InvalidAssignment(
          "test assignment: seat " + std::to_string(seat + 1) +
          " parameters differ from the policy's training parameters");
    }
    if (eval.econ.mu != d.econ.mu ||
        eval.econ.outside_quality != d.econ.outside_quality) {
      throw InvalidAssignment("test assignment: demand parameters differ from training");
    }
  }
}

}  // namespace

TrainedSession run_training_session(const ContextSpec& ctx, const PriceGrid& grid,
                                    const Hyperparams& hyper, int session_number,
                                    const Benchmarks& bench) {
  ctx.validate();
  hyper.validate();
  const int m = grid.size();
  const bool full = ctx.mode == ObsMode::FullMemory;
  const auto tables = ProfitTables::from(grid, ctx.econ);
  const std::uint64_t seed = session_seed(ctx, session_number);
  Rng rng(seed);

  std::array<QTable, 2> q{init_q(grid, ctx.econ, hyper.delta, 0, ctx.mode),
                          init_q(grid, ctx.econ, hyper.delta, 1, ctx.mode)};
  std::array<GreedyCache, 2> cache{GreedyCache(q[0]), GreedyCache(q[1])};

  std::array<int, 2> state{static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m))),
                           static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m)))};

  std::int64_t quiet = 0;
  std::int64_t t = 0;
  bool converged = false;
  while (t < hyper.max_periods) {
    const double eps = std::exp(-hyper.beta * static_cast<double>(t));
    const int o1 = full ? state[0] * m + state[1] : state[0];
    const int o2 = full ? state[1] * m + state[0] : state[1];
    const int a1 = select_action_with_eps(q[0], o1, eps, rng).action;
    const int a2 = select_action_with_eps(q[1], o2, eps, rng).action;

    const double r1 = tables.reward(0, a1, a2);
    const double r2 = tables.reward(1, a2, a1);
    const int next_o1 = full ? a1 * m + a2 : a1;
    const int next_o2 = full ? a2 * m + a1 : a2;

    q_update(q[0], o1, a1, r1, next_o1, hyper.alpha, hyper.delta);
    q_update(q[1], o2, a2, r2, next_o2, hyper.alpha, hyper.delta);
    const bool changed = cache[0].refresh(q[0], o1) | cache[1].refresh(q[1], o2);

    quiet = changed ? 0 : quiet + 1;
    state = {a1, a2};
    ++t;
    if (quiet >= hyper.window) {
      converged = true;
      break;
    }
  }

  TrainedSession session;
  session.policies = {make_policy_dump(q[0], 0, ctx, seed, session_number, converged, t),
                      make_policy_dump(q[1], 1, ctx, seed, session_number, converged, t)};
  session.final_state = GameState{state, ctx.id};
  session.outcome = converged_outcome(session.policies[0], session.policies[1], ctx.econ,
                                      grid, bench, session.final_state, converged, t);
  return session;
}

SessionOutcome converged_outcome(const PolicyDump& policy_1, const PolicyDump& policy_2,
                                 const EconomicParams& econ, const PriceGrid& grid,
                                 const Benchmarks& bench, const GameState& from,
                                 bool converged, std::int64_t periods) {
  const auto tables = ProfitTables::from(grid, econ);
  const auto pair = pair_of(policy_1, policy_2, grid, policy_1.mode);
  const auto cycle = find_limit_cycle(pair, from.price_index);
  return outcome_from_cycle(cycle, tables, bench, converged, periods);
}

TestOutcome run_test_session(const TestAssignment& assignment, std::int64_t horizon,
                             const Hyperparams& hyper, const PriceGrid& grid,
                             const Benchmarks& bench) {
  const auto& p1 = *assignment.policy_1;
  const auto& p2 = *assignment.policy_2;
  const auto& eval = assignment.eval_context;
  check_assignment(p1, p2, eval, grid);
  hyper.validate();

  const int m = grid.size();
  const bool full = eval.mode == ObsMode::FullMemory;
  const auto tables = ProfitTables::from(grid, eval.econ);
  Rng rng(session_seed(eval, assignment.session_number));
  std::array<int, 2> state{static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m))),
                           static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m)))};

  TestOutcome result;

  if (assignment.mode == TestMode::FixedPolicy) {
    const auto pair = pair_of(p1, p2, grid, eval.mode);
    Series window;
    auto s = state;
    for (std::int64_t t = 0; t < horizon; ++t) {
      s = pair.step(s);
      window.record(s, tables);
    }
    result.first_window = outcome_from_series(window, bench, horizon, true, -1);

    // frozen policies re-converge onto their limit cycle by construction
    const auto cycle = find_limit_cycle(pair, state);
    result.reconverged = outcome_from_cycle(cycle, tables, bench, true, cycle.entry_time);
    return result;
  }

  // UpdateNoExploration: greedy live play with reinforcement, no exploration.
  std::array<QTable, 2> q{p1.q, p2.q};
  std::array<GreedyCache, 2> cache{GreedyCache(q[0]), GreedyCache(q[1])};
  Series window;
  std::int64_t quiet = 0;
  std::int64_t t = 0;
  std::int64_t converged_at = -1;
  while (t < hyper.max_periods) {
    const int o1 = full ? state[0] * m + state[1] : state[0];
    const int o2 = full ? state[1] * m + state[0] : state[1];
    const int a1 = select_action_with_eps(q[0], o1, 0.0, rng).action;
    const int a2 = select_action_with_eps(q[1], o2, 0.0, rng).action;
    const double r1 = tables.reward(0, a1, a2);
    const double r2 = tables.reward(1, a2, a1);
    const int next_o1 = full ? a1 * m + a2 : a1;
    const int next_o2 = full ? a2 * m + a1 : a2;
    q_update(q[0], o1, a1, r1, next_o1, hyper.alpha, hyper.delta);
    q_update(q[1], o2, a2, r2, next_o2, hyper.alpha, hyper.delta);
    const bool changed = cache[0].refresh(q[0], o1) | cache[1].refresh(q[1], o2);
    quiet = changed ? 0 : quiet + 1;
    state = {a1, a2};
    if (t < horizon) window.record(state, tables);
    ++t;
    if (converged_at < 0 && quiet >= hyper.window) converged_at = t;
    if (converged_at >= 0 && t >= horizon) break;
  }
  const bool converged = converged_at >= 0;

  result.first_window = outcome_from_series(
      window, bench, static_cast<std::int64_t>(window.profits_1.size()), converged, -1);

  auto dump_1 = make_policy_dump(q[0], 0, eval, 0, assignment.session_number, converged, t);
  auto dump_2 = make_policy_dump(q[1], 1, eval, 0, assignment.session_number, converged, t);
  const auto pair = pair_of(dump_1, dump_2, grid, eval.mode);
  const auto cycle = find_limit_cycle(pair, state);
  result.reconverged = outcome_from_cycle(cycle, tables, bench, converged,
                                          converged ? converged_at : t);
  return result;
}

DeviationPath run_deviation_experiment(const PolicyDump& policy_1,
                                       const PolicyDump& policy_2,
                                       const ContextSpec& ctx, const PriceGrid& grid,
                                       const GameState& converged_state,
                                       int pre_periods, int post_periods) {
  if (policy_1.context_id != policy_2.context_id ||
      policy_1.session_number != policy_2.session_number) {
    throw InvalidAssignment("deviation: policies are not from one joint session");
  }
  if (pre_periods < 1 || post_periods < 1) {
    throw InvalidInput("deviation: need at least one period on each side");
  }

  const auto pair = pair_of(policy_1, policy_2, grid, ctx.mode);
  const int nash_index = grid.nearest_index(solve_nash(ctx.econ).prices[0]);

  // settle onto the converged limit cycle first
  const auto cycle = find_limit_cycle(pair, converged_state.price_index);
  auto state = cycle.states.front();

  DeviationPath path;
  path.pre_periods = pre_periods;
  path.forced_action = nash_index;
  auto record = [&](const std::array<int, 2>& a) {
    path.deviator.push_back(grid[a[0]]);
    path.rival.push_back(grid[a[1]]);
  };

  for (int k = 0; k < pre_periods; ++k) {
    const auto a = pair.step(state);
    record(a);
    state = a;
  }
  // forced deviation: player 1's action is overridden, the rival still plays greedy
  {
    auto a = pair.step(state);
    a[0] = nash_index;
    record(a);
    state = a;
  }
  for (int k = 0; k < post_periods; ++k) {
    const auto a = pair.step(state);
    record(a);
    state = a;
  }
  return path;
}

SessionOutcome run_restart_from(const PolicyDump& policy_1, const PolicyDump& policy_2,
                                const ContextSpec& ctx, const PriceGrid& grid,
                                const Benchmarks& bench, std::int64_t horizon,
                                const GameState& initial) {
  check_assignment(policy_1, policy_2, ctx, grid);
  const auto tables = ProfitTables::from(grid, ctx.econ);
  const auto pair = pair_of(policy_1, policy_2, grid, ctx.mode);
  Series window;
  auto s = initial.price_index;
  for (std::int64_t t = 0; t < horizon; ++t) {
    s = pair.step(s);
    window.record(s, tables);
  }
  return outcome_from_series(window, bench, horizon, true, -1);
}

SessionOutcome run_random_restart(const PolicyDump& policy_1, const PolicyDump& policy_2,
                                  const ContextSpec& ctx, const PriceGrid& grid,
                                  const Benchmarks& bench, std::int64_t horizon,
                                  int session_number) {
  Rng rng(hash_combine(session_seed(ctx, session_number), fnv1a64("restart")));
  const int m = grid.size();
  const GameState initial{
      {static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m))),
       static_cast<int>(rng.next_below(static_cast<std::uint32_t>(m)))},
      ctx.id};
  return run_restart_from(policy_1, policy_2, ctx, grid, bench, horizon, initial);
}

void parallel_for(int n, int workers, const std::function<void(int)>& task) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) task(i);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

int TrainedContext::converged_count() const {
  int n = 0;
  for (const auto& s : sessions) n += s.outcome.converged ? 1 : 0;
  return n;
}

double TrainedContext::mean_collusion() const {
  double total = 0.0;
  int n = 0;
  for (const auto& s : sessions) {
    if (s.outcome.converged) {
      total += s.outcome.metrics.index;
      ++n;
    }
  }
  return n > 0 ? total / n : 0.0;
}

TrainedContext train_context(const ContextSpec& ctx, const PriceGrid& grid,
                             const Hyperparams& hyper, int sessions, int workers) {
  TrainedContext result;
  result.ctx = ctx;
  result.bench = Benchmarks::from(ctx.econ);
  result.sessions.resize(static_cast<std::size_t>(sessions));
  parallel_for(sessions, workers, [&](int i) {
    result.sessions[static_cast<std::size_t>(i)] =
        run_training_session(ctx, grid, hyper, i, result.bench);
  });
  return result;
}

std::vector<PairedTestResult> run_test_pairing(const TrainedContext& a,
                                               const TrainedContext& b, TestMode mode,
                                               std::int64_t horizon,
                                               const Hyperparams& hyper,
                                               const PriceGrid& grid) {
  if (!(a.ctx.econ == b.ctx.econ) || a.ctx.mode != b.ctx.mode) {
    throw InvalidAssignment("test pairing: contexts are not identically parameterized");
  }
  if (a.sessions.size() != b.sessions.size()) {
    throw InvalidAssignment("test pairing: unequal session counts");
  }

  ContextSpec eval;
  eval.id = a.ctx.id + "+" + b.ctx.id;
  eval.econ = a.ctx.econ;
  eval.mode = a.ctx.mode;
  eval.seed = hash_combine(hash_combine(a.ctx.seed, b.ctx.seed), fnv1a64("test"));

  std::vector<PairedTestResult> results;
  results.reserve(a.sessions.size());
  for (std::size_t s = 0; s < a.sessions.size(); ++s) {
    TestAssignment assignment;
    assignment.policy_1 = &a.sessions[s].policies[0];
    assignment.policy_2 = &b.sessions[s].policies[1];
    assignment.eval_context = eval;
    assignment.mode = mode;
    assignment.session_number = static_cast<int>(s);

    PairedTestResult row;
    row.session_number = static_cast<int>(s);
    row.both_converged = a.sessions[s].outcome.converged && b.sessions[s].outcome.converged;
    row.outcome = run_test_session(assignment, horizon, hyper, grid, a.bench);
    results.push_back(std::move(row));
  }
  return results;
}

CrossCostMatrix run_cross_cost_matrix(std::span<const TrainedContext> by_cost,
                                      std::int64_t horizon, const Hyperparams& hyper,
                                      const PriceGrid& grid) {
  if (by_cost.empty()) throw InvalidInput("cross-cost matrix: no trained contexts");
  const std::size_t n = by_cost.size();

  CrossCostMatrix matrix;
  matrix.costs.reserve(n);
  for (const auto& tc : by_cost) matrix.costs.push_back(tc.ctx.econ.cost[0]);
  matrix.cells.assign(n, std::vector<CrossCostCell>(n));

  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      auto& cell = matrix.cells[r][c];
      if (r == c) {
        for (const auto& s : by_cost[r].sessions) {
          if (!s.outcome.converged) continue;
          cell.mean_index += s.outcome.metrics.index;
          cell.mean_gain[0] += s.outcome.metrics.profit_gain[0];
          cell.mean_gain[1] += s.outcome.metrics.profit_gain[1];
          ++cell.pairs;
        }
      } else {
        const auto& row_ctx = by_cost[r];
        const auto& col_ctx = by_cost[c];
        ContextSpec eval;
        eval.id = "mx:" + row_ctx.ctx.id + "+" + col_ctx.ctx.id;
        eval.mode = row_ctx.ctx.mode;
        eval.econ = row_ctx.ctx.econ;
        eval.econ.cost[1] = col_ctx.ctx.econ.cost[1];
        eval.econ.quality[1] = col_ctx.ctx.econ.quality[1];
        eval.seed = hash_combine(hash_combine(row_ctx.ctx.seed, col_ctx.ctx.seed),
                                 fnv1a64("matrix"));
        const auto bench = Benchmarks::from(eval.econ);

        const std::size_t pairs = std::min(row_ctx.sessions.size(), col_ctx.sessions.size());
        for (std::size_t s = 0; s < pairs; ++s) {
          if (!row_ctx.sessions[s].outcome.converged ||
              !col_ctx.sessions[s].outcome.converged) {
            continue;
          }
          TestAssignment assignment;
          assignment.policy_1 = &row_ctx.sessions[s].policies[0];
          assignment.policy_2 = &col_ctx.sessions[s].policies[1];
          assignment.eval_context = eval;
          assignment.mode = TestMode::FixedPolicy;
          assignment.session_number = static_cast<int>(s);
          const auto outcome = run_test_session(assignment, horizon, hyper, grid, bench);
          cell.mean_index += outcome.first_window.metrics.index;
          cell.mean_gain[0] += outcome.first_window.metrics.profit_gain[0];
          cell.mean_gain[1] += outcome.first_window.metrics.profit_gain[1];
          ++cell.pairs;
        }
      }
      if (cell.pairs > 0) {
        cell.mean_index /= cell.pairs;
        cell.mean_gain[0] /= cell.pairs;
        cell.mean_gain[1] /= cell.pairs;
      }
    }
  }

  std::vector<std::vector<double>> index_matrix(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      index_matrix[r][c] = matrix.cells[r][c].mean_index;
    }
  }
  matrix.avg_proportional_loss = pricelab::avg_proportional_loss(index_matrix);
  return matrix;
}

}  // namespace pricelab
