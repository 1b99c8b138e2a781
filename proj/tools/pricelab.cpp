// pricelab: train/test tabular Q-learning pricing agents in repeated Bertrand
// competition and analyze the resulting policies.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "pricelab/config.hpp"
#include "pricelab/outputs.hpp"

namespace fs = std::filesystem;
using namespace pricelab;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string now_utc_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::string scale;
  std::uint64_t master_seed = 0;
  bool master_seed_set = false;
  bool out_set = false;
  int workers = -1;
};

ExperimentPlan resolve_plan(const GlobalArgs& args) {
  LoadedConfig loaded =
      args.config_path.empty() ? parse_config("") : load_config(args.config_path);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  ExperimentPlan plan = std::move(loaded.plan);
  if (!args.scale.empty()) {
    apply_scale(plan, args.scale == "desk" ? Scale::Desk : Scale::Paper);
  }
  if (args.master_seed_set) plan.master_seed = args.master_seed;
  if (args.workers >= 0) plan.workers = args.workers;
  if (args.out_set) plan.out_dir = args.out_dir;
  return plan;
}

RunManifest start_manifest(const ExperimentPlan& plan, const std::string& command) {
  RunManifest manifest;
  manifest.tool_version = std::string("pricelab ") + kVersion;
  manifest.command = command;
  manifest.master_seed = plan.master_seed;
  manifest.config_text = emit_config(plan);
  for (const auto& ctx : plan.contexts()) manifest.context_seeds[ctx.id] = ctx.seed;
  manifest.started_utc = now_utc_iso();
  return manifest;
}

void finish_manifest(RunManifest manifest, const fs::path& out_dir) {
  manifest.finished_utc = now_utc_iso();
  write_manifest(out_dir, manifest);
}

void merge_sessions_file(const fs::path& out_dir, const std::vector<SessionRow>& fresh) {
  std::vector<SessionRow> rows;
  const fs::path path = out_dir / "sessions.csv";
  if (fs::exists(path)) rows = parse_sessions_csv(read_file(path));
  rows = merge_rows(std::move(rows), fresh);
  write_file_atomic(path, sessions_csv(rows));
  // summary derives from the written bytes, so regenerating it later from
  // sessions.csv reproduces it exactly
  write_file_atomic(out_dir / "summary.csv",
                    summary_csv(parse_sessions_csv(read_file(path))));
}

std::vector<SessionDump> load_dumps(const fs::path& out_dir) {
  const fs::path root = out_dir / "dumps";
  if (!fs::exists(root)) throw IoError("no dumps found under " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dump") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionDump> dumps;
  dumps.reserve(files.size());
  for (const auto& f : files) dumps.push_back(parse_session_dump(read_file(f)));
  for (const auto& d : dumps) {
    const auto& first = dumps.front();
    if (d.grid_m != first.grid_m || d.grid_lo != first.grid_lo ||
        d.grid_hi != first.grid_hi) {
      throw InvalidAssignment("dumps under " + root.string() +
                              " were produced on different price grids");
    }
  }
  return dumps;
}

PriceGrid grid_of(const SessionDump& dump, const ExperimentPlan& plan) {
  auto grid = PriceGrid::linspace(dump.grid_lo, dump.grid_hi, dump.grid_m, dump.grid_xi);
  grid.derived_from = plan.grid.parameterizations();
  return grid;
}

// Rebuilds the in-memory shape of a trained context from its dump files,
// including the recomputed post-convergence outcomes.
TrainedContext rebuild_context(std::vector<SessionDump> dumps, const PriceGrid& grid) {
  TrainedContext tc;
  tc.ctx = dumps.front().context;
  tc.bench = Benchmarks::from(tc.ctx.econ);
  std::sort(dumps.begin(), dumps.end(), [](const SessionDump& a, const SessionDump& b) {
    return a.session_number < b.session_number;
  });
  for (auto& d : dumps) {
    TrainedSession s;
    s.policies = std::move(d.policies);
    s.final_state = d.final_state;
    s.outcome = converged_outcome(s.policies[0], s.policies[1], tc.ctx.econ, grid,
                                  tc.bench, s.final_state, d.converged, d.periods);
    tc.sessions.push_back(std::move(s));
  }
  return tc;
}

std::map<std::string, std::vector<SessionDump>> group_by_context(
    std::vector<SessionDump> dumps) {
  std::map<std::string, std::vector<SessionDump>> groups;
  for (auto& d : dumps) groups[d.context.id].push_back(std::move(d));
  return groups;
}

std::string csv_line(std::initializer_list<std::string> fields) {
  std::string line;
  for (const auto& f : fields) {
    if (!line.empty()) line += ',';
    line += f;
  }
  return line + "\n";
}

// ---- subcommand bodies ------------------------------------------------------

int cmd_solve(const ExperimentPlan& plan) {
  for (double cost : plan.grid.cost_levels) {
    const auto params = EconomicParams::symmetric(cost, plan.grid.markup, plan.grid.mu,
                                                  plan.grid.outside_quality);
    const auto nash = solve_nash(params);
    const auto mono = solve_monopoly(params);
    std::printf(
        "cost=%.4g  nash_price=%.6g nash_profit=%.6g  monopoly_price=%.6g "
        "monopoly_profit=%.6g\n",
        cost, nash.prices[0], nash.profits[0], mono.prices[0], mono.profits[0]);
  }
  return 0;
}

int cmd_grid(const ExperimentPlan& plan) {
  const auto grid = plan.grid.build();
  std::printf("m=%d xi=%.6g interval=[%.6g, %.6g] step=%.6g\n", grid.size(), grid.xi,
              grid.lo, grid.hi, grid.step());
  for (int i = 0; i < grid.size(); ++i) std::printf("%d,%.6g\n", i, grid[i]);
  return 0;
}

int cmd_bench_table(const ExperimentPlan& plan, bool write_files) {
  const auto grid = plan.grid.build();
  std::string csv = "cost_level,both_randomize_pct,nash_vs_random_pct,best_response_vs_random_pct\n";
  for (double cost : plan.grid.cost_levels) {
    const auto params = EconomicParams::symmetric(cost, plan.grid.markup, plan.grid.mu,
                                                  plan.grid.outside_quality);
    const auto b = randomization_benchmarks(grid, params);
    char line[128];
    std::snprintf(line, sizeof line, "%.2f,%.2f,%.2f,%.2f\n", cost, b.both_randomize,
                  b.nash_vs_random, b.best_response_vs_random);
    csv += line;
  }
  std::fputs(csv.c_str(), stdout);
  if (write_files) {
    auto manifest = start_manifest(plan, "bench-table");
    write_file_atomic(fs::path(plan.out_dir) / "bench_table.csv", csv);
    finish_manifest(std::move(manifest), plan.out_dir);
  }
  return 0;
}

int cmd_train(const ExperimentPlan& plan) {
  auto manifest = start_manifest(plan, "train");
  const auto grid = plan.grid.build();
  const auto contexts = plan.contexts();
  const fs::path out_dir = plan.out_dir;

  std::vector<SessionRow> rows;
  std::vector<TrainedContext> trained;
  int total = 0, converged = 0;
  for (std::size_t k = 0; k < contexts.size(); ++k) {
    const auto& ctx = contexts[k];
    auto tc = train_context(ctx, grid, plan.hyper, plan.sessions_per_context, plan.workers);
    std::fprintf(stderr, "trained %s (%zu/%zu): %d/%zu converged, mean M=%.3f\n",
                 ctx.id.c_str(), k + 1, contexts.size(), tc.converged_count(),
                 tc.sessions.size(), tc.mean_collusion());
    for (std::size_t s = 0; s < tc.sessions.size(); ++s) {
      const auto& session = tc.sessions[s];
      write_file_atomic(dump_path(out_dir, ctx.id, static_cast<int>(s)),
                        serialize_session_dump(session, ctx, plan.hyper, grid));
      rows.push_back(make_session_row(ctx.id, static_cast<int>(s), "train", ctx.econ,
                                      ctx.mode, session.outcome));
      ++total;
      converged += session.outcome.converged ? 1 : 0;
    }
    trained.push_back(std::move(tc));
  }

  merge_sessions_file(out_dir, rows);

  // collusion by cost level, aggregated over seed groups and converged sessions
  {
    std::map<double, std::vector<double>> by_cost;
    for (const auto& tc : trained) {
      for (const auto& s : tc.sessions) {
        if (s.outcome.converged) {
          by_cost[tc.ctx.econ.cost[0]].push_back(s.outcome.metrics.index);
        }
      }
    }
    std::string csv = "cost,mean_M,sd_M\n";
    for (const auto& [cost, values] : by_cost) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double sd =
          values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
      csv += csv_line({format_csv(cost), format_csv(mean), format_csv(sd)});
    }
    write_file_atomic(out_dir / "plots" / "fig_training_collusion.csv", csv);
  }

  // time-to-convergence histogram
  {
    std::vector<std::int64_t> times;
    for (const auto& tc : trained) {
      for (const auto& s : tc.sessions) {
        if (s.outcome.converged) times.push_back(s.outcome.time_to_convergence);
      }
    }
    std::string csv = "bin_lo,bin_hi,count\n";
    if (!times.empty()) {
      const auto [lo_it, hi_it] = std::minmax_element(times.begin(), times.end());
      const double lo = static_cast<double>(*lo_it);
      const double hi = static_cast<double>(*hi_it) + 1.0;
      constexpr int kBins = 20;
      std::array<int, kBins> counts{};
      for (auto t : times) {
        int bin = static_cast<int>((static_cast<double>(t) - lo) / (hi - lo) * kBins);
        counts[static_cast<std::size_t>(std::clamp(bin, 0, kBins - 1))]++;
      }
      for (int bin = 0; bin < kBins; ++bin) {
        csv += csv_line({format_csv(lo + (hi - lo) * bin / kBins),
                         format_csv(lo + (hi - lo) * (bin + 1) / kBins),
                         std::to_string(counts[static_cast<std::size_t>(bin)])});
      }
    }
    write_file_atomic(out_dir / "plots" / "fig_convergence_time.csv", csv);
  }

  finish_manifest(std::move(manifest), out_dir);

  const double rate = total > 0 ? static_cast<double>(converged) / total : 0.0;
  std::fprintf(stderr, "total convergence rate %.3f (threshold %.3f)\n", rate,
               plan.min_convergence_rate);
  return rate < plan.min_convergence_rate ? 4 : 0;
}

int cmd_test(const ExperimentPlan& plan) {
  auto manifest = start_manifest(plan, "test");
  const fs::path out_dir = plan.out_dir;
  auto groups = group_by_context(load_dumps(out_dir));
  if (groups.empty()) throw IoError("no dumps to test");

  const auto grid = grid_of(groups.begin()->second.front(), plan);

  // pair contexts with identical parameterization, in id order
  std::map<std::string, std::vector<std::string>> by_econ;
  for (const auto& [id, dumps] : groups) {
    const auto& e = dumps.front().context.econ;
    char key[96];
    std::snprintf(key, sizeof key, "%.17g|%.17g|%.17g|%.17g|%s", e.cost[0], e.cost[1],
                  e.mu, e.outside_quality, to_string(dumps.front().context.mode));
    by_econ[key].push_back(id);
  }

  std::vector<SessionRow> rows;
  std::string fig = "cost,train_M,test1000_M,reconv_M\n";
  for (auto& [key, ids] : by_econ) {
    if (ids.size() < 2) {
      std::fprintf(stderr, "skipping %s: need two seed groups, found %zu\n",
                   ids.front().c_str(), ids.size());
      continue;
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t pair_index = 0; pair_index + 1 < ids.size(); pair_index += 2) {
      auto a = rebuild_context(groups.at(ids[pair_index]), grid);
      auto b = rebuild_context(groups.at(ids[pair_index + 1]), grid);
      const auto results =
          run_test_pairing(a, b, plan.test_mode, plan.horizon, plan.hyper, grid);
      const std::string eval_id = a.ctx.id + "+" + b.ctx.id;
      double train_m = (a.mean_collusion() + b.mean_collusion()) / 2;
      double first_m = 0.0, reconv_m = 0.0;
      int n = 0;
      for (const auto& r : results) {
        if (!r.both_converged) continue;
        rows.push_back(make_session_row(eval_id, r.session_number, "test_1000",
                                        a.ctx.econ, a.ctx.mode, r.outcome.first_window));
        rows.push_back(make_session_row(eval_id, r.session_number, "test_reconv",
                                        a.ctx.econ, a.ctx.mode, r.outcome.reconverged));
        first_m += r.outcome.first_window.metrics.index;
        reconv_m += r.outcome.reconverged.metrics.index;
        ++n;
      }
      if (n > 0) {
        fig += csv_line({format_csv(a.ctx.econ.cost[0]), format_csv(train_m),
                         format_csv(first_m / n), format_csv(reconv_m / n)});
        std::fprintf(stderr, "tested %s: n=%d train M=%.3f first-1000 M=%.3f reconv M=%.3f\n",
                     eval_id.c_str(), n, train_m, first_m / n, reconv_m / n);
      }
    }
  }
  merge_sessions_file(out_dir, rows);
  write_file_atomic(out_dir / "plots" / "fig_testing_collusion.csv", fig);
  finish_manifest(std::move(manifest), out_dir);
  return 0;
}

int cmd_restart(const ExperimentPlan& plan) {
  auto manifest = start_manifest(plan, "restart");
  const fs::path out_dir = plan.out_dir;
  auto groups = group_by_context(load_dumps(out_dir));
  if (groups.empty()) throw IoError("no dumps to restart");
  const auto grid = grid_of(groups.begin()->second.front(), plan);

  std::vector<SessionRow> rows;
  std::string fig = "cost,train_M,restart_M\n";
  for (auto& [id, dumps] : groups) {
    auto tc = rebuild_context(std::move(dumps), grid);
    double train_m = tc.mean_collusion();
    double restart_m = 0.0;
    int n = 0;
    for (std::size_t s = 0; s < tc.sessions.size(); ++s) {
      const auto& session = tc.sessions[s];
      if (!session.outcome.converged) continue;
      const auto outcome =
          run_random_restart(session.policies[0], session.policies[1], tc.ctx, grid,
                             tc.bench, plan.horizon, static_cast<int>(s));
      rows.push_back(make_session_row(id, static_cast<int>(s), "restart", tc.ctx.econ,
                                      tc.ctx.mode, outcome));
      restart_m += outcome.metrics.index;
      ++n;
    }
    if (n > 0) {
      fig += csv_line({format_csv(tc.ctx.econ.cost[0]), format_csv(train_m),
                       format_csv(restart_m / n)});
      std::fprintf(stderr, "restart %s: n=%d train M=%.3f restart M=%.3f\n", id.c_str(), n,
                   train_m, restart_m / n);
    }
  }
  merge_sessions_file(out_dir, rows);
  write_file_atomic(out_dir / "plots" / "fig_restart.csv", fig);
  finish_manifest(std::move(manifest), out_dir);
  return 0;
}

int cmd_deviate(const ExperimentPlan& plan, double min_index) {
  auto manifest = start_manifest(plan, "deviate");
  const fs::path out_dir = plan.out_dir;
  auto groups = group_by_context(load_dumps(out_dir));
  if (groups.empty()) throw IoError("no dumps to deviate");
  const auto grid = grid_of(groups.begin()->second.front(), plan);

  std::string summary =
      "context_id,session,train_M,pre_rival_avg,post3_rival_avg,punished,"
      "returned_period\n";
  for (auto& [id, dumps] : groups) {
    auto tc = rebuild_context(std::move(dumps), grid);
    std::vector<double> avg_dev, avg_riv;
    int used = 0;
    for (std::size_t s = 0; s < tc.sessions.size(); ++s) {
      const auto& session = tc.sessions[s];
      if (!session.outcome.converged || session.outcome.metrics.index < min_index) continue;
      const auto path = run_deviation_experiment(
          session.policies[0], session.policies[1], tc.ctx, grid, session.final_state,
          plan.deviation_pre, plan.deviation_post);
      if (avg_dev.empty()) {
        avg_dev.assign(path.deviator.size(), 0.0);
        avg_riv.assign(path.rival.size(), 0.0);
      }
      for (std::size_t k = 0; k < path.deviator.size(); ++k) {
        avg_dev[k] += path.deviator[k];
        avg_riv[k] += path.rival[k];
      }
      ++used;

      double pre_rival = 0.0, pre_dev = 0.0;
      for (int k = 0; k < path.pre_periods; ++k) {
        pre_rival += path.rival[static_cast<std::size_t>(k)];
        pre_dev += path.deviator[static_cast<std::size_t>(k)];
      }
      pre_rival /= path.pre_periods;
      pre_dev /= path.pre_periods;
      double post3 = 0.0;
      for (int k = 1; k <= 3; ++k) {
        post3 += path.rival[static_cast<std::size_t>(path.pre_periods + k)] / 3.0;
      }
      int returned = -1;
      for (int k = 1; k <= 30 && path.pre_periods + k < static_cast<int>(path.rival.size());
           ++k) {
        const auto i = static_cast<std::size_t>(path.pre_periods + k);
        if (std::abs(path.rival[i] - pre_rival) <= 0.1 * pre_rival &&
            std::abs(path.deviator[i] - pre_dev) <= 0.1 * pre_dev) {
          returned = k;
          break;
        }
      }
      summary += csv_line({id, std::to_string(s), format_csv(session.outcome.metrics.index),
                           format_csv(pre_rival), format_csv(post3),
                           post3 < pre_rival ? "1" : "0", std::to_string(returned)});
    }
    if (used > 0) {
      std::string fig = "tau,deviator_price,rival_price\n";
      for (std::size_t k = 0; k < avg_dev.size(); ++k) {
        fig += csv_line({std::to_string(static_cast<int>(k) - plan.deviation_pre),
                         format_csv(avg_dev[k] / used), format_csv(avg_riv[k] / used)});
      }
      write_file_atomic(out_dir / "plots" / ("fig_deviation_path_" + id + ".csv"), fig);
      std::fprintf(stderr, "deviation %s: %d qualifying sessions\n", id.c_str(), used);
    }
  }
  write_file_atomic(out_dir / "deviation_summary.csv", summary);
  finish_manifest(std::move(manifest), out_dir);
  return 0;
}

int cmd_matrix(const ExperimentPlan& plan) {
  auto manifest = start_manifest(plan, "matrix");
  const fs::path out_dir = plan.out_dir;
  auto groups = group_by_context(load_dumps(out_dir));
  if (groups.empty()) throw IoError("no dumps for the matrix");
  const auto grid = grid_of(groups.begin()->second.front(), plan);

  // one context per cost level: the lexicographically first id
  std::map<double, std::string> per_cost;
  for (const auto& [id, dumps] : groups) {
    const double cost = dumps.front().context.econ.cost[0];
    if (!per_cost.count(cost) || id < per_cost[cost]) per_cost[cost] = id;
  }
  if (per_cost.size() < 2) throw IoError("cross-cost matrix needs at least two cost levels");

  std::vector<TrainedContext> by_cost;
  for (const auto& [cost, id] : per_cost) {
    by_cost.push_back(rebuild_context(groups.at(id), grid));
  }
  const auto matrix = run_cross_cost_matrix(by_cost, plan.horizon, plan.hyper, grid);

  std::string csv = "cost_row,cost_col,mean_M,mean_delta1,mean_delta2,pairs\n";
  std::string fig = "cost_row,cost_col,mean_M\n";
  for (std::size_t r = 0; r < matrix.costs.size(); ++r) {
    for (std::size_t c = 0; c < matrix.costs.size(); ++c) {
      const auto& cell = matrix.cells[r][c];
      csv += csv_line({format_csv(matrix.costs[r]), format_csv(matrix.costs[c]),
                       format_csv(cell.mean_index), format_csv(cell.mean_gain[0]),
                       format_csv(cell.mean_gain[1]), std::to_string(cell.pairs)});
      fig += csv_line({format_csv(matrix.costs[r]), format_csv(matrix.costs[c]),
                       format_csv(cell.mean_index)});
    }
  }
  write_file_atomic(out_dir / "matrix.csv", csv);
  write_file_atomic(out_dir / "plots" / "fig_matrix.csv", fig);
  std::printf("avg_proportional_loss=%.4f\n", matrix.avg_proportional_loss);
  finish_manifest(std::move(manifest), out_dir);
  return 0;
}

int cmd_graph(const ExperimentPlan& plan, const std::string& dump_file, bool all) {
  auto manifest = start_manifest(plan, "graph");
  const fs::path out_dir = plan.out_dir;

  std::vector<SessionDump> dumps;
  if (all) {
    dumps = load_dumps(out_dir);
  } else {
    if (dump_file.empty()) throw ConfigError({"graph: pass a dump file or --all"});
    dumps.push_back(parse_session_dump(read_file(dump_file)));
  }

  for (const auto& dump : dumps) {
    const auto grid = grid_of(dump, plan);
    const auto graph =
        build_strategy_graph(dump.policies[0], dump.policies[1], grid, dump.context.mode);
    const auto stats = graph_stats(graph);

    char tag[128];
    std::snprintf(tag, sizeof tag, "%s_s%04d", dump.context.id.c_str(),
                  dump.session_number);
    const fs::path dir = out_dir / "graphs" / tag;

    std::string nodes = "node,p1_index,p2_index,price_1,price_2,class,terminal,successor\n";
    std::string edges = "from,to\n";
    std::string dot = "digraph strategy {\n  node [shape=circle, style=filled];\n";
    for (int s = 0; s < graph.node_count(); ++s) {
      const int p1 = s / graph.m, p2 = s % graph.m;
      const auto cls = graph.node_class[static_cast<std::size_t>(s)];
      nodes += csv_line({std::to_string(s), std::to_string(p1), std::to_string(p2),
                         format_csv(grid[p1]), format_csv(grid[p2]), to_string(cls),
                         std::to_string(graph.terminal_of[static_cast<std::size_t>(s)]),
                         std::to_string(graph.successor[static_cast<std::size_t>(s)])});
      edges += std::to_string(s) + "," +
               std::to_string(graph.successor[static_cast<std::size_t>(s)]) + "\n";
      const char* color = cls == StrategyGraph::NodeClass::StableEnd     ? "dodgerblue"
                          : cls == StrategyGraph::NodeClass::UnstableEnd ? "limegreen"
                                                                         : "gray85";
      dot += "  " + std::to_string(s) + " [label=\"(" + std::to_string(p1) + "," +
             std::to_string(p2) + ")\", fillcolor=" + color + "];\n";
    }
    for (int s = 0; s < graph.node_count(); ++s) {
      dot += "  " + std::to_string(s) + " -> " +
             std::to_string(graph.successor[static_cast<std::size_t>(s)]) + ";\n";
    }
    dot += "}\n";

    std::string st;
    st += "stable_end_nodes = " + std::to_string(stats.stable_end_nodes) + "\n";
    st += "unstable_end_nodes = " + std::to_string(stats.unstable_end_nodes) + "\n";
    st += "terminal_components = " + std::to_string(stats.cycle_lengths.size()) + "\n";
    st += "cycle_lengths =";
    for (int len : stats.cycle_lengths) st += " " + std::to_string(len);
    st += "\nbasin_sizes =";
    for (int b : stats.basin_sizes) st += " " + std::to_string(b);
    st += "\nunique_terminal = " + std::string(stats.unique_terminal ? "1" : "0") + "\n";

    write_file_atomic(dir / "nodes.csv", nodes);
    write_file_atomic(dir / "edges.csv", edges);
    write_file_atomic(dir / "graph.dot", dot);
    write_file_atomic(dir / "stats.txt", st);
    std::printf("%s: %s", tag, st.c_str());
  }
  finish_manifest(std::move(manifest), out_dir);
  return 0;
}

int cmd_report(const ExperimentPlan& plan) {
  const fs::path out_dir = plan.out_dir;
  const auto rows = parse_sessions_csv(read_file(out_dir / "sessions.csv"));
  write_file_atomic(out_dir / "summary.csv", summary_csv(rows));

  struct Agg {
    int n = 0, converged = 0;
    double m = 0.0;
  };
  std::map<std::string, Agg> phases;
  for (const auto& r : rows) {
    auto& a = phases[r.phase];
    ++a.n;
    if (r.converged) {
      ++a.converged;
      a.m += r.collusion_index;
    }
  }
  for (const auto& [phase, a] : phases) {
    std::printf("%-12s sessions=%-5d converged=%-5d mean_M=%.3f\n", phase.c_str(), a.n,
                a.converged, a.converged > 0 ? a.m / a.converged : 0.0);
  }
  if (fs::exists(out_dir / "manifest.json")) {
    const auto problems = verify_manifest(out_dir);
    if (problems.empty()) {
      std::printf("manifest: all %s\n", "hashes verified");
    } else {
      for (const auto& p : problems) std::printf("manifest: %s\n", p.c_str());
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-learning pricing agents in repeated Bertrand competition"};
  app.set_version_flag("--version", std::string("pricelab ") + kVersion);
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "configuration file")
      ->check(CLI::ExistingFile);
  auto* out_opt = app.add_option("--out", args.out_dir, "output directory");
  app.add_option("--workers", args.workers, "worker threads (0 = hardware)");
  auto* seed_opt =
      app.add_option("--master-seed", args.master_seed, "root seed of every stream");
  app.add_option("--scale", args.scale, "parameter profile")
      ->check(CLI::IsMember({"paper", "desk"}));

  auto* solve = app.add_subcommand("solve", "print Nash and monopoly prices/profits");
  auto* grid = app.add_subcommand("grid", "print the shared price grid");
  auto* bench = app.add_subcommand("bench-table", "emit the randomization benchmark table");
  auto* train = app.add_subcommand("train", "run training sessions for every context");
  auto* test = app.add_subcommand("test", "evaluate paired policies in fresh contexts");
  auto* deviate = app.add_subcommand("deviate", "forced-deviation price paths");
  auto* matrix = app.add_subcommand("matrix", "cross-cost collusion matrix");
  auto* restart = app.add_subcommand("restart", "random-restart evaluation in training contexts");
  auto* graph = app.add_subcommand("graph", "strategy-graph analysis of a dumped session");
  auto* report = app.add_subcommand("report", "summarize an output directory");

  double min_index = 0.5;
  deviate->add_option("--min-index", min_index,
                      "only deviate sessions with training M at or above this");
  std::string dump_file;
  bool graph_all = false;
  graph->add_option("--dump", dump_file, "session dump file")->check(CLI::ExistingFile);
  graph->add_flag("--all", graph_all, "process every dump in the output directory");

  try {
    app.parse(argc, argv);
    args.master_seed_set = seed_opt->count() > 0;
    args.out_set = out_opt->count() > 0;

    const auto plan = resolve_plan(args);
    if (solve->parsed()) return cmd_solve(plan);
    if (grid->parsed()) return cmd_grid(plan);
    if (bench->parsed()) return cmd_bench_table(plan, args.out_set);
    if (train->parsed()) return cmd_train(plan);
    if (test->parsed()) return cmd_test(plan);
    if (deviate->parsed()) return cmd_deviate(plan, min_index);
    if (matrix->parsed()) return cmd_matrix(plan);
    if (restart->parsed()) return cmd_restart(plan);
    if (graph->parsed()) return cmd_graph(plan, dump_file, graph_all);
    if (report->parsed()) return cmd_report(plan);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
