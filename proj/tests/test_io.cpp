#include <algorithm>
#include <chrono>
#include <filesystem>

#include <doctest.h>

#include "pricelab/config.hpp"
#include "pricelab/outputs.hpp"

using namespace pricelab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pricelab_test_" + std::to_string(splitmix64(
                                   std::chrono::steady_clock::now().time_since_epoch().count())));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("an empty config resolves to the documented defaults") {
  const auto loaded = parse_config("");
  const auto& plan = loaded.plan;
  CHECK(plan.hyper.alpha == 0.15);
  CHECK(plan.hyper.beta == 4e-6);
  CHECK(plan.hyper.delta == 0.95);
  CHECK(plan.hyper.window == 100000);
  CHECK(plan.hyper.max_periods == 1000000000);
  CHECK(plan.grid.m == 20);
  CHECK(plan.grid.xi == 0.1);
  CHECK(plan.grid.mu == 0.25);
  CHECK(plan.grid.markup == 1.0);
  CHECK(plan.horizon == 1000);
  REQUIRE(plan.grid.cost_levels.size() == 8);
  CHECK(plan.grid.cost_levels.front() == 1.0);
  CHECK(plan.grid.cost_levels.back() == 1.7);
  CHECK(loaded.warnings.empty());
}

TEST_CASE("validation names the offending key and its legal range") {
  try {
    (void)parse_config("[qlearning]\nalpha = 1.5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.issues.size() == 1);
    CHECK(e.issues[0].find("alpha") != std::string::npos);
    CHECK(e.issues[0].find("[0, 1]") != std::string::npos);
  }
}

TEST_CASE("every violated constraint is reported at once") {
  try {
    (void)parse_config("[qlearning]\nalpha = 1.5\nbeta = -1\n[grid]\nm = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues.size() == 3);
  }
}

TEST_CASE("out-of-range cost levels warn but load") {
  const auto loaded = parse_config("[experiments]\ntrain_costs = 2.5\n");
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("2.5") != std::string::npos);
  CHECK(loaded.plan.effective_train_costs() == std::vector<double>{2.5});
}

TEST_CASE("unknown keys, sections and malformed lines carry positions") {
  try {
    (void)parse_config("[grid]\nwat = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues[0].find("line 2") != std::string::npos);
    CHECK(e.issues[0].find("grid.wat") != std::string::npos);
  }
  CHECK_THROWS_AS((void)parse_config("[nope]\n"), ConfigError);
  try {
    (void)parse_config("[grid]\nm = twenty\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.issues[0].find("line 2") != std::string::npos);
    CHECK(e.issues[0].find("col") != std::string::npos);
  }
}

TEST_CASE("a resolved config reloads into an identical plan") {
  ExperimentPlan plan;
  plan.hyper.beta = 4e-5;
  plan.sessions_per_context = 50;
  plan.train_costs = {1.2, 1.7};
  plan.obs_mode = ObsMode::OwnPriceOnly;
  plan.test_mode = TestMode::UpdateNoExploration;
  plan.master_seed = 987654321;
  plan.out_dir = "elsewhere";
  plan.workers = 3;

  const auto reloaded = parse_config(emit_config(plan)).plan;
  CHECK(reloaded == plan);

  const auto defaults = parse_config("").plan;
  CHECK(parse_config(emit_config(defaults)).plan == defaults);
}

TEST_CASE("generated contexts pair cost levels with seed groups") {
  ExperimentPlan plan;
  plan.train_costs = {1.2};
  plan.seed_groups = 2;
  plan.master_seed = 42;
  const auto contexts = plan.contexts();
  REQUIRE(contexts.size() == 2);
  CHECK(contexts[0].id == "c1.20a");
  CHECK(contexts[1].id == "c1.20b");
  CHECK(contexts[0].econ == contexts[1].econ);
  CHECK(contexts[0].seed != contexts[1].seed);

  plan.master_seed = 43;
  CHECK(plan.contexts()[0].seed != contexts[0].seed);
}

TEST_CASE("scale profiles rebind the learning knobs") {
  ExperimentPlan plan;
  apply_scale(plan, Scale::Desk);
  CHECK(plan.hyper.beta == 4e-5);
  CHECK(plan.hyper.window == 10000);
  CHECK(plan.hyper.max_periods == 100000000);
  CHECK(plan.sessions_per_context == 50);
  apply_scale(plan, Scale::Paper);
  CHECK(plan.hyper.beta == 4e-6);
  CHECK(plan.hyper.window == 100000);
  CHECK(plan.sessions_per_context == 210);
}

TEST_CASE("sessions csv round-trips and keeps deterministic order") {
  SessionOutcome outcome;
  outcome.metrics.index = 0.875;
  outcome.metrics.profit_gain = {0.8, 0.9};
  outcome.metrics.avg_profit = {0.31, 0.33};
  outcome.type = {ConvergenceType::Cycle, 3};
  outcome.converged = true;
  outcome.time_to_convergence = 123456;
  const auto econ = EconomicParams::symmetric(1.2);

  std::vector<SessionRow> rows;
  rows.push_back(make_session_row("ctxB", 1, "train", econ, ObsMode::FullMemory, outcome));
  rows.push_back(make_session_row("ctxA", 2, "train", econ, ObsMode::FullMemory, outcome));
  rows.push_back(make_session_row("ctxA", 0, "train", econ, ObsMode::FullMemory, outcome));

  const auto text = sessions_csv(rows);
  const auto parsed = parse_sessions_csv(text);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0].context_id == "ctxA");
  CHECK(parsed[0].session == 0);
  CHECK(parsed[1].session == 2);
  CHECK(parsed[2].context_id == "ctxB");
  CHECK(parsed[0].conv_type == "cycle");
  CHECK(parsed[0].cycle_length == 3);
  CHECK(parsed[0].collusion_index == doctest::Approx(0.875));
  CHECK(sessions_csv(parsed) == text);  // serialization is idempotent
}

TEST_CASE("empty outputs still carry headers") {
  CHECK(sessions_csv({}) ==
        "context_id,session,phase,cost_1,cost_2,obs_mode,converged,periods,"
        "collusion_index,profit_gain_1,profit_gain_2,avg_profit_1,avg_profit_2,"
        "conv_type,cycle_length\n");
  const auto summary = summary_csv({});
  CHECK(summary.find("context_id,") == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1);
}

TEST_CASE("summary has one row per context and phase") {
  SessionOutcome outcome;
  outcome.metrics.index = 0.5;
  outcome.converged = true;
  outcome.type = {ConvergenceType::Symmetric, 0};
  const auto econ = EconomicParams::symmetric(1.0);

  std::vector<SessionRow> rows;
  for (int s = 0; s < 3; ++s) {
    rows.push_back(make_session_row("x", s, "train", econ, ObsMode::FullMemory, outcome));
    rows.push_back(make_session_row("x", s, "restart", econ, ObsMode::FullMemory, outcome));
    rows.push_back(make_session_row("y", s, "train", econ, ObsMode::FullMemory, outcome));
  }
  const auto summary = summary_csv(rows);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);  // header + 3 groups

  // replacing a phase keeps other phases' rows
  auto merged = merge_rows(rows, {make_session_row("x", 0, "train", econ,
                                                   ObsMode::FullMemory, outcome)});
  int x_train = 0, x_restart = 0;
  for (const auto& r : merged) {
    if (r.context_id == "x" && r.phase == "train") ++x_train;
    if (r.context_id == "x" && r.phase == "restart") ++x_restart;
  }
  CHECK(x_train == 1);
  CHECK(x_restart == 3);
}

TEST_CASE("session dumps round-trip bit-exactly") {
  const auto grid = GridSpec{}.build();
  ContextSpec ctx;
  ctx.id = "rt";
  ctx.econ = EconomicParams::symmetric(1.3);
  ctx.seed = 77;
  ctx.mode = ObsMode::OwnPriceOnly;
  Hyperparams h;
  h.beta = 1e-3;
  h.window = 1500;
  h.max_periods = 1000000;
  const auto bench = Benchmarks::from(ctx.econ);
  const auto session = run_training_session(ctx, grid, h, 5, bench);

  const auto text = serialize_session_dump(session, ctx, h, grid);
  const auto parsed = parse_session_dump(text);

  CHECK(parsed.context.id == ctx.id);
  CHECK(parsed.context.econ == ctx.econ);
  CHECK(parsed.context.seed == ctx.seed);
  CHECK(parsed.context.mode == ctx.mode);
  CHECK(parsed.hyper == h);
  CHECK(parsed.grid_m == grid.size());
  CHECK(parsed.grid_lo == grid.lo);
  CHECK(parsed.grid_hi == grid.hi);
  CHECK(parsed.session_number == 5);
  CHECK(parsed.converged == session.outcome.converged);
  CHECK(parsed.periods == session.policies[0].periods);
  CHECK(parsed.final_state == session.final_state);
  CHECK(parsed.policies[0].q == session.policies[0].q);  // bit-exact
  CHECK(parsed.policies[1].q == session.policies[1].q);
  CHECK(parsed.policies[0].greedy == session.policies[0].greedy);
  CHECK(parsed.policies[1].tie_count == session.policies[1].tie_count);

  // a second serialization of the parsed dump is byte-identical
  TrainedSession reparsed;
  reparsed.policies = parsed.policies;
  reparsed.final_state = parsed.final_state;
  CHECK(serialize_session_dump(reparsed, parsed.context, parsed.hyper, grid) == text);
}

TEST_CASE("atomic writes replace files completely") {
  TempDir tmp;
  const auto target = tmp.path / "file.txt";
  write_file_atomic(target, "first version");
  write_file_atomic(target, "second");
  CHECK(read_file(target) == "second");
  CHECK_FALSE(fs::exists(tmp.path / "file.txt.tmp"));
  CHECK_THROWS_AS(write_file_atomic(target / "impossible" / "x", "y"), IoError);
}

TEST_CASE("manifest verification catches tampering") {
  TempDir tmp;
  write_file_atomic(tmp.path / "a.csv", "x,y\n1,2\n");
  write_file_atomic(tmp.path / "sub" / "b.txt", "hello");

  RunManifest manifest;
  manifest.tool_version = "pricelab test";
  manifest.command = "test";
  manifest.master_seed = 1;
  manifest.started_utc = manifest.finished_utc = "2026-01-01T00:00:00Z";
  write_manifest(tmp.path, manifest);

  CHECK(verify_manifest(tmp.path).empty());

  write_file_atomic(tmp.path / "a.csv", "x,y\n1,3\n");
  const auto problems = verify_manifest(tmp.path);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("a.csv") != std::string::npos);

  fs::remove(tmp.path / "sub" / "b.txt");
  CHECK(verify_manifest(tmp.path).size() == 2);
}

TEST_CASE("the random stream is stable across platforms and versions") {
  // mt19937_64's sequence is fixed by the standard; the derived helpers below
  // must never change, or dumps stop being reproducible
  Rng rng(42);
  CHECK(rng.next_u64() == 13930160852258120406ULL);
  CHECK(rng.next_u64() == 11788048577503494824ULL);
  Rng rng2(42);
  (void)rng2.next_u64();
  (void)rng2.next_u64();
  CHECK(rng2.next_below(20) < 20);
  CHECK(splitmix64(0) == 16294208416658607535ULL);
  CHECK(fnv1a64("pricelab") != 0);
  Rng rng3(7);
  const double d = rng3.next_double();
  CHECK(d >= 0.0);
  CHECK(d < 1.0);
}
