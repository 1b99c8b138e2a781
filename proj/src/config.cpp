#include "pricelab/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pricelab {

std::vector<EconomicParams> GridSpec::parameterizations() const {
  std::vector<EconomicParams> set;
  set.reserve(cost_levels.size());
  for (double c : cost_levels) {
    set.push_back(EconomicParams::symmetric(c, markup, mu, outside_quality));
  }
  return set;
}

PriceGrid GridSpec::build() const {
  const auto set = parameterizations();
  return build_grid(set, m, xi);
}

std::vector<double> ExperimentPlan::effective_train_costs() const {
  return train_costs.empty() ? grid.cost_levels : train_costs;
}

std::vector<ContextSpec> ExperimentPlan::contexts() const {
  std::vector<ContextSpec> out;
  for (double cost : effective_train_costs()) {
    for (int g = 0; g < seed_groups; ++g) {
      ContextSpec ctx;
      char buf[32];
      std::snprintf(buf, sizeof buf, "c%.2f%c", cost, static_cast<char>('a' + g));
      ctx.id = buf;
      ctx.econ = EconomicParams::symmetric(cost, grid.markup, grid.mu, grid.outside_quality);
      ctx.mode = obs_mode;
      ctx.seed = hash_combine(master_seed, fnv1a64(ctx.id));
      out.push_back(std::move(ctx));
    }
  }
  return out;
}

void apply_scale(ExperimentPlan& plan, Scale scale) {
  switch (scale) {
    case Scale::Paper:
      plan.hyper.beta = 4e-6;
      plan.hyper.window = 100000;
      plan.hyper.max_periods = 1000000000;
      plan.sessions_per_context = 210;
      break;
    case Scale::Desk:
      plan.hyper.beta = 4e-5;
      plan.hyper.window = 10000;
      plan.hyper.max_periods = 100000000;
      plan.sessions_per_context = 50;
      break;
  }
}

namespace {

struct Issues {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  void error(int line, int col, const std::string& msg) {
    errors.push_back("line " + std::to_string(line) + ", col " + std::to_string(col) +
                     ": " + msg);
  }
  void error(const std::string& msg) { errors.push_back(msg); }
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_double_list(std::string_view s, std::vector<double>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',') ++j;
    double v;
    if (!parse_double(s.substr(i, j - i), v)) return false;
    out.push_back(v);
    i = j;
  }
  return !out.empty();
}

void validate_plan(const ExperimentPlan& plan, Issues& issues) {
  const auto& h = plan.hyper;
  if (!(h.alpha >= 0.0 && h.alpha <= 1.0)) {
    issues.error("qlearning.alpha = " + std::to_string(h.alpha) +
                 " outside its legal range [0, 1]");
  }
  if (!(h.delta >= 0.0 && h.delta < 1.0)) {
    issues.error("qlearning.delta outside its legal range [0, 1)");
  }
  if (!(h.beta > 0.0)) issues.error("qlearning.beta must be > 0");
  if (h.window < 1) issues.error("qlearning.window must be >= 1");
  if (h.max_periods < h.window) {
    issues.error("qlearning.max_periods must be >= qlearning.window");
  }
  if (plan.grid.m < 2) issues.error("grid.m must be >= 2");
  if (!(plan.grid.xi > 0.0)) issues.error("grid.xi must be > 0");
  if (!(plan.grid.mu > 0.0)) issues.error("grid.mu must be > 0");
  if (!(plan.grid.markup > 0.0)) issues.error("grid.markup must be > 0");
  if (plan.grid.cost_levels.empty()) issues.error("grid.cost_levels must be non-empty");
  if (plan.sessions_per_context < 1) {
    issues.error("experiments.sessions_per_context must be >= 1");
  }
  if (plan.horizon < 150) {
    issues.error("experiments.horizon must be >= 150 (ten times the maximum cycle length)");
  }
  if (plan.seed_groups < 1) issues.error("experiments.seed_groups must be >= 1");
  if (!(plan.min_convergence_rate >= 0.0 && plan.min_convergence_rate <= 1.0)) {
    issues.error("experiments.min_convergence_rate outside its legal range [0, 1]");
  }
  if (plan.deviation_pre < 1 || plan.deviation_post < 1) {
    issues.error("experiments.deviation_pre and deviation_post must be >= 1");
  }

  // soft constraint: the studied cost range
  auto warn_range = [&](const char* key, const std::vector<double>& costs) {
    for (double c : costs) {
      if (c < 1.0 || c > 1.7) {
        issues.warnings.push_back(std::string(key) + " " + std::to_string(c) +
                                  " lies outside the studied range [1, 1.7]");
      }
    }
  };
  warn_range("grid.cost_levels:", plan.grid.cost_levels);
  warn_range("experiments.train_costs:", plan.train_costs);
}

}  // namespace

LoadedConfig parse_config(std::string_view text) {
  ExperimentPlan plan;
  Issues issues;

  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                          : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.error(line_no, static_cast<int>(raw.find('[')) + 1,
                     "unterminated section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "grid" && section != "qlearning" && section != "experiments" &&
          section != "run") {
        issues.error(line_no, 1, "unknown section [" + section + "]");
        section.clear();
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      issues.error(line_no, 1, "expected 'key = value'");
      continue;
    }
    const std::string key = std::string(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const int value_col = static_cast<int>(raw.find('=')) + 2;
    const std::string qualified = section.empty() ? key : section + "." + key;

    auto bad_value = [&](const char* expected) {
      issues.error(line_no, value_col,
                   qualified + ": cannot parse '" + std::string(value) + "' as " + expected);
    };
    auto take_double = [&](double& slot) {
      double v;
      if (parse_double(value, v)) {
        slot = v;
      } else {
        bad_value("a number");
      }
    };
    auto take_int = [&](auto& slot) {
      std::int64_t v;
      if (parse_i64(value, v)) {
        slot = static_cast<std::remove_reference_t<decltype(slot)>>(v);
      } else {
        bad_value("an integer");
      }
    };

    if (qualified == "grid.m") {
      take_int(plan.grid.m);
    } else if (qualified == "grid.xi") {
      take_double(plan.grid.xi);
    } else if (qualified == "grid.mu") {
      take_double(plan.grid.mu);
    } else if (qualified == "grid.markup") {
      take_double(plan.grid.markup);
    } else if (qualified == "grid.outside_quality") {
      take_double(plan.grid.outside_quality);
    } else if (qualified == "grid.cost_levels") {
      if (!parse_double_list(value, plan.grid.cost_levels)) bad_value("a list of numbers");
    } else if (qualified == "qlearning.alpha") {
      take_double(plan.hyper.alpha);
    } else if (qualified == "qlearning.beta") {
      take_double(plan.hyper.beta);
    } else if (qualified == "qlearning.delta") {
      take_double(plan.hyper.delta);
    } else if (qualified == "qlearning.window") {
      take_int(plan.hyper.window);
    } else if (qualified == "qlearning.max_periods") {
      take_int(plan.hyper.max_periods);
    } else if (qualified == "experiments.sessions_per_context") {
      take_int(plan.sessions_per_context);
    } else if (qualified == "experiments.horizon") {
      take_int(plan.horizon);
    } else if (qualified == "experiments.test_mode") {
      if (value == "fixed") {
        plan.test_mode = TestMode::FixedPolicy;
      } else if (value == "update") {
        plan.test_mode = TestMode::UpdateNoExploration;
      } else {
        bad_value("'fixed' or 'update'");
      }
    } else if (qualified == "experiments.obs_mode") {
      if (value == "full") {
        plan.obs_mode = ObsMode::FullMemory;
      } else if (value == "own") {
        plan.obs_mode = ObsMode::OwnPriceOnly;
      } else {
        bad_value("'full' or 'own'");
      }
    } else if (qualified == "experiments.train_costs") {
      if (!parse_double_list(value, plan.train_costs)) bad_value("a list of numbers");
    } else if (qualified == "experiments.seed_groups") {
      take_int(plan.seed_groups);
    } else if (qualified == "experiments.min_convergence_rate") {
      take_double(plan.min_convergence_rate);
    } else if (qualified == "experiments.deviation_pre") {
      take_int(plan.deviation_pre);
    } else if (qualified == "experiments.deviation_post") {
      take_int(plan.deviation_post);
    } else if (qualified == "run.master_seed") {
      std::uint64_t v;
      if (parse_u64(value, v)) {
        plan.master_seed = v;
      } else {
        bad_value("an unsigned 64-bit integer");
      }
    } else if (qualified == "run.workers") {
      take_int(plan.workers);
    } else if (qualified == "run.out_dir") {
      plan.out_dir = std::string(value);
    } else {
      issues.error(line_no, 1, "unknown key '" + qualified + "'");
    }
  }

  validate_plan(plan, issues);
  if (!issues.errors.empty()) throw ConfigError(std::move(issues.errors));
  return {std::move(plan), std::move(issues.warnings)};
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string emit_config(const ExperimentPlan& plan) {
  std::ostringstream out;
  out << "# pricelab resolved configuration\n";
  out << "[grid]\n";
  out << "m = " << plan.grid.m << "\n";
  out << "xi = " << num(plan.grid.xi) << "\n";
  out << "mu = " << num(plan.grid.mu) << "\n";
  out << "markup = " << num(plan.grid.markup) << "\n";
  out << "outside_quality = " << num(plan.grid.outside_quality) << "\n";
  out << "cost_levels =";
  for (double c : plan.grid.cost_levels) out << " " << num(c);
  out << "\n\n[qlearning]\n";
  out << "alpha = " << num(plan.hyper.alpha) << "\n";
  out << "beta = " << num(plan.hyper.beta) << "\n";
  out << "delta = " << num(plan.hyper.delta) << "\n";
  out << "window = " << plan.hyper.window << "\n";
  out << "max_periods = " << plan.hyper.max_periods << "\n";
  out << "\n[experiments]\n";
  out << "sessions_per_context = " << plan.sessions_per_context << "\n";
  out << "horizon = " << plan.horizon << "\n";
  out << "test_mode = " << to_string(plan.test_mode) << "\n";
  out << "obs_mode = " << to_string(plan.obs_mode) << "\n";
  if (!plan.train_costs.empty()) {
    out << "train_costs =";
    for (double c : plan.train_costs) out << " " << num(c);
    out << "\n";
  }
  out << "seed_groups = " << plan.seed_groups << "\n";
  out << "min_convergence_rate = " << num(plan.min_convergence_rate) << "\n";
  out << "deviation_pre = " << plan.deviation_pre << "\n";
  out << "deviation_post = " << plan.deviation_post << "\n";
  out << "\n[run]\n";
  out << "master_seed = " << plan.master_seed << "\n";
  out << "workers = " << plan.workers << "\n";
  out << "out_dir = " << plan.out_dir << "\n";
  return out.str();
}

}  // namespace pricelab
