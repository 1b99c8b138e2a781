#include "pricelab/outputs.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pricelab {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + " (" + ec.message() + ")");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint64_t hash_file(const fs::path& path) { return fnv1a64(read_file(path)); }

std::string format_csv(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

SessionRow make_session_row(const std::string& context_id, int session,
                            const std::string& phase, const EconomicParams& econ,
                            ObsMode mode, const SessionOutcome& outcome) {
  SessionRow row;
  row.context_id = context_id;
  row.session = session;
  row.phase = phase;
  row.cost_1 = econ.cost[0];
  row.cost_2 = econ.cost[1];
  row.mode = mode;
  row.converged = outcome.converged;
  row.periods = outcome.time_to_convergence;
  row.collusion_index = outcome.metrics.index;
  row.profit_gain_1 = outcome.metrics.profit_gain[0];
  row.profit_gain_2 = outcome.metrics.profit_gain[1];
  row.avg_profit_1 = outcome.metrics.avg_profit[0];
  row.avg_profit_2 = outcome.metrics.avg_profit[1];
  switch (outcome.type.kind) {
    case ConvergenceType::Symmetric:
      row.conv_type = "symmetric";
      break;
    case ConvergenceType::Asymmetric:
      row.conv_type = "asymmetric";
      break;
    case ConvergenceType::Cycle:
      row.conv_type = "cycle";
      row.cycle_length = outcome.type.cycle_length;
      break;
    case ConvergenceType::Other:
      row.conv_type = "other";
      break;
  }
  return row;
}

namespace {

constexpr const char* kSessionsHeader =
    "context_id,session,phase,cost_1,cost_2,obs_mode,converged,periods,"
    "collusion_index,profit_gain_1,profit_gain_2,avg_profit_1,avg_profit_2,"
    "conv_type,cycle_length";

void sort_rows(std::vector<SessionRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const SessionRow& a, const SessionRow& b) {
    if (a.context_id != b.context_id) return a.context_id < b.context_id;
    if (a.phase != b.phase) return a.phase < b.phase;
    return a.session < b.session;
  });
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      fields.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw IoError("bad numeric field '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw IoError("bad unsigned field '" + s + "'");
  }
  return v;
}

}  // namespace

std::string sessions_csv(std::vector<SessionRow> rows) {
  sort_rows(rows);
  std::ostringstream out;
  out << kSessionsHeader << "\n";
  for (const auto& r : rows) {
    out << r.context_id << ',' << r.session << ',' << r.phase << ','
        << format_csv(r.cost_1) << ',' << format_csv(r.cost_2) << ','
        << to_string(r.mode) << ',' << (r.converged ? 1 : 0) << ',' << r.periods << ','
        << format_csv(r.collusion_index) << ',' << format_csv(r.profit_gain_1) << ','
        << format_csv(r.profit_gain_2) << ',' << format_csv(r.avg_profit_1) << ','
        << format_csv(r.avg_profit_2) << ',' << r.conv_type << ',' << r.cycle_length
        << "\n";
  }
  return out.str();
}

std::vector<SessionRow> parse_sessions_csv(std::string_view text) {
  std::vector<SessionRow> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != kSessionsHeader) throw IoError("sessions.csv: unexpected header");
      header = false;
      continue;
    }
    auto f = split(line, ',');
    if (f.size() != 15) throw IoError("sessions.csv: malformed row");
    SessionRow r;
    r.context_id = f[0];
    r.session = static_cast<int>(to_double(f[1]));
    r.phase = f[2];
    r.cost_1 = to_double(f[3]);
    r.cost_2 = to_double(f[4]);
    r.mode = f[5] == "own" ? ObsMode::OwnPriceOnly : ObsMode::FullMemory;
    r.converged = f[6] == "1";
    r.periods = static_cast<std::int64_t>(to_double(f[7]));
    r.collusion_index = to_double(f[8]);
    r.profit_gain_1 = to_double(f[9]);
    r.profit_gain_2 = to_double(f[10]);
    r.avg_profit_1 = to_double(f[11]);
    r.avg_profit_2 = to_double(f[12]);
    r.conv_type = f[13];
    r.cycle_length = static_cast<int>(to_double(f[14]));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SessionRow> merge_rows(std::vector<SessionRow> existing,
                                   const std::vector<SessionRow>& fresh) {
  std::vector<std::pair<std::string, std::string>> replaced;
  for (const auto& r : fresh) replaced.emplace_back(r.context_id, r.phase);
  std::sort(replaced.begin(), replaced.end());
  replaced.erase(std::unique(replaced.begin(), replaced.end()), replaced.end());

  std::vector<SessionRow> merged;
  for (auto& r : existing) {
    if (!std::binary_search(replaced.begin(), replaced.end(),
                            std::make_pair(r.context_id, r.phase))) {
      merged.push_back(std::move(r));
    }
  }
  merged.insert(merged.end(), fresh.begin(), fresh.end());
  return merged;
}

std::string summary_csv(const std::vector<SessionRow>& rows) {
  struct Group {
    double cost_1 = 0.0, cost_2 = 0.0;
    std::vector<double> index, gain_1, gain_2;
    int n_symmetric = 0, n_asymmetric = 0, n_other = 0;
    std::map<int, int> cycles;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const auto& r : rows) {
    if (!r.converged) continue;  // unconverged sessions are recorded, not aggregated
    auto& g = groups[{r.context_id, r.phase}];
    g.cost_1 = r.cost_1;
    g.cost_2 = r.cost_2;
    g.index.push_back(r.collusion_index);
    g.gain_1.push_back(r.profit_gain_1);
    g.gain_2.push_back(r.profit_gain_2);
    if (r.conv_type == "symmetric") {
      ++g.n_symmetric;
    } else if (r.conv_type == "asymmetric") {
      ++g.n_asymmetric;
    } else if (r.conv_type == "cycle") {
      ++g.cycles[r.cycle_length];
    } else {
      ++g.n_other;
    }
  }

  auto mean = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return v.empty() ? 0.0 : t / static_cast<double>(v.size());
  };
  auto sample_sd = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };

  std::ostringstream out;
  out << "context_id,cost_1,cost_2,phase,mean_M,sd_M,mean_delta1,mean_delta2,"
         "n_symmetric,n_asymmetric,n_cycle_by_length,n_other\n";
  for (const auto& [key, g] : groups) {
    std::string cycles;
    for (const auto& [len, n] : g.cycles) {
      if (!cycles.empty()) cycles += ';';
      cycles += std::to_string(len) + ":" + std::to_string(n);
    }
    out << key.first << ',' << format_csv(g.cost_1) << ',' << format_csv(g.cost_2) << ','
        << key.second << ',' << format_csv(mean(g.index)) << ','
        << format_csv(sample_sd(g.index)) << ',' << format_csv(mean(g.gain_1)) << ','
        << format_csv(mean(g.gain_2)) << ',' << g.n_symmetric << ',' << g.n_asymmetric
        << ',' << cycles << ',' << g.n_other << "\n";
  }
  return out.str();
}

// ---- session dumps ----------------------------------------------------------

std::string serialize_session_dump(const TrainedSession& session, const ContextSpec& ctx,
                                   const Hyperparams& hyper, const PriceGrid& grid) {
  std::ostringstream out;
  out << "# pricelab policy dump v1\n";
  out << "context_id = " << ctx.id << "\n";
  out << "cost_1 = " << format_exact(ctx.econ.cost[0]) << "\n";
  out << "cost_2 = " << format_exact(ctx.econ.cost[1]) << "\n";
  out << "quality_1 = " << format_exact(ctx.econ.quality[0]) << "\n";
  out << "quality_2 = " << format_exact(ctx.econ.quality[1]) << "\n";
  out << "mu = " << format_exact(ctx.econ.mu) << "\n";
  out << "outside_quality = " << format_exact(ctx.econ.outside_quality) << "\n";
  out << "obs_mode = " << to_string(ctx.mode) << "\n";
  out << "context_seed = " << ctx.seed << "\n";
  out << "grid_m = " << grid.size() << "\n";
  out << "grid_lo = " << format_exact(grid.lo) << "\n";
  out << "grid_hi = " << format_exact(grid.hi) << "\n";
  out << "grid_xi = " << format_exact(grid.xi) << "\n";
  out << "alpha = " << format_exact(hyper.alpha) << "\n";
  out << "beta = " << format_exact(hyper.beta) << "\n";
  out << "delta = " << format_exact(hyper.delta) << "\n";
  out << "window = " << hyper.window << "\n";
  out << "max_periods = " << hyper.max_periods << "\n";
  out << "session = " << session.policies[0].session_number << "\n";
  out << "session_seed = " << session.policies[0].session_seed << "\n";
  out << "converged = " << (session.policies[0].converged ? 1 : 0) << "\n";
  out << "periods = " << session.policies[0].periods << "\n";
  out << "ties_player_1 = " << session.policies[0].tie_count << "\n";
  out << "ties_player_2 = " << session.policies[1].tie_count << "\n";
  out << "final_state = " << session.final_state.price_index[0] << " "
      << session.final_state.price_index[1] << "\n";
  out << "[q]\n";
  out << "player,observation_index,action_index,q_value\n";
  for (int player = 0; player < 2; ++player) {
    const auto& q = session.policies[static_cast<std::size_t>(player)].q;
    for (int o = 0; o < q.observation_count(); ++o) {
      for (int a = 0; a < q.action_count(); ++a) {
        out << player + 1 << ',' << o << ',' << a << ',' << format_exact(q.at(o, a))
            << "\n";
      }
    }
  }
  return out.str();
}

SessionDump parse_session_dump(std::string_view text) {
  SessionDump dump;
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  bool in_q = false;
  bool q_header_seen = false;

  auto require = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError(std::string("dump: missing key '") + key + "'");
    return it->second;
  };

  std::vector<std::array<std::string, 4>> q_rows;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    if (line == "[q]") {
      in_q = true;
      continue;
    }
    if (!in_q) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) throw IoError("dump: malformed manifest line");
      auto trim = [](std::string_view s) {
        while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
        return s;
      };
      kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    } else {
      if (!q_header_seen) {
        q_header_seen = true;  // column header row
        continue;
      }
      auto f = split(line, ',');
      if (f.size() != 4) throw IoError("dump: malformed q row");
      q_rows.push_back({f[0], f[1], f[2], f[3]});
    }
  }

  dump.context.id = require("context_id");
  dump.context.econ.cost = {to_double(require("cost_1")), to_double(require("cost_2"))};
  dump.context.econ.quality = {to_double(require("quality_1")),
                               to_double(require("quality_2"))};
  dump.context.econ.mu = to_double(require("mu"));
  dump.context.econ.outside_quality = to_double(require("outside_quality"));
  dump.context.mode =
      require("obs_mode") == "own" ? ObsMode::OwnPriceOnly : ObsMode::FullMemory;
  dump.context.seed = to_u64(require("context_seed"));
  dump.grid_m = static_cast<int>(to_double(require("grid_m")));
  dump.grid_lo = to_double(require("grid_lo"));
  dump.grid_hi = to_double(require("grid_hi"));
  dump.grid_xi = to_double(require("grid_xi"));
  dump.hyper.alpha = to_double(require("alpha"));
  dump.hyper.beta = to_double(require("beta"));
  dump.hyper.delta = to_double(require("delta"));
  dump.hyper.window = static_cast<std::int64_t>(to_double(require("window")));
  dump.hyper.max_periods = static_cast<std::int64_t>(to_double(require("max_periods")));
  dump.session_number = static_cast<int>(to_double(require("session")));
  dump.converged = require("converged") == "1";
  dump.periods = static_cast<std::int64_t>(to_double(require("periods")));
  {
    const auto f = split(require("final_state"), ' ');
    if (f.size() != 2) throw IoError("dump: malformed final_state");
    dump.final_state.price_index = {static_cast<int>(to_double(f[0])),
                                    static_cast<int>(to_double(f[1]))};
    dump.final_state.context_id = dump.context.id;
  }

  const int obs = observation_count(dump.context.mode, dump.grid_m);
  const std::uint64_t session_seed_value = to_u64(require("session_seed"));
  for (int player = 0; player < 2; ++player) {
    auto& p = dump.policies[static_cast<std::size_t>(player)];
    p.q = QTable(obs, dump.grid_m);
    p.player = player;
    p.context_id = dump.context.id;
    p.econ = dump.context.econ;
    p.mode = dump.context.mode;
    p.session_seed = session_seed_value;
    p.session_number = dump.session_number;
    p.converged = dump.converged;
    p.periods = dump.periods;
  }
  if (q_rows.size() != static_cast<std::size_t>(2 * obs * dump.grid_m)) {
    throw IoError("dump: wrong number of q rows");
  }
  for (const auto& row : q_rows) {
    const int player = static_cast<int>(to_double(row[0])) - 1;
    const int o = static_cast<int>(to_double(row[1]));
    const int a = static_cast<int>(to_double(row[2]));
    if (player < 0 || player > 1 || o < 0 || o >= obs || a < 0 || a >= dump.grid_m) {
      throw IoError("dump: q row index out of range");
    }
    dump.policies[static_cast<std::size_t>(player)].q.at(o, a) = to_double(row[3]);
  }

  // reconstruct greedy policies and tie counts from the q rows
  for (int player = 0; player < 2; ++player) {
    auto& p = dump.policies[static_cast<std::size_t>(player)];
    ContextSpec ctx = dump.context;
    auto rebuilt = make_policy_dump(p.q, player, ctx, p.session_seed, p.session_number,
                                    p.converged, p.periods);
    p.greedy = std::move(rebuilt.greedy);
    p.tie_count = rebuilt.tie_count;
  }
  return dump;
}

std::filesystem::path dump_path(const fs::path& out_dir, const std::string& context_id,
                                int session) {
  char name[32];
  std::snprintf(name, sizeof name, "session_%04d.dump", session);
  return out_dir / "dumps" / context_id / name;
}

// ---- run manifest -----------------------------------------------------------

void write_manifest(const fs::path& out_dir, const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["master_seed"] = manifest.master_seed;
  j["started_utc"] = manifest.started_utc;
  j["finished_utc"] = manifest.finished_utc;
  j["config"] = manifest.config_text;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  for (const auto& [id, seed] : manifest.context_seeds) seeds[id] = seed;
  j["context_seeds"] = seeds;

  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), out_dir);
    if (rel == "manifest.json") continue;
    paths.push_back(rel);
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& rel : paths) {
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(hash_file(out_dir / rel)));
    files.push_back({{"path", rel.generic_string()},
                     {"fnv1a64", hex},
                     {"bytes", fs::file_size(out_dir / rel)}});
  }
  j["files"] = files;
  write_file_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const fs::path& out_dir) {
  std::vector<std::string> problems;
  const auto text = read_file(out_dir / "manifest.json");
  const auto j = nlohmann::json::parse(text);
  for (const auto& f : j.at("files")) {
    const fs::path rel = f.at("path").get<std::string>();
    const fs::path full = out_dir / rel;
    if (!fs::exists(full)) {
      problems.push_back("missing file: " + rel.generic_string());
      continue;
    }
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(hash_file(full)));
    if (f.at("fnv1a64").get<std::string>() != hex) {
      problems.push_back("hash mismatch: " + rel.generic_string());
    }
  }
  return problems;
}

}  // namespace pricelab
