#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pricelab/config.hpp"

namespace pricelab {

// Write-then-rename; no output file is ever observable half-written.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::uint64_t hash_file(const std::filesystem::path& path);

// %.6g for CSV values, %.17g for dumps (bit-exact round trip).
std::string format_csv(double v);
std::string format_exact(double v);

// ---- per-session rows -------------------------------------------------------

struct SessionRow {
  std::string context_id;
  int session = 0;
  std::string phase;  // train | test_1000 | test_reconv | restart
  double cost_1 = 0.0, cost_2 = 0.0;
  ObsMode mode = ObsMode::FullMemory;
  bool converged = false;
  std::int64_t periods = 0;
  double collusion_index = 0.0;
  double profit_gain_1 = 0.0, profit_gain_2 = 0.0;
  double avg_profit_1 = 0.0, avg_profit_2 = 0.0;
  std::string conv_type;  // symmetric | asymmetric | cycle | other
  int cycle_length = 0;
};

SessionRow make_session_row(const std::string& context_id, int session,
                            const std::string& phase, const EconomicParams& econ,
                            ObsMode mode, const SessionOutcome& outcome);

std::string sessions_csv(std::vector<SessionRow> rows);  // sorted, deterministic
std::vector<SessionRow> parse_sessions_csv(std::string_view text);

// Replaces rows whose (context_id, phase) pair is re-emitted, keeps the rest.
std::vector<SessionRow> merge_rows(std::vector<SessionRow> existing,
                                   const std::vector<SessionRow>& fresh);

// Per (context, phase) aggregates over converged sessions.
std::string summary_csv(const std::vector<SessionRow>& rows);

// ---- session dumps ----------------------------------------------------------

struct SessionDump {
  ContextSpec context;
  Hyperparams hyper;
  int grid_m = 0;
  double grid_lo = 0.0, grid_hi = 0.0, grid_xi = 0.0;
  std::array<PolicyDump, 2> policies;
  GameState final_state;
  int session_number = 0;
  bool converged = false;
  std::int64_t periods = 0;
};

std::string serialize_session_dump(const TrainedSession& session, const ContextSpec& ctx,
                                   const Hyperparams& hyper, const PriceGrid& grid);
SessionDump parse_session_dump(std::string_view text);

// dumps/<context>/session_<n>.dump under the output directory
std::filesystem::path dump_path(const std::filesystem::path& out_dir,
                                const std::string& context_id, int session);

// ---- run manifest -----------------------------------------------------------

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::uint64_t master_seed = 0;
  std::string config_text;
  std::map<std::string, std::uint64_t> context_seeds;
  std::string started_utc;
  std::string finished_utc;
};

// Writes manifest.json recording a content hash for every file under out_dir.
void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

// Empty when every file recorded in manifest.json exists and matches its hash.
std::vector<std::string> verify_manifest(const std::filesystem::path& out_dir);

}  // namespace pricelab
