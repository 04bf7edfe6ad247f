#pragma once

// Batch front end: a JSON run configuration (model, task, numerics, output),
// task execution into in-memory CSV and report text, and the scan CSV format.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mjacobi/classifier.hpp"
#include "mjacobi/opmodel.hpp"
#include "mjacobi/truncmetrics.hpp"
#include "mjacobi/weylm.hpp"

namespace mjacobi {

/// Every tunable with its library default.
struct Numerics {
  double riccati_tol = 1e-10;
  std::int64_t riccati_max_depth = kMaxRiccatiDepth;
  double resolvent_tol = 1e-10;
  std::int64_t resolvent_max_size = kMaxResolventSize;
  int cesaro_min_exponent = 8;
  int cesaro_max_exponent = 16;
  double slope_threshold = kSlopeThreshold;
  std::vector<double> y_ladder = default_y_ladder();
  double tau_rel = 1e-3;
  double stable_change = 0.2;
  double floquet_eps = kFloquetEps;
  double edge_radius = 0.05;
  NormKind norm = NormKind::frobenius;
  std::int64_t validate_window = 1000;
  std::int64_t max_track_length = kMaxTrackLength;
  EdgeSource constancy_edges = EdgeSource::approximant;
  std::int64_t max_denominator = 64;
};

enum class TaskKind { validate, probe, jl_sweep, scan, constancy };

struct TaskConfig {
  TaskKind kind = TaskKind::validate;
  double x = 0.0;                                  // probe
  double y = 0.0;                                  // probe
  std::vector<std::pair<double, double>> points;   // jl-sweep
  std::vector<double> grid;                        // scan, constancy
  std::vector<std::vector<double>> phases;         // constancy
};

struct RunConfig {
  OperatorSpec model = OperatorSpec::free(1);
  std::string model_kind;
  TaskConfig task;
  Numerics numerics;
  std::string csv_name = "results.csv";
  std::string report_name = "report.txt";
  std::uint64_t seed = 0;
  std::string resolved;  // fully resolved configuration, pretty-printed JSON
};

/// Throws Error(schema) on malformed input or unknown keys.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

const char* task_name(TaskKind kind);

struct RunOutcome {
  int exit_code = 0;
  std::string csv;
  std::string report;
  std::string message;  // one-line summary or the failure
};

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitIo = 5;

int exit_code_for(ErrorKind kind);

/// Validates the model and runs the task; nothing is written to disk.
RunOutcome execute(const RunConfig& config, int threads = 1);

/// Model validation only (the `validate` subcommand).
RunOutcome validate_only(const RunConfig& config);

// ---- scan CSV ------------------------------------------------------------

/// One CSV line of a scan: x, r_ces, slope_r1..slope_rl, r_rank,
/// trace_growth, r_flo, flags.
struct ScanRow {
  double x = 0.0;
  std::optional<int> r_ces;
  std::vector<std::optional<double>> slopes;
  std::optional<int> r_rank;
  std::optional<double> trace_growth;
  std::optional<int> r_flo;
  std::vector<std::string> flags;

  friend bool operator==(const ScanRow&, const ScanRow&) = default;
};

ScanRow to_row(const ScanRecord& record);

std::string scan_csv(const std::vector<ScanRow>& rows, int dim);
std::vector<ScanRow> parse_scan_csv(const std::string& text);

/// Writes scan_csv(rows) to path; throws Error(io).
void emit_csv(const std::vector<ScanRow>& rows, int dim, const std::string& path);

/// 17 significant digits, enough for any double to round-trip.
std::string format_double(double v);

}  // namespace mjacobi
