#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bilbt/stochastic.hpp"
#include "bilbt/system.hpp"
#include "bilbt/types.hpp"
#include "bilbt/volterra.hpp"

namespace bilbt {

/// Plain-text container for a system on disk, format tag "bsys v1":
/// dimension keys n_state / n_in / n_out, then matrix sections A, N 1..,
/// B, C, then optional per-channel "noise <idx> wiener|cpoisson <rate>"
/// lines. Deterministic files carry one N per input channel; files with
/// noise lines are stochastic models and the N count follows the noise
/// channels instead of n_in.
/// All numbers are written with enough digits to round-trip doubles.
struct SystemFile {
  Matd A;
  std::vector<Matd> N;
  Matd B;
  Matd C;
  std::optional<std::vector<NoiseChannel>> noise;
};

SystemFile parse_system_file(std::istream& in);

BilinearSystem load_system(std::istream& in);
BilinearSystem load_system_file(const std::string& path);

StochasticModel load_model(std::istream& in);
StochasticModel load_model_file(const std::string& path);

void save_system(std::ostream& out, const BilinearSystem& sys);
void save_system_file(const std::string& path, const BilinearSystem& sys);

void save_model(std::ostream& out, const StochasticModel& m);
void save_model_file(const std::string& path, const StochasticModel& m);

/// Shortest decimal form that parses back to the identical double.
std::string fmt_double(double v);

/// Comma-separated table with one header row; rows are written with
/// fmt_double. Lines starting with # are comments and are skipped on read.
void write_csv(std::ostream& out, const std::vector<std::string>& columns, const Matd& rows,
               const std::vector<std::string>& comments = {});

struct CsvTable {
  std::vector<std::string> columns;
  Matd rows;
};

CsvTable read_csv(std::istream& in);

/// Trace as CSV: columns t, y1..ym and optionally x1..xd.
void write_trace_csv(std::ostream& out, const SimulationTrace& tr, bool with_state = false,
                     const std::vector<std::string>& comments = {});

/// Sampled control from CSV columns t, u1..un; the time column must be a
/// uniform grid starting at 0.
ControlSignal load_control_csv(std::istream& in);
ControlSignal load_control_csv_file(const std::string& path);

/// Control specification mini-language used by the command line:
///   zero
///   decexp:a1,a2,...[;rate]
///   window:a1,a2,...;t0;t1
///   csv:path
/// channels, when nonnegative, fixes the expected channel count ("zero"
/// requires it; the other families are checked against it).
ControlSignal parse_control_spec(const std::string& spec, Index channels = -1);

}  // namespace bilbt
