#pragma once

#include <string>
#include <vector>

#include "psitrace/config.hpp"

namespace psitrace {

const char* version_string();

enum class Command { Residue, Predict, Verify };
Command parse_command(const std::string& name);
std::string command_name(Command c);

/// Report layout: a "# psitrace VERSION COMMAND" stamp, the config echo, then a [report]
/// section. The config parser stops at [report], so a report file is itself a config that
/// reproduces the report byte for byte.
struct RunReport {
  std::string name;
  Command command = Command::Verify;
  bool pass = false;
  std::string text;
  std::vector<std::string> files;  // written, in creation order
  double seconds = 0.0;
};

/// res(A), TR(A) when the order is off {-n, -n+1, ...}, tr(A) when Re m < -n; [expect]
/// entries are compared with tolerance tol * max(1, |expected|).
RunReport cmd_residue(const ExperimentConfig& cfg, bool write_files = true);
/// Writes the predicted expansion as CSV (columns of ExpansionPrediction::to_csv).
RunReport cmd_predict(const ExperimentConfig& cfg, bool write_files = true);
/// Oracle series per t-window, fit and comparison, residual CSV and a log-log residual plot.
RunReport cmd_verify(const ExperimentConfig& cfg, bool write_files = true);

RunReport run_command(Command c, const ExperimentConfig& cfg, bool write_files = true);
/// Runs every stanza (concurrently when threads > 1); a stanza that throws yields a failed
/// report carrying the error, the others still run.
std::vector<RunReport> run_stanzas(Command c, const ConfigFile& file, int threads = 1, bool write_files = true);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
/// Static SVG with logarithmic axes; non-positive values are skipped. Throws when no
/// series has a positive point.
std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<PlotSeries>& series);

/// Writes through a temporary file and a rename, so readers never see partial output.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace psitrace
