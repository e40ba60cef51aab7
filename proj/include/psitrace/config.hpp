#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psitrace/symcore.hpp"
#include "psitrace/testfunction.hpp"

namespace psitrace {

// Experiment config: line-oriented sections of `key = value` pairs.
//
//   # comment
//   [experiment NAME]      starts a stanza (optional for a single stanza)
//   [problem]  n, mode (res | tr), A, L, L.c0, L.c1, f
//   [run]      oracle (lattice | matrix), t_min (or auto), t_max, t_count, windows, order, K,
//              safety, tol, slope_tol, slope_check, min_magnitude, judge_constant, window_tol,
//              prediction_scale, threads
//   [expect]   res, tr, smoothing, tol
//   [output]   dir, prefix, csv, plots
//   [report]   everything after this header is ignored (reports embed their config)
//
// A line starting with whitespace continues the previous value. Symbols use the symbol_io
// grammar and test functions the TestFunction grammar. Serialization writes every key in a
// fixed order with 17 significant digits, so parse(to_text(c)) == c.

enum class ExpansionMode { Res, TR };
enum class OracleKind { Lattice, Matrix };

struct ProblemBlock {
  int n = 2;
  ExpansionMode mode = ExpansionMode::Res;
  std::optional<PolyHomogeneousSymbol> A;
  std::optional<PolyHomogeneousSymbol> L;
  double L_c0 = 0.5;
  double L_c1 = 0.0;
  std::optional<TestFunction> f;
  bool operator==(const ProblemBlock&) const = default;
};

struct RunBlock {
  OracleKind oracle = OracleKind::Lattice;
  double t_min = 1e-5;  // 0: derived from the matrix oracle's spectral margin
  double t_max = 1e-3;
  int t_count = 24;
  /// Disjoint fitting windows; when empty the single window [t_min, t_max] is used.
  std::vector<Interval> windows;
  int order = 3;  // expansion terms j' < order
  int K = 16;     // matrix oracle truncation |k|_inf <= K
  double safety = 2.0;
  double tol = 0.01;  // relative coefficient tolerance
  double slope_tol = 0.05;
  bool slope_check = true;  // residual must decay at least like the next ladder power
  double min_magnitude = 1e-8;
  bool judge_constant = true;
  double window_tol = 1e-4;  // allowed spread of the constant offset across windows
  double prediction_scale = 1.0;  // fault injection: scales every predicted coefficient
  int threads = 0;
  bool operator==(const RunBlock&) const = default;
};

struct ExpectBlock {
  std::optional<cplx> res;
  std::optional<cplx> tr;
  std::optional<cplx> smoothing;
  double tol = 1e-10;
  bool operator==(const ExpectBlock&) const = default;
};

struct OutputBlock {
  std::string dir = "out";
  std::string prefix;  // defaults to the experiment name
  bool csv = true;
  bool plots = true;
  bool operator==(const OutputBlock&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemBlock problem;
  RunBlock run;
  ExpectBlock expect;
  OutputBlock output;

  /// Throws DomainError when a required key is missing, dimensions disagree or a tolerance
  /// is not positive. `need_operator` also requires L and f.
  void validate(bool need_operator) const;
  /// t-windows actually used: `windows`, or [t_min, t_max].
  std::vector<Interval> effective_windows() const;
  std::string file_prefix() const { return output.prefix.empty() ? name : output.prefix; }
  std::string to_text() const;
  bool operator==(const ExperimentConfig&) const = default;
};

struct ConfigFile {
  std::vector<ExperimentConfig> experiments;
  std::string to_text() const;
  bool operator==(const ConfigFile&) const = default;
};

/// Throws ParseError naming the line on malformed input.
ConfigFile parse_config(const std::string& text, const std::string& default_name = "experiment");
ConfigFile load_config(const std::string& path);

}  // namespace psitrace
