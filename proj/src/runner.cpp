#include "psitrace/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psitrace/expand.hpp"
#include "psitrace/oracle.hpp"
#include "psitrace/parallel.hpp"
#include "psitrace/traces.hpp"

#ifndef PSITRACE_VERSION
#define PSITRACE_VERSION "0.0.0"
#endif

namespace psitrace {

namespace {

namespace fs = std::filesystem;

std::string header(Command c, const ExperimentConfig& cfg) {
  return std::string("# psitrace ") + version_string() + " " + command_name(c) + "\n" + cfg.to_text() + "[report]\n";
}

struct Writer {
  const ExperimentConfig& cfg;
  bool enabled;
  RunReport& rep;

  std::string path(const std::string& suffix) const {
    return (fs::path(cfg.output.dir) / (cfg.file_prefix() + suffix)).string();
  }
  void write(const std::string& suffix, const std::string& content) {
    if (!enabled) return;
    fs::create_directories(cfg.output.dir);
    std::string p = path(suffix);
    write_file_atomic(p, content);
    rep.files.push_back(p);
  }
};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExpansionPrediction scaled(const ExpansionPrediction& p, double s) {
  if (s == 1.0) return p;
  ExpansionPrediction out;
  for (const auto& t : p.terms()) out.add(t.exponent, s * t.coefficient, t.provenance);
  if (p.constant()) out.set_constant(s * p.constant()->coefficient, p.constant()->provenance);
  return out;
}

ExpansionPrediction predict(const ExperimentConfig& cfg, const EllipticOperatorSpec& L) {
  const auto& A = *cfg.problem.A;
  const auto& f = *cfg.problem.f;
  ExpansionPrediction p = cfg.problem.mode == ExpansionMode::Res
                              ? predict_expansion_res(A, L, f, cfg.run.order, cfg.run.threads)
                              : predict_expansion_TR(A, L, f, cfg.run.order, cfg.run.threads);
  return scaled(p, cfg.run.prediction_scale);
}

// Every ladder exponent j' < N gets a fitted column, even when its predicted coefficient
// vanishes; such terms are reported and left unjudged.
void complete_ladder(ExpansionPrediction& p, cplx m, int n, double m0, int N) {
  if (m.imag() != 0.0) return;
  for (int j = 0; j < N; ++j) {
    double e = snap(-(m.real() + n - j) / m0);
    if (std::abs(e) < 1e-12 && p.constant()) continue;
    bool present = false;
    for (const auto& t : p.terms()) present = present || std::abs(t.exponent - cplx(e)) < 1e-9;
    if (!present) p.add(e, 0.0, "ladder j'=" + std::to_string(j) + ", predicted to vanish");
  }
}

std::string prediction_text(const ExpansionPrediction& p) {
  std::ostringstream o;
  o.precision(17);
  for (const auto& t : p.terms()) {
    o << "t^" << format_complex(t.exponent) << ": " << format_complex(t.coefficient) << "  [" << t.provenance << "]\n";
  }
  if (p.constant()) o << "constant: " << format_complex(p.constant()->coefficient) << "  [" << p.constant()->provenance << "]\n";
  for (const auto& n : p.notes()) o << "note: " << n << "\n";
  return o.str();
}

}  // namespace

const char* version_string() { return PSITRACE_VERSION; }

Command parse_command(const std::string& name) {
  if (name == "residue") return Command::Residue;
  if (name == "predict") return Command::Predict;
  if (name == "verify") return Command::Verify;
  throw DomainError("unknown command '" + name + "'");
}

std::string command_name(Command c) {
  switch (c) {
    case Command::Residue: return "residue";
    case Command::Predict: return "predict";
    case Command::Verify: return "verify";
  }
  return "";
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  fs::rename(tmp, path);
}

RunReport cmd_residue(const ExperimentConfig& cfg, bool write_files) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate(false);
  RunReport rep;
  rep.name = cfg.name;
  rep.command = Command::Residue;
  rep.pass = true;
  const auto& A = *cfg.problem.A;
  const int n = A.dim();
  const cplx m = A.order();
  std::ostringstream o, csv;
  o.precision(17);
  csv.precision(17);
  csv << "quantity,defined,re,im\n";
  o << "A: order " << format_complex(m) << ", n = " << n << "\n";

  auto judge = [&](const char* key, const std::optional<cplx>& expected, const std::optional<cplx>& value) {
    if (!expected) return;
    if (!value) {
      o << "  expected " << key << " = " << format_complex(*expected) << " but it is undefined: FAIL\n";
      rep.pass = false;
      return;
    }
    double err = std::abs(*value - *expected);
    bool ok = err <= cfg.expect.tol * std::max(1.0, std::abs(*expected));
    o << "  expected " << key << " = " << format_complex(*expected) << ", abs error " << err << (ok ? " ok" : " FAIL") << "\n";
    rep.pass = rep.pass && ok;
  };
  auto emit = [&](const char* key, const std::optional<cplx>& value) {
    csv << key << "," << (value ? 1 : 0) << "," << (value ? value->real() : 0.0) << "," << (value ? value->imag() : 0.0)
        << "\n";
  };

  std::optional<cplx> res = residue_density_integrated(A);
  o << "res(A) = " << format_complex(*res);
  if (in_integer_ladder(m, n)) {
    o << "  [integral over T^n x S^{n-1} of the degree -n component]\n";
  } else {
    o << "  [order off the integer ladder {-n, -n+1, ...}: res(A) := 0]\n";
  }
  judge("res", cfg.expect.res, res);
  emit("res", res);

  std::optional<cplx> tr;
  if (in_integer_ladder(m, n)) {
    o << "TR(A) undefined: the canonical trace needs an order outside {-n, -n+1, ...}; m = " << format_complex(m)
      << ", n = " << n << "\n";
  } else {
    tr = canonical_trace(A);
    o << "TR(A) = " << format_complex(*tr) << "  [finite part of the xi-integral]\n";
  }
  judge("tr", cfg.expect.tr, tr);
  emit("tr", tr);

  std::optional<cplx> sm;
  if (m.real() < -n) {
    sm = smoothing_trace(A);
    o << "tr(A) = " << format_complex(*sm) << "  [integral of the symbol over T^n x R^n]\n";
  } else {
    o << "tr(A) undefined: the kernel trace needs Re m < -n; Re m = " << m.real() << ", n = " << n << "\n";
  }
  judge("smoothing", cfg.expect.smoothing, sm);
  emit("smoothing", sm);

  o << (rep.pass ? "PASS" : "FAIL") << "\n";
  rep.text = header(Command::Residue, cfg) + o.str();
  Writer w{cfg, write_files, rep};
  w.write(".residue.txt", rep.text);
  if (cfg.output.csv) w.write(".residue.csv", csv.str());
  rep.seconds = elapsed(t0);
  return rep;
}

RunReport cmd_predict(const ExperimentConfig& cfg, bool write_files) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate(true);
  RunReport rep;
  rep.name = cfg.name;
  rep.command = Command::Predict;
  EllipticOperatorSpec L(*cfg.problem.L, cfg.problem.L_c0, cfg.problem.L_c1);
  ExpansionPrediction p = predict(cfg, L);
  rep.pass = true;
  rep.text = header(Command::Predict, cfg) + prediction_text(p) + "PASS\n";
  Writer w{cfg, write_files, rep};
  w.write(".predict.txt", rep.text);
  if (cfg.output.csv) w.write(".prediction.csv", p.to_csv());
  rep.seconds = elapsed(t0);
  return rep;
}

RunReport cmd_verify(const ExperimentConfig& cfg_in, bool write_files) {
  auto t0 = std::chrono::steady_clock::now();
  cfg_in.validate(true);
  ExperimentConfig cfg = cfg_in;
  RunReport rep;
  rep.name = cfg.name;
  rep.command = Command::Verify;
  const auto& A = *cfg.problem.A;
  const auto& f = *cfg.problem.f;
  EllipticOperatorSpec L(*cfg.problem.L, cfg.problem.L_c0, cfg.problem.L_c1);
  std::ostringstream o;
  o.precision(10);

  std::optional<MatrixOracle> matrix;
  if (cfg.run.oracle == OracleKind::Matrix) {
    matrix.emplace(A, L, MatrixOracleOptions{cfg.run.K, cfg.run.safety});
    o << "matrix oracle: K = " << cfg.run.K << ", " << matrix->modes() << " modes in " << matrix->blocks()
      << " blocks, symmetry defect " << matrix->symmetry_defect() << ", boundary min " << matrix->boundary_min()
      << "\n";
  } else if (!L.is_multiplier()) {
    throw DomainError("lattice oracle needs an x-independent L; use oracle = matrix");
  }
  std::vector<Interval> windows = cfg.effective_windows();
  if (cfg.run.t_min == 0.0 && cfg.run.windows.empty()) {
    double lo = 1.0001 * cfg.run.safety * f.support().hi() / matrix->boundary_min();
    windows = {{lo, 10.0 * lo}};
    o << "t_min = auto: spectral margin " << cfg.run.safety << " gives t in [" << lo << ", " << 10.0 * lo << "]\n";
  }

  ExpansionPrediction pred = predict(cfg, L);
  const double m = A.order().real(), n = A.dim(), m0 = L.order();
  complete_ladder(pred, A.order(), A.dim(), m0, cfg.run.order);
  VerifyOptions vopt;
  vopt.rel_tol = cfg.run.tol;
  vopt.slope_tol = cfg.run.slope_tol;
  vopt.min_magnitude = cfg.run.min_magnitude;
  vopt.judge_constant = cfg.run.judge_constant;
  const double next = -(m + n - cfg.run.order) / m0 + 0.0;
  if (cfg.run.slope_check) vopt.next_exponent = next;
  if (cfg.run.prediction_scale != 1.0) {
    o << "prediction scaled by " << format_real(cfg.run.prediction_scale) << " (fault injection)\n";
  }
  o << "prediction:\n" << prediction_text(pred);
  o << "next ladder exponent " << next << (cfg.run.slope_check ? "" : " (slope not checked)") << "\n";

  Writer w{cfg, write_files, rep};
  bool pass = true;
  std::vector<cplx> offsets;
  std::vector<PlotSeries> plot;
  for (size_t i = 0; i < windows.size(); ++i) {
    std::vector<double> ts = geometric_t_grid(windows[i].lo, windows[i].hi, cfg.run.t_count);
    OracleSeries series = matrix ? matrix->series(f, ts) : multiplier_series(A, L, f, ts, cfg.run.threads);
    VerificationReport vr = verify_expansion(pred, series, vopt);
    o << "window " << i << ": t in [" << windows[i].lo << ", " << windows[i].hi << "], " << ts.size() << " samples\n"
      << vr.to_text();
    pass = pass && vr.pass;
    offsets.push_back(vr.constant_offset);
    std::string tag = windows.size() > 1 ? ".w" + std::to_string(i) : "";
    if (cfg.output.csv) {
      w.write(tag + ".oracle.csv", series.to_csv());
      w.write(tag + ".residual.csv", vr.residual_csv(series, pred));
    }
    PlotSeries ps{"window " + std::to_string(i) + " |oracle - prediction|", {}, {}};
    for (const auto& s : series.samples()) {
      ps.x.push_back(s.t);
      ps.y.push_back(std::abs(s.value - pred.evaluate(s.t) - vr.constant_offset));
    }
    plot.push_back(std::move(ps));
  }
  if (windows.size() > 1 && !cfg.run.judge_constant) {
    double spread = 0.0;
    for (const cplx& c : offsets) spread = std::max(spread, std::abs(c - offsets.front()));
    bool ok = spread <= cfg.run.window_tol;
    o << "constant offset spread across windows " << spread << (ok ? " ok" : " FAIL") << "\n";
    pass = pass && ok;
  }
  if (cfg.output.csv) w.write(".prediction.csv", pred.to_csv());
  if (cfg.output.plots && write_files) {
    try {
      w.write(".residual.svg", loglog_svg(cfg.name + ": residual after subtracting the prediction", "t",
                                          "|residual|", plot));
    } catch (const std::exception& e) {
      o << "note: plot skipped: " << e.what() << "\n";
    }
  }
  o << (pass ? "PASS" : "FAIL") << "\n";
  rep.pass = pass;
  rep.text = header(Command::Verify, cfg_in) + o.str();
  w.write(".verify.txt", rep.text);
  rep.seconds = elapsed(t0);
  return rep;
}

RunReport run_command(Command c, const ExperimentConfig& cfg, bool write_files) {
  switch (c) {
    case Command::Residue: return cmd_residue(cfg, write_files);
    case Command::Predict: return cmd_predict(cfg, write_files);
    case Command::Verify: return cmd_verify(cfg, write_files);
  }
  throw DomainError("unknown command");
}

std::vector<RunReport> run_stanzas(Command c, const ConfigFile& file, int threads, bool write_files) {
  return parallel_map(file.experiments.size(), std::max(threads, 1), [&](size_t i) {
    const ExperimentConfig& cfg = file.experiments[i];
    try {
      return run_command(c, cfg, write_files);
    } catch (const std::exception& e) {
      RunReport rep;
  rep.name = cfg.name;
  rep.command = c;
      rep.text = header(c, cfg) + "error: " + e.what() + "\nFAIL\n";
      return rep;
    }
  });
}

std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<PlotSeries>& series) {
  double xlo = HUGE_VAL, xhi = -HUGE_VAL, ylo = HUGE_VAL, yhi = -HUGE_VAL;
  for (const auto& s : series) {
    for (size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!(s.x[i] > 0.0 && s.y[i] > 0.0 && std::isfinite(s.x[i]) && std::isfinite(s.y[i]))) continue;
      xlo = std::min(xlo, std::log10(s.x[i]));
      xhi = std::max(xhi, std::log10(s.x[i]));
      ylo = std::min(ylo, std::log10(s.y[i]));
      yhi = std::max(yhi, std::log10(s.y[i]));
    }
  }
  if (!(xlo <= xhi)) throw std::runtime_error("no positive data to plot");
  xlo = std::floor(xlo), xhi = std::max(std::ceil(xhi), xlo + 1.0);
  ylo = std::floor(ylo), yhi = std::max(std::ceil(yhi), ylo + 1.0);

  const double W = 640, H = 440, left = 70, right = 20, top = 40, bottom = 50;
  auto px = [&](double lx) { return left + (lx - xlo) / (xhi - xlo) * (W - left - right); };
  auto py = [&](double ly) { return H - bottom - (ly - ylo) / (yhi - ylo) * (H - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  for (double d = xlo; d <= xhi + 0.5; d += 1.0) {
    o << "<line x1=\"" << px(d) << "\" y1=\"" << top << "\" x2=\"" << px(d) << "\" y2=\"" << H - bottom
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << px(d) << "\" y=\"" << H - bottom + 16
      << "\" text-anchor=\"middle\">1e" << d << "</text>\n";
  }
  double ystep = std::max(1.0, std::ceil((yhi - ylo) / 10.0));
  for (double d = ylo; d <= yhi + 0.5; d += ystep) {
    o << "<line x1=\"" << left << "\" y1=\"" << py(d) << "\" x2=\"" << W - right << "\" y2=\"" << py(d)
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << left - 6 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\">1e" << d
      << "</text>\n";
  }
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << W - left - right << "\" height=\""
    << H - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << H / 2 << ")\">"
    << ylabel << "</text>\n";
  for (size_t k = 0; k < series.size(); ++k) {
    const char* color = colors[k % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < std::min(series[k].x.size(), series[k].y.size()); ++i) {
      double x = series[k].x[i], y = series[k].y[i];
      if (!(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y))) continue;
      o << px(std::log10(x)) << "," << py(std::log10(y)) << " ";
    }
    o << "\"/>\n<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 14 * k << "\" fill=\"" << color << "\">"
      << series[k].label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace psitrace
