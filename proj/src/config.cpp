#include "psitrace/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "psitrace/symbol_io.hpp"

namespace psitrace {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail_at(int line, const std::string& what) {
  throw ParseError("config line " + std::to_string(line) + ": " + what);
}

double real_value(const std::string& v, int line) {
  TextCursor in(v);
  try {
    double x = in.parse_real();
    if (!in.at_end()) in.fail("unexpected trailing text");
    return x;
  } catch (const ParseError& e) {
    fail_at(line, "'" + v + "': " + e.what());
  }
}

cplx complex_value(const std::string& v, int line) {
  TextCursor in(v);
  try {
    cplx z = in.parse_complex();
    if (!in.at_end()) in.fail("unexpected trailing text");
    return z;
  } catch (const ParseError& e) {
    fail_at(line, "'" + v + "': " + e.what());
  }
}

int int_value(const std::string& v, int line) {
  double x = real_value(v, line);
  if (!is_integer(x, 0.0)) fail_at(line, "'" + v + "' is not an integer");
  return static_cast<int>(x);
}

bool bool_value(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail_at(line, "'" + v + "' is not true/false");
}

std::vector<Interval> windows_value(const std::string& v, int line) {
  std::vector<Interval> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    size_t colon = part.find(':');
    if (colon == std::string::npos) fail_at(line, "window '" + part + "' must read lo:hi");
    out.push_back({real_value(trim(part.substr(0, colon)), line), real_value(trim(part.substr(colon + 1)), line)});
  }
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"problem",
       {
           {"n", [](ExperimentConfig& c, const std::string& v, int l) { c.problem.n = int_value(v, l); }},
           {"mode",
            [](ExperimentConfig& c, const std::string& v, int l) {
              if (v == "res") {
                c.problem.mode = ExpansionMode::Res;
              } else if (v == "tr") {
                c.problem.mode = ExpansionMode::TR;
              } else {
                fail_at(l, "mode must be res or tr");
              }
            }},
           {"A",
            [](ExperimentConfig& c, const std::string& v, int l) {
              try {
                c.problem.A = parse_symbol(v);
              } catch (const std::exception& e) {
                fail_at(l, std::string("A: ") + e.what());
              }
            }},
           {"L",
            [](ExperimentConfig& c, const std::string& v, int l) {
              try {
                c.problem.L = parse_symbol(v);
              } catch (const std::exception& e) {
                fail_at(l, std::string("L: ") + e.what());
              }
            }},
           {"L.c0", [](ExperimentConfig& c, const std::string& v, int l) { c.problem.L_c0 = real_value(v, l); }},
           {"L.c1", [](ExperimentConfig& c, const std::string& v, int l) { c.problem.L_c1 = real_value(v, l); }},
           {"f",
            [](ExperimentConfig& c, const std::string& v, int l) {
              try {
                c.problem.f = TestFunction::parse(v);
              } catch (const std::exception& e) {
                fail_at(l, std::string("f: ") + e.what());
              }
            }},
       }},
      {"run",
       {
           {"oracle",
            [](ExperimentConfig& c, const std::string& v, int l) {
              if (v == "lattice") {
                c.run.oracle = OracleKind::Lattice;
              } else if (v == "matrix") {
                c.run.oracle = OracleKind::Matrix;
              } else {
                fail_at(l, "oracle must be lattice or matrix");
              }
            }},
           {"t_min",
            [](ExperimentConfig& c, const std::string& v, int l) {
              c.run.t_min = v == "auto" ? 0.0 : real_value(v, l);
            }},
           {"t_max", [](ExperimentConfig& c, const std::string& v, int l) { c.run.t_max = real_value(v, l); }},
           {"t_count", [](ExperimentConfig& c, const std::string& v, int l) { c.run.t_count = int_value(v, l); }},
           {"windows",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.windows = windows_value(v, l); }},
           {"order", [](ExperimentConfig& c, const std::string& v, int l) { c.run.order = int_value(v, l); }},
           {"K", [](ExperimentConfig& c, const std::string& v, int l) { c.run.K = int_value(v, l); }},
           {"safety", [](ExperimentConfig& c, const std::string& v, int l) { c.run.safety = real_value(v, l); }},
           {"tol", [](ExperimentConfig& c, const std::string& v, int l) { c.run.tol = real_value(v, l); }},
           {"slope_tol",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.slope_tol = real_value(v, l); }},
           {"slope_check",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.slope_check = bool_value(v, l); }},
           {"min_magnitude",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.min_magnitude = real_value(v, l); }},
           {"judge_constant",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.judge_constant = bool_value(v, l); }},
           {"window_tol",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.window_tol = real_value(v, l); }},
           {"prediction_scale",
            [](ExperimentConfig& c, const std::string& v, int l) { c.run.prediction_scale = real_value(v, l); }},
           {"threads", [](ExperimentConfig& c, const std::string& v, int l) { c.run.threads = int_value(v, l); }},
       }},
      {"expect",
       {
           {"res", [](ExperimentConfig& c, const std::string& v, int l) { c.expect.res = complex_value(v, l); }},
           {"tr", [](ExperimentConfig& c, const std::string& v, int l) { c.expect.tr = complex_value(v, l); }},
           {"smoothing",
            [](ExperimentConfig& c, const std::string& v, int l) { c.expect.smoothing = complex_value(v, l); }},
           {"tol", [](ExperimentConfig& c, const std::string& v, int l) { c.expect.tol = real_value(v, l); }},
       }},
      {"output",
       {
           {"dir", [](ExperimentConfig& c, const std::string& v, int) { c.output.dir = v; }},
           {"prefix", [](ExperimentConfig& c, const std::string& v, int) { c.output.prefix = v; }},
           {"csv", [](ExperimentConfig& c, const std::string& v, int l) { c.output.csv = bool_value(v, l); }},
           {"plots", [](ExperimentConfig& c, const std::string& v, int l) { c.output.plots = bool_value(v, l); }},
       }},
  };
  return table;
}

void require_positive(double v, const std::string& key) {
  if (!(v > 0.0)) throw DomainError("config: " + key + " must be positive");
}

}  // namespace

void ExperimentConfig::validate(bool need_operator) const {
  const std::string where = "experiment '" + name + "': ";
  if (problem.n < 1 || problem.n > 3) throw DomainError(where + "n must be 1, 2 or 3");
  if (!problem.A) throw DomainError(where + "missing [problem] A");
  if (problem.A->dim() != problem.n) throw DomainError(where + "A is declared with n = " + std::to_string(problem.A->dim()));
  if (need_operator) {
    if (!problem.L) throw DomainError(where + "missing [problem] L");
    if (!problem.f) throw DomainError(where + "missing [problem] f");
  }
  if (problem.L && problem.L->dim() != problem.n) {
    throw DomainError(where + "L is declared with n = " + std::to_string(problem.L->dim()));
  }
  require_positive(problem.L_c0, "L.c0");
  require_positive(run.t_max, "t_max");
  if (run.t_min < 0.0) throw DomainError(where + "t_min must be positive or auto");
  if (run.t_min > 0.0 && run.t_min >= run.t_max) throw DomainError(where + "t_min must be below t_max");
  if (run.t_min == 0.0 && run.oracle != OracleKind::Matrix) {
    throw DomainError(where + "t_min = auto needs the matrix oracle");
  }
  if (run.t_count < 2) throw DomainError(where + "t_count must be at least 2");
  if (run.order < 1) throw DomainError(where + "order must be at least 1");
  if (run.K < 1) throw DomainError(where + "K must be at least 1");
  if (run.threads < 0) throw DomainError(where + "threads must be >= 0");
  require_positive(run.safety, "safety");
  require_positive(run.tol, "tol");
  require_positive(run.slope_tol, "slope_tol");
  require_positive(run.min_magnitude, "min_magnitude");
  require_positive(run.window_tol, "window_tol");
  require_positive(expect.tol, "expect tol");
  for (size_t i = 0; i < run.windows.size(); ++i) {
    const Interval& w = run.windows[i];
    if (!(w.lo > 0.0 && w.lo < w.hi)) throw DomainError(where + "window " + std::to_string(i) + " must satisfy 0 < lo < hi");
    for (size_t j = 0; j < i; ++j) {
      if (w.lo <= run.windows[j].hi && run.windows[j].lo <= w.hi) throw DomainError(where + "windows must be disjoint");
    }
  }
}

std::vector<Interval> ExperimentConfig::effective_windows() const {
  if (!run.windows.empty()) return run.windows;
  return {{run.t_min, run.t_max}};
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "[experiment " << name << "]\n";
  o << "[problem]\n";
  o << "n = " << problem.n << "\n";
  o << "mode = " << (problem.mode == ExpansionMode::Res ? "res" : "tr") << "\n";
  if (problem.A) o << "A = " << psitrace::to_text(*problem.A) << "\n";
  if (problem.L) o << "L = " << psitrace::to_text(*problem.L) << "\n";
  o << "L.c0 = " << format_real(problem.L_c0) << "\n";
  o << "L.c1 = " << format_real(problem.L_c1) << "\n";
  if (problem.f) o << "f = " << problem.f->to_text() << "\n";
  o << "[run]\n";
  o << "oracle = " << (run.oracle == OracleKind::Lattice ? "lattice" : "matrix") << "\n";
  o << "t_min = " << (run.t_min == 0.0 ? std::string("auto") : format_real(run.t_min)) << "\n";
  o << "t_max = " << format_real(run.t_max) << "\n";
  o << "t_count = " << run.t_count << "\n";
  if (!run.windows.empty()) {
    o << "windows = ";
    for (size_t i = 0; i < run.windows.size(); ++i) {
      o << (i ? ", " : "") << format_real(run.windows[i].lo) << ":" << format_real(run.windows[i].hi);
    }
    o << "\n";
  }
  o << "order = " << run.order << "\n";
  o << "K = " << run.K << "\n";
  o << "safety = " << format_real(run.safety) << "\n";
  o << "tol = " << format_real(run.tol) << "\n";
  o << "slope_tol = " << format_real(run.slope_tol) << "\n";
  o << "slope_check = " << bool_text(run.slope_check) << "\n";
  o << "min_magnitude = " << format_real(run.min_magnitude) << "\n";
  o << "judge_constant = " << bool_text(run.judge_constant) << "\n";
  o << "window_tol = " << format_real(run.window_tol) << "\n";
  o << "prediction_scale = " << format_real(run.prediction_scale) << "\n";
  o << "threads = " << run.threads << "\n";
  o << "[expect]\n";
  if (expect.res) o << "res = " << format_complex_text(*expect.res) << "\n";
  if (expect.tr) o << "tr = " << format_complex_text(*expect.tr) << "\n";
  if (expect.smoothing) o << "smoothing = " << format_complex_text(*expect.smoothing) << "\n";
  o << "tol = " << format_real(expect.tol) << "\n";
  o << "[output]\n";
  o << "dir = " << output.dir << "\n";
  if (!output.prefix.empty()) o << "prefix = " << output.prefix << "\n";
  o << "csv = " << bool_text(output.csv) << "\n";
  o << "plots = " << bool_text(output.plots) << "\n";
  return o.str();
}

std::string ConfigFile::to_text() const {
  std::string out;
  for (size_t i = 0; i < experiments.size(); ++i) {
    if (i) out += "\n";
    out += experiments[i].to_text();
  }
  return out;
}

ConfigFile parse_config(const std::string& text, const std::string& default_name) {
  // Join continuation lines first, remembering where each logical line started.
  std::vector<std::pair<int, std::string>> lines;
  {
    std::istringstream in(text);
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
      ++number;
      std::string t = trim(raw);
      if (t.empty() || t[0] == '#') continue;
      bool continues = raw[0] == ' ' || raw[0] == '\t';
      if (continues && !lines.empty() && lines.back().second[0] != '[') {
        lines.back().second += " " + t;
      } else if (continues) {
        fail_at(number, "continuation line without a key");
      } else {
        lines.emplace_back(number, t);
      }
    }
  }

  ConfigFile file;
  std::map<std::string, bool> names;
  std::string section;
  std::map<std::string, bool> seen;
  auto start = [&](const std::string& name, int line) {
    if (names[name]) fail_at(line, "duplicate experiment '" + name + "'");
    names[name] = true;
    file.experiments.emplace_back();
    file.experiments.back().name = name;
    seen.clear();
  };
  for (const auto& [number, line] : lines) {
    if (line[0] == '[') {
      if (line.back() != ']') fail_at(number, "unterminated section header");
      std::string head = trim(line.substr(1, line.size() - 2));
      if (head == "report") break;
      if (head.rfind("experiment", 0) == 0) {
        std::string name = trim(head.substr(10));
        if (name.empty() || name.find_first_of(" \t/\\") != std::string::npos) {
          fail_at(number, "experiment name must be a single word");
        }
        start(name, number);
        section.clear();
        continue;
      }
      if (!setters().count(head)) fail_at(number, "unknown section [" + head + "]");
      if (file.experiments.empty()) start(default_name, number);
      section = head;
      continue;
    }
    if (section.empty()) fail_at(number, "key outside a section");
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail_at(number, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const auto& keys = setters().at(section);
    auto it = keys.find(key);
    if (it == keys.end()) fail_at(number, "unknown key '" + key + "' in [" + section + "]");
    std::string full = section + "." + key;
    if (seen[full]) fail_at(number, "duplicate key '" + key + "' in [" + section + "]");
    seen[full] = true;
    it->second(file.experiments.back(), value, number);
  }
  if (file.experiments.empty()) throw ParseError("config: no experiment found");
  return file;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find('.'));
  if (stem.empty()) stem = "experiment";
  return parse_config(ss.str(), stem);
}

}  // namespace psitrace
