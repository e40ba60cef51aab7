#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "psitrace/parallel.hpp"
#include "psitrace/runner.hpp"
#include "psitrace/suite.hpp"

using namespace psitrace;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<double> t_min, t_max, tol;
  std::optional<int> t_count, order;
};

void apply(const Overrides& ov, int threads, ExperimentConfig& c) {
  if (!ov.out.empty()) c.output.dir = ov.out;
  if (ov.t_min) c.run.t_min = *ov.t_min;
  if (ov.t_max) c.run.t_max = *ov.t_max;
  if (ov.t_min || ov.t_max) c.run.windows.clear();
  if (ov.t_count) c.run.t_count = *ov.t_count;
  if (ov.order) c.run.order = *ov.order;
  if (ov.tol) c.run.tol = *ov.tol;
  if (threads > 0) c.run.threads = threads;
}

int run_config(Command cmd, const Overrides& ov, int threads) {
  ConfigFile file = load_config(ov.config);
  for (auto& c : file.experiments) apply(ov, threads, c);
  // Stanzas run side by side only when there are spare workers for them.
  int stanza_threads = threads > 1 && file.experiments.size() > 1 ? threads : 1;
  bool all = true;
  for (const RunReport& r : run_stanzas(cmd, file, stanza_threads)) {
    std::string body = r.text.substr(r.text.find("[report]\n") + 9);
    std::cout << "== " << r.name << " (" << command_name(cmd) << ", " << r.seconds << " s)\n" << body;
    for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
    all = all && r.pass;
  }
  std::cout << "overall: " << (all ? "PASS" : "FAIL") << "\n";
  return all ? 0 : 1;
}

int run_suite(const SuiteResult& r, const std::string& out, const std::string& file) {
  std::string text = r.to_text();
  std::cout << text;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::string path = (std::filesystem::path(out) / file).string();
    write_file_atomic(path, std::string("# psitrace ") + version_string() + "\n" + text);
    std::cout << "wrote " << path << "\n";
  }
  return r.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace expansions of pseudodifferential operators on the flat torus"};
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);

  Overrides ov;
  auto add_config_flags = [&](CLI::App* sub, bool run_flags) {
    sub->add_option("--config", ov.config, "Experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", ov.out, "Output directory (overrides [output] dir)");
    if (!run_flags) return;
    sub->add_option("--t-min", ov.t_min, "Smallest t (replaces windows)");
    sub->add_option("--t-max", ov.t_max, "Largest t (replaces windows)");
    sub->add_option("--t-count", ov.t_count, "Samples per t-window");
    sub->add_option("--order", ov.order, "Expansion terms j' < N");
    sub->add_option("--tol", ov.tol, "Relative coefficient tolerance");
  };
  CLI::App* residue = app.add_subcommand("residue", "res(A), TR(A) and tr(A) where defined");
  add_config_flags(residue, false);
  CLI::App* predict = app.add_subcommand("predict", "Predicted expansion of tr(A f(tL)) as CSV");
  add_config_flags(predict, true);
  CLI::App* verify = app.add_subcommand("verify", "Oracle traces fitted against the prediction");
  add_config_flags(verify, true);

  std::string suite_out;
  std::optional<unsigned> perturb_seed;
  CLI::App* selftest = app.add_subcommand("selftest", "Invariant suite of the symbolic and numeric core");
  selftest->add_option("--perturb-seed", perturb_seed, "Perturb one tabulated sphere moment (fault injection)");
  selftest->add_option("--out", suite_out, "Directory for the report");
  CLI::App* hs = app.add_subcommand("hs-check", "Helffer-Sjostrand engine checks");
  hs->add_option("--out", suite_out, "Directory for the report");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_default_threads(threads);
  try {
    if (*residue) return run_config(Command::Residue, ov, threads);
    if (*predict) return run_config(Command::Predict, ov, threads);
    if (*verify) return run_config(Command::Verify, ov, threads);
    SuiteOptions opt{threads, perturb_seed};
    if (*selftest) return run_suite(run_selftest(opt), suite_out, "selftest.txt");
    if (*hs) return run_suite(run_hs_check(opt), suite_out, "hs_check.txt");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
