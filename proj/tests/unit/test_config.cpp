#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "psitrace/config.hpp"
#include "psitrace/runner.hpp"
#include "psitrace/symbol_io.hpp"

using namespace psitrace;
using th::mono;
using th::one;

namespace {

const std::string kConfigDir = PSITRACE_CONFIG_DIR;

const char* kLap = "symbol(n=2, m=2) { cutoff 0 : {0,0:1} xi^(2,0) r^(0) + {0,0:1} xi^(0,2) r^(0) }";

std::string minimal(const std::string& extra = "") {
  return std::string("[problem]\nA = symbol(n=2, m=-2) { cutoff 1 : {0,0:1} xi^(0,0) r^(-2) }\nL = ") + kLap +
         "\nf = bump_on(1, 2)\n" + extra;
}

void check_parse_error(const std::string& text, const std::string& fragment) {
  try {
    parse_config(text);
    FAIL("no error for: " << text);
  } catch (const ParseError& e) {
    CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
  }
}

void check_invalid(const std::string& text, const std::string& fragment, bool need_operator = true) {
  ExperimentConfig c = parse_config(text).experiments.at(0);
  try {
    c.validate(need_operator);
    FAIL("no error for: " << text);
  } catch (const DomainError& e) {
    CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
  }
}

ExperimentConfig random_config(std::mt19937_64& rng, int id) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> pick(0, 3);
  ExperimentConfig c;
  c.name = "random" + std::to_string(id);
  c.problem.mode = pick(rng) % 2 ? ExpansionMode::TR : ExpansionMode::Res;
  double m = std::round(u(rng) * 4.0) / 4.0 - 1.0;
  PolyHomogeneousSymbol A(2, m);
  for (int j = 0; j < 1 + pick(rng); ++j) {
    TorusSeries g = TorusSeries::constant(2, cplx(u(rng), u(rng))) + TorusSeries::cosine(2, {1, pick(rng), 0}, u(rng));
    int a1 = pick(rng), a2 = pick(rng);
    A.push_back(mono(a1, a2, m - j - a1 - a2, g) + mono(0, 0, m - j, one()), CutoffSpec{0.5 + std::abs(u(rng))});
  }
  c.problem.A = A;
  if (pick(rng)) {
    c.problem.L = PolyHomogeneousSymbol(2, 2.0);
    c.problem.L->push_back(th::lap(), CutoffSpec{0.0});
    c.problem.f = pick(rng) % 2 ? TestFunction::bump_on(1.0 + std::abs(u(rng)), 4.0)
                                : TestFunction::sum(TestFunction::cutoff(1.0, 2.0), TestFunction::exp(-std::abs(u(rng))));
  }
  c.problem.L_c0 = std::abs(u(rng)) + 0.1;
  c.run.oracle = pick(rng) % 2 ? OracleKind::Matrix : OracleKind::Lattice;
  c.run.t_min = std::exp(u(rng) - 10.0);
  c.run.t_max = c.run.t_min * (2.0 + std::abs(u(rng)));
  if (pick(rng) == 0) c.run.windows = {{1e-6 * std::abs(u(rng)) + 1e-7, 1e-5}, {2e-5, 1e-4 + std::abs(u(rng)) * 1e-4}};
  c.run.t_count = 2 + pick(rng) * 7;
  c.run.order = 1 + pick(rng);
  c.run.K = 8 + pick(rng);
  c.run.tol = std::abs(u(rng)) * 1e-3 + 1e-9;
  c.run.slope_tol = 0.1 / 3.0;
  c.run.slope_check = pick(rng) % 2;
  c.run.judge_constant = pick(rng) % 2;
  c.run.prediction_scale = 1.0 + u(rng) / 7.0;
  if (pick(rng) == 0) c.expect.res = cplx(u(rng), u(rng));
  if (pick(rng) == 0) c.expect.tr = u(rng);
  c.output.dir = "out/random" + std::to_string(id);
  if (pick(rng) % 2) c.output.prefix = "p" + std::to_string(id);
  c.output.plots = pick(rng) % 2;
  return c;
}

}  // namespace

TEST_CASE("shipped configs parse, validate and round-trip") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kConfigDir)) {
    if (entry.path().extension() != ".cfg") continue;
    ConfigFile file = load_config(entry.path().string());
    REQUIRE(!file.experiments.empty());
    for (const auto& c : file.experiments) c.validate(static_cast<bool>(c.problem.L));
    std::string text = file.to_text();
    ConfigFile again = parse_config(text);
    CHECK(again == file);
    CHECK(again.to_text() == text);
    ++count;
  }
  CHECK(count >= 7);
}

TEST_CASE("randomized configs round-trip exactly") {
  std::mt19937_64 rng(11);
  ConfigFile file;
  for (int i = 0; i < 40; ++i) file.experiments.push_back(random_config(rng, i));
  std::string text = file.to_text();
  ConfigFile again = parse_config(text);
  REQUIRE(again.experiments.size() == file.experiments.size());
  for (size_t i = 0; i < file.experiments.size(); ++i) {
    CHECK_MESSAGE(again.experiments[i] == file.experiments[i], file.experiments[i].to_text());
  }
  CHECK(again.to_text() == text);
}

TEST_CASE("config syntax: comments, continuation, default name, report section") {
  std::string text = "# leading comment\n[problem]\nn = 2\nA = symbol(n=2, m=-2) {\n    cutoff 1 :\n"
                     "\t{0,0:1} xi^(0,0) r^(-2) }\n[run]\norder = 2   \n[report]\nthis = is ignored\n[bogus]\n";
  ConfigFile f = parse_config(text, "fallback");
  REQUIRE(f.experiments.size() == 1);
  const ExperimentConfig& c = f.experiments[0];
  CHECK(c.name == "fallback");
  CHECK(c.file_prefix() == "fallback");
  CHECK(c.run.order == 2);
  REQUIRE(c.problem.A);
  CHECK(*c.problem.A == parse_symbol("symbol(n=2, m=-2) { cutoff 1 : {0,0:1} xi^(0,0) r^(-2) }"));

  ConfigFile two = parse_config("[experiment a]\n[run]\norder = 1\n[experiment b]\n[run]\norder = 1\n");
  REQUIRE(two.experiments.size() == 2);
  CHECK(two.experiments[1].name == "b");
  // duplicate-key detection is per stanza
  CHECK(two.experiments[0].run.order == 1);
}

TEST_CASE("config syntax errors name the line") {
  check_parse_error("[problem]\nn = 2\nbogus = 1\n", "config line 3: unknown key 'bogus'");
  check_parse_error("[nowhere]\n", "unknown section [nowhere]");
  check_parse_error("n = 2\n", "key outside a section");
  check_parse_error("[run]\norder = 1\norder = 2\n", "duplicate key 'order'");
  check_parse_error("[experiment a]\n[experiment a]\n", "duplicate experiment 'a'");
  check_parse_error("[experiment two words]\n", "single word");
  check_parse_error("[output]\ncsv = yes\n", "not true/false");
  check_parse_error("[run]\norder = 1.5\n", "not an integer");
  check_parse_error("[run]\nt_max = abc\n", "config line 2");
  check_parse_error("[run]\nwindows = 1e-5\n", "lo:hi");
  check_parse_error("[problem]\nA = symbol(n=2, m=-1) { cutoff 1 : {0,0:1} xi^(0,0) r^(-2) }\n", "A:");
  check_parse_error("[problem]\nf = wobble(1)\n", "unknown function");
  check_parse_error("[problem]\nmode = both\n", "res or tr");
  check_parse_error("   indented\n", "continuation line without a key");
  check_parse_error("# only a comment\n", "no experiment");
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(parse_config(minimal()).experiments[0].validate(true));
  check_invalid("[problem]\nn = 2\n", "missing [problem] A", false);
  check_invalid("[problem]\nA = symbol(n=2, m=-2) { cutoff 1 : {0,0:1} xi^(0,0) r^(-2) }\n", "missing [problem] L");
  check_invalid(minimal("n = 3\n"), "A is declared with n = 2");
  check_invalid(minimal("[run]\ntol = 0\n"), "tol must be positive");
  check_invalid(minimal("[run]\nt_min = 1e-3\nt_max = 1e-4\n"), "below t_max");
  check_invalid(minimal("[run]\nt_min = auto\n"), "needs the matrix oracle");
  check_invalid(minimal("[run]\nwindows = 1e-5:1e-4, 5e-5:1e-3\n"), "disjoint");
  check_invalid(minimal("[run]\nt_count = 1\n"), "t_count");
  check_invalid(minimal("[expect]\ntol = -1\n"), "expect tol");
  ExperimentConfig c = parse_config(minimal("[run]\nwindows = 1e-5:2e-5, 3e-5:4e-5\n")).experiments[0];
  CHECK(c.effective_windows().size() == 2);
  c.run.windows.clear();
  REQUIRE(c.effective_windows().size() == 1);
  CHECK(c.effective_windows()[0] == Interval{c.run.t_min, c.run.t_max});
}

TEST_CASE("residue command on the shipped examples") {
  ConfigFile file = load_config(kConfigDir + "/residue_examples.cfg");
  for (const auto& c : file.experiments) {
    RunReport r = cmd_residue(c, false);
    CHECK_MESSAGE(r.pass, r.text);
    CHECK(r.files.empty());
  }
  ExperimentConfig wrong = file.experiments[0];
  wrong.expect.res = 2.0 * kPi * 1.001;
  RunReport r = cmd_residue(wrong, false);
  CHECK_FALSE(r.pass);
  CHECK(r.text.find("FAIL") != std::string::npos);
  // an expectation on an undefined quantity fails with its condition named
  wrong = file.experiments[0];
  wrong.expect.tr = 1.0;
  r = cmd_residue(wrong, false);
  CHECK_FALSE(r.pass);
  CHECK(r.text.find("outside {-n, -n+1, ...}") != std::string::npos);
}

TEST_CASE("predict command: ladder exponents and TR rejection") {
  ConfigFile file = load_config(kConfigDir + "/predict_examples.cfg");
  RunReport ladder = cmd_predict(file.experiments.at(0), false);
  CHECK(ladder.pass);
  CHECK(ladder.text.find("t^-0.5:") != std::string::npos);
  CHECK(ladder.text.find("constant:") != std::string::npos);
  RunReport tr = cmd_predict(file.experiments.at(1), false);
  CHECK(tr.text.find("t^-0.75:") != std::string::npos);
  CHECK(tr.text.find("t^-0.25:") != std::string::npos);
  CHECK(tr.text.find("canonical trace") != std::string::npos);

  ConfigFile bad = load_config(kConfigDir + "/predict_tr_rejected.cfg");
  CHECK_THROWS_WITH_AS(cmd_predict(bad.experiments.at(0), false), doctest::Contains("outside {-n, -n+1, ...}"),
                       DomainError);
  std::vector<RunReport> rs = run_stanzas(Command::Predict, bad, 1, false);
  REQUIRE(rs.size() == 1);
  CHECK_FALSE(rs[0].pass);
  CHECK(rs[0].text.find("error: TR expansion") != std::string::npos);
}

TEST_CASE("verify command: clean PASS, corrupted FAIL, reproducible report") {
  ExperimentConfig good = load_config(kConfigDir + "/criterion1.cfg").experiments.at(0);
  good.run.t_count = 10;
  RunReport r = cmd_verify(good, false);
  CHECK_MESSAGE(r.pass, r.text);
  // the report parses back to the config it ran and reproduces itself
  ConfigFile echoed = parse_config(r.text);
  REQUIRE(echoed.experiments.size() == 1);
  CHECK(echoed.experiments[0] == good);
  CHECK(cmd_verify(echoed.experiments[0], false).text == r.text);

  ExperimentConfig bad = load_config(kConfigDir + "/selftest_corrupted.cfg").experiments.at(0);
  bad.run.t_count = 10;
  RunReport rb = cmd_verify(bad, false);
  CHECK_FALSE(rb.pass);
  CHECK(rb.text.find("fault injection") != std::string::npos);

  ExperimentConfig variable = good;
  variable.problem.L = parse_symbol(
      "symbol(n=2, m=2) { cutoff 0 : {0,0:1; 1,0:0.1; -1,0:0.1} xi^(2,0) r^(0) + {0,0:1} xi^(0,2) r^(0) }");
  CHECK_THROWS_WITH_AS(cmd_verify(variable, false), doctest::Contains("oracle = matrix"), DomainError);
}

TEST_CASE("verify writes its files atomically") {
  auto dir = std::filesystem::temp_directory_path() / "psitrace_cfg_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = load_config(kConfigDir + "/criterion1.cfg").experiments.at(0);
  c.run.t_count = 6;
  c.output.dir = dir.string();
  c.output.prefix = "c1";
  RunReport r = cmd_verify(c, true);
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"c1.oracle.csv", "c1.prediction.csv", "c1.residual.csv", "c1.residual.svg",
                                          "c1.verify.txt"});
  std::ifstream in(dir / "c1.residual.csv");
  std::string head;
  std::getline(in, head);
  CHECK(head == "t,oracle_re,oracle_im,prediction_re,prediction_im,abs_residual");
  std::ifstream rep(dir / "c1.verify.txt");
  std::stringstream ss;
  ss << rep.rdbuf();
  CHECK(ss.str() == r.text);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stanzas: order, isolation and thread independence") {
  ConfigFile file = load_config(kConfigDir + "/residue_examples.cfg");
  ExperimentConfig broken = file.experiments[0];
  broken.name = "broken";
  broken.problem.A.reset();
  file.experiments.insert(file.experiments.begin() + 1, broken);
  auto one_thread = run_stanzas(Command::Residue, file, 1, false);
  auto three = run_stanzas(Command::Residue, file, 3, false);
  REQUIRE(one_thread.size() == 4);
  CHECK(one_thread[1].name == "broken");
  CHECK_FALSE(one_thread[1].pass);
  CHECK(one_thread[1].text.find("missing [problem] A") != std::string::npos);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(one_thread[i].text == three[i].text);
    CHECK(one_thread[i].pass == (i != 1));
  }
}

TEST_CASE("log-log SVG plot") {
  std::string svg = loglog_svg("t", "x", "y", {{"a", {1e-3, 1e-2, 1e-1}, {1e-6, 0.0, 1e-2}}, {"b", {1.0}, {-1.0}}});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("1e-6") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK_THROWS(loglog_svg("t", "x", "y", {{"a", {1.0, 2.0}, {0.0, -1.0}}}));
  CHECK(parse_command("verify") == Command::Verify);
  CHECK(command_name(Command::Residue) == "residue");
  CHECK_THROWS_AS(parse_command("plot"), DomainError);
}
