#include "psitrace/suite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "psitrace/calculus.hpp"
#include "psitrace/oracle.hpp"
#include "psitrace/parallel.hpp"
#include "psitrace/traces.hpp"

namespace psitrace {

// ------------------------------------------------------------------ reporting

bool SuiteResult::pass() const {
  if (checks.empty()) return false;
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return budget <= 0.0 || seconds <= budget;
}

std::string SuiteResult::to_text() const {
  std::ostringstream o;
  o.precision(4);
  for (const auto& c : checks) {
    o << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << ": " << c.detail << " (" << c.seconds << " s)\n";
  }
  o << title << ": " << (pass() ? "PASS" : "FAIL") << " in " << seconds << " s";
  if (budget > 0.0) o << " (budget " << budget << " s)";
  o << "\n";
  return o.str();
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

// Runs one check; exceptions count as failures with their message as the detail.
void run_check(SuiteResult& res, const std::string& name, const std::function<CheckResult()>& fn) {
  auto t0 = Clock::now();
  CheckResult c;
  try {
    c = fn();
  } catch (const std::exception& e) {
    c.pass = false;
    c.detail = std::string("error: ") + e.what();
  }
  c.name = name;
  c.seconds = since(t0);
  res.checks.push_back(c);
}

CheckResult verdict(bool pass, const std::string& detail) { return {"", pass, detail, 0.0}; }

TorusSeries one(int n = 2) { return TorusSeries::constant(n, 1.0); }

HomogeneousSymbol mono(int a1, int a2, cplx s, const TorusSeries& g = one()) {
  return HomogeneousSymbol::monomial(2, {a1, a2, 0}, s, g);
}

HomogeneousSymbol radial(cplx s, const TorusSeries& g = one()) { return HomogeneousSymbol::radial(2, s, g); }

HomogeneousSymbol lap() { return mono(2, 0, 0) + mono(0, 2, 0); }

PolyHomogeneousSymbol single(const HomogeneousSymbol& h, CutoffSpec c = CutoffSpec{0.0}) {
  PolyHomogeneousSymbol a(h.dim(), h.degree());
  a.push_back(h, c);
  return a;
}

EllipticOperatorSpec laplacian() { return EllipticOperatorSpec(single(lap()), 0.5); }

// |xi|^2 + eps cos(2 pi x1) |xi| psi_1(|xi|)
EllipticOperatorSpec perturbed_laplacian(double eps) {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(lap(), CutoffSpec{0.0});
  l.push_back(radial(1.0, TorusSeries::cosine(2, {1, 0, 0}, eps)), CutoffSpec{1.0});
  return EllipticOperatorSpec(l, 0.5);
}

// (1 + 0.4 cos 2 pi x1) xi_1^2 + xi_2^2 + 0.5 sin(2 pi x2) xi_2
EllipticOperatorSpec variable_operator() {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(mono(2, 0, 0, one() + TorusSeries::cosine(2, {1, 0, 0}, 0.4)) + mono(0, 2, 0), CutoffSpec{0.0});
  l.push_back(mono(0, 1, 0, TorusSeries::sine(2, {0, 1, 0}, 0.5)), CutoffSpec{0.0});
  return EllipticOperatorSpec(l, 0.5);
}

// three components of degrees m, m-1, m-2 with x-dependent coefficients
PolyHomogeneousSymbol sample_symbol(double m) {
  TorusSeries g = one() + TorusSeries::cosine(2, {1, 0, 0}, 0.5);
  PolyHomogeneousSymbol A(2, m);
  A.push_back(radial(m, g) + mono(2, 0, m - 2.0, TorusSeries::constant(2, 0.7)), CutoffSpec{1.0});
  A.push_back(mono(1, 1, m - 3.0, TorusSeries::sine(2, {0, 1, 0}, 1.0) + one()) +
                  radial(m - 1.0, TorusSeries::constant(2, 0.8)),
              CutoffSpec{1.0});
  A.push_back(radial(m - 2.0, TorusSeries::constant(2, cplx(0.3, 0.2))), CutoffSpec{1.0});
  return A;
}

std::vector<HomogeneousSymbol> symbol_pool() {
  TorusSeries c1 = TorusSeries::cosine(2, {1, 0, 0}, 1.0) + one();
  TorusSeries s2 = TorusSeries::sine(2, {0, 1, 0}, 0.5) + TorusSeries::cosine(2, {1, -1, 0}, 0.25);
  return {mono(0, 0, -1, c1), mono(1, 0, -2, s2) + mono(0, 1, -2, c1), mono(2, 1, -3.5, c1) + mono(0, 0, -0.5, s2),
          mono(1, 1, 0.3, s2), lap() * c1};
}

std::array<double, 3> rand_point(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

// the entries [k, k'] with both modes inside |k|_inf <= K - margin
std::vector<long> interior(const std::vector<Index3>& modes, int K, int margin) {
  std::vector<long> out;
  for (long i = 0; i < static_cast<long>(modes.size()); ++i) {
    const auto& k = modes[i];
    if (std::max({std::abs(k[0]), std::abs(k[1]), std::abs(k[2])}) <= K - margin) out.push_back(i);
  }
  return out;
}

double max_abs_on(const Eigen::MatrixXcd& M, const std::vector<long>& idx) {
  double m = 0.0;
  for (long i : idx)
    for (long j : idx) m = std::max(m, std::abs(M(i, j)));
  return m;
}

// ------------------------------------------------------------------ self-test

CheckResult check_homogeneity() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(0.1, 10.0);
  auto pool = symbol_pool();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto& a = pool[i % pool.size()];
    auto x = rand_point(rng, 0.0, 1.0);
    auto xi = rand_point(rng, -1.0, 1.0);
    double l = lam(rng);
    std::array<double, 3> lxi{l * xi[0], l * xi[1], l * xi[2]};
    cplx ref = std::pow(l, a.degree()) * a.evaluate(x, xi);
    worst = std::max(worst, std::abs(a.evaluate(x, lxi) - ref) / std::abs(ref));
  }
  return verdict(worst <= 1e-10, "max relative deviation " + fmt(worst) + " over 100 samples (tol 1e-10)");
}

CheckResult check_leibniz() {
  auto pool = symbol_pool();
  int failures = 0, cases = 0;
  for (const auto& a : pool) {
    for (const auto& b : pool) {
      for (int axis = 0; axis < 2; ++axis) {
        failures += !d_xi(a * b, axis).approx_equal(d_xi(a, axis) * b + a * d_xi(b, axis), 1e-14);
        failures += !d_x(a * b, axis).approx_equal(d_x(a, axis) * b + a * d_x(b, axis), 1e-14);
        cases += 2;
      }
    }
  }
  return verdict(failures == 0, std::to_string(cases - failures) + "/" + std::to_string(cases) +
                                    " symbolic identities hold (tol 1e-14)");
}

CheckResult check_sphere_vanishing() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  int cases = 0;
  double worst = 0.0;
  for (int n : {2, 3}) {
    for (int order = 1; order <= 3; ++order) {
      for (int rep = 0; rep < 4; ++rep) {
        Index3 alpha{0, 0, 0};
        for (int k = 0; k < order; ++k) alpha[pick(rng) % n] += 1;
        double deg = -n + order;
        TorusSeries g = TorusSeries::constant(n, coef(rng)) + TorusSeries::cosine(n, {1, 0, 0}, coef(rng));
        HomogeneousSymbol b = HomogeneousSymbol::radial(n, deg, g);
        Index3 beta{pick(rng), pick(rng), n == 3 ? pick(rng) : 0};
        b += HomogeneousSymbol::monomial(n, beta, deg - abs_index(beta), TorusSeries::constant(n, coef(rng)));
        worst = std::max(worst, std::abs(sphere_torus_integral(d_xi(b, alpha))));
        ++cases;
      }
    }
  }
  return verdict(worst <= 1e-10 && cases >= 20,
                 std::to_string(cases) + " randomized cases, max |integral| " + fmt(worst) + " (tol 1e-10)");
}

CheckResult check_moment_table() {
  double worst = 0.0;
  for (int n : {2, 3}) {
    SphereGrid grid(n, n == 2 ? 32 : 12, 1);
    for (int a = 0; a <= 8; ++a)
      for (int b = 0; a + b <= 8; ++b)
        for (int c = 0; a + b + c <= 8; ++c) {
          if (n == 2 && c) continue;
          double q = 0.0;
          for (size_t i = 0; i < grid.nodes().size(); ++i) {
            const auto& w = grid.nodes()[i];
            q += grid.weights()[i] * std::pow(w[0], a) * std::pow(w[1], b) * std::pow(w[2], c);
          }
          worst = std::max(worst, std::abs(q - sphere_moment({a, b, c}, n)));
        }
  }
  return verdict(worst <= 1e-10, "sphere moments up to order 8 vs quadrature, max error " + fmt(worst));
}

CheckResult check_mellin_reduction() {
  double worst = 0.0;
  int cases = 0;
  for (const TestFunction& f : {TestFunction::bump_on(1.0, 2.0), TestFunction::bump_on(0.3, 5.0)}) {
    for (cplx s : {cplx(3.5, 0.0), cplx(1.2, 0.7), cplx(-0.4, 0.0)}) {
      for (int r : {1, 2, 3}) {
        cplx lhs = mellin_moment(f, s, r);
        cplx fac = 1.0;
        for (int k = 1; k <= r; ++k) fac *= (s - double(k));
        cplx rhs = (r % 2 ? -1.0 : 1.0) * fac * mellin_moment(f, s - double(r), 0);
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        ++cases;
      }
    }
  }
  return verdict(worst <= 1e-10, std::to_string(cases) + " cases of M[f^(r), s] = (-1)^r (s-1)..(s-r) M[f, s-r], " +
                                     "max relative error " + fmt(worst) + " (tol 1e-10)");
}

CheckResult check_composition_matrices() {
  TorusSeries c1 = TorusSeries::cosine(2, {1, 0, 0}, 1.0) + one();
  TorusSeries s2 = TorusSeries::sine(2, {0, 1, 0}, 1.0);
  HomogeneousSymbol a = mono(2, 0, 0, c1) + mono(1, 1, 0, s2);
  HomogeneousSymbol b = mono(0, 1, 0, s2) + mono(1, 0, 0, c1);
  PolyHomogeneousSymbol ab = compose_expansion(single(a), single(b), 4);
  const int K = 8;
  auto modes = fourier_modes(2, K);
  Eigen::MatrixXcd prod = operator_matrix(single(a), modes) * operator_matrix(single(b), modes);
  Eigen::MatrixXcd Mab = operator_matrix(ab, modes);
  auto idx = interior(modes, K, 2);
  double scale = max_abs_on(Mab, idx);
  Eigen::MatrixXcd diff = prod - Mab;
  double err = max_abs_on(diff, idx) / scale;
  return verdict(err <= 1e-10, "Op(a)Op(b) vs Op(a#b) on " + std::to_string(idx.size()) +
                                   " interior modes, max relative entry error " + fmt(err) + " (tol 1e-10)");
}

CheckResult check_adjoint_matrices() {
  TorusSeries c1 = TorusSeries::cosine(2, {1, 0, 0}, 1.0) + one();
  TorusSeries s2 = TorusSeries::sine(2, {0, 1, 0}, cplx{0.5, 0.25});
  PolyHomogeneousSymbol a(2, 2.0);
  a.push_back(mono(2, 0, 0, c1) + mono(0, 2, 0, s2), CutoffSpec{0.0});
  a.push_back(mono(1, 0, 0, s2) + mono(0, 1, 0, c1), CutoffSpec{0.0});
  PolyHomogeneousSymbol as = adjoint_expansion(a, 3);
  const int K = 8;
  auto modes = fourier_modes(2, K);
  Eigen::MatrixXcd Ma = operator_matrix(a, modes);
  Eigen::MatrixXcd Mas = operator_matrix(as, modes);
  auto idx = interior(modes, K, 1);
  Eigen::MatrixXcd diff = Mas - Ma.adjoint();
  double err = max_abs_on(diff, idx) / max_abs_on(Mas, idx);
  return verdict(err <= 1e-8, "Op(a*) vs Op(a)^* on " + std::to_string(idx.size()) +
                                  " interior modes, max relative entry error " + fmt(err) + " (tol 1e-8)");
}

CheckResult check_parametrix_residual() {
  TorusSeries c = TorusSeries::cosine(2, {1, 0, 0}, 0.5) + one();
  TorusSeries s = TorusSeries::sine(2, {0, 1, 0}, 0.3);
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(mono(2, 0, 0, c) + mono(0, 2, 0) + mono(1, 1, 0, s), CutoffSpec{0.0});
  l.push_back(mono(1, 0, 0, TorusSeries::cosine(2, {0, 1, 0}, 0.7)), CutoffSpec{0.0});
  EllipticOperatorSpec L(l, 0.2);
  auto qs = build_parametrix(L, 3);
  ParametrixReport rep = verify_parametrix(L, qs, 3, 100);
  double sym = 0.0;
  for (double r : rep.symbolic_residual) sym = std::max(sym, r);
  return verdict(rep.ok && sym <= 1e-12 && rep.numeric_residual <= 1e-10,
                 "J = 3, symbolic residual " + fmt(sym) + ", numeric residual " + fmt(rep.numeric_residual) +
                     " at " + std::to_string(rep.samples) + " samples (tol 1e-10)");
}

CheckResult check_finite_part_split() {
  double worst = 0.0;
  for (double m : {-0.5, -1.5, 0.5}) {
    PolyHomogeneousSymbol A = sample_symbol(m);
    cplx base = canonical_trace(A, 1.0);
    for (double split : {1.5, 3.0, 10.0}) worst = std::max(worst, std::abs(canonical_trace(A, split) - base));
  }
  return verdict(worst <= 1e-10, "canonical trace over split radii {1, 1.5, 3, 10}, max change " + fmt(worst) +
                                     " (tol 1e-10)");
}

}  // namespace

SuiteResult run_selftest(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "selftest";
  res.budget = 300.0;
  auto t0 = Clock::now();
  std::string injected;
  if (opt.perturb_seed) injected = perturb_sphere_moment_table(*opt.perturb_seed);
  try {
    run_check(res, "homogeneity", check_homogeneity);
    run_check(res, "Leibniz rule", check_leibniz);
    run_check(res, "sphere-vanishing", check_sphere_vanishing);
    run_check(res, "sphere moment table", check_moment_table);
    run_check(res, "Mellin reduction", check_mellin_reduction);
    run_check(res, "composition on truncated matrices", check_composition_matrices);
    run_check(res, "adjoint on truncated matrices", check_adjoint_matrices);
    run_check(res, "parametrix residual", check_parametrix_residual);
    run_check(res, "finite-part split independence", check_finite_part_split);
  } catch (...) {
    reset_sphere_moment_table();
    throw;
  }
  if (opt.perturb_seed) {
    reset_sphere_moment_table();
    res.title += " (perturbed: " + injected + ")";
  }
  res.seconds = since(t0);
  return res;
}

// ------------------------------------------------------------------- HS check

SuiteResult run_hs_check(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "hs-check";
  res.budget = 120.0;
  auto t0 = Clock::now();
  const TestFunction f = TestFunction::bump_on(2.0, 9.0);

  run_check(res, "matrix function vs eigendecomposition", [&] {
    const int n = 50;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> spec(1.0, 10.0);
    Eigen::MatrixXcd G(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) G(i, k) = cplx{nd(rng), nd(rng)};
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(G);
    Eigen::MatrixXcd U = qr.householderQ();
    Eigen::VectorXd lam(n);
    for (int i = 0; i < n; ++i) lam(i) = spec(rng);
    Eigen::MatrixXcd H = U * lam.cast<cplx>().asDiagonal() * U.adjoint();
    H = 0.5 * (H + H.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    Eigen::VectorXcd fv(n);
    for (int i = 0; i < n; ++i) fv(i) = f(es.eigenvalues()(i));
    Eigen::MatrixXcd want = es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
    HSOptions hs;
    hs.threads = opt.threads;
    HSMatrixResult got = hs_matrix_function(H, f, hs);
    double err = (got.value - want).norm() / want.norm();
    return verdict(err <= 1e-6, "50x50 Hermitian, spectrum in [1, 10]: relative Frobenius error " + fmt(err) + " with " +
                                    std::to_string(got.nodes) + " nodes (tol 1e-6)");
  });

  run_check(res, "Cauchy-Pompeiu identities j = 0, 1, 2", [&] {
    HSOptions hs;
    hs.tol = 1e-6;
    hs.j_max = 2;
    hs.threads = opt.threads;
    AlmostAnalyticExtension F(f);
    HSQuadrature q = hs_quadrature(F, hs);
    double worst[3] = {0, 0, 0};
    for (int j = 0; j <= 2; ++j) {
      double fact = std::tgamma(j + 1.0);
      for (int i = 0; i <= 36; ++i) {
        double lam = 1.0 + 0.25 * i;
        double exact = (j % 2 ? -1.0 : 1.0) * f.derivative(j, lam) / fact;
        worst[j] = std::max(worst[j], std::abs(hs_scalar(q, lam, j) - exact));
      }
    }
    double w = std::max({worst[0], worst[1], worst[2]});
    return verdict(w <= 1e-6, "max error over lambda in [1, 10]: j=0 " + fmt(worst[0]) + ", j=1 " + fmt(worst[1]) +
                                  ", j=2 " + fmt(worst[2]) + " (tol 1e-6)");
  });

  run_check(res, "dbar vanishing slopes M = 1..4", [&] {
    AlmostAnalyticExtension F(f);
    std::vector<double> ys;
    for (double y = 1.0; y > 1e-3; y *= 0.8) ys.push_back(y);
    auto prof = dbar_profile(F, ys, 200);
    // keep the range above the rounding floor
    double peak = *std::max_element(prof.begin(), prof.end());
    size_t last = 0;
    while (last + 1 < prof.size() && prof[last + 1] > 1e-13 * peak) ++last;
    std::vector<double> slope;  // local slope on [ys[i+1], ys[i]]
    for (size_t i = 0; i < last; ++i) slope.push_back(std::log(prof[i] / prof[i + 1]) / std::log(ys[i] / ys[i + 1]));
    std::ostringstream d;
    bool ok = slope.size() >= 4;
    for (int M = 1; M <= 4; ++M) {
      // largest y below which every measured local slope is at least 0.85 M
      size_t i0 = slope.size();
      while (i0 > 0 && slope[i0 - 1] >= 0.85 * M) --i0;
      bool okM = slope.size() - i0 >= 2;
      ok = ok && okM;
      d << "M=" << M << ": slope >= " << fmt(0.85 * M, 3) << " for y <= " << (okM ? fmt(ys[i0], 3) : "none") << "; ";
    }
    d << "slope at the floor " << fmt(slope.empty() ? 0.0 : slope.back(), 3) << " (y = " << fmt(ys[last], 3) << ")";
    return verdict(ok, d.str());
  });

  res.seconds = since(t0);
  return res;
}

// ------------------------------------------------------------------ criteria

namespace {

SuiteResult criterion1(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "criterion 1 (residue limit)";
  res.budget = 30.0;
  auto t0 = Clock::now();
  run_check(res, "constant fit vs res(A)/m0 int eta du/u", [&] {
    EllipticOperatorSpec L = laplacian();
    PolyHomogeneousSymbol A = single(radial(-2.0), CutoffSpec{1.0});
    TestFunction eta = TestFunction::bump_on(1.0, 2.0);
    OracleSeries s = multiplier_series(A, L, eta, geometric_t_grid(1e-5, 1e-3, 24), opt.threads);
    PowerFit fit = fit_powers(s, {}, true);
    cplx c = fit.coefficient_at(0.0);
    cplx res_a = residue_density_integrated(A);
    cplx want = res_a / L.order() * mellin_moment(eta, 0.0, 0);
    double rel = std::abs(c - want) / std::abs(want);
    double rel_no_m0 = std::abs(c - res_a * mellin_moment(eta, 0.0, 0)) / std::abs(want);
    return verdict(rel <= 5e-3 && fit.usable, "fitted " + format_complex(c) + ", predicted " + format_complex(want) +
                                                  ", relative error " + fmt(rel) + " (tol 5e-3); without 1/m0 " +
                                                  fmt(rel_no_m0));
  });
  res.seconds = since(t0);
  return res;
}

SuiteResult criterion2(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "criterion 2 (full expansion)";
  res.budget = 60.0;
  auto t0 = Clock::now();
  run_check(res, "fitted ladder coefficients and residual slope", [&] {
    EllipticOperatorSpec L = laplacian();
    TorusSeries c1 = one() + TorusSeries::cosine(2, {1, 0, 0}, 1.0);
    PolyHomogeneousSymbol A(2, -1.0);
    A.push_back(radial(-1.0, c1), CutoffSpec{1.0});
    A.push_back(radial(-2.0, TorusSeries::constant(2, 0.5) + TorusSeries::cosine(2, {1, 0, 0}, 0.3)) +
                    mono(1, 1, -4.0, TorusSeries::cosine(2, {0, 1, 0}, 1.0)),
                CutoffSpec{1.0});
    TestFunction eta = TestFunction::bump_on(1.0, 2.0);
    ExpansionPrediction pred = predict_expansion_res(A, L, eta, 3, opt.threads);
    if (std::abs(pred.coefficient_at(0.5)) == 0.0) pred.add(0.5, 0.0, "ladder j'=2");
    OracleSeries s = multiplier_series(A, L, eta, geometric_t_grid(1e-5, 1e-3, 24), opt.threads);
    VerifyOptions vo;
    vo.rel_tol = 0.01;
    vo.next_exponent = 1.0;
    VerificationReport rep = verify_expansion(pred, s, vo);
    std::ostringstream d;
    for (const auto& c : rep.coefficients) {
      d << "t^" << c.exponent << " " << (c.judged ? "rel err " + fmt(c.rel_error) : "|c| < 1e-8, unjudged") << "; ";
    }
    d << (rep.residual_at_floor ? "residual at rounding level" : "residual slope " + fmt(rep.residual_slope)) +
             " (need >= 0.95)";
    return verdict(rep.pass, d.str());
  });
  res.seconds = since(t0);
  return res;
}

SuiteResult criterion3(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "criterion 3 (variable-coefficient corrections)";
  res.budget = 600.0;
  auto t0 = Clock::now();
  EllipticOperatorSpec L = perturbed_laplacian(0.1);
  PolyHomogeneousSymbol A = single(radial(0.0), CutoffSpec{1.0});
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  MatrixOracleOptions mo;
  mo.K = 32;
  std::optional<MatrixOracle> oracle;
  std::vector<double> ts;
  OracleSeries series;
  run_check(res, "K = 32 matrix oracle", [&] {
    oracle.emplace(A, L, mo);
    double t_min = 1.0001 * mo.safety * 2.0 / oracle->boundary_min();
    ts = geometric_t_grid(t_min, 10.0 * t_min, 12);
    series = oracle->series(eta, ts);
    return verdict(true, std::to_string(oracle->modes()) + " modes in " + std::to_string(oracle->blocks()) +
                             " blocks, symmetry defect " + fmt(oracle->symmetry_defect()) + ", t in [" + fmt(ts.back()) +
                             ", " + fmt(ts.front()) + "]");
  });
  if (series.size() == 0) {
    res.seconds = since(t0);
    return res;
  }
  auto residual = [&](const ExpansionPrediction& p) {
    std::vector<double> r;
    for (const auto& s : series.samples()) r.push_back(std::abs(s.value - p.evaluate(s.t)));
    return r;
  };
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  ExpansionPrediction lead = predict_expansion_res(A, L, eta, 1, opt.threads);
  ExpansionPrediction corr = predict_expansion_res(A, L, eta, 2, opt.threads);
  ExpansionPrediction second = predict_expansion_res(A, L, eta, 3, opt.threads);
  const double e1 = -(0.0 + 2.0 - 1.0) / L.order();
  std::vector<double> r_lead = residual(lead), r_corr = residual(corr), r_second = residual(second);
  double slope = loglog_slope(ts, r_lead);
  run_check(res, "leading-term residual slope", [&] {
    std::ostringstream d;
    d << "slope " << fmt(slope) << ", j=1 exponent " << e1 << " (need within 10%); predicted j=1 coefficient "
      << format_complex(corr.coefficient_at(e1)) << "; slope of the j<=1 residual "
      << fmt(loglog_slope(ts, r_corr)) << ", j=2 exponent 0";
    return verdict(std::abs(slope - e1) <= 0.1 * std::abs(e1), d.str());
  });
  run_check(res, "j <= 1 corrections reduce the residual", [&] {
    double ratio = norm(r_lead) / norm(r_corr);
    std::ostringstream d;
    d << "residual norm ratio " << fmt(ratio) << " (need >= 5); with j <= 2 terms the ratio is "
      << fmt(norm(r_lead) / norm(r_second));
    return verdict(ratio >= 5.0, d.str());
  });
  res.seconds = since(t0);
  return res;
}

SuiteResult criterion5(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "criterion 5 (parametrix)";
  res.budget = 30.0;
  auto t0 = Clock::now();
  EllipticOperatorSpec L = perturbed_laplacian(0.1);
  std::vector<ResolventSymbol> qs;
  run_check(res, "residual at 100 random (x, xi, z)", [&] {
    qs = build_parametrix(L, 3, opt.threads);
    ParametrixReport rep = verify_parametrix(L, qs, 3, 100);
    double sym = 0.0;
    for (double r : rep.symbolic_residual) sym = std::max(sym, r);
    return verdict(rep.ok && rep.numeric_residual <= 1e-10,
                   "J = 3, numeric residual " + fmt(rep.numeric_residual) + " (tol 1e-10), symbolic " + fmt(sym));
  });
  auto first_order_ok = [](const EllipticOperatorSpec& op, const ResolventSymbol& q1, double& dev) {
    const HomogeneousSymbol& l2 = op.principal();
    HomogeneousSymbol l1 = op.symbol().homogeneous(1);
    HomogeneousSymbol d3(op.dim(), l2.degree() * 2.0 - 1.0);
    for (int p = 0; p < op.dim(); ++p) d3 += d_xi(l2, p) * d_x(l2, p);
    d3 *= 1.0 / kTwoPiI;
    dev = std::max((q1.coefficient(2) + l1).max_abs_coefficient(), (q1.coefficient(3) - d3).max_abs_coefficient());
    for (const auto& [p, d] : q1.powers()) {
      if (p != 2 && p != 3) dev = std::max(dev, d.max_abs_coefficient());
    }
    return dev <= 1e-13;
  };
  run_check(res, "q_1 = -l_1 (l - z)^-2 + (2 pi i)^-1 sum d_xi l d_x l (l - z)^-3", [&] {
    if (qs.empty()) qs = build_parametrix(L, 3, opt.threads);
    double dev = 0.0, dev2 = 0.0;
    bool ok = first_order_ok(L, qs[1], dev);
    bool ok2 = first_order_ok(variable_operator(), build_parametrix(variable_operator(), 1)[1], dev2);
    return verdict(ok && ok2, "max coefficient deviation " + fmt(dev) + " (criterion operator), " + fmt(dev2) +
                                  " (x-dependent principal part)");
  });
  res.seconds = since(t0);
  return res;
}

SuiteResult criterion6(const SuiteOptions& opt) {
  SuiteResult res;
  res.title = "criterion 6 (canonical trace)";
  res.budget = 180.0;
  auto t0 = Clock::now();

  run_check(res, "(a) canonical = smoothing trace for Re m < -n", [&] {
    double worst = 0.0;
    for (double m : {-2.5, -3.0, -4.2}) {
      PolyHomogeneousSymbol A = sample_symbol(m);
      cplx a = canonical_trace(A), b = smoothing_trace(A);
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
    return verdict(worst <= 1e-10, "m in {-2.5, -3, -4.2}, max relative difference " + fmt(worst) + " (tol 1e-10)");
  });

  run_check(res, "(b) finite part independent of the cutoff split", [&] {
    double worst = 0.0;
    for (double m : {-1.5, -0.5, 0.7}) {
      PolyHomogeneousSymbol A = sample_symbol(m);
      cplx base = canonical_trace(A, 1.0);
      for (double split : {2.0, 4.0}) worst = std::max(worst, std::abs(canonical_trace(A, split) - base));
    }
    return verdict(worst <= 1e-10, "split radius 1 -> 2 -> 4 (halved cutoff radii), max change " + fmt(worst) +
                                       " (tol 1e-10)");
  });

  run_check(res, "(c) E_t extrapolation matches the finite part", [&] {
    EllipticOperatorSpec L = variable_operator();
    TestFunction chi = TestFunction::cutoff(1.0, 2.0);
    std::ostringstream d;
    bool ok = true;
    for (double m : {-1.5, -0.5}) {
      PolyHomogeneousSymbol A = sample_symbol(m);
      std::vector<double> exps;
      for (size_t i = 0; i < A.size(); ++i) {
        double sigma = (m - double(i) + 2.0) / L.order();
        if (sigma < 0.0) exps.push_back(-sigma);
      }
      auto ts = geometric_t_grid(1e-4, 1e-2, 12);
      auto vals = parallel_map(ts.size(), opt.threads, [&](size_t i) { return tr_integral_Et(A, L, chi, ts[i]); });
      OracleSeries s;
      for (size_t i = 0; i < ts.size(); ++i) s.add({ts[i], vals[i]});
      PowerFit fit = fit_powers(s, exps, true);
      cplx tr = canonical_trace(A);
      double err = std::abs(fit.coefficient_at(0.0) - tr);
      ok = ok && err <= 1e-4 && fit.usable;
      d << "m=" << m << ": |E_0 - TR| " << fmt(err) << "; ";
    }
    d << "(tol 1e-4)";
    return verdict(ok, d.str());
  });

  run_check(res, "(d) lattice trace converges to tr(A) for m < -n", [&] {
    EllipticOperatorSpec L = laplacian();
    TestFunction chi = TestFunction::cutoff(1.0, 2.0);
    const double m = -3.0;
    PolyHomogeneousSymbol A = single(radial(m), CutoffSpec{1.0});
    auto ts = geometric_t_grid(1e-5, 1e-2, 19);
    OracleSeries s = multiplier_series(A, L, chi, ts, opt.threads);
    std::vector<double> tt, dd;
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      tt.push_back(s.samples()[i].t);
      dd.push_back(std::abs(s.samples()[i].value - s.samples()[i + 1].value));
    }
    double rate = loglog_slope(tt, dd);
    double eps0 = 0.4 * (-m - 2.0);
    PowerFit fit = fit_powers(s, {(-m - 2.0) / L.order()}, true);
    return verdict(rate >= eps0, "m = -3: measured rate " + fmt(rate) + " (need >= " + fmt(eps0) +
                                     "), extrapolated tr(A) " + format_complex(fit.coefficient_at(0.0)));
  });

  run_check(res, "(e) periodization offset is t-independent", [&] {
    EllipticOperatorSpec L = laplacian();
    TestFunction chi = TestFunction::cutoff(1.0, 2.0);
    std::ostringstream d;
    bool ok = true;
    for (double m : {-0.5, -1.5}) {
      PolyHomogeneousSymbol A(2, m);
      A.push_back(radial(m), CutoffSpec{1.0});
      A.push_back(radial(m - 1.0, TorusSeries::constant(2, 0.5)), CutoffSpec{1.0});
      ExpansionPrediction pred = predict_expansion_TR(A, L, chi, 2, opt.threads);
      std::vector<double> exps;
      for (const auto& term : pred.terms()) exps.push_back(term.exponent.real());
      cplx tr = canonical_trace(A);
      cplx off[2];
      int w = 0;
      for (auto [lo, hi] : {std::pair{3e-6, 1.5e-5}, std::pair{2e-5, 1e-4}}) {
        OracleSeries s = multiplier_series(A, L, chi, geometric_t_grid(lo, hi, 12), opt.threads);
        off[w++] = fit_powers(s, exps, true).coefficient_at(0.0) - tr;
      }
      double diff = std::abs(off[0] - off[1]);
      ok = ok && diff <= 1e-4;
      d << "m=" << m << ": offset " << format_complex(off[0]) << ", window difference " << fmt(diff) << "; ";
    }
    d << "(tol 1e-4)";
    return verdict(ok, d.str());
  });

  res.seconds = since(t0);
  return res;
}

}  // namespace

SuiteResult run_criterion(int id, const SuiteOptions& opt) {
  switch (id) {
    case 1: return criterion1(opt);
    case 2: return criterion2(opt);
    case 3: return criterion3(opt);
    case 4: {
      SuiteResult r = run_hs_check(opt);
      r.title = "criterion 4 (Helffer-Sjostrand engine)";
      return r;
    }
    case 5: return criterion5(opt);
    case 6: return criterion6(opt);
    case 7: {
      SuiteResult r = run_selftest(opt);
      r.title = "criterion 7 (invariant suites)";
      return r;
    }
    default: throw DomainError("criterion id must be 1.." + std::to_string(kCriterionCount));
  }
}

}  // namespace psitrace
