#include <algorithm>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "psitrace/oracle.hpp"

using namespace psitrace;
using th::mono;
using th::one;

namespace {

HomogeneousSymbol radial(cplx s, const TorusSeries& g = one()) { return HomogeneousSymbol::radial(2, s, g); }

EllipticOperatorSpec laplacian() {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(th::lap(), CutoffSpec{0.0});
  return EllipticOperatorSpec(l, 0.5);
}

// |xi|^2 + eps cos(2 pi x1) |xi|
EllipticOperatorSpec perturbed(double eps) {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(th::lap(), CutoffSpec{0.0});
  l.push_back(radial(1.0, TorusSeries::cosine(2, {1, 0, 0}, eps)), CutoffSpec{1.0});
  return EllipticOperatorSpec(l, 0.5);
}

PolyHomogeneousSymbol psi_symbol(double m = 0.0) {
  PolyHomogeneousSymbol A(2, m);
  A.push_back(radial(m), CutoffSpec{1.0});
  return A;
}

PolyHomogeneousSymbol identity_symbol() {
  PolyHomogeneousSymbol A(2, 0.0);
  A.push_back(HomogeneousSymbol::constant(2, 1.0), CutoffSpec{0.0});
  return A;
}

}  // namespace

TEST_CASE("lattice trace: direct enumeration") {
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  const double t = 1.0 / 400.0;
  OracleSample s = multiplier_sample(psi_symbol(), laplacian(), eta, t);
  cplx want{};
  long count = 0;
  CutoffSpec psi{1.0};
  for (int a = -40; a <= 40; ++a)
    for (int b = -40; b <= 40; ++b) {
      int n2 = a * a + b * b;
      if (n2 < 400 || n2 > 800) continue;
      double v = eta(t * n2);
      if (v == 0.0) continue;
      want += psi.value(std::sqrt(double(n2))) * v;
      ++count;
    }
  CHECK(std::abs(s.value - want) <= 1e-12 * std::abs(want));
  CHECK(s.modes == count);
  CHECK(s.value.real() > 0.0);

  CHECK(multiplier_trace(psi_symbol(), laplacian(), TestFunction(), t) == cplx{});
  CHECK(multiplier_trace(psi_symbol(), laplacian(), eta, 10.0) == cplx{});
  CHECK_THROWS_AS(multiplier_trace(psi_symbol(), perturbed(0.1), eta, t), DomainError);
  CHECK_THROWS_AS(multiplier_trace(psi_symbol(), laplacian(), TestFunction::exp(-1.0), t), DomainError);
}

TEST_CASE("lattice trace: deterministic and order independent of threading") {
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  auto ts = geometric_t_grid(1e-3, 1e-2, 6);
  OracleSeries a = multiplier_series(psi_symbol(), laplacian(), eta, ts, 1);
  OracleSeries b = multiplier_series(psi_symbol(), laplacian(), eta, ts, 3);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.samples()[i].value == b.samples()[i].value);
}

TEST_CASE("oracle series and t grids") {
  auto ts = default_t_grid(1e-2);
  CHECK(ts.size() == 25);
  CHECK(ts.front() == doctest::Approx(1e-2));
  CHECK(ts.back() == doctest::Approx(1e-4));
  for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
  CHECK_THROWS_AS(geometric_t_grid(1.0, 0.5, 4), DomainError);

  OracleSeries s;
  s.add({0.5, 1.0});
  CHECK_THROWS_AS(s.add({0.5, 2.0}), DomainError);
  s.add({0.25, cplx(2.0, -1.0)});
  std::string csv = s.to_csv();
  CHECK(csv.rfind("t,re,im,modes,margin,symmetry_defect\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("matrix oracle: multiplier and identity consistency") {
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  MatrixOracleOptions opt;
  opt.K = 16;
  MatrixOracle M(psi_symbol(), laplacian(), opt);
  CHECK(M.symmetry_defect() == 0.0);
  CHECK(M.blocks() == size_t(M.modes()));
  CHECK(M.boundary_min() == doctest::Approx(256.0));
  for (double t : {1.0 / 40.0, 1.0 / 60.0}) {
    OracleSample s = M.sample(eta, t);
    cplx want = multiplier_trace(psi_symbol(), laplacian(), eta, t);
    CHECK(std::abs(s.value - want) <= 1e-13 * std::abs(want));
    CHECK(s.margin >= 2.0);
  }
  CHECK_THROWS_WITH_AS(M.sample(eta, 1e-3), doctest::Contains("margin"), DomainError);

  // identity A: sum of f over the spectrum
  opt.K = 10;
  MatrixOracle I(identity_symbol(), perturbed(0.1), opt);
  CHECK(I.blocks() == 21);
  const double t = 0.06;
  double want = 0.0;
  for (long i = 0; i < I.eigenvalues().size(); ++i) want += eta(t * I.eigenvalues()(i));
  CHECK(std::abs(I.sample(eta, t).value - want) <= 1e-12 * want);
  CHECK(want > 0.0);
}

TEST_CASE("matrix oracle: permutation invariance") {
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  MatrixOracleOptions opt;
  opt.K = 8;
  PolyHomogeneousSymbol A(2, 0.0);
  A.push_back(radial(0.0, one() + TorusSeries::cosine(2, {1, 0, 0}, 0.3)), CutoffSpec{1.0});
  auto modes = fourier_modes(2, opt.K);
  std::mt19937_64 rng(11);
  std::shuffle(modes.begin(), modes.end(), rng);
  const double t = 0.1;
  cplx a = MatrixOracle(A, perturbed(0.1), opt).sample(eta, t).value;
  cplx b = MatrixOracle(A, perturbed(0.1), opt, &modes).sample(eta, t).value;
  CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
  CHECK(std::abs(a) > 0.0);
}

TEST_CASE("matrix oracle: truncation converges in K") {
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  MatrixOracleOptions opt;
  opt.K = 32;
  MatrixOracle M32(psi_symbol(), perturbed(0.1), opt);
  opt.K = 64;
  MatrixOracle M64(psi_symbol(), perturbed(0.1), opt);
  CHECK(M32.symmetry_defect() > 0.0);
  CHECK(M32.symmetry_defect() < 1e-3);
  for (double t : {0.005, 0.01}) {
    cplx a = M32.sample(eta, t).value, b = M64.sample(eta, t).value;
    CHECK(std::abs(a - b) < 1e-8);
  }
  opt.defect_tol = 1e-12;
  opt.K = 8;
  CHECK_THROWS_WITH_AS(MatrixOracle(psi_symbol(), perturbed(0.1), opt), doctest::Contains("defect"), DomainError);
}

TEST_CASE("operator matrix entries") {
  PolyHomogeneousSymbol s(2, 1.0);
  s.push_back(radial(1.0, TorusSeries::cosine(2, {1, 0, 0}, 0.5)), CutoffSpec{1.0});
  auto modes = fourier_modes(2, 2);
  Eigen::MatrixXcd M = operator_matrix(s, modes);
  auto at = [&](Index3 k) { return long(std::find(modes.begin(), modes.end(), k) - modes.begin()); };
  // cos has Fourier coefficients 1/2 at +-1: entry [k, k'] = 0.25 |k'| for k - k' = +-e1
  CHECK(std::abs(M(at({1, 1, 0}), at({0, 1, 0})) - 0.25) <= 1e-15);
  CHECK(std::abs(M(at({-1, 1, 0}), at({0, 1, 0})) - 0.25) <= 1e-15);
  CHECK(std::abs(M(at({1, 2, 0}), at({0, 1, 0}))) == 0.0);
  CHECK(std::abs(M(at({0, 0, 0}), at({1, 0, 0})) - 0.25) <= 1e-15);
  CHECK(std::abs(M(at({0, 0, 0}), at({0, 0, 0}))) == 0.0);
}

TEST_CASE("power fit") {
  OracleSeries s;
  for (double t : geometric_t_grid(1e-3, 1e-1, 12)) s.add({t, 3.0 / t + 5.0});
  PowerFit fit = fit_powers(s, {-1.0}, true);
  REQUIRE(fit.exponents.size() == 2);
  CHECK(std::abs(fit.coefficient_at(-1.0) - 3.0) <= 1e-10);
  CHECK(std::abs(fit.coefficient_at(0.0) - 5.0) <= 1e-10);
  CHECK(fit.usable);
  CHECK(fit.residual <= 1e-12);

  // merged exponents
  PowerFit merged = fit_powers(s, {-1.0, -1.0 + 1e-12, 0.0}, false);
  CHECK(merged.exponents.size() == 2);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1e-12);
  OracleSeries noise;
  for (double t : geometric_t_grid(1e-3, 1e-1, 12)) noise.add({t, cplx(g(rng), g(rng))});
  PowerFit nf = fit_powers(noise, {-1.0}, true);
  for (cplx c : nf.coefficients) CHECK(std::abs(c) <= 1e-10);

  PowerFit bad = fit_powers(s, {-1.0, -1.0 + 1e-8}, true);
  CHECK_FALSE(bad.usable);
  CHECK(bad.condition > 1e8);

  OracleSeries few;
  few.add({0.5, 1.0});
  few.add({0.25, 1.0});
  few.add({0.125, 1.0});
  CHECK_THROWS_AS(fit_powers(few, {-1.0}, true), DomainError);

  std::vector<double> tt{1, 2, 4, 8}, yy{1, 0.25, 1.0 / 16, 1.0 / 64};
  CHECK(loglog_slope(tt, yy) == doctest::Approx(-2.0));
}

TEST_CASE("verification against lattice sums") {
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  PolyHomogeneousSymbol A = psi_symbol();
  EllipticOperatorSpec L = laplacian();
  ExpansionPrediction pred = predict_expansion_res(A, L, eta, 3);
  OracleSeries s = multiplier_series(A, L, eta, geometric_t_grid(2e-5, 2e-4, 12));
  PowerFit lead = fit_powers(s, {-1.0}, false);
  cplx c = pred.coefficient_at(-1.0);
  CHECK(std::abs(lead.coefficient_at(-1.0) - c) <= 5e-3 * std::abs(c));

  VerifyOptions opt;
  opt.next_exponent = 1.0;
  VerificationReport rep = verify_expansion(pred, s, opt);
  CHECK(rep.pass);
  CHECK(rep.to_text().find("PASS") != std::string::npos);
  std::string csv = rep.residual_csv(s, pred);
  CHECK(csv.rfind("t,oracle_re,oracle_im,prediction_re,prediction_im,abs_residual\n", 0) == 0);

  ExpansionPrediction wrong;
  for (const auto& term : pred.terms()) wrong.add(term.exponent, 2.0 * term.coefficient, term.provenance);
  VerificationReport bad = verify_expansion(wrong, s, opt);
  CHECK_FALSE(bad.pass);
  CHECK(bad.to_text().find("FAIL") != std::string::npos);
}

TEST_CASE("lattice minus integral decays faster than any power") {
  // smooth eta: the Poisson-summation error beats every power of t
  TestFunction eta = TestFunction::bump_on(1.0, 2.0);
  PolyHomogeneousSymbol A = psi_symbol();
  EllipticOperatorSpec L = laplacian();
  ExpansionPrediction pred = predict_expansion_res(A, L, eta, 4);
  std::vector<double> ts, err;
  for (double t = 0.08; t > 1e-5; t /= 2) {
    ts.push_back(t);
    err.push_back(std::abs(multiplier_trace(A, L, eta, t) - pred.evaluate(t)) / std::abs(pred.evaluate(t)));
  }
  // the decay accelerates: the envelope slope over small t exceeds that over large t
  const size_t h = ts.size() / 2;
  double coarse = loglog_slope({ts.begin(), ts.begin() + h}, {err.begin(), err.begin() + h});
  double fine = loglog_slope({ts.begin() + h, ts.end()}, {err.begin() + h, err.end()});
  MESSAGE("log-log slope of the lattice error: " << coarse << " (large t), " << fine << " (small t)");
  CHECK(fine > coarse + 0.5);
  CHECK(fine > 2.0);
  CHECK(err.back() < 1e-9);
  CHECK(err.front() > 1e-3);
}
