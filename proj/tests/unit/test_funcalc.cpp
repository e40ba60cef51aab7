#include <chrono>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "helpers.hpp"
#include "psitrace/calculus.hpp"
#include "psitrace/funcalc.hpp"

using namespace psitrace;
using th::mono;
using th::one;

namespace {

EllipticOperatorSpec variable_operator() {
  TorusSeries c = TorusSeries::cosine(2, {1, 0, 0}, 0.5) + one();
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(mono(2, 0, 0, c) + mono(0, 2, 0) + mono(1, 1, 0, TorusSeries::sine(2, {0, 1, 0}, 0.3)));
  l.push_back(mono(0, 1, 0, TorusSeries::cosine(2, {1, 1, 0}, 0.6)));
  l.push_back(HomogeneousSymbol::radial(2, 0.0, TorusSeries::cosine(2, {0, 1, 0}, 0.2) + one()));
  return EllipticOperatorSpec(l, 0.2);
}

}  // namespace

TEST_CASE("functional symbols of f(l) = l reproduce the operator symbol") {
  EllipticOperatorSpec L = variable_operator();
  FunctionalSymbolExpansion fe = fc_symbols(L, 4);
  REQUIRE(fe.orders.size() == 5);
  std::mt19937_64 rng(2);
  for (int s = 0; s < 10; ++s) {
    auto x = th::rand_point(rng, 0, 1);
    double th0 = std::uniform_real_distribution<double>(0, 2 * kPi)(rng);
    std::array<double, 3> xi{std::cos(th0), std::sin(th0), 0};
    auto f = [](int r, double l) { return r == 0 ? l : (r == 1 ? 1.0 : 0.0); };
    for (size_t j = 0; j <= 4; ++j) {
      cplx want = j < L.symbol().size() ? L.symbol().homogeneous(j).evaluate(x, xi) : 0.0;
      CHECK(std::abs(fe.evaluate(j, x, xi, L.principal(), f) - want) <= 1e-12);
    }
  }
}

TEST_CASE("functional symbols of f(l) = l^2 match the composition") {
  EllipticOperatorSpec L = variable_operator();
  FunctionalSymbolExpansion fe = fc_symbols(L, 4);
  PolyHomogeneousSymbol sq = compose_expansion(L.symbol(), L.symbol(), 5);
  std::mt19937_64 rng(4);
  for (int s = 0; s < 10; ++s) {
    auto x = th::rand_point(rng, 0, 1);
    double th0 = std::uniform_real_distribution<double>(0, 2 * kPi)(rng);
    std::array<double, 3> xi{std::cos(th0), std::sin(th0), 0};
    auto f = [](int r, double l) { return r == 0 ? l * l : (r == 1 ? 2 * l : (r == 2 ? 2.0 : 0.0)); };
    for (size_t j = 0; j <= 4; ++j) {
      cplx want = sq.homogeneous(j).evaluate(x, xi);
      CHECK(std::abs(fe.evaluate(j, x, xi, L.principal(), f) - want) <= 1e-11 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("functional symbol terms carry (-1)^r / r!") {
  EllipticOperatorSpec L = variable_operator();
  FunctionalSymbolExpansion fe = fc_symbols(L, 2);
  REQUIRE(fe.orders[0].size() == 1);
  CHECK(fe.orders[0][0].r == 0);
  for (const auto& t : fe.orders[2]) {
    double fact = std::tgamma(t.r + 1.0);
    CHECK(t.scalar == doctest::Approx((t.r % 2 ? -1.0 : 1.0) / fact));
    CHECK(t.d.degree() == cplx{double(2 * t.r - 2)});
  }
}

TEST_CASE("almost analytic extension restricts to f and is almost analytic") {
  TestFunction f = TestFunction::bump_on(2, 9);
  AlmostAnalyticExtension F(f);
  CHECK(F.tail_estimate() <= 1e-12);
  for (double x : {1.0, 2.5, 4.0, 5.5, 8.9, 10.0}) {
    CHECK(std::abs(F.value(x, 0.0) - f(x)) <= 1e-12);
  }
  // dbar f~ vanishes faster than any power as y -> 0
  std::vector<double> ys{0.4, 0.2, 0.1, 0.05};
  auto prof = dbar_profile(F, ys, 200);
  CHECK(prof[3] <= 1e-6 * prof[0]);
  CHECK(prof[3] / std::pow(ys[3], 3) <= prof[2] / std::pow(ys[2], 3));
  // dbar against a finite difference of the extension
  const double h = 1e-5;
  for (auto [x, y] : std::vector<std::pair<double, double>>{{4.0, 0.3}, {6.2, 0.15}, {7.5, 0.8}}) {
    cplx fd = (F.value(x + h, y) - F.value(x - h, y)) / (2 * h) +
              cplx{0, 1} * (F.value(x, y + h) - F.value(x, y - h)) / (2 * h);
    CHECK(std::abs(F.dbar(x, y) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    cplx cfd = (F.compact_value(x + h, y) - F.compact_value(x - h, y)) / (2 * h) +
               cplx{0, 1} * (F.compact_value(x, y + h) - F.compact_value(x, y - h)) / (2 * h);
    CHECK(std::abs(F.compact_dbar(x, y) - cfd) <= 1e-6 * std::max(1.0, std::abs(cfd)));
  }
  CHECK(F.compact_value(F.x_max() + 0.1, 0.1) == cplx{});
  CHECK(F.compact_value(5.0, F.y_max() + 0.01) == cplx{});
  CHECK_THROWS_AS(AlmostAnalyticExtension(f, 2.0), DomainError);
  CHECK_THROWS_AS(AlmostAnalyticExtension(TestFunction::exp(-1.0)), DomainError);
}

TEST_CASE("Cauchy-Pompeiu identity for resolvent powers") {
  TestFunction f = TestFunction::bump_on(2, 9);
  HSOptions opt;
  opt.tol = 1e-6;
  opt.j_max = 2;
  AlmostAnalyticExtension F(f);
  HSQuadrature q = hs_quadrature(F, opt);
  CHECK(q.strip_bound <= 0.1 * opt.tol);
  CHECK(q.certified_error <= opt.tol);
  for (int j = 0; j <= 2; ++j) {
    double fact = std::tgamma(j + 1.0);
    for (double lam : {1.5, 3.0, 5.5, 8.0, 9.5}) {
      double exact = (j % 2 ? -1.0 : 1.0) * f.derivative(j, lam) / fact;
      CHECK(std::abs(hs_scalar(q, lam, j) - exact) <= (j == 0 ? 1e-7 : 1e-6));
    }
  }
  opt.j_max = 0;
  opt.tol = 1e-7;
  TestFunction g = TestFunction::prod(TestFunction::exp(-0.3), TestFunction::bump_on(0, 8));
  CHECK(cauchy_pompeiu_check(g, 1.0, 0, opt) <= 1e-7);
  CHECK(cauchy_pompeiu_check(g, 3.3, 1, opt) <= 1e-6);
}

TEST_CASE("Helffer-Sjostrand matrix function against the eigendecomposition") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  const int n = 8;
  Eigen::MatrixXcd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) A(i, k) = cplx{nd(rng), nd(rng)};
  Eigen::MatrixXcd H = (A + A.adjoint()) * 0.5;
  H += 5.0 * Eigen::MatrixXcd::Identity(n, n);
  TestFunction f = TestFunction::bump_on(2, 9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  Eigen::VectorXcd fv(n);
  for (int i = 0; i < n; ++i) fv[i] = f(es.eigenvalues()[i]);
  Eigen::MatrixXcd want = es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
  HSOptions opt;
  opt.tridiagonal = false;
  HSMatrixResult dense = hs_matrix_function(H, f, opt);
  CHECK((dense.value - want).norm() <= 1e-6 * want.norm());
  opt.tridiagonal = true;
  HSMatrixResult tri = hs_matrix_function(H, f, opt);
  CHECK((tri.value - want).norm() <= 1e-6 * want.norm());
  CHECK((tri.value - dense.value).norm() <= 1e-10 * want.norm());
  Eigen::MatrixXcd bad = H;
  bad(0, 1) += 1.0;
  CHECK_THROWS_AS(hs_matrix_function(bad, f, opt), DomainError);
}

TEST_CASE("Mellin seminorm") {
  TestFunction b = TestFunction::bump_on(-1, 1);
  CHECK(mellin_seminorm(b, 0.0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(mellin_seminorm(TestFunction(), 0.0, 3) == 0.0);
  CHECK(mellin_seminorm(b, -1.0, 0) >= mellin_seminorm(b, 0.0, 0));
  CHECK(mellin_seminorm(b, 0.0, 2) >= std::abs(bump_derivative(2, 0.0)));
}
