#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "helpers.hpp"
#include "psitrace/expand.hpp"
#include "psitrace/traces.hpp"

using namespace psitrace;
using th::mono;
using th::one;

namespace {

double gk(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

cplx gkc(const std::function<cplx(double)>& f, double a, double b, double tol = 1e-13) {
  return {gk([&](double r) { return f(r).real(); }, a, b, tol), gk([&](double r) { return f(r).imag(); }, a, b, tol)};
}

HomogeneousSymbol radial(cplx s, const TorusSeries& g = one()) { return HomogeneousSymbol::radial(2, s, g); }

EllipticOperatorSpec multiplier(double aniso, bool lower) {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(th::lap() + mono(1, 1, 0, TorusSeries::constant(2, aniso)), CutoffSpec{0.0});
  if (lower) {
    l.push_back(mono(1, 0, 0), CutoffSpec{0.0});
    l.push_back(mono(0, 0, 0, TorusSeries::constant(2, 1.5)), CutoffSpec{0.0});
  }
  return EllipticOperatorSpec(l, 0.5);
}

EllipticOperatorSpec variable_operator() {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(mono(2, 0, 0, one() + TorusSeries::cosine(2, {1, 0, 0}, 0.4)) + mono(0, 2, 0), CutoffSpec{0.0});
  l.push_back(mono(0, 1, 0, TorusSeries::sine(2, {0, 1, 0}, 0.5)), CutoffSpec{0.0});
  return EllipticOperatorSpec(l, 0.5);
}

// three-component symbol of order m with x-dependent coefficients
PolyHomogeneousSymbol sample_symbol(double m, bool x_dep = true) {
  TorusSeries g = x_dep ? one() + TorusSeries::cosine(2, {1, 0, 0}, 0.5) : one();
  PolyHomogeneousSymbol A(2, m);
  A.push_back(radial(m, g) + mono(2, 0, m - 2.0, TorusSeries::constant(2, 0.7)), CutoffSpec{1.0});
  A.push_back(mono(1, 1, m - 3.0, x_dep ? TorusSeries::sine(2, {0, 1, 0}, 1.0) + one() : one()) +
                  radial(m - 1.0, TorusSeries::constant(2, 0.8)),
              CutoffSpec{1.0});
  A.push_back(radial(m - 2.0, TorusSeries::constant(2, cplx(0.3, 0.2))), CutoffSpec{1.0});
  return A;
}

// int_{R^2} (x-mean of a)(xi) f(t l(xi)) dxi for a multiplier l, by polar quadrature
cplx brute_multiplier_trace(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                            double t) {
  const int M = 128;
  double hi = f.support().intersect(IntervalSet::span(0.0, 1e300)).hi();
  cplx total{};
  for (int k = 0; k < M; ++k) {
    double th0 = 2 * kPi * (k + 0.5) / M;
    std::array<double, 3> w{std::cos(th0), std::sin(th0), 0};
    double l2 = L.principal().evaluate_mean(w).real();
    double rmax = 2.0 * std::sqrt(hi / (t * l2)) + 4.0;
    auto integrand = [&](double r) {
      std::array<double, 3> xi{r * w[0], r * w[1], 0};
      double l = L.symbol().evaluate_mean(xi).real();
      return A.evaluate_mean(xi) * f(t * l) * r;
    };
    std::vector<double> br{0.5, 1.0, rmax};
    for (double e : {0.25 * rmax, 0.5 * rmax, 0.75 * rmax}) br.push_back(e);
    std::sort(br.begin(), br.end());
    for (size_t b = 0; b + 1 < br.size(); ++b) total += gkc(integrand, br[b], br[b + 1], 1e-12);
  }
  return total * (2 * kPi / M);
}

}  // namespace

TEST_CASE("ft_dx: chain rule examples") {
  FunctionalTermSum s(2);
  s.add(0, HomogeneousSymbol::constant(2, 1.0), 0);
  CHECK(ft_dx(s, multiplier(0.0, false), 0).is_zero());

  const double eps = 0.3;
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(radial(2.0, one() + TorusSeries::cosine(2, {1, 0, 0}, eps)), CutoffSpec{0.0});
  EllipticOperatorSpec L(l, 0.5);
  FunctionalTermSum d = ft_dx(s, L, 0);
  auto terms = d.terms();
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].p == 1);
  CHECK(terms[0].r == 1);
  CHECK(terms[0].g.approx_equal(radial(2.0, TorusSeries::sine(2, {1, 0, 0}, -2 * kPi * eps)), 1e-14));
}

TEST_CASE("ft_dx and ft_dxi agree with finite differences") {
  EllipticOperatorSpec L = variable_operator();
  FunctionalSymbolExpansion fe = fc_symbols(L, 2);
  TestFunction f = TestFunction::bump_on(0.5, 4.0);
  auto fr = [&](int r, double u) { return f.derivative(r, u); };
  const double t = 0.7;
  std::mt19937_64 rng(5);
  for (size_t j = 0; j <= 2; ++j) {
    FunctionalTermSum s = FunctionalTermSum::from_order(fe, j);
    for (int axis = 0; axis < 2; ++axis) {
      FunctionalTermSum dx = ft_dx(s, L, axis), dxi = ft_dxi(s, L, axis);
      for (int k = 0; k < 6; ++k) {
        auto x = th::rand_point(rng, 0, 1);
        double th0 = std::uniform_real_distribution<double>(0, 2 * kPi)(rng);
        double rad = std::uniform_real_distribution<double>(1.2, 2.2)(rng);
        std::array<double, 3> xi{rad * std::cos(th0), rad * std::sin(th0), 0};
        const double h = 1e-4;
        auto shifted = [&](bool in_x, double e) {
          auto xx = x;
          auto yy = xi;
          (in_x ? xx : yy)[axis] += e;
          return s.evaluate(xx, yy, t, L.principal(), fr);
        };
        for (bool in_x : {true, false}) {
          cplx fd = (8.0 * (shifted(in_x, h) - shifted(in_x, -h)) - (shifted(in_x, 2 * h) - shifted(in_x, -2 * h))) /
                    (12.0 * h);
          cplx got = (in_x ? dx : dxi).evaluate(x, xi, t, L.principal(), fr);
          CHECK(std::abs(got - fd) <= 1e-8 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("mellin moments") {
  TestFunction b = TestFunction::bump_on(1.0, 2.0);
  CHECK(std::abs(mellin_moment(b, 1.0, 1)) <= 1e-14);
  cplx m0 = mellin_moment(b, 1.0, 0);
  CHECK(m0.real() > 0.0);
  CHECK(std::abs(m0 - gk([&](double u) { return b(u); }, 1.0, 2.0)) <= 1e-13);

  TestFunction chi = TestFunction::cutoff(1.0, 2.5);
  for (const TestFunction& f : {b, TestFunction::bump_on(0.3, 5.0), chi}) {
    for (cplx s : {cplx(3.5, 0.0), cplx(1.2, 0.7), cplx(-0.4, 0.0)}) {
      for (int r : {1, 2, 3}) {
        // chi reaches 0: the boundary term at 0 vanishes only for Re s > r
        if (!f.supported_in_positive() && !(s.real() > r)) continue;
        cplx lhs = mellin_moment(f, s, r);
        cplx fac = 1.0;
        for (int k = 1; k <= r; ++k) fac *= (s - double(k));
        cplx rhs = (r % 2 ? -1.0 : 1.0) * fac * mellin_moment(f, s - double(r), 0);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
      }
    }
  }

  // chi: the continuation agrees with the plain integral where it converges
  for (cplx s : {cplx(0.75, 0.0), cplx(1.5, 0.4)}) {
    CHECK(std::abs(mellin_moment_continued(chi, s) - mellin_moment(chi, s, 0)) <= 1e-11);
  }
  CHECK_THROWS_AS(mellin_moment(chi, -0.5, 0), DomainError);
  CHECK_THROWS_AS(mellin_moment(TestFunction::exp(-1.0), 1.0, 0), DomainError);
}

TEST_CASE("trace term reduction") {
  EllipticOperatorSpec L = multiplier(0.0, false);
  TestFunction eta = TestFunction::bump_on(1.0, 3.0);
  ReducedTerm r = trace_term_reduce({0, radial(-2.0), 0}, L, eta);
  CHECK(std::abs(r.exponent) <= 1e-15);
  CHECK(std::abs(r.coefficient - 2 * kPi / 2.0 * mellin_moment(eta, 0.0, 0)) <= 1e-11);

  ReducedTerm q = trace_term_reduce({0, radial(-0.5), 0}, L, eta);
  CHECK(std::abs(q.exponent - (-1.5 / 2.0)) <= 1e-15);

  ReducedTerm z = trace_term_reduce({1, HomogeneousSymbol(2, 1.0), 1}, L, eta);
  CHECK(z.coefficient == cplx{});

  TestFunction chi = TestFunction::cutoff(1.0, 2.0);
  CHECK_THROWS_AS(trace_term_reduce({0, radial(-0.5), 0}, L, chi), DomainError);
  CHECK_NOTHROW(trace_term_reduce({1, radial(1.5), 1}, L, chi));
}

TEST_CASE("expansion prediction container") {
  ExpansionPrediction p;
  p.add(0.5, 1.0, "a");
  p.add(-1.0, 2.0, "b");
  p.add(0.5 + 1e-11, 0.5, "c");
  p.add(0.25, 1e-20, "tiny");
  REQUIRE(p.terms().size() == 3);
  CHECK(p.terms()[0].exponent.real() == -1.0);
  CHECK(p.coefficient_at(0.5) == cplx(1.5));
  p.set_constant(3.0, "k");
  p.prune();
  CHECK(p.terms().size() == 2);
  CHECK(p.notes().size() == 1);
  CHECK(std::abs(p.evaluate(4.0) - (3.0 + 2.0 / 4.0 + 1.5 * 2.0)) <= 1e-14);
  CHECK(p.to_csv().find("exponent,re_c,im_c,provenance") == 0);
}

TEST_CASE("res expansion: single-term and multiplier routes") {
  TestFunction eta = TestFunction::bump_on(1.0, 3.0);
  EllipticOperatorSpec L = multiplier(0.0, false);
  PolyHomogeneousSymbol A(2, -2.0);
  A.push_back(radial(-2.0), CutoffSpec{1.0});
  ExpansionPrediction p = predict_expansion_res(A, L, eta, 3);
  REQUIRE(p.constant().has_value());
  CHECK(p.terms().empty());
  CHECK(std::abs(p.constant()->coefficient - kPi * mellin_moment(eta, 0.0, 0)) <= 1e-11);

  // full pipeline against the direct single-symbol route for an anisotropic multiplier
  EllipticOperatorSpec M = multiplier(0.4, false);
  PolyHomogeneousSymbol B = sample_symbol(-1.0);
  ExpansionPrediction full = predict_expansion_res(B, M, eta, 3);
  ExpansionPrediction direct;
  for (size_t i = 0; i < B.size(); ++i) {
    ReducedTerm r = trace_term_reduce({0, B.component(i).h, 0}, M, eta);
    direct.add(r.exponent, r.coefficient, "");
  }
  for (const auto& t : direct.terms()) CHECK(std::abs(full.coefficient_at(t.exponent) - t.coefficient) <= 1e-13);

  // and both against brute-force integration of a(xi) eta(t l(xi))
  for (double t : {0.02, 0.005}) {
    cplx brute = brute_multiplier_trace(B, M, eta, t);
    CHECK(std::abs(full.evaluate(t) - brute) <= 1e-8 * std::abs(brute));
  }
}

TEST_CASE("res expansion: lower-order terms of a multiplier") {
  TestFunction eta = TestFunction::bump_on(1.0, 3.0);
  EllipticOperatorSpec M = multiplier(0.3, true);
  PolyHomogeneousSymbol B = sample_symbol(-1.0, false);
  ExpansionPrediction full = predict_expansion_res(B, M, eta, 7);
  // the truncation error is O(t^{(7 - m - n) / m0}) = O(t^3)
  for (double t : {0.01, 0.004}) {
    cplx brute = brute_multiplier_trace(B, M, eta, t);
    CHECK(std::abs(full.evaluate(t) - brute) <= 50.0 * std::pow(t, 3.0) * std::abs(brute));
  }
}

TEST_CASE("res expansion: variable operator ladder and residue") {
  TestFunction eta = TestFunction::bump_on(1.0, 3.0);
  EllipticOperatorSpec L = variable_operator();
  PolyHomogeneousSymbol A = sample_symbol(-1.0);
  ExpansionPrediction p = predict_expansion_res(A, L, eta, 4);
  for (const auto& t : p.terms()) {
    double jp = t.exponent.real() * 2.0 + 1.0;
    CHECK(std::abs(jp - std::round(jp)) <= 1e-12);
    CHECK(std::abs(t.exponent.imag()) <= 1e-15);
  }
  REQUIRE(p.constant().has_value());
  cplx want = residue_density_integrated(A) / 2.0 * mellin_moment(eta, 0.0, 0);
  CHECK(std::abs(p.constant()->coefficient - want) <= 1e-9 * std::abs(want));
  cplx sigma = 0.5;
  cplx lead = mellin_moment(eta, sigma, 0) / 2.0 * weighted_coefficient_integral(A.homogeneous(0), L, sigma);
  CHECK(std::abs(p.coefficient_at(-0.5) - lead) <= 1e-10 * std::abs(lead));

  std::vector<TraceTermGroup> groups = assemble_trace_terms(A, L, 4);
  for (const auto& g : groups) {
    CHECK(g.term.p == g.term.r);
    cplx deg = -1.0 - double(g.jprime) + 2.0 * g.term.r;
    CHECK(std::abs(g.term.g.degree() - deg) <= 1e-12);
  }
  CHECK_THROWS_AS(predict_expansion_res(A, L, TestFunction::cutoff(1.0, 2.0), 2), DomainError);
}

TEST_CASE("TR expansion") {
  TestFunction chi = TestFunction::cutoff(1.0, 2.5);
  EllipticOperatorSpec L = multiplier(0.0, false);

  // below -n: constant is the plain trace, powers vanish as t -> 0
  PolyHomogeneousSymbol S = sample_symbol(-2.6);
  ExpansionPrediction ps = predict_expansion_TR(S, L, chi, 3);
  CHECK(std::abs(ps.constant()->coefficient - smoothing_trace(S)) <= 1e-12);
  for (const auto& t : ps.terms()) CHECK(t.exponent.real() > 0.0);

  // single radial term: TR plus the closed-form power
  for (double m : {-1.5, -0.5}) {
    PolyHomogeneousSymbol A(2, m);
    A.push_back(radial(m), CutoffSpec{1.0});
    ExpansionPrediction p = predict_expansion_TR(A, L, chi, 3);
    REQUIRE(p.terms().size() == 1);
    double sigma = (m + 2.0) / 2.0;
    double mel = 1.0 / sigma + gk([&](double u) { return chi(u) * std::pow(u, sigma - 1.0); }, 1.0, 2.5);
    CHECK(std::abs(p.terms()[0].exponent - (-sigma)) <= 1e-15);
    CHECK(std::abs(p.terms()[0].coefficient - 0.5 * mel * 2 * kPi) <= 1e-10);
    CHECK(std::abs(p.constant()->coefficient - canonical_trace(A)) <= 1e-15);

    // rescaling chi changes only the Mellin factors
    TestFunction chi2 = TestFunction::affine(0.5, 0.0, chi);
    ExpansionPrediction p2 = predict_expansion_TR(A, L, chi2, 3);
    CHECK(p2.constant()->coefficient == p.constant()->coefficient);
    CHECK(std::abs(p2.terms()[0].coefficient - std::pow(2.0, sigma) * p.terms()[0].coefficient) <= 1e-10);
  }

  // against brute-force integration, lower-order symbol components and operator terms included
  for (double m : {-1.5, -0.5}) {
    PolyHomogeneousSymbol A = sample_symbol(m);
    EllipticOperatorSpec M = multiplier(0.3, false);
    ExpansionPrediction p = predict_expansion_TR(A, M, chi, 3);
    for (double t : {0.02, 0.005}) {
      cplx brute = brute_multiplier_trace(A, M, chi, t);
      CHECK(std::abs(p.evaluate(t) - brute) <= 1e-8 * std::abs(brute));
    }
  }

  PolyHomogeneousSymbol Z(2, -1.0);
  Z.push_back(radial(-1.0), CutoffSpec{1.0});
  CHECK_THROWS_WITH_AS(predict_expansion_TR(Z, L, chi, 2), doctest::Contains("outside"), DomainError);
  PolyHomogeneousSymbol A(2, -0.5);
  A.push_back(radial(-0.5), CutoffSpec{1.0});
  CHECK_THROWS_AS(predict_expansion_TR(A, L, TestFunction::bump_on(1.0, 2.0), 2), DomainError);
}

TEST_CASE("E_t tends to the canonical trace") {
  TestFunction chi = TestFunction::cutoff(1.0, 2.5);
  EllipticOperatorSpec L = variable_operator();
  for (double m : {-1.5, -0.5}) {
    PolyHomogeneousSymbol A = sample_symbol(m);
    cplx tr = canonical_trace(A);
    // components integrable at infinity still carry their t^{-sigma} tail
    auto tail = [&](double t) {
      cplx s{};
      for (size_t i = 0; i < A.size(); ++i) {
        cplx sigma = (A.component(i).h.degree() + 2.0) / 2.0;
        if (sigma.real() > 0.0) continue;
        s += mellin_moment_continued(chi, sigma) / 2.0 *
             weighted_coefficient_integral(A.component(i).h, L, sigma) * std::exp(-sigma * std::log(t));
      }
      return s;
    };
    for (double t : {1e-2, 1e-3}) {
      cplx e = tr_integral_Et(A, L, chi, t);
      CHECK(std::abs(e - tail(t) - tr) <= 1e-8 * std::max(1.0, std::abs(tr)));
    }
    cplx e = tr_integral_Et(A, L, chi, 1e-3);
    cplx e2 = tr_integral_Et(2.0 * A, L, chi, 1e-3);
    CHECK(std::abs(e2 - 2.0 * e) <= 1e-12 * std::abs(e));
  }
}
