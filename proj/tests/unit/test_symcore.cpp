#include <random>

#include "doctest.h"
#include "psitrace/quadrature.hpp"
#include "psitrace/symbol_io.hpp"
#include "psitrace/symcore.hpp"

using namespace psitrace;

namespace {

TorusSeries one(int n = 2) { return TorusSeries::constant(n, 1.0); }

HomogeneousSymbol mono(int a1, int a2, double s, const TorusSeries& g = one()) {
  return HomogeneousSymbol::monomial(2, {a1, a2, 0}, s, g);
}

HomogeneousSymbol lap() { return mono(2, 0, 0) + mono(0, 2, 0); }

// A pool of symbols with x-dependence, used by the randomized property checks.
std::vector<HomogeneousSymbol> sample_symbols() {
  TorusSeries c1 = TorusSeries::cosine(2, {1, 0, 0}, 1.0) + one();
  TorusSeries s2 = TorusSeries::sine(2, {0, 1, 0}, 0.5) + TorusSeries::cosine(2, {1, -1, 0}, 0.25);
  std::vector<HomogeneousSymbol> out;
  out.push_back(mono(0, 0, -1, c1));
  out.push_back(mono(1, 0, -2, s2) + mono(0, 1, -2, c1));
  out.push_back(mono(2, 1, -3.5, c1) + mono(0, 0, -0.5, s2));
  out.push_back(mono(1, 1, 0.3, s2));
  out.push_back(lap() * c1);
  return out;
}

std::array<double, 3> rand_point(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("hs_add examples") {
  HomogeneousSymbol r = mono(0, 0, 2) + mono(0, 0, 2);
  CHECK(r == mono(0, 0, 2) * cplx{2.0});

  HomogeneousSymbol z = mono(1, 0, 0) + mono(1, 0, 0) * cplx{-1.0};
  CHECK(z.is_zero());
  CHECK(z.degree() == cplx{1.0});

  HomogeneousSymbol c = mono(1, 0, 0, TorusSeries::cosine(2, {1, 0, 0}, 1.0)) + mono(1, 0, 0);
  REQUIRE(c.size() == 1);
  const TorusSeries& g = c.terms().begin()->second;
  CHECK(g.coefficient({0, 0, 0}) == cplx{1.0});
  CHECK(g.coefficient({1, 0, 0}) == cplx{0.5});
  CHECK(g.coefficient({-1, 0, 0}) == cplx{0.5});
  CHECK(g.coeffs().size() == 3);

  CHECK_THROWS_AS(mono(0, 0, 2) + mono(0, 0, 1), DomainError);
}

TEST_CASE("hs_mul examples and pointwise oracle") {
  HomogeneousSymbol p = mono(1, 0, 0) * mono(0, 1, 0);
  CHECK(p == mono(1, 1, 0));
  CHECK(p.degree() == cplx{2.0});
  CHECK(mono(0, 0, -1) * mono(0, 0, -1) == mono(0, 0, -2));

  std::mt19937_64 rng(7);
  auto pool = sample_symbols();
  for (int i = 0; i < 50; ++i) {
    const auto& a = pool[i % pool.size()];
    const auto& b = pool[(i * 3 + 1) % pool.size()];
    auto x = rand_point(rng, 0.0, 1.0);
    auto xi = rand_point(rng, -2.0, 2.0);
    cplx lhs = (a * b).evaluate(x, xi);
    cplx rhs = a.evaluate(x, xi) * b.evaluate(x, xi);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("hs_dxi and hs_dx") {
  CHECK(d_xi(mono(0, 0, 1), 0) == mono(1, 0, -1));
  HomogeneousSymbol expect = mono(0, 0, -2) - mono(2, 0, -4) * cplx{2.0};
  CHECK(d_xi(mono(1, 0, -2), 0) == expect);

  CHECK(d_x(mono(0, 0, 1), 0).is_zero());
  HomogeneousSymbol c = mono(0, 0, 1, TorusSeries::cosine(2, {1, 0, 0}, 1.0));
  HomogeneousSymbol s = mono(0, 0, 1, TorusSeries::sine(2, {1, 0, 0}, -2.0 * kPi));
  CHECK(d_x(c, 0).approx_equal(s, 1e-15));

  std::mt19937_64 rng(11);
  const double h = 1e-5;
  for (const auto& a : sample_symbols()) {
    for (int trial = 0; trial < 5; ++trial) {
      auto x = rand_point(rng, 0.0, 1.0);
      auto xi = rand_point(rng, 0.5, 1.5);
      for (int axis = 0; axis < 2; ++axis) {
        auto xp = xi, xm = xi;
        xp[axis] += h;
        xm[axis] -= h;
        cplx fd = (a.evaluate(x, xp) - a.evaluate(x, xm)) / (2 * h);
        cplx ex = d_xi(a, axis).evaluate(x, xi);
        CHECK(std::abs(fd - ex) <= 1e-8 * std::max(1.0, std::abs(ex)));

        auto yp = x, ym = x;
        yp[axis] += h;
        ym[axis] -= h;
        fd = (a.evaluate(yp, xi) - a.evaluate(ym, xi)) / (2 * h);
        ex = d_x(a, axis).evaluate(x, xi);
        CHECK(std::abs(fd - ex) <= 1e-8 * std::max(1.0, std::abs(ex)));
      }
    }
  }
}

TEST_CASE("homogeneity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(0.1, 10.0);
  auto pool = sample_symbols();
  for (int i = 0; i < 100; ++i) {
    const auto& a = pool[i % pool.size()];
    auto x = rand_point(rng, 0.0, 1.0);
    auto xi = rand_point(rng, -1.0, 1.0);
    double l = lam(rng);
    std::array<double, 3> lxi{l * xi[0], l * xi[1], l * xi[2]};
    cplx ref = std::pow(l, a.degree()) * a.evaluate(x, xi);
    CHECK(std::abs(a.evaluate(x, lxi) - ref) <= 1e-10 * std::abs(ref));
  }
}

TEST_CASE("Leibniz rule holds symbolically") {
  auto pool = sample_symbols();
  for (size_t i = 0; i < pool.size(); ++i) {
    for (size_t j = 0; j < pool.size(); ++j) {
      for (int axis = 0; axis < 2; ++axis) {
        const auto& a = pool[i];
        const auto& b = pool[j];
        HomogeneousSymbol lhs = d_xi(a * b, axis);
        HomogeneousSymbol rhs = d_xi(a, axis) * b + a * d_xi(b, axis);
        CHECK(lhs.approx_equal(rhs, 1e-14));
        lhs = d_x(a * b, axis);
        rhs = d_x(a, axis) * b + a * d_x(b, axis);
        CHECK(lhs.approx_equal(rhs, 1e-14));
      }
    }
  }
}

TEST_CASE("sphere_torus_integral examples") {
  CHECK(std::abs(sphere_torus_integral(HomogeneousSymbol::constant(2, 1.0)) - 2 * kPi) < 1e-14);
  CHECK(std::abs(sphere_torus_integral(mono(2, 0, -2)) - kPi) < 1e-14);
  TorusSeries c1 = TorusSeries::cosine(2, {1, 0, 0}, 1.0) + one();
  CHECK(std::abs(sphere_torus_integral(mono(0, 0, -2, c1)) - 2 * kPi) < 1e-14);
}

TEST_CASE("sphere moments agree with quadrature up to order 8") {
  for (int n : {2, 3}) {
    SphereGrid grid(n, n == 2 ? 32 : 12, 1);
    double area = 0.0;
    for (double w : grid.weights()) area += w;
    CHECK(std::abs(area - sphere_area(n)) <= 1e-12 * sphere_area(n));
    for (int a = 0; a <= 8; ++a) {
      for (int b = 0; a + b <= 8; ++b) {
        for (int c = 0; a + b + c <= 8; ++c) {
          if (n == 2 && c) continue;
          Index3 alpha{a, b, c};
          double q = 0.0;
          for (size_t i = 0; i < grid.nodes().size(); ++i) {
            const auto& w = grid.nodes()[i];
            q += grid.weights()[i] * std::pow(w[0], a) * std::pow(w[1], b) * std::pow(w[2], c);
          }
          CHECK(std::abs(q - sphere_moment(alpha, n)) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("sphere-vanishing of derivative densities") {
  // deg(d^alpha b) = -n with |alpha| >= 1 integrates to zero on the sphere
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  int cases = 0;
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
        HomogeneousSymbol d = d_xi(b, alpha);
        REQUIRE(d.degree() == cplx{double(-n)});
        CHECK(std::abs(sphere_torus_integral(d)) <= 1e-10);
        CHECK(std::abs(sphere_torus_quadrature(d, SphereGrid(n, n == 2 ? 64 : 16, 4))) <= 1e-10);
        ++cases;
      }
    }
  }
  CHECK(cases >= 20);
  // counterexample: b = xi_1, alpha = (1,0) leaves the constant 1, which is not of degree -n
  CHECK(std::abs(sphere_torus_integral(d_xi(mono(1, 0, 0), 0)) - 2 * kPi) < 1e-14);
}

TEST_CASE("weighted_coefficient_integral examples") {
  auto spec = [](HomogeneousSymbol p) {
    PolyHomogeneousSymbol l(2, 2.0);
    l.push_back(p, CutoffSpec{0.0});
    return EllipticOperatorSpec(l, 0.5);
  };
  EllipticOperatorSpec L = spec(lap());
  CHECK(std::abs(weighted_coefficient_integral(HomogeneousSymbol::constant(2, 1.0), L, {0.7, 0.3}) -
                 2 * kPi) < 1e-12);
  CHECK(std::abs(weighted_coefficient_integral(mono(2, 0, 0), L, 1.0) - kPi) < 1e-12);

  EllipticOperatorSpec L2 = spec(lap() + mono(2, 0, 0) * cplx{0.5});
  double ref = quad::integrate([](double th) { return 1.0 / (1.0 + 0.5 * std::cos(th) * std::cos(th)); },
                               0.0, 2 * kPi);
  CHECK(std::abs(weighted_coefficient_integral(HomogeneousSymbol::constant(2, 1.0), L2, 1.0) - ref) <
        1e-10 * ref);
}

TEST_CASE("ellipticity validation") {
  PolyHomogeneousSymbol l(2, 2.0);
  l.push_back(mono(2, 0, 0) - mono(0, 2, 0), CutoffSpec{0.0});
  CHECK_THROWS_AS(EllipticOperatorSpec(l, 0.5), DomainError);
  PolyHomogeneousSymbol bad(2, 2.0);
  CHECK_THROWS_AS(bad.push_back(mono(0, 0, 1)), DomainError);
  CHECK_THROWS_AS(bad.push_back(mono(1, 0, 1), CutoffSpec{0.0}), DomainError);
  bad.push_back(mono(0, 0, 2), CutoffSpec{0.0});
}

TEST_CASE("psi1 profile") {
  CHECK(psi1(0.5) == 0.0);
  CHECK(psi1(1.0) == 1.0);
  CHECK(psi1(0.75) == doctest::Approx(0.5));
  double prev = 0.0;
  for (int i = 0; i <= 200; ++i) {
    double v = psi1(0.4 + 0.7 * i / 200.0);
    CHECK(v >= prev);
    CHECK(v <= 1.0);
    prev = v;
  }
}

TEST_CASE("symbol text round-trip") {
  PolyHomogeneousSymbol a(2, -1.0);
  TorusSeries c1 = TorusSeries::cosine(2, {1, 0, 0}, 1.0) + one();
  a.push_back(mono(0, 0, -1, c1), CutoffSpec{1.0});
  a.push_back(mono(2, 0, -4, TorusSeries::sine(2, {0, 1, 0}, 1.0 / 3.0)), CutoffSpec{0.7});
  a.push_back(HomogeneousSymbol(2, -3.0), CutoffSpec{1.0});
  std::string text = to_text(a);
  PolyHomogeneousSymbol b = parse_symbol(text);
  CHECK(b == a);
  CHECK(to_text(b) == text);

  HomogeneousSymbol cpx = HomogeneousSymbol::radial(2, {-0.5, 1.25}, TorusSeries::constant(2, {0.1, -0.2}));
  CHECK(parse_homogeneous(to_text(cpx), 2) == cpx);
  CHECK_THROWS_AS(parse_symbol("symbol(n=2, m=-1) { cutoff 1 : {0,0:1} xi^(0,0) r^(-2) }"), ParseError);
}
