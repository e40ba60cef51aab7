#include "psitrace/quadrature.hpp"

#include <map>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace psitrace::quad {

namespace {

Rule compute_gauss_legendre(int n) {
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

}  // namespace

const Rule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

Rule composite_gauss(double a, double b, int panels, int order) {
  const Rule& base = gauss_legendre(order);
  Rule r;
  r.nodes.reserve(static_cast<size_t>(panels) * order);
  r.weights.reserve(static_cast<size_t>(panels) * order);
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    for (int i = 0; i < order; ++i) {
      r.nodes.push_back(lo + 0.5 * h * (base.nodes[i] + 1.0));
      r.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return r;
}

std::vector<double> graded_edges(const std::vector<double>& breaks, double density, int levels) {
  std::vector<double> e;
  for (size_t s = 0; s + 1 < breaks.size(); ++s) {
    double a = breaks[s], b = breaks[s + 1];
    if (!(b > a)) continue;
    int panels = std::max(4, static_cast<int>(std::ceil((b - a) * density)));
    double w = (b - a) / panels;
    // geometric panels inside the first and last uniform panel
    e.push_back(a);
    for (int k = levels; k > 0; --k) e.push_back(a + std::ldexp(w, -k));
    for (int p = 1; p < panels; ++p) e.push_back(a + p * w);
    for (int k = 1; k <= levels; ++k) e.push_back(b - std::ldexp(w, -k));
  }
  if (!e.empty()) e.push_back(breaks.back());
  return e;
}

Rule panel_gauss(const std::vector<double>& edges, int order) {
  const Rule& g = gauss_legendre(order);
  Rule out;
  for (size_t p = 0; p + 1 < edges.size(); ++p) {
    double a = edges[p], b = edges[p + 1];
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      out.nodes.push_back(0.5 * (a + b) + 0.5 * (b - a) * g.nodes[i]);
      out.weights.push_back(0.5 * (b - a) * g.weights[i]);
    }
  }
  return out;
}

Rule graded_gauss(const std::vector<double>& breaks, double density, int order, int levels) {
  return panel_gauss(graded_edges(breaks, density, levels), order);
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  if (a == b) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, rel_tol, &err);
}

cplx integrate_complex(const std::function<cplx(double)>& f, double a, double b, double rel_tol) {
  using Real = std::function<double(double)>;
  double re = integrate(Real([&](double u) { return f(u).real(); }), a, b, rel_tol);
  double im = integrate(Real([&](double u) { return f(u).imag(); }), a, b, rel_tol);
  return {re, im};
}

cplx integrate_endpoint_singular(const std::function<cplx(double)>& f, double a, double b,
                                 double rel_tol) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> ts(15);
  double re = ts.integrate([&](double u) { return f(u).real(); }, a, b, rel_tol);
  double im = ts.integrate([&](double u) { return f(u).imag(); }, a, b, rel_tol);
  return {re, im};
}

}  // namespace psitrace::quad
