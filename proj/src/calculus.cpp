#include "psitrace/calculus.hpp"

#include <algorithm>

namespace psitrace {

namespace {

double radius(const CutoffSpec& c) { return c.none() ? 0.0 : 1.0 / c.scale; }
CutoffSpec from_radius(double r) { return CutoffSpec{r == 0.0 ? 0.0 : 1.0 / r}; }

void collect(int dim, int order, int axis, Index3& cur, std::vector<Index3>& out) {
  if (axis == dim - 1) {
    cur[axis] = order;
    out.push_back(cur);
    cur[axis] = 0;
    return;
  }
  for (int k = order; k >= 0; --k) {
    cur[axis] = k;
    collect(dim, order - k, axis + 1, cur, out);
  }
  cur[axis] = 0;
}

}  // namespace

std::vector<Index3> multi_indices(int dim, int order) {
  std::vector<Index3> out;
  if (order < 0) return out;
  Index3 cur{0, 0, 0};
  collect(dim, order, 0, cur, out);
  std::sort(out.begin(), out.end());
  return out;
}

double factorial(const Index3& alpha) {
  double f = 1.0;
  for (int a : alpha) {
    for (int k = 2; k <= a; ++k) f *= k;
  }
  return f;
}

cplx star_coefficient(const Index3& alpha) {
  return std::pow(kTwoPiI, -abs_index(alpha)) / factorial(alpha);
}

int default_order_count(cplx order, int dim) {
  // need Re(order) - N < -dim - 1
  int n = static_cast<int>(std::floor(order.real() + dim + 1.0)) + 1;
  return std::max(1, n);
}

PolyHomogeneousSymbol compose_expansion(const PolyHomogeneousSymbol& a, const PolyHomogeneousSymbol& b,
                                        int N) {
  if (a.dim() != b.dim()) throw DomainError("compose: dimension mismatch");
  const int dim = a.dim();
  const cplx order = a.order() + b.order();
  if (N < 0) N = default_order_count(order, dim);
  PolyHomogeneousSymbol out(dim, order);
  for (int jp = 0; jp < N; ++jp) {
    HomogeneousSymbol acc(dim, order - static_cast<double>(jp));
    double rad = 0.0;
    for (int j1 = 0; j1 <= jp; ++j1) {
      if (static_cast<size_t>(j1) >= a.size()) break;
      for (int k = 0; j1 + k <= jp; ++k) {
        int j2 = jp - j1 - k;
        if (static_cast<size_t>(j2) >= b.size()) continue;
        for (const Index3& alpha : multi_indices(dim, k)) {
          HomogeneousSymbol da = d_xi(a.homogeneous(j1), alpha);
          if (da.is_zero()) continue;
          HomogeneousSymbol db = d_x(b.homogeneous(j2), alpha);
          if (db.is_zero()) continue;
          acc += (da * db) * star_coefficient(alpha);
          rad = std::max({rad, radius(a.cutoff(j1)), radius(b.cutoff(j2))});
        }
      }
    }
    out.push_back(acc, from_radius(acc.is_polynomial() || rad > 0.0 ? rad : 1.0));
  }
  return out;
}

PolyHomogeneousSymbol adjoint_expansion(const PolyHomogeneousSymbol& a, int N) {
  const int dim = a.dim();
  if (N < 0) N = default_order_count(a.order(), dim);
  PolyHomogeneousSymbol out(dim, std::conj(a.order()));
  for (int jp = 0; jp < N; ++jp) {
    HomogeneousSymbol acc(dim, std::conj(a.order()) - static_cast<double>(jp));
    double rad = 0.0;
    for (int j = 0; j <= jp && static_cast<size_t>(j) < a.size(); ++j) {
      HomogeneousSymbol ca = conj(a.homogeneous(j));
      for (const Index3& alpha : multi_indices(dim, jp - j)) {
        HomogeneousSymbol d = d_x(d_xi(ca, alpha), alpha);
        if (d.is_zero()) continue;
        acc += d * star_coefficient(alpha);
        rad = std::max(rad, radius(a.cutoff(j)));
      }
    }
    out.push_back(acc, from_radius(acc.is_polynomial() || rad > 0.0 ? rad : 1.0));
  }
  return out;
}

}  // namespace psitrace
