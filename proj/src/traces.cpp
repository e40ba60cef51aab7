#include "psitrace/traces.hpp"

#include <sstream>

#include "psitrace/quadrature.hpp"

namespace psitrace {

namespace {

cplx finite_part_sum(const PolyHomogeneousSymbol& A, double split) {
  const int n = A.dim();
  CompensatedSum<cplx> acc;
  for (size_t j = 0; j < A.size(); ++j) {
    const SymbolComponent& c = A.component(j);
    if (c.h.is_zero()) continue;
    cplx moment = sphere_torus_integral(c.h);
    if (moment == cplx{}) continue;
    cplx s = c.h.degree() + static_cast<double>(n);
    if (std::abs(s) < 1e-12) throw DomainError("finite part: degree -n component would produce a logarithm");
    acc.add(moment * radial_finite_part(s, c.cutoff.scale, split));
  }
  return acc.value();
}

}  // namespace

cplx residue_density_integrated(const PolyHomogeneousSymbol& A) {
  const int n = A.dim();
  if (!in_integer_ladder(A.order(), n)) return 0.0;
  long j = std::lround(A.order().real()) + n;
  if (j < 0 || static_cast<size_t>(j) >= A.size()) return 0.0;
  return sphere_torus_integral(A.homogeneous(static_cast<size_t>(j)));
}

cplx radial_finite_part(cplx s, double t, double split) {
  if (t == 0.0) return 0.0;
  if (!(t > 0.0)) throw DomainError("radial finite part: cutoff scale must be positive");
  if (!(split >= 1.0)) throw DomainError("radial finite part: split factor must be >= 1");
  if (std::abs(s) < 1e-12) throw DomainError("radial finite part: s = 0 gives a logarithm");
  // substitute u = t r: t^{-s} (int_{1/2}^{split} psi_1(u) u^{s-1} du - split^s / s)
  auto integrand = [&](double u) { return psi1(u) * std::exp((s - 1.0) * std::log(u)); };
  cplx inner = quad::integrate_complex(integrand, 0.5, 1.0, 1e-14);
  if (split > 1.0) inner += quad::integrate_complex(integrand, 1.0, split, 1e-14);
  inner -= std::exp(s * std::log(split)) / s;
  return std::exp(-s * std::log(t)) * inner;
}

cplx smoothing_trace(const PolyHomogeneousSymbol& A) {
  const int n = A.dim();
  if (!(A.order().real() < -n)) {
    std::ostringstream msg;
    msg << "smoothing trace needs Re(order) < -n; order = " << format_complex(A.order()) << ", n = " << n;
    throw DomainError(msg.str());
  }
  return finite_part_sum(A, 1.0);
}

cplx canonical_trace(const PolyHomogeneousSymbol& A, double split) {
  const int n = A.dim();
  if (in_integer_ladder(A.order(), n)) {
    std::ostringstream msg;
    msg << "canonical trace needs order outside {-n, -n+1, ...}; order = " << format_complex(A.order())
        << ", n = " << n;
    throw DomainError(msg.str());
  }
  return finite_part_sum(A, split);
}

}  // namespace psitrace
