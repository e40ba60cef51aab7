#include "psitrace/parametrix.hpp"

#include <random>

#include "psitrace/calculus.hpp"
#include "psitrace/parallel.hpp"

namespace psitrace {

ResolventSymbol::ResolventSymbol(int dim, double m0, cplx weight) : dim_(dim), m0_(m0), weight_(snap(weight)) {}

HomogeneousSymbol ResolventSymbol::coefficient(int p) const {
  auto it = powers_.find(p);
  return it == powers_.end() ? HomogeneousSymbol(dim_, degree_at(p)) : it->second;
}

double ResolventSymbol::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [p, d] : powers_) m = std::max(m, d.max_abs_coefficient());
  return m;
}

void ResolventSymbol::add(int p, const HomogeneousSymbol& d) {
  if (p < 0) throw DomainError("resolvent power must be non-negative");
  if (d.dim() != dim_) throw DomainError("resolvent symbol: dimension mismatch");
  if (d.degree() != degree_at(p)) {
    throw DomainError("resolvent symbol: coefficient at power " + std::to_string(p) + " has degree " +
                      format_complex(d.degree()) + ", expected " + format_complex(degree_at(p)));
  }
  if (d.is_zero()) return;
  auto it = powers_.find(p);
  if (it == powers_.end()) {
    powers_.emplace(p, d);
  } else {
    it->second += d;
    if (it->second.is_zero()) powers_.erase(it);
  }
}

cplx ResolventSymbol::evaluate(std::span<const double> x, std::span<const double> xi, cplx z,
                               const HomogeneousSymbol& principal) const {
  cplx base = principal.evaluate(x, xi) - z;
  cplx sum{};
  for (const auto& [p, d] : powers_) sum += d.evaluate(x, xi) * std::pow(base, -p);
  return sum;
}

ResolventSymbol& ResolventSymbol::operator+=(const ResolventSymbol& other) {
  if (other.is_zero()) return *this;
  if (other.dim_ != dim_ || other.m0_ != m0_ || other.weight_ != weight_) {
    throw DomainError("resolvent symbol: incompatible sum");
  }
  for (const auto& [p, d] : other.powers_) add(p, d);
  return *this;
}

ResolventSymbol& ResolventSymbol::operator*=(cplx s) {
  if (s == cplx{}) {
    powers_.clear();
    return *this;
  }
  for (auto& [p, d] : powers_) d *= s;
  return *this;
}

bool ResolventSymbol::approx_equal(const ResolventSymbol& other, double tol) const {
  if (dim_ != other.dim_ || weight_ != other.weight_) return false;
  for (int p = std::min(min_power(), other.min_power()); p <= std::max(max_power(), other.max_power()); ++p) {
    if (!coefficient(p).approx_equal(other.coefficient(p), tol)) return false;
  }
  return true;
}

ResolventSymbol rs_mul_hs(const ResolventSymbol& q, const HomogeneousSymbol& g) {
  ResolventSymbol out(q.dim(), q.m0(), q.weight() + g.degree());
  for (const auto& [p, d] : q.powers()) out.add(p, d * g);
  return out;
}

namespace {

template <typename Deriv>
ResolventSymbol chain_rule(const ResolventSymbol& q, const HomogeneousSymbol& dl, cplx shift, Deriv deriv) {
  ResolventSymbol out(q.dim(), q.m0(), q.weight() + shift);
  for (const auto& [p, d] : q.powers()) {
    out.add(p, deriv(d));
    if (!dl.is_zero()) out.add(p + 1, (d * dl) * cplx{-static_cast<double>(p)});
  }
  return out;
}

}  // namespace

ResolventSymbol rs_dxi(const ResolventSymbol& q, int axis, const HomogeneousSymbol& principal) {
  return chain_rule(q, d_xi(principal, axis), -1.0, [&](const HomogeneousSymbol& d) { return d_xi(d, axis); });
}

ResolventSymbol rs_dx(const ResolventSymbol& q, int axis, const HomogeneousSymbol& principal) {
  return chain_rule(q, d_x(principal, axis), 0.0, [&](const HomogeneousSymbol& d) { return d_x(d, axis); });
}

ResolventSymbol rs_dxi(const ResolventSymbol& q, const Index3& alpha, const HomogeneousSymbol& principal) {
  ResolventSymbol out = q;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < alpha[axis]; ++k) out = rs_dxi(out, axis, principal);
  }
  return out;
}

ResolventSymbol rs_dx(const ResolventSymbol& q, const Index3& alpha, const HomogeneousSymbol& principal) {
  ResolventSymbol out = q;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < alpha[axis]; ++k) out = rs_dx(out, axis, principal);
  }
  return out;
}

ResolventSymbol rs_shift(const ResolventSymbol& q, int by) {
  ResolventSymbol out(q.dim(), q.m0(), q.weight() - static_cast<double>(by) * q.m0());
  for (const auto& [p, d] : q.powers()) out.add(p + by, d);
  return out;
}

namespace {

struct Contribution {
  int j1;
  Index3 alpha;
  int j2;
};

// All (j1, alpha, j2) with j1 + |alpha| + j2 = jp except the z-carrying (0, 0, jp).
std::vector<Contribution> contributions(int dim, int jp) {
  std::vector<Contribution> out;
  for (int j1 = 0; j1 <= jp; ++j1) {
    for (int k = 0; j1 + k <= jp; ++k) {
      int j2 = jp - j1 - k;
      if (j1 == 0 && k == 0) continue;
      for (const Index3& alpha : multi_indices(dim, k)) out.push_back({j1, alpha, j2});
    }
  }
  return out;
}

ResolventSymbol contribution_term(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs,
                                  const Contribution& c) {
  const HomogeneousSymbol& lp = L.principal();
  HomogeneousSymbol dl = d_xi(L.symbol().homogeneous(c.j1), c.alpha);
  ResolventSymbol dq = rs_dx(qs.at(c.j2), c.alpha, lp);
  ResolventSymbol term = rs_mul_hs(dq, dl);
  term *= star_coefficient(c.alpha);
  return term;
}

ResolventSymbol sum_contributions(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs,
                                  int jp, int threads, double* scale) {
  auto list = contributions(L.dim(), jp);
  auto terms = parallel_map(list.size(), threads,
                            [&](size_t i) { return contribution_term(L, qs, list[i]); });
  ResolventSymbol acc(L.dim(), L.order(), -static_cast<double>(jp));
  double sc = 0.0;
  for (const auto& t : terms) {
    sc = std::max(sc, t.max_abs_coefficient());
    acc += t;
  }
  if (scale) *scale = sc;
  return acc;
}

}  // namespace

std::vector<ResolventSymbol> build_parametrix(const EllipticOperatorSpec& L, int J, int threads) {
  if (J < 0) throw DomainError("parametrix order must be non-negative");
  const int dim = L.dim();
  const double m0 = L.order();
  std::vector<ResolventSymbol> qs;
  ResolventSymbol q0(dim, m0, -m0);
  q0.add(1, HomogeneousSymbol::constant(dim, 1.0));
  qs.push_back(q0);
  for (int j = 1; j <= J; ++j) {
    ResolventSymbol s = sum_contributions(L, qs, j, threads, nullptr);
    ResolventSymbol qj = rs_shift(s, 1);
    qj *= -1.0;
    if (!qj.is_zero() && (qj.min_power() < 1 || qj.max_power() > 1 + 2 * j)) {
      throw std::logic_error("parametrix power range violated at order " + std::to_string(j));
    }
    qs.push_back(std::move(qj));
  }
  return qs;
}

ResolventSymbol composition_residual(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs,
                                     int jp) {
  ResolventSymbol r = jp == 0 ? ResolventSymbol(L.dim(), L.order(), 0.0) : sum_contributions(L, qs, jp, 0, nullptr);
  r += rs_shift(qs.at(jp), -1);
  return r;
}

ParametrixReport verify_parametrix(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs, int J,
                                   int samples, unsigned seed, double tol) {
  if (static_cast<int>(qs.size()) <= J) throw DomainError("verify_parametrix: fewer orders than J");
  const int dim = L.dim();
  ParametrixReport rep;
  rep.samples = samples;
  bool ok = true;
  for (int jp = 0; jp <= J; ++jp) {
    double scale = 1.0;
    ResolventSymbol r = jp == 0 ? ResolventSymbol(dim, L.order(), 0.0) : sum_contributions(L, qs, jp, 0, &scale);
    r += rs_shift(qs[jp], -1);
    if (jp == 0) {
      ResolventSymbol one(dim, L.order(), 0.0);
      one.add(0, HomogeneousSymbol::constant(dim, 1.0));
      ResolventSymbol diff = r;
      diff += (one *= -1.0);
      rep.symbolic_residual.push_back(diff.max_abs_coefficient());
    } else {
      scale = std::max(scale, qs[jp].max_abs_coefficient());
      rep.symbolic_residual.push_back(r.max_abs_coefficient() / std::max(scale, 1e-300));
    }
    ok = ok && rep.symbolic_residual.back() <= tol;
  }

  // Numeric: evaluate every contribution separately and add the values.
  std::vector<std::vector<ResolventSymbol>> terms(J + 1);
  for (int jp = 1; jp <= J; ++jp) {
    for (const auto& c : contributions(dim, jp)) terms[jp].push_back(contribution_term(L, qs, c));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const HomogeneousSymbol& lp = L.principal();
  for (int s = 0; s < samples; ++s) {
    std::array<double, 3> x{unit(rng), unit(rng), unit(rng)};
    std::array<double, 3> xi{gauss(rng), gauss(rng), dim == 3 ? gauss(rng) : 0.0};
    double nrm = std::sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
    for (double& v : xi) v /= nrm;
    double im = (1.0 + 4.0 * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    cplx z{-3.0 + 8.0 * unit(rng), im};
    for (int jp = 1; jp <= J; ++jp) {
      CompensatedSum<cplx> acc;
      double mag = 0.0;
      for (const auto& t : terms[jp]) {
        cplx v = t.evaluate(x, xi, z, lp);
        acc.add(v);
        mag = std::max(mag, std::abs(v));
      }
      cplx v = qs[jp].evaluate(x, xi, z, lp) * (lp.evaluate(x, xi) - z);
      acc.add(v);
      mag = std::max(mag, std::abs(v));
      rep.numeric_residual = std::max(rep.numeric_residual, std::abs(acc.value()) / std::max(mag, 1.0));
    }
  }
  rep.ok = ok && rep.numeric_residual <= tol;
  return rep;
}

}  // namespace psitrace
