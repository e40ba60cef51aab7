#include "psitrace/expand.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>

#include "psitrace/calculus.hpp"
#include "psitrace/parallel.hpp"
#include "psitrace/quadrature.hpp"
#include "psitrace/traces.hpp"

namespace psitrace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

cplx cpow(double base, cplx e) { return std::exp(e * std::log(base)); }

std::string format_exponent(cplx e) {
  std::ostringstream o;
  o.precision(12);
  o << e.real();
  if (e.imag() != 0.0) o << (e.imag() > 0 ? "+" : "") << e.imag() << "i";
  return o.str();
}

}  // namespace

// ------------------------------------------------------------ FunctionalTermSum

FunctionalTermSum FunctionalTermSum::from_order(const FunctionalSymbolExpansion& fe, size_t j) {
  FunctionalTermSum out(fe.dim);
  for (const auto& t : fe.orders.at(j)) out.add(t.r, t.d * t.scalar, t.r);
  return out;
}

std::vector<FunctionalTerm> FunctionalTermSum::terms() const {
  std::vector<FunctionalTerm> out;
  for (const auto& [key, g] : terms_) out.push_back({std::get<0>(key), g, std::get<1>(key)});
  return out;
}

void FunctionalTermSum::add(int p, const HomogeneousSymbol& g, int r) {
  if (g.is_zero()) return;
  if (dim_ == 0) dim_ = g.dim();
  if (g.dim() != dim_) throw DomainError("functional term sum: dimension mismatch");
  Key key{p, r, g.degree().real(), g.degree().imag()};
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    terms_.emplace(key, g);
    return;
  }
  it->second += g;
  if (it->second.is_zero()) terms_.erase(it);
}

FunctionalTermSum& FunctionalTermSum::operator+=(const FunctionalTermSum& o) {
  for (const auto& [key, g] : o.terms_) add(std::get<0>(key), g, std::get<1>(key));
  return *this;
}

FunctionalTermSum operator*(const HomogeneousSymbol& h, const FunctionalTermSum& s) {
  FunctionalTermSum out(s.dim());
  if (h.is_zero()) return out;
  for (const auto& t : s.terms()) out.add(t.p, h * t.g, t.r);
  return out;
}

FunctionalTermSum ft_dx(const FunctionalTermSum& s, const EllipticOperatorSpec& L, int axis) {
  HomogeneousSymbol dl = d_x(L.principal(), axis);
  FunctionalTermSum out(s.dim());
  for (const auto& t : s.terms()) {
    out.add(t.p, d_x(t.g, axis), t.r);
    if (!dl.is_zero()) out.add(t.p + 1, t.g * dl, t.r + 1);
  }
  return out;
}

FunctionalTermSum ft_dx(const FunctionalTermSum& s, const EllipticOperatorSpec& L, const Index3& alpha) {
  FunctionalTermSum out = s;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < alpha[axis]; ++k) out = ft_dx(out, L, axis);
  }
  return out;
}

FunctionalTermSum ft_dxi(const FunctionalTermSum& s, const EllipticOperatorSpec& L, int axis) {
  HomogeneousSymbol dl = d_xi(L.principal(), axis);
  FunctionalTermSum out(s.dim());
  for (const auto& t : s.terms()) {
    out.add(t.p, d_xi(t.g, axis), t.r);
    if (!dl.is_zero()) out.add(t.p + 1, t.g * dl, t.r + 1);
  }
  return out;
}

// ---------------------------------------------------------------- Mellin moments

cplx mellin_moment(const TestFunction& f, cplx s, int r) {
  if (r < 0) throw DomainError("mellin moment: negative derivative order");
  IntervalSet d = f.derivative_support(r).intersect(IntervalSet::span(0.0, kInf));
  if (!d.bounded()) throw DomainError("mellin moment: support of f^(r) on [0, inf) is unbounded");
  if (d.empty()) return 0.0;
  if (d.lo() <= 0.0) {
    double need = r == 0 ? 0.0 : static_cast<double>(r);
    if (!(s.real() > need)) {
      std::ostringstream msg;
      msg << "mellin moment: supp f^(" << r << ") reaches 0, so Re s must exceed " << need << " (s = "
          << format_complex(s) << ")";
      throw DomainError(msg.str());
    }
  }
  auto integrand = [&](double u) { return f.derivative(r, u) * cpow(u, s - 1.0); };
  CompensatedSum<cplx> acc;
  for (const auto& part : d.parts()) {
    double lo = std::max(part.lo, 0.0);
    if (lo == 0.0) {
      acc.add(quad::integrate_endpoint_singular(integrand, 0.0, part.hi, 1e-14));
    } else {
      acc.add(quad::integrate_complex(integrand, lo, part.hi, 1e-14));
    }
  }
  return acc.value();
}

cplx mellin_moment_continued(const TestFunction& f, cplx s) {
  if (!f.derivative_away_from_zero(1)) {
    throw DomainError("continued mellin moment: f' must be supported away from 0");
  }
  if (std::abs(s) < 1e-12) throw DomainError("continued mellin moment: pole at s = 0");
  return -mellin_moment(f, s + 1.0, 1) / s;
}

ReducedTerm trace_term_reduce(const FunctionalTerm& term, const EllipticOperatorSpec& L, const TestFunction& f) {
  const int n = L.dim();
  const double m0 = L.order();
  cplx sigma = snap((term.g.degree() + static_cast<double>(n)) / m0);
  cplx exponent = snap(static_cast<double>(term.p) - sigma);
  bool ok = f.supported_in_positive() || (term.r >= 1 && f.derivative_away_from_zero(term.r));
  if (!ok) {
    std::ostringstream msg;
    msg << "trace term reduction: f^(" << term.r
        << ") must be supported away from 0 (r = 0 terms of a cutoff chi need the finite-part route)";
    throw DomainError(msg.str());
  }
  if (term.g.is_zero()) return {exponent, 0.0};
  cplx m = mellin_moment(f, sigma, term.r);
  if (m == cplx{}) return {exponent, 0.0};
  return {exponent, m * weighted_coefficient_integral(term.g, L, sigma) / m0};
}

// ----------------------------------------------------------- ExpansionPrediction

void ExpansionPrediction::add(cplx exponent, cplx coefficient, const std::string& provenance) {
  for (auto& t : terms_) {
    if (std::abs(t.exponent - exponent) <= 1e-9) {
      t.coefficient += coefficient;
      if (!provenance.empty()) t.provenance += (t.provenance.empty() ? "" : "; ") + provenance;
      return;
    }
  }
  ExpansionTerm term{snap(exponent), coefficient, provenance};
  auto pos = std::find_if(terms_.begin(), terms_.end(), [&](const ExpansionTerm& t) {
    if (t.exponent.real() != term.exponent.real()) return t.exponent.real() > term.exponent.real();
    return t.exponent.imag() > term.exponent.imag();
  });
  terms_.insert(pos, term);
}

void ExpansionPrediction::set_constant(cplx value, const std::string& provenance) {
  constant_ = ExpansionTerm{0.0, value, provenance};
}

cplx ExpansionPrediction::coefficient_at(cplx exponent, double tol) const {
  cplx c{};
  for (const auto& t : terms_) {
    if (std::abs(t.exponent - exponent) <= tol) c += t.coefficient;
  }
  if (constant_ && std::abs(exponent) <= tol) c += constant_->coefficient;
  return c;
}

cplx ExpansionPrediction::evaluate(double t) const {
  CompensatedSum<cplx> acc;
  if (constant_) acc.add(constant_->coefficient);
  for (const auto& term : terms_) acc.add(term.coefficient * cpow(t, term.exponent));
  return acc.value();
}

void ExpansionPrediction::prune(double rel) {
  double big = constant_ ? std::abs(constant_->coefficient) : 0.0;
  for (const auto& t : terms_) big = std::max(big, std::abs(t.coefficient));
  std::vector<ExpansionTerm> kept;
  for (const auto& t : terms_) {
    if (std::abs(t.coefficient) < rel * big) {
      std::ostringstream o;
      o << "pruned t^" << format_exponent(t.exponent) << " (|c| = " << std::abs(t.coefficient) << ")";
      notes_.push_back(o.str());
    } else {
      kept.push_back(t);
    }
  }
  terms_ = std::move(kept);
}

std::string ExpansionPrediction::to_csv() const {
  std::ostringstream o;
  o.precision(17);
  o << "exponent,re_c,im_c,provenance\n";
  auto row = [&](const ExpansionTerm& t) {
    std::string prov = t.provenance;
    std::replace(prov.begin(), prov.end(), '"', '\'');
    o << format_exponent(t.exponent) << "," << t.coefficient.real() << "," << t.coefficient.imag() << ",\"" << prov
      << "\"\n";
  };
  if (constant_) row(*constant_);
  for (const auto& t : terms_) row(t);
  return o.str();
}

// ------------------------------------------------------------------- assembly

std::vector<TraceTermGroup> assemble_trace_terms(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, int N,
                                                 int threads) {
  if (A.dim() != L.dim()) throw DomainError("trace expansion: dimension mismatch");
  if (N < 1) throw DomainError("trace expansion: need N >= 1");
  const int n = A.dim();
  FunctionalSymbolExpansion fe = fc_symbols(L, N - 1, threads);
  std::vector<FunctionalTermSum> B;
  for (int j = 0; j < N; ++j) B.push_back(FunctionalTermSum::from_order(fe, j));

  // x-derivatives of b_j, built one axis at a time
  std::map<std::pair<int, Index3>, FunctionalTermSum> dB;
  std::function<const FunctionalTermSum&(int, const Index3&)> derived;
  derived = [&](int j, const Index3& alpha) -> const FunctionalTermSum& {
    auto key = std::make_pair(j, alpha);
    auto it = dB.find(key);
    if (it != dB.end()) return it->second;
    if (abs_index(alpha) == 0) return dB.emplace(key, B[j]).first->second;
    int axis = 0;
    while (alpha[axis] == 0) ++axis;
    Index3 lower = alpha;
    --lower[axis];
    FunctionalTermSum next = ft_dx(derived(j, lower), L, axis);
    return dB.emplace(key, std::move(next)).first->second;
  };

  std::vector<TraceTermGroup> out;
  for (int jp = 0; jp < N; ++jp) {
    FunctionalTermSum acc(n);
    for (int i = 0; i <= jp && static_cast<size_t>(i) < A.size(); ++i) {
      const HomogeneousSymbol& a = A.component(i).h;
      if (a.is_zero()) continue;
      for (int j = 0; i + j <= jp; ++j) {
        for (const Index3& alpha : multi_indices(n, jp - i - j)) {
          HomogeneousSymbol da = d_xi(a, alpha);
          if (da.is_zero()) continue;
          const FunctionalTermSum& db = derived(j, alpha);
          if (db.is_zero()) continue;
          acc += (da * star_coefficient(alpha)) * db;
        }
      }
    }
    for (auto& t : acc.terms()) out.push_back({jp, std::move(t)});
  }
  return out;
}

namespace {

std::string group_tag(const char* route, const TraceTermGroup& g) {
  std::ostringstream o;
  o << route << " j'=" << g.jprime << " p=" << g.term.p << " r=" << g.term.r;
  return o.str();
}

}  // namespace

ExpansionPrediction predict_expansion_res(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L,
                                          const TestFunction& eta, int N, int threads) {
  if (!eta.supported_in_positive()) throw DomainError("res expansion: eta must have bounded support in (0, inf)");
  const int n = A.dim();
  const double m0 = L.order();
  const cplx m = A.order();
  std::vector<TraceTermGroup> groups = assemble_trace_terms(A, L, N, threads);
  std::vector<ReducedTerm> red =
      parallel_map(groups.size(), threads, [&](size_t k) { return trace_term_reduce(groups[k].term, L, eta); });

  const bool ladder = in_integer_ladder(m, n);
  const long j0 = ladder ? std::lround(m.real()) + n : -1;
  double scale = 0.0;
  for (const auto& r : red) scale = std::max(scale, std::abs(r.coefficient));

  ExpansionPrediction pred;
  cplx t0{};
  for (size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    cplx want = snap(-(m + static_cast<double>(n) - static_cast<double>(g.jprime)) / m0);
    if (std::abs(red[k].exponent - want) > 1e-9) {
      throw std::logic_error("res expansion: exponent off the ladder at " + group_tag("res", g));
    }
    if (g.jprime == j0) {
      if ((g.term.p != 0 || g.term.r != 0) && std::abs(red[k].coefficient) > 1e-10 * std::max(scale, 1.0)) {
        throw std::logic_error("res expansion: non-vanishing t^0 contribution from " + group_tag("res", g));
      }
      t0 += red[k].coefficient;
      continue;
    }
    pred.add(red[k].exponent, red[k].coefficient, group_tag("res", g));
  }
  if (ladder && j0 < N) {
    cplx want = residue_density_integrated(A) / m0 * mellin_moment(eta, 0.0, 0);
    if (std::abs(t0 - want) > 1e-8 * std::max(1.0, std::abs(want))) {
      std::ostringstream msg;
      msg << "res expansion: t^0 coefficient " << format_complex(t0) << " differs from res(A)/m0 int eta du/u = "
          << format_complex(want);
      throw std::logic_error(msg.str());
    }
    pred.set_constant(t0, "residue: res(A)/m0 * int eta(u) du/u");
  }
  pred.prune(1e-12);
  return pred;
}

ExpansionPrediction predict_expansion_TR(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L,
                                         const TestFunction& chi, int N, int threads) {
  const int n = A.dim();
  const double m0 = L.order();
  if (in_integer_ladder(A.order(), n)) {
    throw DomainError("TR expansion: order must lie outside {-n, -n+1, ...}; order = " + format_complex(A.order()));
  }
  if (!(chi.flat_radius() > 0.0)) throw DomainError("TR expansion: chi must equal 1 near 0");
  if (!chi.derivative_away_from_zero(1)) throw DomainError("TR expansion: chi' must have bounded support");

  std::vector<TraceTermGroup> groups = assemble_trace_terms(A, L, N, threads);
  std::vector<ReducedTerm> red = parallel_map(groups.size(), threads, [&](size_t k) -> ReducedTerm {
    const FunctionalTerm& t = groups[k].term;
    if (t.r >= 1) return trace_term_reduce(t, L, chi);
    // int a chi(t l) splits into its finite part (inside TR) and the power below
    cplx sigma = snap((t.g.degree() + static_cast<double>(n)) / m0);
    cplx mel = sigma.real() > 0.0 && groups[k].jprime == 0 ? mellin_moment(chi, sigma, 0)
                                                           : mellin_moment_continued(chi, sigma);
    return {snap(static_cast<double>(t.p) - sigma), mel * weighted_coefficient_integral(t.g, L, sigma) / m0};
  });

  ExpansionPrediction pred;
  pred.set_constant(canonical_trace(A), "canonical trace (finite part)");
  for (size_t k = 0; k < groups.size(); ++k) pred.add(red[k].exponent, red[k].coefficient, group_tag("TR", groups[k]));
  pred.prune(1e-12);
  return pred;
}

// ------------------------------------------------------------------------ E_t

cplx tr_integral_Et(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& chi, double t) {
  const int n = A.dim();
  const double m0 = L.order();
  if (in_integer_ladder(A.order(), n)) throw DomainError("E_t: order must lie outside {-n, -n+1, ...}");
  if (!(t > 0.0)) throw DomainError("E_t: t must be positive");
  IntervalSet supp = chi.support().intersect(IntervalSet::span(0.0, kInf));
  if (!supp.bounded()) throw DomainError("E_t: chi must have bounded support");
  const double chi_hi = supp.empty() ? 0.0 : supp.hi();
  const double flat = std::min(chi.flat_radius(), chi_hi);

  const HomogeneousSymbol& lp = L.principal();
  const bool x_dep = lp.max_frequency() > 0;
  int freq = lp.max_frequency();
  for (const auto& c : A.components()) freq = std::max(freq, c.h.max_frequency());
  SphereGrid grid(n, n == 2 ? 64 : 24, x_dep ? std::max(16, 4 * freq + 4) : 1);
  auto xs = x_dep ? grid.torus_points() : std::vector<std::array<double, 3>>{{0.0, 0.0, 0.0}};
  const double wx = 1.0 / static_cast<double>(xs.size());

  struct Part {
    cplx s;
    double ti;
    bool subtract;
    cplx inner;  // chi-free integral over [lo, 1/ti]
    cplx outer;  // int_{flat}^{chi_hi} chi(u) u^{s/m0 - 1} du
  };
  std::vector<Part> parts(A.size());
  for (size_t i = 0; i < A.size(); ++i) {
    const auto& c = A.component(i);
    Part& pt = parts[i];
    pt.s = c.h.degree() + static_cast<double>(n);
    pt.ti = c.cutoff.scale;
    if (c.h.is_zero() || c.cutoff.none()) continue;  // polynomial: a psi - a = 0
    if (pt.s.real() == 0.0) throw DomainError("E_t: component with Re(deg + n) = 0");
    pt.subtract = pt.s.real() > 0.0;
    auto f = [&](double r) { return (pt.subtract ? c.cutoff.value(r) - 1.0 : c.cutoff.value(r)) * cpow(r, pt.s - 1.0); };
    if (pt.subtract) pt.inner = quad::integrate_endpoint_singular(f, 0.0, 0.5 / pt.ti, 1e-13);
    pt.inner += quad::integrate_complex(f, 0.5 / pt.ti, 1.0 / pt.ti, 1e-13);
    if (!pt.subtract && chi_hi > flat) {
      pt.outer = quad::integrate_complex([&](double u) { return chi(u) * cpow(u, pt.s / m0 - 1.0); }, flat, chi_hi,
                                         1e-13);
    }
  }

  CompensatedSum<cplx> acc;
  for (const auto& x : xs) {
    for (size_t k = 0; k < grid.nodes().size(); ++k) {
      const auto& w = grid.nodes()[k];
      double l = lp.evaluate(x, w).real();
      double r_chi = std::pow(chi_hi / (t * l), 1.0 / m0);
      double r_flat = std::pow(flat / (t * l), 1.0 / m0);
      for (size_t i = 0; i < A.size(); ++i) {
        const auto& c = A.component(i);
        const Part& pt = parts[i];
        if (c.h.is_zero() || c.cutoff.none()) continue;
        cplx hv = x_dep ? c.h.evaluate(x, w) : c.h.evaluate_mean(w);
        if (hv == cplx{}) continue;
        auto integrand = [&](double r) {
          double psi = c.cutoff.value(r);
          return ((pt.subtract ? psi - 1.0 : psi) * chi(t * std::pow(r, m0) * l)) * cpow(r, pt.s - 1.0);
        };
        const double lo = pt.subtract ? 0.0 : 0.5 / pt.ti;
        const double top = pt.subtract ? std::min(1.0 / pt.ti, r_chi) : r_chi;
        cplx radial{};
        if (r_flat >= 1.0 / pt.ti) {
          // chi(t l r^m0) == 1 up to 1/ti
          radial = pt.inner;
          if (!pt.subtract) {
            radial += (cpow(r_flat, pt.s) - cpow(1.0 / pt.ti, pt.s)) / pt.s;
            // u = t l r^m0 on [r_flat, r_chi]
            radial += cpow(t * l, -pt.s / m0) * pt.outer / m0;
          }
        } else {
          std::vector<double> br{lo, 0.5 / pt.ti, 1.0 / pt.ti, r_flat, r_chi};
          std::sort(br.begin(), br.end());
          br.erase(std::unique(br.begin(), br.end()), br.end());
          for (size_t b = 0; b + 1 < br.size(); ++b) {
            double a0 = std::max(br[b], lo), b0 = std::min(br[b + 1], top);
            if (!(b0 > a0)) continue;
            radial += a0 == 0.0 ? quad::integrate_endpoint_singular(integrand, a0, b0, 1e-13)
                                : quad::integrate_complex(integrand, a0, b0, 1e-12);
          }
        }
        acc.add(wx * grid.weights()[k] * hv * radial);
      }
    }
  }
  return acc.value();
}

}  // namespace psitrace
