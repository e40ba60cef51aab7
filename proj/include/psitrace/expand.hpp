#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "psitrace/funcalc.hpp"

namespace psitrace {

/// t^p g(x, xi) f^{(r)}(t l_{m0}(x, xi)).
struct FunctionalTerm {
  int p = 0;
  HomogeneousSymbol g;
  int r = 0;
};

/// Sum of FunctionalTerms; entries with equal (p, r, deg g) are merged into one symbol.
class FunctionalTermSum {
 public:
  FunctionalTermSum() = default;
  explicit FunctionalTermSum(int dim) : dim_(dim) {}

  /// Symbol of order j of f(tL): terms (r, scalar * d, r) of the functional expansion.
  static FunctionalTermSum from_order(const FunctionalSymbolExpansion& fe, size_t j);

  int dim() const { return dim_; }
  bool is_zero() const { return terms_.empty(); }
  size_t size() const { return terms_.size(); }
  std::vector<FunctionalTerm> terms() const;

  void add(int p, const HomogeneousSymbol& g, int r);
  FunctionalTermSum& operator+=(const FunctionalTermSum& o);
  /// Multiplies every g on the left by h.
  friend FunctionalTermSum operator*(const HomogeneousSymbol& h, const FunctionalTermSum& s);

  /// Value at (x, xi) for a given t, with f^{(r)}(u) supplied as fr(r, u).
  template <typename F>
  cplx evaluate(std::span<const double> x, std::span<const double> xi, double t, const HomogeneousSymbol& principal,
                F&& fr) const {
    double l = principal.evaluate(x, xi).real();
    cplx s{};
    for (const auto& [key, g] : terms_) {
      auto [p, r, re, im] = key;
      (void)re;
      (void)im;
      s += std::pow(t, p) * g.evaluate(x, xi) * fr(r, t * l);
    }
    return s;
  }

 private:
  using Key = std::tuple<int, int, double, double>;
  int dim_ = 0;
  std::map<Key, HomogeneousSymbol> terms_;
};

/// Leibniz and chain rule: (p, g, r) -> (p, d_x g, r) + (p + 1, g d_x l_{m0}, r + 1).
FunctionalTermSum ft_dx(const FunctionalTermSum& s, const EllipticOperatorSpec& L, int axis);
FunctionalTermSum ft_dx(const FunctionalTermSum& s, const EllipticOperatorSpec& L, const Index3& alpha);
/// Same rule in xi.
FunctionalTermSum ft_dxi(const FunctionalTermSum& s, const EllipticOperatorSpec& L, int axis);

/// int_0^inf f^{(r)}(u) u^{s-1} du. Needs a bounded support; near u = 0 either
/// supp f^{(r)} stays away from 0, or Re s > r (Re s > 0 for r = 0).
cplx mellin_moment(const TestFunction& f, cplx s, int r = 0);
/// Analytic continuation of mellin_moment(f, s, 0) as -M[f', s + 1] / s, for f with f'
/// supported away from 0 (f constant near 0); equals the plain integral when Re s > 0.
cplx mellin_moment_continued(const TestFunction& f, cplx s);

struct ReducedTerm {
  cplx exponent;
  cplx coefficient;
};

/// Leading behaviour of int g f^{(r)}(t l_{m0}) dx dxi: exponent p - sigma and coefficient
/// M[f^{(r)}, sigma] / m0 * int_{T x S} g l_{m0}^{-sigma}, sigma = (deg g + n) / m0.
ReducedTerm trace_term_reduce(const FunctionalTerm& term, const EllipticOperatorSpec& L, const TestFunction& f);

struct ExpansionTerm {
  cplx exponent;
  cplx coefficient;
  std::string provenance;
};

/// sum_e c_e t^e plus an optional constant term.
class ExpansionPrediction {
 public:
  /// Adds c t^e, merging with an existing exponent within 1e-9.
  void add(cplx exponent, cplx coefficient, const std::string& provenance);
  void set_constant(cplx value, const std::string& provenance);

  const std::vector<ExpansionTerm>& terms() const { return terms_; }
  const std::optional<ExpansionTerm>& constant() const { return constant_; }
  const std::vector<std::string>& notes() const { return notes_; }
  /// Coefficient at an exponent (0 when absent); exponent 0 includes the constant.
  cplx coefficient_at(cplx exponent, double tol = 1e-9) const;
  cplx evaluate(double t) const;
  /// Drops terms below rel * (largest coefficient), leaving a note for each.
  void prune(double rel = 1e-12);
  /// exponent_re, exponent_im, coefficient_re, coefficient_im, provenance.
  std::string to_csv() const;

 private:
  std::vector<ExpansionTerm> terms_;
  std::optional<ExpansionTerm> constant_;
  std::vector<std::string> notes_;
};

/// Terms of tr(A f(tL)) up to the ladder index N - 1, grouped by ladder index j' and by
/// (p, r, degree). Exposed for diagnostics and the structural checks.
struct TraceTermGroup {
  int jprime = 0;
  FunctionalTerm term;
};
std::vector<TraceTermGroup> assemble_trace_terms(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, int N,
                                                 int threads = 0);

/// Expansion of tr(A eta(tL)), eta supported in (0, inf): exponents -(m + n - j') / m0,
/// j' < N. For m in {-n, -n+1, ...} the t^0 coefficient is checked against
/// res(A) / m0 * int eta du/u and stored as the constant term.
ExpansionPrediction predict_expansion_res(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L,
                                          const TestFunction& eta, int N, int threads = 0);

/// Expansion of tr(A chi(tL)), chi == 1 near 0: constant TR(A) plus the ladder powers.
ExpansionPrediction predict_expansion_TR(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L,
                                         const TestFunction& chi, int N, int threads = 0);

/// E_t = sum_i int (a_{m-i} psi_i - [Re(m - i + n) > 0] a_{m-i}) chi(t l_{m0}) dx dxi by
/// torus x sphere x radial quadrature; tends to TR(A) as t -> 0.
cplx tr_integral_Et(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& chi, double t);

}  // namespace psitrace
