#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psitrace/common.hpp"

namespace psitrace {

/// Trigonometric polynomial on the unit torus T^n: sum of c_gamma e^{2 pi i gamma.x}.
/// Canonical form: no stored zero amplitudes.
class TorusSeries {
 public:
  TorusSeries() = default;
  explicit TorusSeries(int dim);

  static TorusSeries constant(int dim, cplx value);
  /// amp * cos(2 pi freq.x)
  static TorusSeries cosine(int dim, const Index3& freq, cplx amp);
  /// amp * sin(2 pi freq.x)
  static TorusSeries sine(int dim, const Index3& freq, cplx amp);

  int dim() const { return dim_; }
  const std::map<Index3, cplx>& coeffs() const { return coeffs_; }
  bool is_zero() const { return coeffs_.empty(); }
  cplx coefficient(const Index3& freq) const;
  cplx mean() const { return coefficient({0, 0, 0}); }
  int max_frequency() const;
  double max_abs_coefficient() const;

  /// Adds `value` to the amplitude at `freq`; drops the entry if it cancels.
  void accumulate(const Index3& freq, cplx value);

  cplx operator()(std::span<const double> x) const;

  TorusSeries& operator+=(const TorusSeries& other);
  TorusSeries& operator-=(const TorusSeries& other);
  TorusSeries& operator*=(cplx s);
  friend TorusSeries operator+(TorusSeries a, const TorusSeries& b) { return a += b; }
  friend TorusSeries operator-(TorusSeries a, const TorusSeries& b) { return a -= b; }
  friend TorusSeries operator*(TorusSeries a, cplx s) { return a *= s; }
  friend TorusSeries operator*(cplx s, TorusSeries a) { return a *= s; }
  /// Pointwise product (convolution of coefficients).
  friend TorusSeries operator*(const TorusSeries& a, const TorusSeries& b);
  bool operator==(const TorusSeries& other) const = default;

  /// d/dx_axis: c_gamma -> 2 pi i gamma_axis c_gamma.
  TorusSeries dx(int axis) const;
  /// Pointwise complex conjugate.
  TorusSeries conj() const;
  bool is_real(double tol = 1e-14) const;
  bool approx_equal(const TorusSeries& other, double tol) const;

 private:
  void prune(double scale);

  int dim_ = 0;
  std::map<Index3, cplx> coeffs_;
};

/// Key of a homogeneous monomial xi^alpha |xi|^s.
struct MonomialKey {
  Index3 alpha{0, 0, 0};
  cplx s{0.0, 0.0};
  bool operator<(const MonomialKey& o) const {
    if (alpha != o.alpha) return alpha < o.alpha;
    if (s.real() != o.s.real()) return s.real() < o.s.real();
    return s.imag() < o.s.imag();
  }
  bool operator==(const MonomialKey& o) const = default;
};

/// Finite sum of g_k(x) xi^{alpha_k} |xi|^{s_k}, all of one homogeneity degree in xi.
class HomogeneousSymbol {
 public:
  HomogeneousSymbol() = default;
  HomogeneousSymbol(int dim, cplx degree);

  /// coeff(x) * xi^alpha |xi|^s; the degree is |alpha| + s.
  static HomogeneousSymbol monomial(int dim, const Index3& alpha, cplx s, const TorusSeries& coeff);
  /// coeff(x) * |xi|^s.
  static HomogeneousSymbol radial(int dim, cplx s, const TorusSeries& coeff);
  static HomogeneousSymbol constant(int dim, cplx value) {
    return radial(dim, 0.0, TorusSeries::constant(dim, value));
  }

  int dim() const { return dim_; }
  cplx degree() const { return degree_; }
  bool is_zero() const { return terms_.empty(); }
  const std::map<MonomialKey, TorusSeries>& terms() const { return terms_; }
  size_t size() const { return terms_.size(); }

  /// Adds coeff * xi^alpha |xi|^s; rejects a term whose degree differs from degree().
  void add_term(const Index3& alpha, cplx s, const TorusSeries& coeff);

  cplx evaluate(std::span<const double> x, std::span<const double> xi) const;
  /// Value of the x-mean at xi.
  cplx evaluate_mean(std::span<const double> xi) const;
  /// Symbol with each coefficient replaced by its x-mean.
  HomogeneousSymbol x_mean() const;

  bool is_real(double tol = 1e-14) const;
  /// True when every term is a polynomial in xi (|xi|^s with s a non-negative even integer).
  bool is_polynomial() const;
  int max_frequency() const;
  double max_abs_coefficient() const;
  bool approx_equal(const HomogeneousSymbol& other, double tol) const;
  bool operator==(const HomogeneousSymbol& other) const = default;

  HomogeneousSymbol& operator+=(const HomogeneousSymbol& other);
  HomogeneousSymbol& operator-=(const HomogeneousSymbol& other);
  HomogeneousSymbol& operator*=(cplx s);
  friend HomogeneousSymbol operator+(HomogeneousSymbol a, const HomogeneousSymbol& b) { return a += b; }
  friend HomogeneousSymbol operator-(HomogeneousSymbol a, const HomogeneousSymbol& b) { return a -= b; }
  friend HomogeneousSymbol operator*(HomogeneousSymbol a, cplx s) { return a *= s; }
  friend HomogeneousSymbol operator*(cplx s, HomogeneousSymbol a) { return a *= s; }
  friend HomogeneousSymbol operator*(const HomogeneousSymbol& a, const HomogeneousSymbol& b);
  /// Multiplies every coefficient by a function of x.
  friend HomogeneousSymbol operator*(const HomogeneousSymbol& a, const TorusSeries& g);

 private:
  void check_compatible(const HomogeneousSymbol& other, const char* op) const;

  int dim_ = 0;
  cplx degree_{0.0, 0.0};
  std::map<MonomialKey, TorusSeries> terms_;
};

/// d/dxi_axis, exact: d(xi^a |xi|^s) = a_j xi^{a-e_j}|xi|^s + s xi^{a+e_j}|xi|^{s-2}.
HomogeneousSymbol d_xi(const HomogeneousSymbol& a, int axis);
/// d/dx_axis applied to every coefficient.
HomogeneousSymbol d_x(const HomogeneousSymbol& a, int axis);
/// Mixed derivative d_xi^alpha.
HomogeneousSymbol d_xi(const HomogeneousSymbol& a, const Index3& alpha);
HomogeneousSymbol d_x(const HomogeneousSymbol& a, const Index3& alpha);
HomogeneousSymbol conj(const HomogeneousSymbol& a);

/// Low-frequency cutoff psi_1(scale * |xi|). A scale of zero means "no cutoff" (psi == 1),
/// allowed only for components polynomial in xi.
struct CutoffSpec {
  double scale = 1.0;
  bool none() const { return scale == 0.0; }
  double value(double radius) const;
  bool operator==(const CutoffSpec&) const = default;
};

/// psi_1(r) = B(2r-1)/(B(2r-1)+B(2-2r)), B(u) = exp(-1/u) for u > 0.
double psi1(double r);

struct SymbolComponent {
  HomogeneousSymbol h;
  CutoffSpec cutoff;
  bool operator==(const SymbolComponent&) const = default;
};

/// Finite classical symbol sum_j h_{m-j}(x,xi) psi_1(t_j |xi|).
class PolyHomogeneousSymbol {
 public:
  PolyHomogeneousSymbol() = default;
  PolyHomogeneousSymbol(int dim, cplx order);
  PolyHomogeneousSymbol(int dim, cplx order, std::vector<SymbolComponent> components);

  int dim() const { return dim_; }
  cplx order() const { return order_; }
  size_t size() const { return components_.size(); }
  const std::vector<SymbolComponent>& components() const { return components_; }
  const SymbolComponent& component(size_t j) const { return components_.at(j); }
  /// Component of degree order - j, or the zero symbol when j is beyond the stored list.
  HomogeneousSymbol homogeneous(size_t j) const;
  CutoffSpec cutoff(size_t j) const;

  /// Appends the component of degree order - size().
  void push_back(const HomogeneousSymbol& h, CutoffSpec cutoff = {});
  void set_component(size_t j, const HomogeneousSymbol& h, CutoffSpec cutoff = {});

  /// Realized symbol a(x, xi) including cutoffs.
  cplx evaluate(std::span<const double> x, std::span<const double> xi) const;
  /// x-mean of the realized symbol at xi.
  cplx evaluate_mean(std::span<const double> xi) const;
  bool is_real(double tol = 1e-14) const;
  bool is_x_independent() const;

  PolyHomogeneousSymbol& operator*=(cplx s);
  friend PolyHomogeneousSymbol operator*(cplx s, PolyHomogeneousSymbol a) { return a *= s; }
  bool operator==(const PolyHomogeneousSymbol&) const = default;

 private:
  void validate(const SymbolComponent& c, size_t j) const;

  int dim_ = 0;
  cplx order_{0.0, 0.0};
  std::vector<SymbolComponent> components_;
};

/// Nodes and weights on S^{n-1} plus a uniform torus grid resolution.
class SphereGrid {
 public:
  /// n = 2: `resolution` equispaced angles. n = 3: `resolution` Gauss-Legendre nodes in
  /// cos(theta) times 2*resolution azimuths.
  SphereGrid(int dim, int resolution, int torus_resolution = 16);

  int dim() const { return dim_; }
  int resolution() const { return resolution_; }
  int torus_resolution() const { return torus_resolution_; }
  const std::vector<std::array<double, 3>>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  /// Uniform grid points of T^n (torus_resolution^n points, unit total weight).
  std::vector<std::array<double, 3>> torus_points() const;

 private:
  int dim_;
  int resolution_;
  int torus_resolution_;
  std::vector<std::array<double, 3>> nodes_;
  std::vector<double> weights_;
};

/// |S^{n-1}|.
double sphere_area(int dim);
/// Closed form of the sphere moment of xi^alpha over S^{n-1}.
double sphere_moment(const Index3& alpha, int dim);
/// Fault injection for the self-test: scales one tabulated moment (chosen by the seed) by
/// 1 + rel and describes the change. reset_sphere_moment_table restores the closed forms.
std::string perturb_sphere_moment_table(unsigned seed, double rel = 1e-6);
void reset_sphere_moment_table();

/// Integral over T^n x S^{n-1} of g (the x-integral keeps only the zeroth Fourier mode).
cplx sphere_torus_integral(const HomogeneousSymbol& g);
/// Same integral evaluated on a SphereGrid; used as the independent cross-check.
cplx sphere_torus_quadrature(const HomogeneousSymbol& g, const SphereGrid& grid);

class EllipticOperatorSpec;

/// Integral over T^n x S^{n-1} of g * l_{m0}^{-sigma}; grid doubled until the relative
/// change is below `rel_tol`.
cplx weighted_coefficient_integral(const HomogeneousSymbol& g, const EllipticOperatorSpec& op,
                                   cplx sigma, double rel_tol = 1e-10);

/// Real elliptic classical operator symbol l ~ sum_j l_{m0-j}.
class EllipticOperatorSpec {
 public:
  /// Validates real order m0 > 0, real-valued components and
  /// l_{m0}(x, xi) >= c0 |xi|^{m0} on a sphere x torus sampling grid.
  EllipticOperatorSpec(PolyHomogeneousSymbol symbol, double c0, double c1 = 0.0);

  const PolyHomogeneousSymbol& symbol() const { return symbol_; }
  int dim() const { return symbol_.dim(); }
  double order() const { return m0_; }
  double c0() const { return c0_; }
  double c1() const { return c1_; }
  const HomogeneousSymbol& principal() const { return symbol_.component(0).h; }
  /// True when no component depends on x.
  bool is_multiplier() const { return symbol_.is_x_independent(); }
  /// Minimum of l_{m0} over the validation grid of the unit sphere.
  double min_principal_on_sphere() const { return min_principal_; }

 private:
  PolyHomogeneousSymbol symbol_;
  double m0_;
  double c0_;
  double c1_;
  double min_principal_ = 0.0;
};

}  // namespace psitrace
