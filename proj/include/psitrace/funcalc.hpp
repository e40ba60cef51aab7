#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "psitrace/parametrix.hpp"
#include "psitrace/testfunction.hpp"

namespace psitrace {

/// d * scalar * f^{(r)}(l_{m0}).
struct FunctionalSymbolTerm {
  HomogeneousSymbol d;
  int r = 0;
  double scalar = 1.0;
};

/// orders[j] lists the terms of the order-j symbol of f(L).
struct FunctionalSymbolExpansion {
  int dim = 0;
  double m0 = 0.0;
  std::vector<std::vector<FunctionalSymbolTerm>> orders;

  /// Order-j symbol at (x, xi) given f^{(r)} evaluated at l_{m0}(x, xi) as `fr(r, value)`.
  template <typename F>
  cplx evaluate(size_t j, std::span<const double> x, std::span<const double> xi, const HomogeneousSymbol& principal,
                F&& fr) const {
    double l = principal.evaluate(x, xi).real();
    cplx s{};
    for (const auto& t : orders.at(j)) s += t.d.evaluate(x, xi) * t.scalar * fr(t.r, l);
    return s;
  }
};

/// Transcribes the parametrix: power p = 1 + r becomes (d_p, r, (-1)^r / r!).
FunctionalSymbolExpansion fc_symbols(const EllipticOperatorSpec& L, int J, int threads = 0);
FunctionalSymbolExpansion fc_symbols(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs);

/// f~(x, y) = int e^{2 pi i (x+iy) xi} chi(y xi) f^(xi) d xi, truncated to |xi| <= bandwidth
/// and summed with the trapezoid rule of the given step. chi(s) = S(3 - 2|s|).
/// dbar denotes d_x + i d_y, the normalization that goes with the 1/(2 pi) prefactor.
class AlmostAnalyticExtension {
 public:
  /// bandwidth / step <= 0 pick values from the support of f and `tol`.
  explicit AlmostAnalyticExtension(const TestFunction& f, double bandwidth = 0.0, double step = 0.0,
                                   double tol = 1e-12);

  double bandwidth() const { return bandwidth_; }
  double step() const { return step_; }
  /// Estimated integral of |f^| beyond the bandwidth, relative to the L1 norm of f.
  double tail_estimate() const { return tail_; }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  const TestFunction& function() const { return f_; }

  /// Frequency beyond which the trapezoid terms of f~ and its derivative add up to at most eps.
  double effective_bandwidth(double eps) const;

  cplx fourier(double xi) const;
  cplx value(double x, double y) const;
  cplx dbar(double x, double y) const;

  /// Compactly supported variant chi1(x) chi2(y) f~ with chi1 = 1 on [lo-1, hi+1] and
  /// chi2 = 1 on |y| <= y_cut (both vanish one unit / one y_cut further out).
  cplx compact_value(double x, double y) const;
  cplx compact_dbar(double x, double y) const;
  /// compact_dbar at (x, y) for every x in xs; shares the y-dependent work.
  void compact_dbar_row(double y, std::span<const double> xs, std::vector<cplx>& out) const;
  double x_min() const { return lo_ - 2.0; }
  double x_max() const { return hi_ + 2.0; }
  double y_max() const { return 2.0 * y_cut_; }

  /// For fixed y, f~ (resp. each half of dbar f~) is sum_i c_i e^{2 pi i x (k0 + i) h}.
  struct Row {
    int k0 = 0;
    std::vector<cplx> c;
    cplx eval(double x, double h) const;
  };
  Row value_row(double y) const;
  std::pair<Row, Row> dbar_rows(double y) const;

 private:
  template <typename W>
  Row make_row(double y, int k0, int k1, W weight) const;
  double chi1(int k, double x) const;
  double chi2(int k, double y) const;

  TestFunction f_;
  double lo_ = 0.0, hi_ = 0.0;
  double bandwidth_ = 0.0, step_ = 0.0, tail_ = 0.0;
  double y_cut_ = 0.5;
  std::vector<cplx> fhat_;  // f^(k h), k = 0..K; negative k by conjugation
};

/// Even cutoff chi(s) = S(3 - 2|s|) and its derivative.
double hs_chi(double s);
double hs_chi_prime(double s);

struct HSOptions {
  double tol = 1e-7;       // target accuracy of the Cauchy-Pompeiu identities on the window
  double bandwidth = 0.0;  // 0: automatic
  double step = 0.0;       // 0: automatic
  int order = 8;           // Gauss points per x panel (y panels get twice as many)
  int max_order = 20;      // the order grows by 4 until the certified error meets tol
  int j_max = 0;           // highest resolvent power - 1 the grid must support
  bool tridiagonal = true; // resolvents through a Householder tridiagonal form of H
  int threads = 0;
};

/// Upper half-plane nodes z with weights w = (panel weight) * dbar F(z) / (2 pi); the lower half
/// plane enters by conjugate symmetry.
struct HSQuadrature {
  std::vector<cplx> z;
  std::vector<cplx> w;
  double delta = 0.0;        // strip |y| < delta left out
  double strip_bound = 0.0;  // bound of the omitted strip (resolvent power 1 + j_max)
  double tail = 0.0;
  int order = 0;
  /// Largest residual of the identities for resolvent powers 1..1+j_max over a lambda grid on the
  /// window; for Hermitian H it bounds the spectral-norm error of f(H).
  double certified_error = 0.0;
};

/// Builds the grid, raising the panel order until the certified error meets opt.tol or
/// opt.max_order is reached (the error is reported either way).
HSQuadrature hs_quadrature(const AlmostAnalyticExtension& F, const HSOptions& opt);

/// (1/2pi) int dbar F (lambda - z)^{-1-j} over the HS grid.
double hs_scalar(const HSQuadrature& q, double lambda, int j);

/// |quadrature - (-1)^j f^{(j)}(lambda) / j!|
double cauchy_pompeiu_check(const TestFunction& f, double lambda, int j, const HSOptions& opt = {});

struct HSMatrixResult {
  Eigen::MatrixXcd value;
  int nodes = 0;
  double delta = 0.0;
  double strip_bound = 0.0;
  double certified_error = 0.0;
};

/// f(H) through the Helffer-Sjostrand integral with one resolvent per node.
HSMatrixResult hs_matrix_function(const Eigen::MatrixXcd& H, const TestFunction& f, const HSOptions& opt = {});

/// sup_{j <= N} sup_lambda <lambda>^{j - m} |f^{(j)}(lambda)|
double mellin_seminorm(const TestFunction& f, double m, int N);

/// max over x in the compact window of |dbar f~(x, y)| for each y.
std::vector<double> dbar_profile(const AlmostAnalyticExtension& F, const std::vector<double>& ys, int x_samples = 400);

}  // namespace psitrace
