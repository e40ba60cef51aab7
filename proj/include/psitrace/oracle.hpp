#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "psitrace/expand.hpp"

namespace psitrace {

struct OracleSample {
  double t = 0.0;
  cplx value;
  long modes = 0;                // lattice points summed, or matrix dimension
  double margin = 0.0;           // t * min boundary l / sup supp f (matrix oracle); 0 for lattice sums
  double symmetry_defect = 0.0;  // ||M_L - M_L^*||_F / ||M_L||_F
};

/// Trace samples with strictly decreasing t.
class OracleSeries {
 public:
  OracleSeries() = default;
  explicit OracleSeries(double safety) : safety_(safety) {}

  void add(const OracleSample& s);
  const std::vector<OracleSample>& samples() const { return samples_; }
  size_t size() const { return samples_.size(); }
  double safety() const { return safety_; }
  /// t, re, im, modes, margin, symmetry_defect.
  std::string to_csv() const;

 private:
  double safety_ = 2.0;
  std::vector<OracleSample> samples_;
};

/// `count` geometric points from t_max down to t_min.
std::vector<double> geometric_t_grid(double t_min, double t_max, int count);
/// Geometric grid with `per_decade` points per decade over `decades` decades ending at t_max.
std::vector<double> default_t_grid(double t_max, int per_decade = 12, int decades = 2);

/// sum_{k in Z^n} abar(k) f(t l(k)) for x-independent L, abar the x-mean of the realized
/// symbol of A. Summed in ascending |k|^2 then lexicographic order with compensation.
cplx multiplier_trace(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f, double t);
/// Same sum with the count of contributing lattice points.
OracleSample multiplier_sample(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                               double t);
OracleSeries multiplier_series(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                               const std::vector<double>& ts, int threads = 0);

/// Fourier modes |k|_inf <= K in lexicographic order.
std::vector<Index3> fourier_modes(int dim, int K);

/// Toroidal quantization on the given modes: M[k, k'] = sigma_hat_{k - k'}(k').
Eigen::MatrixXcd operator_matrix(const PolyHomogeneousSymbol& sigma, const std::vector<Index3>& modes);
Eigen::SparseMatrix<cplx> operator_matrix_sparse(const PolyHomogeneousSymbol& sigma, const std::vector<Index3>& modes);

struct MatrixOracleOptions {
  int K = 16;
  double safety = 2.0;          // required t * min boundary l / sup supp f
  double defect_tol = 1e-3;     // rejected above this relative symmetry defect
};

/// Fourier truncation oracle: eigendecomposes H = (M_L + M_L^*)/2 once (block by block when
/// the coupling pattern splits) and returns tr(M_A f(tH)) for every t.
class MatrixOracle {
 public:
  MatrixOracle(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const MatrixOracleOptions& opt,
               const std::vector<Index3>* mode_order = nullptr);

  long modes() const { return static_cast<long>(modes_.size()); }
  double symmetry_defect() const { return defect_; }
  size_t blocks() const { return block_count_; }
  /// min over the boundary shell |k|_inf = K of the x-mean of l at k.
  double boundary_min() const { return boundary_min_; }
  const Eigen::VectorXd& eigenvalues() const { return evals_; }

  OracleSample sample(const TestFunction& f, double t) const;
  OracleSeries series(const TestFunction& f, const std::vector<double>& ts) const;

 private:
  MatrixOracleOptions opt_;
  std::vector<Index3> modes_;
  double defect_ = 0.0;
  size_t block_count_ = 0;
  double boundary_min_ = 0.0;
  Eigen::VectorXd evals_;
  Eigen::VectorXcd weights_;  // (V^* M_A V)_{ii} per eigenvalue
};

/// One-shot form of MatrixOracle::sample.
OracleSample matrix_trace(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                          double t, const MatrixOracleOptions& opt = {});

struct PowerFit {
  std::vector<double> exponents;  // merged basis, ascending; the constant is exponent 0 when present
  std::vector<cplx> coefficients;
  double residual = 0.0;   // relative weighted residual norm
  double condition = 0.0;  // of the column-scaled weighted design matrix
  bool usable = true;
  std::string note;

  cplx coefficient_at(double e, double tol = 1e-9) const;
};

/// Weighted least squares on [t_i^{e_j}] (plus a constant column), each row scaled by
/// 1 / |value_i| so that every sample counts by relative error.
PowerFit fit_powers(const OracleSeries& series, std::vector<double> exponents, bool with_constant);

struct VerifyOptions {
  double rel_tol = 0.01;         // per-coefficient relative tolerance
  double min_magnitude = 1e-8;   // coefficients below this are reported but not judged
  double slope_tol = 0.05;       // residual slope may fall short of the next exponent by this much
  std::optional<double> next_exponent;
  double floor_rel = 1e-11;      // residual below floor_rel * |value| counts as rounding level
  /// When false the constant is fitted and reported but not judged (lattice offsets).
  bool judge_constant = true;
};

struct CoefficientCheck {
  double exponent;
  cplx predicted;
  cplx fitted;
  double rel_error;
  bool judged;
  bool ok;
};

struct VerificationReport {
  PowerFit fit;
  std::vector<CoefficientCheck> coefficients;
  double residual_slope = 0.0;
  double residual_max = 0.0;
  bool residual_at_floor = false;
  cplx constant_offset{};  // fitted - predicted constant when the constant is not judged
  bool slope_judged = false;
  bool slope_ok = true;
  bool pass = false;
  std::vector<std::string> notes;
  std::string to_text() const;
  /// t, oracle, prediction, residual (absolute values of the complex numbers).
  std::string residual_csv(const OracleSeries& series, const ExpansionPrediction& pred) const;
};

/// Fits the prediction's exponents (and its constant) to the series and compares.
VerificationReport verify_expansion(const ExpansionPrediction& pred, const OracleSeries& series,
                                    const VerifyOptions& opt = {});

/// Least-squares slope of log|y| against log t.
double loglog_slope(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace psitrace
