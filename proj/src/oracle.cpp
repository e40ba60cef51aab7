#include "psitrace/oracle.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "psitrace/parallel.hpp"

namespace psitrace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

long norm2(const Index3& k) { return long(k[0]) * k[0] + long(k[1]) * k[1] + long(k[2]) * k[2]; }
int norm_inf(const Index3& k) { return std::max({std::abs(k[0]), std::abs(k[1]), std::abs(k[2])}); }

std::array<double, 3> as_point(const Index3& k) { return {double(k[0]), double(k[1]), double(k[2])}; }

double sup_support(const TestFunction& f) {
  IntervalSet s = f.support();
  if (s.empty()) return -kInf;
  if (!s.bounded()) throw DomainError("oracle: f must have compact support");
  return s.hi();
}

// x-mean of the realized l at k
double mean_l(const EllipticOperatorSpec& L, const Index3& k) {
  auto p = as_point(k);
  return L.symbol().evaluate_mean(p).real();
}

}  // namespace

// -------------------------------------------------------------------- series

void OracleSeries::add(const OracleSample& s) {
  if (!samples_.empty() && !(s.t < samples_.back().t)) throw DomainError("oracle series: t must strictly decrease");
  samples_.push_back(s);
}

std::string OracleSeries::to_csv() const {
  std::ostringstream o;
  o.precision(17);
  o << "t,re,im,modes,margin,symmetry_defect\n";
  for (const auto& s : samples_) {
    o << s.t << "," << s.value.real() << "," << s.value.imag() << "," << s.modes << "," << s.margin << ","
      << s.symmetry_defect << "\n";
  }
  return o.str();
}

std::vector<double> geometric_t_grid(double t_min, double t_max, int count) {
  if (!(t_min > 0.0) || !(t_max > t_min) || count < 2) throw DomainError("t grid: need 0 < t_min < t_max, count >= 2");
  std::vector<double> ts(count);
  double q = std::log(t_max / t_min) / (count - 1);
  for (int i = 0; i < count; ++i) ts[i] = t_max * std::exp(-q * i);
  ts.back() = t_min;
  return ts;
}

std::vector<double> default_t_grid(double t_max, int per_decade, int decades) {
  return geometric_t_grid(t_max * std::pow(10.0, -decades), t_max, per_decade * decades + 1);
}

// -------------------------------------------------------------- lattice sums

OracleSample multiplier_sample(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                               double t) {
  if (!L.is_multiplier()) throw DomainError("multiplier trace: L must be x-independent");
  if (A.dim() != L.dim()) throw DomainError("multiplier trace: dimension mismatch");
  if (!(t > 0.0)) throw DomainError("multiplier trace: t must be positive");
  OracleSample out;
  out.t = t;
  if (f.is_zero()) return out;
  const int n = A.dim();
  const double hi = sup_support(f);
  if (hi == -kInf) return out;
  const double m0 = L.order();
  const double minp = L.min_principal_on_sphere();
  int R = static_cast<int>(std::ceil(1.2 * std::pow(std::max(hi, 0.0) / (t * minp), 1.0 / m0))) + 4;

  // enlarge until the whole shell |k|_inf = R lies beyond supp f
  auto shell_clear = [&](int r) {
    for (const Index3& k : fourier_modes(n, r)) {
      if (norm_inf(k) == r && t * mean_l(L, k) <= hi) return false;
    }
    return true;
  };
  while (!shell_clear(R)) R = 2 * R;

  struct Entry {
    long n2;
    Index3 k;
    cplx v;
  };
  std::vector<Entry> entries;
  Index3 k{0, 0, 0};
  auto visit = [&] {
    double fv = f(t * mean_l(L, k));
    if (fv == 0.0) return;
    cplx a = A.evaluate_mean(as_point(k));
    if (a == cplx{}) return;
    entries.push_back({norm2(k), k, a * fv});
  };
  for (k[0] = -R; k[0] <= R; ++k[0]) {
    if (n == 2) {
      for (k[1] = -R; k[1] <= R; ++k[1]) visit();
    } else {
      for (k[1] = -R; k[1] <= R; ++k[1]) {
        for (k[2] = -R; k[2] <= R; ++k[2]) visit();
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.n2 != b.n2) return a.n2 < b.n2;
    return a.k < b.k;
  });
  CompensatedSum<cplx> acc;
  for (const auto& e : entries) acc.add(e.v);
  out.value = acc.value();
  out.modes = static_cast<long>(entries.size());
  return out;
}

cplx multiplier_trace(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f, double t) {
  return multiplier_sample(A, L, f, t).value;
}

OracleSeries multiplier_series(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                               const std::vector<double>& ts, int threads) {
  auto samples = parallel_map(ts.size(), threads, [&](size_t i) { return multiplier_sample(A, L, f, ts[i]); });
  OracleSeries s;
  for (const auto& x : samples) s.add(x);
  return s;
}

// ------------------------------------------------------------ matrix oracle

std::vector<Index3> fourier_modes(int dim, int K) {
  std::vector<Index3> out;
  if (dim == 2) {
    for (int a = -K; a <= K; ++a)
      for (int b = -K; b <= K; ++b) out.push_back({a, b, 0});
  } else if (dim == 3) {
    for (int a = -K; a <= K; ++a)
      for (int b = -K; b <= K; ++b)
        for (int c = -K; c <= K; ++c) out.push_back({a, b, c});
  } else {
    throw DomainError("fourier modes: dimension must be 2 or 3");
  }
  return out;
}

Eigen::SparseMatrix<cplx> operator_matrix_sparse(const PolyHomogeneousSymbol& sigma, const std::vector<Index3>& modes) {
  const int n = sigma.dim();
  const long N = static_cast<long>(modes.size());
  int K = 0;
  for (const auto& k : modes) K = std::max(K, norm_inf(k));
  const int side = 2 * K + 1;
  auto slot = [&](const Index3& k) -> long {
    long s = 0;
    for (int d = 0; d < n; ++d) {
      if (std::abs(k[d]) > K) return -1;
      s = s * side + (k[d] + K);
    }
    return s;
  };
  std::vector<long> lookup(static_cast<size_t>(std::pow(side, n)), -1);
  for (long i = 0; i < N; ++i) lookup[slot(modes[i])] = i;

  std::vector<Eigen::Triplet<cplx>> trip;
  for (const auto& comp : sigma.components()) {
    for (const auto& [key, c] : comp.h.terms()) {
      // xi^alpha |xi|^s psi(|xi|) at every column mode
      std::vector<cplx> base(N);
      for (long j = 0; j < N; ++j) {
        auto p = as_point(modes[j]);
        double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        double psi = comp.cutoff.value(r);
        if (psi == 0.0) continue;
        double mono = 1.0;
        for (int d = 0; d < n; ++d) mono *= std::pow(p[d], key.alpha[d]);
        cplx rad = (r == 0.0) ? (key.s == cplx{} ? cplx(1.0) : cplx(0.0)) : std::exp(key.s * std::log(r));
        base[j] = psi * mono * rad;
      }
      for (const auto& [gamma, cg] : c.coeffs()) {
        for (long j = 0; j < N; ++j) {
          if (base[j] == cplx{}) continue;
          Index3 k = modes[j];
          for (int d = 0; d < 3; ++d) k[d] += gamma[d];
          long s = slot(k);
          if (s < 0) continue;
          long i = lookup[s];
          if (i >= 0) trip.emplace_back(i, j, cg * base[j]);
        }
      }
    }
  }
  Eigen::SparseMatrix<cplx> M(N, N);
  M.setFromTriplets(trip.begin(), trip.end());
  M.prune(cplx{});
  return M;
}

Eigen::MatrixXcd operator_matrix(const PolyHomogeneousSymbol& sigma, const std::vector<Index3>& modes) {
  return Eigen::MatrixXcd(operator_matrix_sparse(sigma, modes));
}

MatrixOracle::MatrixOracle(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L,
                           const MatrixOracleOptions& opt, const std::vector<Index3>* mode_order)
    : opt_(opt) {
  if (A.dim() != L.dim()) throw DomainError("matrix oracle: dimension mismatch");
  modes_ = mode_order ? *mode_order : fourier_modes(A.dim(), opt.K);
  const long N = static_cast<long>(modes_.size());
  using Sparse = Eigen::SparseMatrix<cplx>;
  Sparse MA = operator_matrix_sparse(A, modes_);
  Sparse ML = operator_matrix_sparse(L.symbol(), modes_);
  Sparse MLa = ML.adjoint();
  double nrm = ML.norm();
  defect_ = nrm > 0.0 ? Sparse(ML - MLa).norm() / nrm : 0.0;
  if (defect_ > opt.defect_tol) {
    std::ostringstream msg;
    msg << "matrix oracle: symmetry defect " << defect_ << " exceeds " << opt.defect_tol;
    throw DomainError(msg.str());
  }
  Sparse H = 0.5 * (ML + MLa);

  int K = 0;
  for (const auto& k : modes_) K = std::max(K, norm_inf(k));
  boundary_min_ = kInf;
  for (const auto& k : modes_) {
    if (norm_inf(k) == K) boundary_min_ = std::min(boundary_min_, mean_l(L, k));
  }

  // connected components of the coupling pattern of H
  std::vector<long> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<long(long)> find = [&](long i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
  for (long j = 0; j < H.outerSize(); ++j) {
    for (Sparse::InnerIterator it(H, j); it; ++it) parent[find(it.row())] = find(j);
  }
  std::map<long, std::vector<long>> blocks;
  for (long i = 0; i < N; ++i) blocks[find(i)].push_back(i);
  block_count_ = blocks.size();

  std::vector<std::vector<long>> order;
  for (auto& [root, idx] : blocks) order.push_back(idx);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::vector<long> block_of(N), local(N);
  for (size_t b = 0; b < order.size(); ++b)
    for (size_t i = 0; i < order[b].size(); ++i) {
      block_of[order[b][i]] = static_cast<long>(b);
      local[order[b][i]] = static_cast<long>(i);
    }
  struct Piece {
    Eigen::VectorXd ev;
    Eigen::VectorXcd w;
  };
  std::vector<Piece> pieces = parallel_map(order.size(), 0, [&](size_t b) {
    const auto& idx = order[b];
    const long m = static_cast<long>(idx.size());
    Eigen::MatrixXcd Hb = Eigen::MatrixXcd::Zero(m, m), Ab = Eigen::MatrixXcd::Zero(m, m);
    for (long j = 0; j < m; ++j) {
      for (Sparse::InnerIterator it(H, idx[j]); it; ++it) Hb(local[it.row()], j) = it.value();
      for (Sparse::InnerIterator it(MA, idx[j]); it; ++it) {
        if (block_of[it.row()] == long(b)) Ab(local[it.row()], j) = it.value();
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Hb);
    if (es.info() != Eigen::Success) throw std::runtime_error("matrix oracle: eigendecomposition failed");
    const Eigen::MatrixXcd& V = es.eigenvectors();
    Eigen::MatrixXcd AV = Ab * V;
    Piece p;
    p.ev = es.eigenvalues();
    p.w.resize(m);
    for (long i = 0; i < m; ++i) p.w(i) = V.col(i).dot(AV.col(i));
    return p;
  });
  evals_.resize(N);
  weights_.resize(N);
  long pos = 0;
  for (const auto& p : pieces) {
    evals_.segment(pos, p.ev.size()) = p.ev;
    weights_.segment(pos, p.w.size()) = p.w;
    pos += p.ev.size();
  }
}

OracleSample MatrixOracle::sample(const TestFunction& f, double t) const {
  if (!(t > 0.0)) throw DomainError("matrix oracle: t must be positive");
  OracleSample s;
  s.t = t;
  s.modes = modes();
  s.symmetry_defect = defect_;
  double hi = sup_support(f);
  s.margin = hi > 0.0 ? t * boundary_min_ / hi : kInf;
  if (s.margin < opt_.safety) {
    std::ostringstream msg;
    msg << "matrix oracle: spectral margin t * min boundary l / sup supp f = " << s.margin << " is below "
        << opt_.safety << " at t = " << t << " (increase K or t)";
    throw DomainError(msg.str());
  }
  CompensatedSum<cplx> acc;
  for (long i = 0; i < evals_.size(); ++i) {
    double fv = f(t * evals_(i));
    if (fv != 0.0) acc.add(fv * weights_(i));
  }
  s.value = acc.value();
  return s;
}

OracleSeries MatrixOracle::series(const TestFunction& f, const std::vector<double>& ts) const {
  OracleSeries out(opt_.safety);
  for (double t : ts) out.add(sample(f, t));
  return out;
}

OracleSample matrix_trace(const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
                          double t, const MatrixOracleOptions& opt) {
  return MatrixOracle(A, L, opt).sample(f, t);
}

// ------------------------------------------------------------------- fitting

cplx PowerFit::coefficient_at(double e, double tol) const {
  for (size_t j = 0; j < exponents.size(); ++j) {
    if (std::abs(exponents[j] - e) <= tol) return coefficients[j];
  }
  return 0.0;
}

PowerFit fit_powers(const OracleSeries& series, std::vector<double> exponents, bool with_constant) {
  if (with_constant) exponents.push_back(0.0);
  std::sort(exponents.begin(), exponents.end());
  std::vector<double> basis;
  for (double e : exponents) {
    if (basis.empty() || std::abs(e - basis.back()) > 1e-9) basis.push_back(e);
  }
  const long p = static_cast<long>(basis.size());
  const long m = static_cast<long>(series.size());
  if (p == 0) throw DomainError("power fit: empty exponent set");
  if (m < 2 * p) throw DomainError("power fit: need at least two samples per unknown");

  Eigen::MatrixXd D(m, p);
  Eigen::MatrixXd b(m, 2);
  for (long i = 0; i < m; ++i) {
    const auto& s = series.samples()[i];
    double w = 1.0 / std::max(std::abs(s.value), 1e-300);
    for (long j = 0; j < p; ++j) D(i, j) = w * std::pow(s.t, basis[j]);
    b(i, 0) = w * s.value.real();
    b(i, 1) = w * s.value.imag();
  }
  Eigen::VectorXd scale = D.colwise().norm();
  for (long j = 0; j < p; ++j) D.col(j) /= scale(j);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  PowerFit fit;
  fit.exponents = basis;
  fit.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : kInf;
  Eigen::MatrixXd y = svd.solve(b);
  for (long j = 0; j < p; ++j) fit.coefficients.push_back(cplx(y(j, 0), y(j, 1)) / scale(j));
  double bn = b.norm();
  fit.residual = bn > 0.0 ? (D * y - b).norm() / bn : 0.0;
  if (!(fit.condition <= 1e8)) {
    fit.usable = false;
    std::ostringstream o;
    o << "condition number " << fit.condition << " exceeds 1e8";
    fit.note = o.str();
  }
  return fit;
}

double loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) throw DomainError("slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    double a = std::log(t[i]), c = std::log(std::abs(y[i]));
    sx += a;
    sy += c;
    sxx += a * a;
    sxy += a * c;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// --------------------------------------------------------------- verification

VerificationReport verify_expansion(const ExpansionPrediction& pred, const OracleSeries& series,
                                    const VerifyOptions& opt) {
  VerificationReport rep;
  std::vector<double> exps;
  for (const auto& t : pred.terms()) {
    if (t.exponent.imag() != 0.0) throw DomainError("verify: complex exponents are not separable by real fits");
    exps.push_back(t.exponent.real());
  }
  bool with_constant = pred.constant().has_value();
  if (exps.empty() && !with_constant) throw DomainError("verify: empty prediction");
  rep.fit = fit_powers(series, exps, with_constant);
  if (!rep.fit.usable) rep.notes.push_back("fit unusable: " + rep.fit.note);

  bool all_ok = true;
  for (size_t j = 0; j < rep.fit.exponents.size(); ++j) {
    double e = rep.fit.exponents[j];
    CoefficientCheck c{e, pred.coefficient_at(e), rep.fit.coefficients[j], 0.0, false, true};
    c.judged = std::abs(c.predicted) > opt.min_magnitude && (opt.judge_constant || e != 0.0 || !with_constant);
    c.rel_error = c.judged ? std::abs(c.fitted - c.predicted) / std::abs(c.predicted) : std::abs(c.fitted - c.predicted);
    c.ok = !c.judged || c.rel_error <= opt.rel_tol;
    all_ok = all_ok && c.ok;
    rep.coefficients.push_back(c);
  }

  cplx shift{};
  if (!opt.judge_constant && with_constant) {
    shift = rep.fit.coefficient_at(0.0) - pred.coefficient_at(0.0);
    rep.constant_offset = shift;
    rep.notes.push_back("constant offset (fitted - predicted) " + format_complex(shift) + " not judged");
  }
  std::vector<double> ts, rs;
  for (const auto& s : series.samples()) {
    double r = std::abs(s.value - pred.evaluate(s.t) - shift);
    rep.residual_max = std::max(rep.residual_max, r);
    if (r > 10.0 * opt.floor_rel * std::abs(s.value)) {
      ts.push_back(s.t);
      rs.push_back(r);
    }
  }
  rep.slope_judged = opt.next_exponent.has_value();
  if (ts.size() < 3) {
    rep.residual_at_floor = true;
    if (rep.slope_judged) rep.notes.push_back("residual at rounding level over the t-range; slope check holds trivially");
  } else {
    rep.residual_slope = loglog_slope(ts, rs);
    if (rep.slope_judged) rep.slope_ok = rep.residual_slope >= *opt.next_exponent - opt.slope_tol;
  }
  rep.pass = rep.fit.usable && all_ok && rep.slope_ok;
  return rep;
}

std::string VerificationReport::to_text() const {
  std::ostringstream o;
  o.precision(10);
  o << "fit condition " << fit.condition << ", weighted residual " << fit.residual << (fit.usable ? "" : " (unusable)")
    << "\n";
  for (const auto& c : coefficients) {
    o << "  t^" << c.exponent << ": predicted " << format_complex(c.predicted) << ", fitted "
      << format_complex(c.fitted) << ", " << (c.judged ? "rel error " : "abs diff ") << c.rel_error
      << (c.judged ? (c.ok ? " ok" : " FAIL") : " (not judged)") << "\n";
  }
  o << "residual max " << residual_max;
  if (residual_at_floor) {
    o << " (rounding level)";
  } else {
    o << ", log-log slope " << residual_slope << (!slope_judged ? " (not judged)" : slope_ok ? " ok" : " FAIL");
  }
  o << "\n";
  for (const auto& n : notes) o << "note: " << n << "\n";
  o << (pass ? "PASS" : "FAIL") << "\n";
  return o.str();
}

std::string VerificationReport::residual_csv(const OracleSeries& series, const ExpansionPrediction& pred) const {
  std::ostringstream o;
  o.precision(17);
  o << "t,oracle_re,oracle_im,prediction_re,prediction_im,abs_residual\n";
  for (const auto& s : series.samples()) {
    cplx p = pred.evaluate(s.t) + constant_offset;
    o << s.t << "," << s.value.real() << "," << s.value.imag() << "," << p.real() << "," << p.imag() << ","
      << std::abs(s.value - p) << "\n";
  }
  return o.str();
}

}  // namespace psitrace
