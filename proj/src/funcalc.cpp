#include "psitrace/funcalc.hpp"

#include <optional>

#include <Eigen/Eigenvalues>

#include "psitrace/parallel.hpp"
#include "psitrace/quadrature.hpp"

namespace psitrace {

// ------------------------------------------------------------ fc symbols

FunctionalSymbolExpansion fc_symbols(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs) {
  FunctionalSymbolExpansion out;
  out.dim = L.dim();
  out.m0 = L.order();
  for (const auto& q : qs) {
    std::vector<FunctionalSymbolTerm> terms;
    for (const auto& [p, d] : q.powers()) {
      int r = p - 1;
      double fact = 1.0;
      for (int i = 2; i <= r; ++i) fact *= i;
      terms.push_back({d, r, (r % 2 ? -1.0 : 1.0) / fact});
    }
    out.orders.push_back(std::move(terms));
  }
  return out;
}

FunctionalSymbolExpansion fc_symbols(const EllipticOperatorSpec& L, int J, int threads) {
  return fc_symbols(L, build_parametrix(L, J, threads));
}

// -------------------------------------------------- almost analytic extension

double hs_chi(double s) { return smoothstep_value(3.0 - 2.0 * std::abs(s)); }

double hs_chi_prime(double s) {
  if (s == 0.0) return 0.0;
  return -2.0 * (s > 0 ? 1.0 : -1.0) * bump_derivative(0, 3.0 - 2.0 * std::abs(s)) / bump_mass();
}

namespace {

struct FourierSampler {
  std::vector<double> x, wf;  // nodes relative to the centre c, and weight * f(node)
  double c = 0.0;

  FourierSampler(const TestFunction& f, double lo, double hi, double bandwidth) {
    // breakpoints: support ends and the ends of the pieces where f' lives
    std::vector<double> br{lo, hi};
    for (const auto& part : f.derivative_support(1).parts()) {
      for (double e : {part.lo, part.hi}) {
        if (e > lo && e < hi) br.push_back(e);
      }
    }
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    quad::Rule r = quad::graded_gauss(br, std::max(8.0, bandwidth));
    c = 0.5 * (lo + hi);  // centred phases keep the rounding of x * xi small
    for (size_t i = 0; i < r.nodes.size(); ++i) {
      double v = f(r.nodes[i]);
      if (v == 0.0) continue;
      x.push_back(r.nodes[i] - c);
      wf.push_back(r.weights[i] * v);
    }
  }

  cplx operator()(double xi) const {
    CompensatedSum<cplx> s;
    for (size_t i = 0; i < x.size(); ++i) s.add(wf[i] * std::polar(1.0, -2.0 * kPi * x[i] * xi));
    return s.value() * std::polar(1.0, -2.0 * kPi * c * xi);
  }
};

}  // namespace

AlmostAnalyticExtension::AlmostAnalyticExtension(const TestFunction& f, double bandwidth, double step, double tol)
    : f_(f) {
  IntervalSet supp = f.support();
  if (supp.empty() || !supp.bounded()) throw DomainError("almost analytic extension needs compact support");
  lo_ = supp.lo();
  hi_ = supp.hi();
  double l1 = quad::integrate([&](double u) { return std::abs(f(u)); }, lo_, hi_, 1e-12);
  if (l1 == 0.0) throw DomainError("almost analytic extension of the zero function");

  auto tail_at = [&](double xb) {
    FourierSampler fs(f, lo_, hi_, 1.5 * xb);
    double m = 0.0;
    for (int i = 0; i <= 16; ++i) m = std::max(m, std::abs(fs(xb * (1.0 + 0.5 * i / 16.0))));
    return m * xb / l1;
  };
  if (bandwidth <= 0.0) {
    bandwidth = 8.0;
    double prev = std::numeric_limits<double>::infinity();
    while ((tail_ = tail_at(bandwidth)) > tol) {
      // a tail that stops shrinking below 1e-9 is the rounding floor of f^
      if (tail_ < 1e-9 && tail_ > 0.5 * prev) break;
      prev = tail_;
      bandwidth *= 1.25;
      if (bandwidth > 4096.0) throw DomainError("almost analytic extension: no bandwidth reaches the tolerance");
    }
  } else {
    tail_ = tail_at(bandwidth);
    if (tail_ > tol) {
      throw DomainError("almost analytic extension: bandwidth " + format_real(bandwidth) +
                        " too small, tail estimate " + format_real(tail_) + " exceeds " + format_real(tol));
    }
  }
  bandwidth_ = bandwidth;
  step_ = step > 0.0 ? step : 1.0 / (2.0 * (hi_ - lo_) + 16.0);
  int K = static_cast<int>(std::ceil(bandwidth_ / step_));
  FourierSampler fs(f, lo_, hi_, bandwidth_);
  fhat_.resize(K + 1);
  for (int k = 0; k <= K; ++k) fhat_[k] = fs(k * step_);
}

cplx AlmostAnalyticExtension::fourier(double xi) const {
  double kf = xi / step_;
  int k = static_cast<int>(std::lround(kf));
  if (std::abs(kf - k) < 1e-9 && std::abs(k) < static_cast<int>(fhat_.size())) {
    return k >= 0 ? fhat_[k] : std::conj(fhat_[-k]);
  }
  return FourierSampler(f_, lo_, hi_, std::max(bandwidth_, std::abs(xi)))(xi);
}

cplx AlmostAnalyticExtension::Row::eval(double x, double h) const {
  if (c.empty()) return 0.0;
  const cplx step = std::polar(1.0, 2.0 * kPi * x * h);
  cplx e{}, sum{};
  for (size_t i = 0; i < c.size(); ++i) {
    if (i % 64 == 0) {
      e = std::polar(1.0, 2.0 * kPi * x * h * static_cast<double>(k0 + static_cast<int>(i)));
    } else {
      e *= step;
    }
    sum += c[i] * e;
  }
  return sum;
}

// Row coefficients h w(k h) e^{-2 pi y k h} f^(k h) for k in [k0, k1], f^(-xi) = conj f^(xi).
template <typename W>
AlmostAnalyticExtension::Row AlmostAnalyticExtension::make_row(double y, int k0, int k1, W weight) const {
  const int K = static_cast<int>(fhat_.size()) - 1;
  Row r;
  k0 = std::max(k0, -K);
  k1 = std::min(k1, K);
  if (k0 > k1) return r;
  r.k0 = k0;
  r.c.resize(k1 - k0 + 1);
  for (int k = k0; k <= k1; ++k) {
    double xi = k * step_;
    double w = weight(xi);
    if (w == 0.0) continue;
    cplx fh = k >= 0 ? fhat_[k] : std::conj(fhat_[-k]);
    r.c[k - k0] = step_ * w * std::exp(-2.0 * kPi * y * xi) * fh;
  }
  return r;
}

AlmostAnalyticExtension::Row AlmostAnalyticExtension::value_row(double y) const {
  int kmax = static_cast<int>(fhat_.size()) - 1;
  if (y != 0.0) kmax = std::min(kmax, static_cast<int>(std::floor(2.0 / (std::abs(y) * step_))));
  return make_row(y, -kmax, kmax, [&](double xi) { return hs_chi(y * xi); });
}

std::pair<AlmostAnalyticExtension::Row, AlmostAnalyticExtension::Row> AlmostAnalyticExtension::dbar_rows(
    double y) const {
  if (y == 0.0) return {};
  const double ay = std::abs(y);
  int k_in = static_cast<int>(std::ceil(1.0 / (ay * step_)));
  int k_out = static_cast<int>(std::floor(2.0 / (ay * step_)));
  // dbar of e^{2 pi i (x+iy) xi} chi(y xi) leaves i xi chi'(y xi)
  auto w = [&](double xi) { return xi * hs_chi_prime(y * xi); };
  Row p = make_row(y, k_in, k_out, w), n = make_row(y, -k_out, -k_in, w);
  for (auto* r : {&p, &n})
    for (auto& c : r->c) c *= cplx{0.0, 1.0};
  return {p, n};
}

double AlmostAnalyticExtension::effective_bandwidth(double eps) const {
  // smallest k h with h sum_{k' > k} 2 |f^(k' h)| (1 + 2 pi k' h) <= eps
  double acc = 0.0;
  for (size_t k = fhat_.size() - 1; k > 0; --k) {
    acc += 2.0 * step_ * std::abs(fhat_[k]) * (1.0 + 2.0 * kPi * k * step_);
    if (acc > eps) return static_cast<double>(k) * step_;
  }
  return step_;
}

cplx AlmostAnalyticExtension::value(double x, double y) const { return value_row(y).eval(x, step_); }

cplx AlmostAnalyticExtension::dbar(double x, double y) const {
  auto [p, n] = dbar_rows(y);
  return p.eval(x, step_) + n.eval(x, step_);
}

double AlmostAnalyticExtension::chi1(int k, double x) const {
  // rises on [lo-2, lo-1], falls on [hi+1, hi+2]
  double u1 = 2.0 * (x - (lo_ - 2.0)) - 1.0;
  double u2 = 2.0 * ((hi_ + 2.0) - x) - 1.0;
  double r = smoothstep_value(u1), f = smoothstep_value(u2);
  if (k == 0) return r * f;
  double dr = 2.0 * bump_derivative(0, u1) / bump_mass();
  double df = -2.0 * bump_derivative(0, u2) / bump_mass();
  return dr * f + r * df;
}

double AlmostAnalyticExtension::chi2(int k, double y) const {
  if (k == 0) return hs_chi(y / y_cut_);
  return hs_chi_prime(y / y_cut_) / y_cut_;
}

cplx AlmostAnalyticExtension::compact_value(double x, double y) const {
  double c = chi1(0, x) * chi2(0, y);
  return c == 0.0 ? cplx{} : c * value(x, y);
}

cplx AlmostAnalyticExtension::compact_dbar(double x, double y) const {
  std::vector<cplx> out;
  compact_dbar_row(y, std::span<const double>(&x, 1), out);
  return out[0];
}

void AlmostAnalyticExtension::compact_dbar_row(double y, std::span<const double> xs, std::vector<cplx>& out) const {
  out.assign(xs.size(), cplx{});
  const double c2 = chi2(0, y), d2 = chi2(1, y);
  if (c2 == 0.0 && d2 == 0.0) return;
  std::optional<Row> vrow;
  std::optional<std::pair<Row, Row>> drows;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double c1 = chi1(0, x), d1 = chi1(1, x);
    if (c1 * c2 != 0.0) {
      if (!drows) drows = dbar_rows(y);
      out[i] += c1 * c2 * (drows->first.eval(x, step_) + drows->second.eval(x, step_));
    }
    cplx mix{d1 * c2, c1 * d2};
    if (mix != cplx{}) {
      if (!vrow) vrow = value_row(y);
      out[i] += vrow->eval(x, step_) * mix;
    }
  }
}

// ---------------------------------------------------------- HS quadrature

namespace {

// sup over the window of |dbar f~|; the cutoff terms of the compact extension are left out since
// there f~ is as small as the truncation error of f~ on the real axis.
double sup_dbar(const AlmostAnalyticExtension& F, double y, int samples) {
  return dbar_profile(F, {y}, samples)[0];
}

}  // namespace

std::vector<double> dbar_profile(const AlmostAnalyticExtension& F, const std::vector<double>& ys, int x_samples) {
  std::vector<double> out;
  for (double y : ys) {
    auto [p, n] = F.dbar_rows(y);
    double m = 0.0;
    for (int i = 0; i <= x_samples; ++i) {
      double x = F.x_min() + (F.x_max() - F.x_min()) * i / x_samples;
      m = std::max(m, std::abs(p.eval(x, F.step()) + n.eval(x, F.step())));
    }
    out.push_back(m);
  }
  return out;
}

namespace {

HSQuadrature hs_grid(const AlmostAnalyticExtension& F, const HSOptions& opt) {
  HSQuadrature q;
  q.order = opt.order;
  q.tail = F.tail_estimate();
  const double width = F.x_max() - F.x_min();
  const int j = opt.j_max;

  // Strip |y| < delta: bound (1/2pi) * 2 * width * int_0^delta sup|dbar F| y^{-1-j} dy, summed in
  // log y on a fixed geometric grid; the super-polynomial vanishing makes the sum converge.
  const int per_octave = 4;
  const double ratio = std::pow(2.0, -1.0 / per_octave);
  std::vector<double> ys, dens;
  for (double y = 0.5; y > 1e-4; y *= ratio) {
    ys.push_back(y);
    dens.push_back(sup_dbar(F, y, 200) * std::pow(y, -j) * std::log(1.0 / ratio));
  }
  size_t cut = 0;
  for (;; ++cut) {
    if (cut == ys.size()) throw DomainError("HS quadrature: strip bound does not reach the tolerance");
    double acc = 0.0;
    for (size_t i = cut; i < dens.size(); ++i) acc += dens[i];
    q.strip_bound = width * acc / kPi;
    if (q.strip_bound <= 0.1 * opt.tol) break;
  }
  const double delta = ys[cut];
  q.delta = delta;

  // y panels grow geometrically; x panels are no wider than the distance to the real axis (the
  // resolvent pole) nor than one period of the frequencies that still matter.
  // Panel edges sit on the points where the cutoffs of the compact extension start to vary
  // (y = y_cut, x = lo - 1, hi + 1) and are graded toward them: the cutoffs are flat to infinite
  // order there, which Gauss rules resolve only on refined panels.
  const double ycut = 0.5 * F.y_max();
  const double yr = 1.5;
  const int lev = 4;
  std::vector<double> yedges{delta};
  while (yedges.back() < ycut) {
    double y1 = std::min(ycut, yedges.back() * yr);
    if (ycut - y1 < 0.1 * y1) y1 = ycut;
    yedges.push_back(y1);
  }
  std::vector<double> top = quad::graded_edges({ycut, 2.0 * ycut}, 4.0 / ycut, lev);
  yedges.insert(yedges.end(), top.begin() + 1, top.end());

  const double band = F.effective_bandwidth(0.01 * opt.tol);
  // along y the integrand oscillates like e^{2 pi i (x - c) s / y}, so y gets twice the order
  const int yorder = 2 * opt.order;
  const quad::Rule& gl = quad::gauss_legendre(yorder);
  const std::vector<double> xside_lo = quad::graded_edges({F.x_min(), F.x_min() + 1.0}, 4.0, lev);
  const std::vector<double> xside_hi = quad::graded_edges({F.x_max() - 1.0, F.x_max()}, 4.0, lev);
  auto panel_nodes = [&](size_t ip) {
    double y0 = yedges[ip], y1 = yedges[ip + 1];
    double cycles = std::min(2.0 / y0, band);
    double pw = std::min({y0, 1.0 / std::max(cycles, 1e-300), 0.25});
    // the side strips keep their graded edges, refined further where pw asks for it
    auto refine = [&](const std::vector<double>& e) {
      std::vector<double> out{e.front()};
      for (size_t i = 0; i + 1 < e.size(); ++i) {
        int m = std::max(1, static_cast<int>(std::ceil((e[i + 1] - e[i]) / pw)));
        for (int k = 1; k <= m; ++k) out.push_back(e[i] + (e[i + 1] - e[i]) * k / m);
      }
      return out;
    };
    std::vector<double> xe = refine(xside_lo);
    std::vector<double> mid = refine({F.x_min() + 1.0, F.x_max() - 1.0});
    std::vector<double> hi = refine(xside_hi);
    xe.insert(xe.end(), mid.begin() + 1, mid.end());
    xe.insert(xe.end(), hi.begin() + 1, hi.end());
    quad::Rule xr = quad::panel_gauss(xe, opt.order);
    std::vector<std::pair<cplx, cplx>> nodes;
    std::vector<cplx> row;
    for (size_t iy = 0; iy < gl.nodes.size(); ++iy) {
      double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * gl.nodes[iy];
      double wy = 0.5 * (y1 - y0) * gl.weights[iy];
      F.compact_dbar_row(y, xr.nodes, row);
      for (size_t ix = 0; ix < xr.nodes.size(); ++ix) {
        cplx d = row[ix];
        if (d == cplx{}) continue;
        nodes.push_back({cplx{xr.nodes[ix], y}, wy * xr.weights[ix] * d / (2.0 * kPi)});
      }
    }
    return nodes;
  };
  auto all = parallel_map(yedges.size() - 1, opt.threads, panel_nodes);
  for (const auto& part : all) {
    for (const auto& [z, w] : part) {
      q.z.push_back(z);
      q.w.push_back(w);
    }
  }
  return q;
}

// Largest identity residual |quadrature - (-1)^j f^{(j)}(lambda)/j!| over a lambda grid covering the
// window, j <= j_max. For Hermitian H this bounds the spectral-norm error of the matrix function.
double certify(const HSQuadrature& q, const TestFunction& f, double lo, double hi, int j_max) {
  const double step = std::min(0.05, q.delta);
  const int count = static_cast<int>(std::ceil((hi - lo) / step));
  std::vector<double> worst(count + 1, 0.0);
  for (int i = 0; i <= count; ++i) {
    double lam = lo + (hi - lo) * i / count;
    std::vector<CompensatedSum<double>> s(j_max + 1);
    for (size_t k = 0; k < q.z.size(); ++k) {
      cplx r = 1.0 / (lam - q.z[k]);
      cplx t = q.w[k] * r;
      for (int j = 0; j <= j_max; ++j, t *= r) s[j].add(2.0 * t.real());
    }
    double fact = 1.0;
    for (int j = 0; j <= j_max; ++j) {
      if (j > 0) fact *= j;
      double exact = (j % 2 ? -1.0 : 1.0) * f.derivative(j, lam) / fact;
      worst[i] = std::max(worst[i], std::abs(s[j].value() - exact));
    }
  }
  return *std::max_element(worst.begin(), worst.end());
}

}  // namespace

HSQuadrature hs_quadrature(const AlmostAnalyticExtension& F, const HSOptions& opt) {
  HSOptions o = opt;
  for (;;) {
    HSQuadrature q = hs_grid(F, o);
    q.certified_error = certify(q, F.function(), F.x_min(), F.x_max(), o.j_max);
    if (q.certified_error <= opt.tol || o.order >= opt.max_order) return q;
    o.order += 4;
  }
}

double hs_scalar(const HSQuadrature& q, double lambda, int j) {
  CompensatedSum<double> s;
  for (size_t i = 0; i < q.z.size(); ++i) {
    cplx r = 1.0 / (lambda - q.z[i]);
    cplx t = q.w[i] * r;
    for (int k = 0; k < j; ++k) t *= r;
    s.add(2.0 * t.real());
  }
  return s.value();
}

double cauchy_pompeiu_check(const TestFunction& f, double lambda, int j, const HSOptions& opt) {
  AlmostAnalyticExtension F(f, opt.bandwidth, opt.step);
  HSOptions o = opt;
  o.j_max = std::max(o.j_max, j);
  HSQuadrature q = hs_quadrature(F, o);
  double fact = 1.0;
  for (int i = 2; i <= j; ++i) fact *= i;
  double exact = (j % 2 ? -1.0 : 1.0) * f.derivative(j, lambda) / fact;
  return std::abs(hs_scalar(q, lambda, j) - exact);
}

HSMatrixResult hs_matrix_function(const Eigen::MatrixXcd& H, const TestFunction& f, const HSOptions& opt) {
  if (H.rows() != H.cols()) throw DomainError("hs_matrix_function: matrix must be square");
  double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError("hs_matrix_function: matrix is not Hermitian");
  }
  AlmostAnalyticExtension F(f, opt.bandwidth, opt.step);
  HSQuadrature q = hs_quadrature(F, opt);
  const Eigen::Index n = H.rows();
  const size_t blocks = std::min<size_t>(q.z.size(), 64);

  Eigen::MatrixXcd Q;
  Eigen::VectorXd diag, sub;
  if (opt.tridiagonal) {
    Eigen::Tridiagonalization<Eigen::MatrixXcd> tri(H);
    Q = tri.matrixQ();
    diag = tri.diagonal();
    sub = tri.subDiagonal();
  }

  auto block_sum = [&](size_t b) {
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(n, n);
    size_t i0 = q.z.size() * b / blocks, i1 = q.z.size() * (b + 1) / blocks;
    for (size_t i = i0; i < i1; ++i) {
      const cplx z = q.z[i];
      if (!opt.tridiagonal) {
        Eigen::MatrixXcd A = H;
        A.diagonal().array() -= z;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
        S += q.w[i] * lu.inverse();
        continue;
      }
      // (T - z) = L D L^T without pivoting; pivots stay >= |Im z| in modulus.
      std::vector<cplx> d(n), l(n);
      d[0] = diag[0] - z;
      for (Eigen::Index k = 1; k < n; ++k) {
        l[k] = sub[k - 1] / d[k - 1];
        d[k] = diag[k] - z - l[k] * sub[k - 1];
      }
      std::vector<cplx> col(n);
      for (Eigen::Index c = 0; c < n; ++c) {
        std::fill(col.begin(), col.end(), cplx{});
        col[c] = 1.0;
        for (Eigen::Index k = c + 1; k < n; ++k) col[k] = -l[k] * col[k - 1];
        for (Eigen::Index k = c; k < n; ++k) col[k] /= d[k];
        for (Eigen::Index k = n - 2; k >= 0; --k) col[k] -= l[k + 1] * col[k + 1];
        for (Eigen::Index k = 0; k < n; ++k) S(k, c) += q.w[i] * col[k];
      }
    }
    return S;
  };
  auto parts = parallel_map(blocks, opt.threads, block_sum);
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& p : parts) S += p;
  Eigen::MatrixXcd val = S + S.adjoint();
  if (opt.tridiagonal) val = Q * val * Q.adjoint();
  HSMatrixResult res;
  res.value = val;
  res.nodes = static_cast<int>(q.z.size());
  res.delta = q.delta;
  res.strip_bound = q.strip_bound;
  res.certified_error = q.certified_error;
  return res;
}

// ---------------------------------------------------------------- seminorm

double mellin_seminorm(const TestFunction& f, double m, int N) {
  if (f.is_zero()) return 0.0;
  IntervalSet supp = f.support();
  if (!supp.bounded()) throw DomainError("mellin_seminorm: support must be bounded");
  double best = 0.0;
  for (int j = 0; j <= N; ++j) {
    auto g = [&](double u) { return std::pow(1.0 + u * u, 0.5 * (j - m)) * std::abs(f.derivative(j, u)); };
    for (const auto& part : supp.parts()) {
      const int M = 4000;
      double h = (part.hi - part.lo) / M;
      int arg = 0;
      double top = -1.0;
      for (int i = 0; i <= M; ++i) {
        double v = g(part.lo + i * h);
        if (v > top) {
          top = v;
          arg = i;
        }
      }
      // golden-section refinement around the grid maximum
      double a = part.lo + std::max(0, arg - 1) * h, b = part.lo + std::min(M, arg + 1) * h;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = b - phi * (b - a), d = a + phi * (b - a);
      for (int it = 0; it < 80; ++it) {
        if (g(c) > g(d)) {
          b = d;
        } else {
          a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
      }
      best = std::max({best, top, g(0.5 * (a + b))});
    }
  }
  return best;
}

}  // namespace psitrace
