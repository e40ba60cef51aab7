#include "psitrace/symcore.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include "psitrace/quadrature.hpp"

namespace psitrace {

namespace {

constexpr double kPruneRel = 8.0 * std::numeric_limits<double>::epsilon();

double int_pow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

cplx radial_power(double r, cplx s) {
  if (s == cplx{0.0, 0.0}) return 1.0;
  if (r == 0.0) return 0.0;
  if (s.imag() == 0.0) return std::pow(r, s.real());
  return std::exp(s * std::log(r));
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

void check_dim(int dim) {
  if (dim != 2 && dim != 3) throw DomainError("dimension must be 2 or 3");
}

}  // namespace

// ---------------------------------------------------------------- TorusSeries

TorusSeries::TorusSeries(int dim) : dim_(dim) { check_dim(dim); }

TorusSeries TorusSeries::constant(int dim, cplx value) {
  TorusSeries s(dim);
  s.accumulate({0, 0, 0}, value);
  return s;
}

TorusSeries TorusSeries::cosine(int dim, const Index3& freq, cplx amp) {
  TorusSeries s(dim);
  Index3 neg{-freq[0], -freq[1], -freq[2]};
  if (freq == neg) {
    s.accumulate(freq, amp);
  } else {
    s.accumulate(freq, 0.5 * amp);
    s.accumulate(neg, 0.5 * amp);
  }
  return s;
}

TorusSeries TorusSeries::sine(int dim, const Index3& freq, cplx amp) {
  TorusSeries s(dim);
  Index3 neg{-freq[0], -freq[1], -freq[2]};
  if (freq == neg) return s;
  s.accumulate(freq, amp / cplx{0.0, 2.0});
  s.accumulate(neg, -amp / cplx{0.0, 2.0});
  return s;
}

cplx TorusSeries::coefficient(const Index3& freq) const {
  auto it = coeffs_.find(freq);
  return it == coeffs_.end() ? cplx{} : it->second;
}

int TorusSeries::max_frequency() const {
  int m = 0;
  for (const auto& [g, c] : coeffs_) {
    for (int v : g) m = std::max(m, std::abs(v));
  }
  return m;
}

double TorusSeries::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [g, c] : coeffs_) m = std::max(m, std::abs(c));
  return m;
}

void TorusSeries::accumulate(const Index3& freq, cplx value) {
  if (value == cplx{}) return;
  if (dim_ == 2 && freq[2] != 0) throw DomainError("frequency out of dimension");
  auto [it, inserted] = coeffs_.try_emplace(freq, value);
  if (!inserted) {
    it->second += value;
    if (it->second == cplx{}) coeffs_.erase(it);
  }
}

void TorusSeries::prune(double scale) {
  const double cut = kPruneRel * scale;
  for (auto it = coeffs_.begin(); it != coeffs_.end();) {
    if (std::abs(it->second) <= cut) {
      it = coeffs_.erase(it);
    } else {
      ++it;
    }
  }
}

cplx TorusSeries::operator()(std::span<const double> x) const {
  cplx sum{};
  for (const auto& [g, c] : coeffs_) {
    double phase = 0.0;
    for (int i = 0; i < dim_; ++i) phase += g[i] * x[i];
    sum += c * std::polar(1.0, 2.0 * kPi * phase);
  }
  return sum;
}

TorusSeries& TorusSeries::operator+=(const TorusSeries& other) {
  if (other.coeffs_.empty()) return *this;
  if (dim_ == 0) dim_ = other.dim_;
  if (dim_ != other.dim_) throw DomainError("torus series dimension mismatch");
  double scale = std::max(max_abs_coefficient(), other.max_abs_coefficient());
  for (const auto& [g, c] : other.coeffs_) accumulate(g, c);
  prune(scale);
  return *this;
}

TorusSeries& TorusSeries::operator-=(const TorusSeries& other) {
  TorusSeries neg = other;
  neg *= -1.0;
  return *this += neg;
}

TorusSeries& TorusSeries::operator*=(cplx s) {
  if (s == cplx{}) {
    coeffs_.clear();
    return *this;
  }
  for (auto& [g, c] : coeffs_) c *= s;
  return *this;
}

TorusSeries operator*(const TorusSeries& a, const TorusSeries& b) {
  if (a.dim_ != b.dim_ && !a.is_zero() && !b.is_zero()) {
    throw DomainError("torus series dimension mismatch");
  }
  TorusSeries out;
  out.dim_ = a.dim_ != 0 ? a.dim_ : b.dim_;
  for (const auto& [ga, ca] : a.coeffs_) {
    for (const auto& [gb, cb] : b.coeffs_) {
      out.accumulate({ga[0] + gb[0], ga[1] + gb[1], ga[2] + gb[2]}, ca * cb);
    }
  }
  out.prune(a.max_abs_coefficient() * b.max_abs_coefficient());
  return out;
}

TorusSeries TorusSeries::dx(int axis) const {
  if (axis < 0 || axis >= dim_) throw DomainError("axis out of range");
  TorusSeries out(dim_);
  for (const auto& [g, c] : coeffs_) {
    if (g[axis] != 0) out.accumulate(g, kTwoPiI * static_cast<double>(g[axis]) * c);
  }
  return out;
}

TorusSeries TorusSeries::conj() const {
  TorusSeries out;
  out.dim_ = dim_;
  for (const auto& [g, c] : coeffs_) out.accumulate({-g[0], -g[1], -g[2]}, std::conj(c));
  return out;
}

bool TorusSeries::is_real(double tol) const {
  double scale = std::max(max_abs_coefficient(), 1e-300);
  for (const auto& [g, c] : coeffs_) {
    cplx partner = coefficient({-g[0], -g[1], -g[2]});
    if (std::abs(c - std::conj(partner)) > tol * scale) return false;
  }
  return true;
}

bool TorusSeries::approx_equal(const TorusSeries& other, double tol) const {
  double scale = std::max({max_abs_coefficient(), other.max_abs_coefficient(), 1e-300});
  for (const auto& [g, c] : coeffs_) {
    if (std::abs(c - other.coefficient(g)) > tol * scale) return false;
  }
  for (const auto& [g, c] : other.coeffs_) {
    if (std::abs(c - coefficient(g)) > tol * scale) return false;
  }
  return true;
}

// ----------------------------------------------------------- HomogeneousSymbol

HomogeneousSymbol::HomogeneousSymbol(int dim, cplx degree) : dim_(dim), degree_(snap(degree)) {
  check_dim(dim);
}

HomogeneousSymbol HomogeneousSymbol::monomial(int dim, const Index3& alpha, cplx s,
                                              const TorusSeries& coeff) {
  HomogeneousSymbol h(dim, static_cast<double>(abs_index(alpha)) + snap(s));
  h.add_term(alpha, s, coeff);
  return h;
}

HomogeneousSymbol HomogeneousSymbol::radial(int dim, cplx s, const TorusSeries& coeff) {
  return monomial(dim, {0, 0, 0}, s, coeff);
}

void HomogeneousSymbol::add_term(const Index3& alpha, cplx s, const TorusSeries& coeff) {
  if (coeff.is_zero()) return;
  if (coeff.dim() != dim_) throw DomainError("coefficient dimension mismatch");
  for (int i = 0; i < 3; ++i) {
    if (alpha[i] < 0 || (i >= dim_ && alpha[i] != 0)) throw DomainError("invalid multi-index");
  }
  MonomialKey key{alpha, snap(s)};
  if (snap(static_cast<double>(abs_index(alpha)) + key.s) != degree_) {
    std::ostringstream msg;
    msg << "term degree " << format_complex(static_cast<double>(abs_index(alpha)) + key.s)
        << " does not match symbol degree " << format_complex(degree_);
    throw DomainError(msg.str());
  }
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    terms_.emplace(key, coeff);
  } else {
    it->second += coeff;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

cplx HomogeneousSymbol::evaluate(std::span<const double> x, std::span<const double> xi) const {
  double r = norm2(xi.first(dim_));
  cplx sum{};
  for (const auto& [key, g] : terms_) {
    double mono = 1.0;
    for (int i = 0; i < dim_; ++i) mono *= int_pow(xi[i], key.alpha[i]);
    if (mono == 0.0) continue;
    sum += g(x) * mono * radial_power(r, key.s);
  }
  return sum;
}

cplx HomogeneousSymbol::evaluate_mean(std::span<const double> xi) const {
  double r = norm2(xi.first(dim_));
  cplx sum{};
  for (const auto& [key, g] : terms_) {
    cplx c = g.mean();
    if (c == cplx{}) continue;
    double mono = 1.0;
    for (int i = 0; i < dim_; ++i) mono *= int_pow(xi[i], key.alpha[i]);
    if (mono == 0.0) continue;
    sum += c * mono * radial_power(r, key.s);
  }
  return sum;
}

HomogeneousSymbol HomogeneousSymbol::x_mean() const {
  HomogeneousSymbol out(dim_, degree_);
  for (const auto& [key, g] : terms_) {
    out.add_term(key.alpha, key.s, TorusSeries::constant(dim_, g.mean()));
  }
  return out;
}

bool HomogeneousSymbol::is_real(double tol) const {
  for (const auto& [key, g] : terms_) {
    if (key.s.imag() != 0.0 || !g.is_real(tol)) return false;
  }
  return true;
}

bool HomogeneousSymbol::is_polynomial() const {
  for (const auto& [key, g] : terms_) {
    double s = key.s.real();
    if (key.s.imag() != 0.0 || s < 0.0 || !is_integer(s, 0.0) ||
        static_cast<long>(std::round(s)) % 2 != 0) {
      return false;
    }
  }
  return true;
}

int HomogeneousSymbol::max_frequency() const {
  int m = 0;
  for (const auto& [key, g] : terms_) m = std::max(m, g.max_frequency());
  return m;
}

double HomogeneousSymbol::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [key, g] : terms_) m = std::max(m, g.max_abs_coefficient());
  return m;
}

bool HomogeneousSymbol::approx_equal(const HomogeneousSymbol& other, double tol) const {
  if (dim_ != other.dim_ || degree_ != other.degree_) return false;
  double scale = std::max({max_abs_coefficient(), other.max_abs_coefficient(), 1e-300});
  TorusSeries zero(dim_);
  auto close = [&](const TorusSeries& a, const TorusSeries& b) {
    for (const auto& [g, c] : a.coeffs()) {
      if (std::abs(c - b.coefficient(g)) > tol * scale) return false;
    }
    for (const auto& [g, c] : b.coeffs()) {
      if (std::abs(c - a.coefficient(g)) > tol * scale) return false;
    }
    return true;
  };
  for (const auto& [key, g] : terms_) {
    auto it = other.terms_.find(key);
    if (!close(g, it == other.terms_.end() ? zero : it->second)) return false;
  }
  for (const auto& [key, g] : other.terms_) {
    auto it = terms_.find(key);
    if (!close(g, it == terms_.end() ? zero : it->second)) return false;
  }
  return true;
}

void HomogeneousSymbol::check_compatible(const HomogeneousSymbol& other, const char* op) const {
  if (dim_ != other.dim_) throw DomainError(std::string(op) + ": dimension mismatch");
  if (degree_ != other.degree_) {
    throw DomainError(std::string(op) + ": degree mismatch (" + format_complex(degree_) + " vs " +
                      format_complex(other.degree_) + ")");
  }
}

HomogeneousSymbol& HomogeneousSymbol::operator+=(const HomogeneousSymbol& other) {
  check_compatible(other, "add");
  for (const auto& [key, g] : other.terms_) add_term(key.alpha, key.s, g);
  return *this;
}

HomogeneousSymbol& HomogeneousSymbol::operator-=(const HomogeneousSymbol& other) {
  check_compatible(other, "subtract");
  for (const auto& [key, g] : other.terms_) add_term(key.alpha, key.s, g * cplx{-1.0});
  return *this;
}

HomogeneousSymbol& HomogeneousSymbol::operator*=(cplx s) {
  if (s == cplx{}) {
    terms_.clear();
    return *this;
  }
  for (auto& [key, g] : terms_) g *= s;
  return *this;
}

HomogeneousSymbol operator*(const HomogeneousSymbol& a, const HomogeneousSymbol& b) {
  if (a.dim_ != b.dim_) throw DomainError("multiply: dimension mismatch");
  HomogeneousSymbol out(a.dim_, a.degree_ + b.degree_);
  for (const auto& [ka, ga] : a.terms_) {
    for (const auto& [kb, gb] : b.terms_) {
      Index3 alpha{ka.alpha[0] + kb.alpha[0], ka.alpha[1] + kb.alpha[1], ka.alpha[2] + kb.alpha[2]};
      out.add_term(alpha, ka.s + kb.s, ga * gb);
    }
  }
  return out;
}

HomogeneousSymbol operator*(const HomogeneousSymbol& a, const TorusSeries& g) {
  HomogeneousSymbol out(a.dim_, a.degree_);
  for (const auto& [key, c] : a.terms_) out.add_term(key.alpha, key.s, c * g);
  return out;
}

HomogeneousSymbol d_xi(const HomogeneousSymbol& a, int axis) {
  if (axis < 0 || axis >= a.dim()) throw DomainError("axis out of range");
  HomogeneousSymbol out(a.dim(), a.degree() - 1.0);
  for (const auto& [key, g] : a.terms()) {
    if (key.alpha[axis] > 0) {
      Index3 lower = key.alpha;
      lower[axis] -= 1;
      out.add_term(lower, key.s, g * cplx{static_cast<double>(key.alpha[axis])});
    }
    if (key.s != cplx{}) {
      Index3 upper = key.alpha;
      upper[axis] += 1;
      out.add_term(upper, key.s - 2.0, g * key.s);
    }
  }
  return out;
}

HomogeneousSymbol d_x(const HomogeneousSymbol& a, int axis) {
  HomogeneousSymbol out(a.dim(), a.degree());
  for (const auto& [key, g] : a.terms()) out.add_term(key.alpha, key.s, g.dx(axis));
  return out;
}

HomogeneousSymbol d_xi(const HomogeneousSymbol& a, const Index3& alpha) {
  HomogeneousSymbol out = a;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < alpha[axis]; ++k) out = d_xi(out, axis);
  }
  return out;
}

HomogeneousSymbol d_x(const HomogeneousSymbol& a, const Index3& alpha) {
  HomogeneousSymbol out = a;
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < alpha[axis]; ++k) out = d_x(out, axis);
  }
  return out;
}

HomogeneousSymbol conj(const HomogeneousSymbol& a) {
  HomogeneousSymbol out(a.dim(), std::conj(a.degree()));
  for (const auto& [key, g] : a.terms()) out.add_term(key.alpha, std::conj(key.s), g.conj());
  return out;
}

// ------------------------------------------------------------------ cutoffs

double psi1(double r) {
  if (r <= 0.5) return 0.0;
  if (r >= 1.0) return 1.0;
  double u1 = 2.0 * r - 1.0;
  double u2 = 2.0 - 2.0 * r;
  double b1 = std::exp(-1.0 / u1);
  double b2 = std::exp(-1.0 / u2);
  return b1 / (b1 + b2);
}

double CutoffSpec::value(double radius) const { return none() ? 1.0 : psi1(scale * radius); }

// ------------------------------------------------------ PolyHomogeneousSymbol

PolyHomogeneousSymbol::PolyHomogeneousSymbol(int dim, cplx order) : dim_(dim), order_(snap(order)) {
  check_dim(dim);
}

PolyHomogeneousSymbol::PolyHomogeneousSymbol(int dim, cplx order,
                                             std::vector<SymbolComponent> components)
    : PolyHomogeneousSymbol(dim, order) {
  for (size_t j = 0; j < components.size(); ++j) validate(components[j], j);
  components_ = std::move(components);
}

void PolyHomogeneousSymbol::validate(const SymbolComponent& c, size_t j) const {
  if (c.h.dim() != dim_) throw DomainError("component dimension mismatch");
  if (c.h.degree() != snap(order_ - static_cast<double>(j))) {
    throw DomainError("component " + std::to_string(j) + " has degree " + format_complex(c.h.degree()) +
                      ", expected " + format_complex(order_ - static_cast<double>(j)));
  }
  if (c.cutoff.scale < 0.0) throw DomainError("cutoff scale must be non-negative");
  if (c.cutoff.none() && !c.h.is_polynomial()) {
    throw DomainError("component " + std::to_string(j) +
                      " is not polynomial in xi and needs a low-frequency cutoff");
  }
}

HomogeneousSymbol PolyHomogeneousSymbol::homogeneous(size_t j) const {
  if (j < components_.size()) return components_[j].h;
  return HomogeneousSymbol(dim_, order_ - static_cast<double>(j));
}

CutoffSpec PolyHomogeneousSymbol::cutoff(size_t j) const {
  return j < components_.size() ? components_[j].cutoff : CutoffSpec{};
}

void PolyHomogeneousSymbol::push_back(const HomogeneousSymbol& h, CutoffSpec cutoff) {
  SymbolComponent c{h, cutoff};
  validate(c, components_.size());
  components_.push_back(std::move(c));
}

void PolyHomogeneousSymbol::set_component(size_t j, const HomogeneousSymbol& h, CutoffSpec cutoff) {
  while (components_.size() < j) {
    components_.push_back({HomogeneousSymbol(dim_, order_ - static_cast<double>(components_.size())), {}});
  }
  SymbolComponent c{h, cutoff};
  validate(c, j);
  if (j == components_.size()) {
    components_.push_back(std::move(c));
  } else {
    components_[j] = std::move(c);
  }
}

cplx PolyHomogeneousSymbol::evaluate(std::span<const double> x, std::span<const double> xi) const {
  double r = norm2(xi.first(dim_));
  cplx sum{};
  for (const auto& c : components_) {
    double cut = c.cutoff.value(r);
    if (cut == 0.0) continue;
    sum += cut * c.h.evaluate(x, xi);
  }
  return sum;
}

cplx PolyHomogeneousSymbol::evaluate_mean(std::span<const double> xi) const {
  double r = norm2(xi.first(dim_));
  cplx sum{};
  for (const auto& c : components_) {
    double cut = c.cutoff.value(r);
    if (cut == 0.0) continue;
    sum += cut * c.h.evaluate_mean(xi);
  }
  return sum;
}

bool PolyHomogeneousSymbol::is_real(double tol) const {
  return std::all_of(components_.begin(), components_.end(),
                     [&](const SymbolComponent& c) { return c.h.is_real(tol); });
}

bool PolyHomogeneousSymbol::is_x_independent() const {
  for (const auto& c : components_) {
    for (const auto& [key, g] : c.h.terms()) {
      if (g.max_frequency() != 0) return false;
    }
  }
  return true;
}

PolyHomogeneousSymbol& PolyHomogeneousSymbol::operator*=(cplx s) {
  for (auto& c : components_) c.h *= s;
  return *this;
}

// ---------------------------------------------------------------- SphereGrid

SphereGrid::SphereGrid(int dim, int resolution, int torus_resolution)
    : dim_(dim), resolution_(resolution), torus_resolution_(torus_resolution) {
  check_dim(dim);
  if (resolution < 1 || torus_resolution < 1) throw DomainError("grid resolution must be positive");
  if (dim == 2) {
    for (int i = 0; i < resolution; ++i) {
      double th = 2.0 * kPi * i / resolution;
      nodes_.push_back({std::cos(th), std::sin(th), 0.0});
      weights_.push_back(2.0 * kPi / resolution);
    }
  } else {
    const quad::Rule& gl = quad::gauss_legendre(resolution);
    int naz = 2 * resolution;
    for (int i = 0; i < resolution; ++i) {
      double ct = gl.nodes[i];
      double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (int k = 0; k < naz; ++k) {
        double ph = 2.0 * kPi * k / naz;
        nodes_.push_back({st * std::cos(ph), st * std::sin(ph), ct});
        weights_.push_back(gl.weights[i] * 2.0 * kPi / naz);
      }
    }
  }
}

std::vector<std::array<double, 3>> SphereGrid::torus_points() const {
  std::vector<std::array<double, 3>> pts;
  int m = torus_resolution_;
  if (dim_ == 2) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) pts.push_back({double(i) / m, double(j) / m, 0.0});
    }
  } else {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        for (int k = 0; k < m; ++k) pts.push_back({double(i) / m, double(j) / m, double(k) / m});
      }
    }
  }
  return pts;
}

double sphere_area(int dim) { return dim == 2 ? 2.0 * kPi : 4.0 * kPi; }

namespace {

double sphere_moment_closed(const Index3& alpha, int dim) {
  double prod = 1.0;
  for (int i = 0; i < dim; ++i) {
    if (alpha[i] % 2 != 0) return 0.0;
    prod *= std::tgamma(0.5 * (alpha[i] + 1));
  }
  return 2.0 * prod / std::tgamma(0.5 * (abs_index(alpha) + dim));
}

constexpr int kMomentTableMax = 24;

// moments for alpha_i <= kMomentTableMax, indexed by dim then alpha
struct MomentTable {
  std::array<std::vector<double>, 2> values;
  MomentTable() { reset(); }
  static size_t slot(const Index3& a) {
    const size_t side = kMomentTableMax + 1;
    return (size_t(a[0]) * side + size_t(a[1])) * side + size_t(a[2]);
  }
  void reset() {
    const int side = kMomentTableMax + 1;
    for (int dim : {2, 3}) {
      auto& v = values[dim - 2];
      v.assign(size_t(side) * side * side, 0.0);
      for (int a = 0; a < side; ++a)
        for (int b = 0; b < side; ++b)
          for (int c = 0; c < (dim == 3 ? side : 1); ++c) v[slot({a, b, c})] = sphere_moment_closed({a, b, c}, dim);
    }
  }
};

MomentTable& moment_table() {
  static MomentTable table;
  return table;
}

}  // namespace

double sphere_moment(const Index3& alpha, int dim) {
  if (dim != 2 && dim != 3) throw DomainError("sphere moment: dimension must be 2 or 3");
  for (int i = 0; i < 3; ++i) {
    if (alpha[i] < 0 || alpha[i] > kMomentTableMax) return sphere_moment_closed(alpha, dim);
  }
  if (dim == 2 && alpha[2] != 0) return sphere_moment_closed(alpha, dim);
  return moment_table().values[dim - 2][MomentTable::slot(alpha)];
}

std::string perturb_sphere_moment_table(unsigned seed, double rel) {
  auto& t = moment_table();
  std::mt19937_64 rng(seed);
  // a nonzero entry of low order, so that ordinary symbols hit it
  std::uniform_int_distribution<int> pick(1, 2);
  Index3 a{2 * pick(rng), 2 * pick(rng) - 2, 0};
  int dim = 2;
  t.values[0][MomentTable::slot(a)] *= 1.0 + rel;
  std::ostringstream o;
  o << "sphere moment of xi^(" << a[0] << "," << a[1] << ") in dimension " << dim << " scaled by 1 + " << rel;
  return o.str();
}

void reset_sphere_moment_table() { moment_table().reset(); }

cplx sphere_torus_integral(const HomogeneousSymbol& g) {
  cplx sum{};
  for (const auto& [key, c] : g.terms()) {
    cplx m = c.mean();
    if (m == cplx{}) continue;
    sum += m * sphere_moment(key.alpha, g.dim());
  }
  return sum;
}

cplx sphere_torus_quadrature(const HomogeneousSymbol& g, const SphereGrid& grid) {
  if (grid.dim() != g.dim()) throw DomainError("grid dimension mismatch");
  auto xs = grid.torus_points();
  double wx = 1.0 / static_cast<double>(xs.size());
  CompensatedSum<cplx> acc;
  for (const auto& x : xs) {
    for (size_t i = 0; i < grid.nodes().size(); ++i) {
      acc.add(wx * grid.weights()[i] * g.evaluate(x, grid.nodes()[i]));
    }
  }
  return acc.value();
}

// ------------------------------------------------------- EllipticOperatorSpec

EllipticOperatorSpec::EllipticOperatorSpec(PolyHomogeneousSymbol symbol, double c0, double c1)
    : symbol_(std::move(symbol)), m0_(symbol_.order().real()), c0_(c0), c1_(c1) {
  if (symbol_.order().imag() != 0.0 || m0_ <= 0.0) {
    throw DomainError("elliptic operator needs a real positive order m0");
  }
  if (symbol_.size() == 0) throw DomainError("elliptic operator needs a principal symbol");
  if (c0 <= 0.0) throw DomainError("ellipticity constant c0 must be positive");
  if (c1 < 0.0) throw DomainError("lower-bound shift c1 must be non-negative");
  if (!symbol_.is_real()) throw DomainError("elliptic operator symbol must be real-valued");
  const int dim = symbol_.dim();
  SphereGrid grid(dim, dim == 2 ? 96 : 12, dim == 2 ? 16 : 8);
  const HomogeneousSymbol& lp = principal();
  min_principal_ = std::numeric_limits<double>::infinity();
  for (const auto& x : grid.torus_points()) {
    for (const auto& w : grid.nodes()) {
      double v = lp.evaluate(x, w).real();
      min_principal_ = std::min(min_principal_, v);
      if (v < c0) {
        std::ostringstream msg;
        msg << "ellipticity violated: principal symbol " << v << " < c0 = " << c0 << " at x = (" << x[0]
            << ", " << x[1] << (dim == 3 ? ", " + std::to_string(x[2]) : std::string()) << "), xi = ("
            << w[0] << ", " << w[1] << (dim == 3 ? ", " + std::to_string(w[2]) : std::string()) << ")";
        throw DomainError(msg.str());
      }
    }
  }
}

// ---------------------------------------------------- weighted integrals

cplx weighted_coefficient_integral(const HomogeneousSymbol& g, const EllipticOperatorSpec& op,
                                   cplx sigma, double rel_tol) {
  if (g.dim() != op.dim()) throw DomainError("weighted integral: dimension mismatch");
  if (g.is_zero()) return 0.0;
  const int dim = g.dim();
  const HomogeneousSymbol& lp = op.principal();
  const bool x_dependent = lp.max_frequency() > 0;
  const HomogeneousSymbol g_eff = x_dependent ? g : g.x_mean();

  int sphere_res = dim == 2 ? 64 : 16;
  int torus_res = x_dependent ? std::max(8, 2 * (g.max_frequency() + lp.max_frequency()) + 2) : 1;

  // on the unit sphere xi^alpha |xi|^s = xi^alpha, so each monomial splits into a torus
  // coefficient times a sphere sum against l^{-sigma}
  auto evaluate_on = [&](int sres, int tres) {
    SphereGrid grid(dim, sres, tres);
    std::vector<std::array<double, 3>> xs =
        x_dependent ? grid.torus_points() : std::vector<std::array<double, 3>>{{0.0, 0.0, 0.0}};
    const size_t nk = grid.nodes().size();
    const double wx = 1.0 / static_cast<double>(xs.size());
    std::vector<cplx> W(xs.size() * nk);
    for (size_t ix = 0; ix < xs.size(); ++ix) {
      const auto& x = xs[ix];
      for (size_t i = 0; i < nk; ++i) {
        const auto& w = grid.nodes()[i];
        double l = lp.evaluate(x, w).real();
        if (!(l > 0.0)) {
          std::ostringstream msg;
          msg << "weighted integral: principal symbol not positive (" << l << ") at node x = (" << x[0]
              << ", " << x[1] << "), xi = (" << w[0] << ", " << w[1] << ", " << w[2] << ")";
          throw DomainError(msg.str());
        }
        W[ix * nk + i] = grid.weights()[i] * std::exp(-sigma * std::log(l));
      }
    }
    CompensatedSum<cplx> acc;
    double scale = 0.0;
    std::vector<double> P(nk);
    for (const auto& [key, c] : g_eff.terms()) {
      for (size_t i = 0; i < nk; ++i) {
        const auto& w = grid.nodes()[i];
        double v = 1.0;
        for (int d = 0; d < dim; ++d) {
          for (int e = 0; e < key.alpha[d]; ++e) v *= w[d];
        }
        P[i] = v;
      }
      for (size_t ix = 0; ix < xs.size(); ++ix) {
        cplx cx = x_dependent ? c(xs[ix]) : c.mean();
        if (cx == cplx{}) continue;
        cplx inner{};
        double mag = 0.0;
        for (size_t i = 0; i < nk; ++i) {
          inner += P[i] * W[ix * nk + i];
          mag += std::abs(P[i] * W[ix * nk + i]);
        }
        acc.add(wx * cx * inner);
        scale += wx * std::abs(cx) * mag;
      }
    }
    return std::pair{acc.value(), scale};
  };

  auto [prev, scale] = evaluate_on(sphere_res, torus_res);
  for (int level = 0; level < 7; ++level) {
    sphere_res *= 2;
    if (x_dependent) torus_res *= 2;
    auto [cur, sc] = evaluate_on(sphere_res, torus_res);
    if (std::abs(cur - prev) <= rel_tol * std::max(std::abs(cur), 1e-6 * sc)) return cur;
    prev = cur;
  }
  throw DomainError("weighted integral: quadrature did not converge under grid doubling");
}

}  // namespace psitrace
