#include "psitrace/testfunction.hpp"

#include <algorithm>
#include <limits>
#include <mutex>

#include "psitrace/quadrature.hpp"

namespace psitrace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// ---------------------------------------------------------------- IntervalSet

IntervalSet IntervalSet::all() { return span(-kInf, kInf); }

IntervalSet IntervalSet::span(double lo, double hi) {
  IntervalSet s;
  if (lo <= hi) s.parts_.push_back({lo, hi});
  return s;
}

bool IntervalSet::bounded() const { return empty() || (std::isfinite(lo()) && std::isfinite(hi())); }
double IntervalSet::lo() const { return empty() ? kInf : parts_.front().lo; }
double IntervalSet::hi() const { return empty() ? -kInf : parts_.back().hi; }

bool IntervalSet::contains(double u) const {
  return std::any_of(parts_.begin(), parts_.end(), [&](const Interval& i) { return i.lo <= u && u <= i.hi; });
}

void IntervalSet::normalize() {
  std::sort(parts_.begin(), parts_.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& p : parts_) {
    if (!merged.empty() && p.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, p.hi);
    } else {
      merged.push_back(p);
    }
  }
  parts_ = std::move(merged);
}

IntervalSet IntervalSet::unite(const IntervalSet& o) const {
  IntervalSet s = *this;
  s.parts_.insert(s.parts_.end(), o.parts_.begin(), o.parts_.end());
  s.normalize();
  return s;
}

IntervalSet IntervalSet::intersect(const IntervalSet& o) const {
  IntervalSet s;
  for (const auto& a : parts_) {
    for (const auto& b : o.parts_) {
      double lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
      if (lo <= hi) s.parts_.push_back({lo, hi});
    }
  }
  s.normalize();
  return s;
}

IntervalSet IntervalSet::preimage(double a, double b) const {
  if (a == 0.0) return contains(b) ? all() : IntervalSet();
  IntervalSet s;
  for (const auto& p : parts_) {
    double u1 = (p.lo - b) / a, u2 = (p.hi - b) / a;
    s.parts_.push_back({std::min(u1, u2), std::max(u1, u2)});
  }
  s.normalize();
  return s;
}

// ---------------------------------------------------------- bump primitives

namespace {

using Poly = std::vector<double>;

Poly poly_derivative(const Poly& p) {
  Poly d;
  for (size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * static_cast<double>(i));
  return d;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  }
  return r;
}

Poly poly_add(Poly a, const Poly& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

double horner(const Poly& p, double u) {
  double v = 0.0;
  for (size_t i = p.size(); i-- > 0;) v = v * u + p[i];
  return v;
}

// B0^{(k)} = P_k(u) (1-u^2)^{-2k} B0 with
// P_{k+1} = P_k' (1-u^2)^2 + 4 k u (1-u^2) P_k - 2 u P_k.
const Poly& bump_poly(int k) {
  static std::mutex mu;
  static std::vector<Poly> cache{{1.0}};
  std::lock_guard<std::mutex> lock(mu);
  const Poly one_minus_u2{1.0, 0.0, -1.0};
  const Poly sq = poly_mul(one_minus_u2, one_minus_u2);
  while (static_cast<int>(cache.size()) <= k) {
    int j = static_cast<int>(cache.size()) - 1;
    const Poly& p = cache.back();
    Poly next = poly_mul(poly_derivative(p), sq);
    next = poly_add(next, poly_mul(Poly{0.0, 4.0 * j, 0.0, -4.0 * j}, p));
    next = poly_add(next, poly_mul(Poly{0.0, -2.0}, p));
    cache.push_back(std::move(next));
  }
  return cache[k];
}

struct SmoothstepTable {
  static constexpr int kCells = 2048;
  std::vector<double> cumulative;  // int_{-1}^{u_i} B0
  double mass = 0.0;

  static double cell_integral(double a, double b) {
    const quad::Rule& gl = quad::gauss_legendre(12);
    double s = 0.0;
    for (size_t i = 0; i < gl.nodes.size(); ++i) {
      double u = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
      s += gl.weights[i] * bump_derivative(0, u);
    }
    return 0.5 * (b - a) * s;
  }

  SmoothstepTable() {
    cumulative.resize(kCells + 1, 0.0);
    const double w = 2.0 / kCells;
    for (int i = 0; i < kCells; ++i) {
      cumulative[i + 1] = cumulative[i] + cell_integral(-1.0 + i * w, -1.0 + (i + 1) * w);
    }
    mass = cumulative[kCells];
  }

  double partial(double u) const {
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return mass;
    const double w = 2.0 / kCells;
    int i = std::min(kCells - 1, static_cast<int>((u + 1.0) / w));
    double a = -1.0 + i * w;
    return cumulative[i] + cell_integral(a, u);
  }
};

const SmoothstepTable& smoothstep_table() {
  static const SmoothstepTable table;
  return table;
}

}  // namespace

double bump_derivative(int k, double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  double q = 1.0 - u * u;
  double e = -1.0 / q;
  if (k == 0) return std::exp(e);
  double p = horner(bump_poly(k), u);
  if (p == 0.0) return 0.0;
  return p * std::exp(e - 2.0 * k * std::log(q));
}

double bump_mass() { return smoothstep_table().mass; }

double smoothstep_value(double u) {
  const auto& t = smoothstep_table();
  if (u > 0.0) return 1.0 - t.partial(-u) / t.mass;
  return t.partial(u) / t.mass;
}

// ------------------------------------------------------------- TestFunction

struct TestFunction::Node {
  Kind kind;
  std::vector<double> params;
  std::vector<TestFunction> children;
};

TestFunction::TestFunction() : node_(std::make_shared<Node>(Node{Kind::Poly, {}, {}})) {}

TestFunction TestFunction::poly(std::vector<double> coeffs) {
  while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
  return TestFunction(std::make_shared<Node>(Node{Kind::Poly, std::move(coeffs), {}}));
}

TestFunction TestFunction::exp(double c) {
  return TestFunction(std::make_shared<Node>(Node{Kind::Exp, {c}, {}}));
}

TestFunction TestFunction::bump() { return TestFunction(std::make_shared<Node>(Node{Kind::Bump, {}, {}})); }

TestFunction TestFunction::smoothstep() {
  return TestFunction(std::make_shared<Node>(Node{Kind::Smoothstep, {}, {}}));
}

TestFunction TestFunction::affine(double a, double b, const TestFunction& f) {
  return TestFunction(std::make_shared<Node>(Node{Kind::Affine, {a, b}, {f}}));
}

TestFunction TestFunction::sum(const TestFunction& f, const TestFunction& g) {
  return TestFunction(std::make_shared<Node>(Node{Kind::Sum, {}, {f, g}}));
}

TestFunction TestFunction::prod(const TestFunction& f, const TestFunction& g) {
  return TestFunction(std::make_shared<Node>(Node{Kind::Prod, {}, {f, g}}));
}

TestFunction TestFunction::bump_on(double a, double b) {
  if (!(b > a)) throw DomainError("bump_on needs a < b");
  return affine(2.0 / (b - a), -(a + b) / (b - a), bump());
}

TestFunction TestFunction::cutoff(double c, double d) {
  if (!(c >= 0.0 && d > c)) throw DomainError("cutoff needs 0 <= c < d");
  TestFunction fall = affine(-2.0 / (d - c), (c + d) / (d - c), smoothstep());
  TestFunction rise = affine(2.0, 3.0, smoothstep());
  return prod(fall, rise);
}

TestFunction::Kind TestFunction::kind() const { return node_->kind; }

double TestFunction::derivative(int k, double u) const {
  if (k < 0) throw DomainError("negative derivative order");
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Poly: {
      Poly p = n.params;
      for (int i = 0; i < k && !p.empty(); ++i) p = poly_derivative(p);
      return horner(p, u);
    }
    case Kind::Exp:
      return std::pow(n.params[0], k) * std::exp(n.params[0] * u);
    case Kind::Bump:
      return bump_derivative(k, u);
    case Kind::Smoothstep:
      if (k == 0) return smoothstep_value(u);
      return bump_derivative(k - 1, u) / bump_mass();
    case Kind::Affine: {
      double a = n.params[0], b = n.params[1];
      if (a == 0.0) return k == 0 ? n.children[0](b) : 0.0;
      return std::pow(a, k) * n.children[0].derivative(k, a * u + b);
    }
    case Kind::Sum:
      return n.children[0].derivative(k, u) + n.children[1].derivative(k, u);
    case Kind::Prod: {
      double s = 0.0, binom = 1.0;
      for (int i = 0; i <= k; ++i) {
        double fi = n.children[0].derivative(i, u);
        if (fi != 0.0) s += binom * fi * n.children[1].derivative(k - i, u);
        binom = binom * (k - i) / (i + 1);
      }
      return s;
    }
  }
  return 0.0;
}

IntervalSet TestFunction::support() const { return derivative_support(0); }

IntervalSet TestFunction::derivative_support(int k) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Poly:
      return static_cast<int>(n.params.size()) > k ? IntervalSet::all() : IntervalSet();
    case Kind::Exp:
      return (k == 0 || n.params[0] != 0.0) ? IntervalSet::all() : IntervalSet();
    case Kind::Bump:
      return IntervalSet::span(-1.0, 1.0);
    case Kind::Smoothstep:
      return k == 0 ? IntervalSet::span(-1.0, kInf) : IntervalSet::span(-1.0, 1.0);
    case Kind::Affine: {
      double a = n.params[0], b = n.params[1];
      if (a == 0.0) return (k == 0 && n.children[0](b) != 0.0) ? IntervalSet::all() : IntervalSet();
      return n.children[0].derivative_support(k).preimage(a, b);
    }
    case Kind::Sum:
      return n.children[0].derivative_support(k).unite(n.children[1].derivative_support(k));
    case Kind::Prod: {
      IntervalSet s;
      for (int i = 0; i <= k; ++i) {
        s = s.unite(n.children[0].derivative_support(i).intersect(n.children[1].derivative_support(k - i)));
      }
      return s;
    }
  }
  return {};
}

std::optional<double> TestFunction::constant_on(double lo, double hi) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Poly:
      if (n.params.size() <= 1) return n.params.empty() ? 0.0 : n.params[0];
      return std::nullopt;
    case Kind::Exp:
      if (n.params[0] == 0.0) return 1.0;
      return std::nullopt;
    case Kind::Bump:
      if (hi <= -1.0 || lo >= 1.0) return 0.0;
      return std::nullopt;
    case Kind::Smoothstep:
      if (hi <= -1.0) return 0.0;
      if (lo >= 1.0) return 1.0;
      return std::nullopt;
    case Kind::Affine: {
      double a = n.params[0], b = n.params[1];
      if (a == 0.0) return n.children[0](b);
      double v1 = a * lo + b, v2 = a * hi + b;
      return n.children[0].constant_on(std::min(v1, v2), std::max(v1, v2));
    }
    case Kind::Sum: {
      auto f = n.children[0].constant_on(lo, hi), g = n.children[1].constant_on(lo, hi);
      if (f && g) return *f + *g;
      return std::nullopt;
    }
    case Kind::Prod: {
      auto f = n.children[0].constant_on(lo, hi), g = n.children[1].constant_on(lo, hi);
      if ((f && *f == 0.0) || (g && *g == 0.0)) return 0.0;
      if (f && g) return *f * *g;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

bool TestFunction::is_zero() const {
  auto c = constant_on(-kInf, kInf);
  return (c && *c == 0.0) || support().empty();
}

bool TestFunction::supported_in_positive() const {
  IntervalSet s = support();
  return s.bounded() && (s.empty() || s.lo() > 0.0);
}

bool TestFunction::equals_one_on(double lo, double hi) const {
  auto c = constant_on(lo, hi);
  return c && *c == 1.0;
}

double TestFunction::flat_radius() const {
  if (std::abs(derivative(0, 0.0) - 1.0) > 1e-15) return 0.0;
  IntervalSet d = derivative_support(1).intersect(IntervalSet::span(0.0, kInf));
  if (d.empty()) return kInf;
  return d.lo();
}

bool TestFunction::derivative_away_from_zero(int k) const {
  IntervalSet d = derivative_support(k).intersect(IntervalSet::span(0.0, kInf));
  return d.bounded() && (d.empty() || d.lo() > 0.0);
}

std::string TestFunction::to_text() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Poly: {
      std::string s = "poly(";
      for (size_t i = 0; i < n.params.size(); ++i) s += (i ? "," : "") + format_real(n.params[i]);
      return s + ")";
    }
    case Kind::Exp:
      return "exp(" + format_real(n.params[0]) + ")";
    case Kind::Bump:
      return "bump";
    case Kind::Smoothstep:
      return "smoothstep";
    case Kind::Affine:
      return "affine(" + format_real(n.params[0]) + "," + format_real(n.params[1]) + "," +
             n.children[0].to_text() + ")";
    case Kind::Sum:
      return "sum(" + n.children[0].to_text() + "," + n.children[1].to_text() + ")";
    case Kind::Prod:
      return "prod(" + n.children[0].to_text() + "," + n.children[1].to_text() + ")";
  }
  return "";
}

TestFunction TestFunction::parse(TextCursor& in) {
  std::string name = in.parse_ident();
  if (name == "bump") return bump();
  if (name == "smoothstep") return smoothstep();
  in.expect('(');
  TestFunction out;
  if (name == "poly") {
    std::vector<double> c;
    if (in.peek() != ')') {
      do c.push_back(in.parse_real());
      while (in.accept(','));
    }
    out = poly(std::move(c));
  } else if (name == "exp") {
    out = exp(in.parse_real());
  } else if (name == "affine") {
    double a = in.parse_real();
    in.expect(',');
    double b = in.parse_real();
    in.expect(',');
    out = affine(a, b, parse(in));
  } else if (name == "sum" || name == "prod") {
    TestFunction f = parse(in);
    in.expect(',');
    TestFunction g = parse(in);
    out = name == "sum" ? sum(f, g) : prod(f, g);
  } else if (name == "bump_on" || name == "cutoff") {
    double a = in.parse_real();
    in.expect(',');
    double b = in.parse_real();
    try {
      out = name == "bump_on" ? bump_on(a, b) : cutoff(a, b);
    } catch (const DomainError& e) {
      in.fail(e.what());
    }
  } else if (name == "scale") {
    double c = in.parse_real();
    in.expect(',');
    out = prod(constant(c), parse(in));
  } else {
    in.fail("unknown function '" + name + "'");
  }
  in.expect(')');
  return out;
}

TestFunction TestFunction::parse(const std::string& text) {
  TextCursor in(text);
  TestFunction f = parse(in);
  if (!in.at_end()) in.fail("unexpected trailing text");
  return f;
}

bool TestFunction::operator==(const TestFunction& o) const {
  if (node_ == o.node_) return true;
  return node_->kind == o.node_->kind && node_->params == o.node_->params && node_->children == o.node_->children;
}

}  // namespace psitrace
