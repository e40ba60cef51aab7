#include "psitrace/symbol_io.hpp"

namespace psitrace {

namespace {

std::string index_text(const Index3& a, int dim) {
  std::string out;
  for (int i = 0; i < dim; ++i) {
    if (i) out += ",";
    out += std::to_string(a[i]);
  }
  return out;
}

Index3 parse_index(TextCursor& in, int dim) {
  Index3 a{0, 0, 0};
  for (int i = 0; i < dim; ++i) {
    if (i) in.expect(',');
    a[i] = in.parse_int();
  }
  return a;
}

void expect_done(TextCursor& in) {
  if (!in.at_end()) in.fail("unexpected trailing text");
}

}  // namespace

std::string to_text(const TorusSeries& g) {
  std::string out = "{";
  bool first = true;
  for (const auto& [freq, c] : g.coeffs()) {
    if (!first) out += "; ";
    first = false;
    out += index_text(freq, g.dim()) + ":" + format_complex_text(c);
  }
  return out + "}";
}

std::string to_text(const HomogeneousSymbol& h) {
  if (h.is_zero()) return "0";
  std::string out;
  for (const auto& [key, g] : h.terms()) {
    if (!out.empty()) out += " + ";
    out += to_text(g) + " xi^(" + index_text(key.alpha, h.dim()) + ") r^(" + format_complex_text(key.s) + ")";
  }
  return out;
}

std::string to_text(const PolyHomogeneousSymbol& a) {
  std::string out = "symbol(n=" + std::to_string(a.dim()) + ", m=" + format_complex_text(a.order()) + ") {";
  for (size_t j = 0; j < a.size(); ++j) {
    out += j ? "; " : " ";
    out += "cutoff " + format_real(a.cutoff(j).scale) + " : " + to_text(a.homogeneous(j));
  }
  return out + (a.size() ? " }" : "}");
}

TorusSeries parse_series(TextCursor& in, int dim) {
  TorusSeries g(dim);
  in.expect('{');
  if (in.accept('}')) return g;
  do {
    Index3 freq = parse_index(in, dim);
    in.expect(':');
    g.accumulate(freq, in.parse_complex());
  } while (in.accept(';'));
  in.expect('}');
  return g;
}

HomogeneousSymbol parse_homogeneous(TextCursor& in, int dim, std::optional<cplx> degree) {
  if (in.peek() == '0') {
    in.expect('0');
    if (!degree) in.fail("zero symbol needs a declared degree");
    return HomogeneousSymbol(dim, *degree);
  }
  std::optional<HomogeneousSymbol> h;
  do {
    TorusSeries g = parse_series(in, dim);
    in.expect("xi^");
    in.expect('(');
    Index3 alpha = parse_index(in, dim);
    in.expect(')');
    in.expect("r^");
    in.expect('(');
    cplx s = in.parse_complex();
    in.expect(')');
    if (!h) h.emplace(dim, degree.value_or(static_cast<double>(abs_index(alpha)) + s));
    try {
      h->add_term(alpha, s, g);
    } catch (const DomainError& e) {
      in.fail(e.what());
    }
  } while (in.accept('+'));
  return *h;
}

PolyHomogeneousSymbol parse_symbol(TextCursor& in) {
  in.expect("symbol");
  in.expect('(');
  in.expect('n');
  in.expect('=');
  int dim = in.parse_int();
  in.expect(',');
  in.expect('m');
  in.expect('=');
  cplx order = in.parse_complex();
  in.expect(')');
  PolyHomogeneousSymbol a(dim, order);
  in.expect('{');
  if (in.accept('}')) return a;
  do {
    in.expect("cutoff");
    double scale = in.parse_real();
    in.expect(':');
    cplx deg = snap(order - static_cast<double>(a.size()));
    HomogeneousSymbol h = parse_homogeneous(in, dim, deg);
    try {
      a.push_back(h, CutoffSpec{scale});
    } catch (const DomainError& e) {
      in.fail(e.what());
    }
  } while (in.accept(';'));
  in.expect('}');
  return a;
}

HomogeneousSymbol parse_homogeneous(const std::string& text, int dim, std::optional<cplx> degree) {
  TextCursor in(text);
  HomogeneousSymbol h = parse_homogeneous(in, dim, degree);
  expect_done(in);
  return h;
}

PolyHomogeneousSymbol parse_symbol(const std::string& text) {
  TextCursor in(text);
  PolyHomogeneousSymbol a = parse_symbol(in);
  expect_done(in);
  return a;
}

}  // namespace psitrace
