#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "psitrace/config.hpp"
#include "psitrace/expand.hpp"
#include "psitrace/oracle.hpp"
#include "psitrace/runner.hpp"
#include "psitrace/symbol_io.hpp"
#include "psitrace/traces.hpp"

namespace py = pybind11;
using namespace psitrace;

namespace {

std::array<double, 3> point(const std::vector<double>& v, int dim) {
  if (static_cast<int>(v.size()) != dim) throw DomainError("expected a point with " + std::to_string(dim) + " entries");
  std::array<double, 3> p{};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

py::dict prediction_dict(const ExpansionPrediction& p) {
  py::list terms;
  for (const auto& t : p.terms()) terms.append(py::make_tuple(t.exponent, t.coefficient, t.provenance));
  py::dict d;
  d["terms"] = terms;
  d["constant"] = p.constant() ? py::cast(p.constant()->coefficient) : py::none();
  d["notes"] = p.notes();
  d["csv"] = p.to_csv();
  return d;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["command"] = command_name(r.command);
  d["pass"] = r.pass;
  d["text"] = r.text;
  d["files"] = r.files;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Trace expansions of pseudodifferential operators on the flat torus";
  m.attr("__version__") = version_string();

  static py::exception<DomainError> domain_error(m, "DomainError", PyExc_ValueError);
  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DomainError& e) {
      py::set_error(domain_error, e.what());
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    }
  });

  py::class_<PolyHomogeneousSymbol>(m, "Symbol")
      .def(py::init([](const std::string& text) { return parse_symbol(text); }), py::arg("text"))
      .def_property_readonly("dim", &PolyHomogeneousSymbol::dim)
      .def_property_readonly("order", &PolyHomogeneousSymbol::order)
      .def_property_readonly("size", &PolyHomogeneousSymbol::size)
      .def("__call__",
           [](const PolyHomogeneousSymbol& a, const std::vector<double>& x, const std::vector<double>& xi) {
             auto px = point(x, a.dim()), pxi = point(xi, a.dim());
             return a.evaluate(std::span<const double>(px.data(), a.dim()), std::span<const double>(pxi.data(), a.dim()));
           },
           py::arg("x"), py::arg("xi"))
      .def("__mul__", [](const PolyHomogeneousSymbol& a, cplx s) { return s * a; })
      .def("__rmul__", [](const PolyHomogeneousSymbol& a, cplx s) { return s * a; })
      .def("__eq__", [](const PolyHomogeneousSymbol& a, const PolyHomogeneousSymbol& b) { return a == b; })
      .def("__str__", [](const PolyHomogeneousSymbol& a) { return to_text(a); })
      .def("__repr__", [](const PolyHomogeneousSymbol& a) { return "Symbol('" + to_text(a) + "')"; });

  py::class_<TestFunction>(m, "TestFunction")
      .def(py::init([](const std::string& text) { return TestFunction::parse(text); }), py::arg("text"))
      .def_static("bump_on", &TestFunction::bump_on, py::arg("a"), py::arg("b"))
      .def_static("cutoff", &TestFunction::cutoff, py::arg("c"), py::arg("d"))
      .def("__call__", [](const TestFunction& f, double u) { return f(u); })
      .def("derivative", &TestFunction::derivative, py::arg("k"), py::arg("u"))
      .def("__eq__", [](const TestFunction& f, const TestFunction& g) { return f == g; })
      .def("__str__", &TestFunction::to_text)
      .def("__repr__", [](const TestFunction& f) { return "TestFunction('" + f.to_text() + "')"; });

  py::class_<EllipticOperatorSpec>(m, "Operator")
      .def(py::init<PolyHomogeneousSymbol, double, double>(), py::arg("symbol"), py::arg("c0"), py::arg("c1") = 0.0)
      .def_property_readonly("order", &EllipticOperatorSpec::order)
      .def_property_readonly("dim", &EllipticOperatorSpec::dim)
      .def_property_readonly("is_multiplier", &EllipticOperatorSpec::is_multiplier)
      .def_property_readonly("symbol", &EllipticOperatorSpec::symbol);

  m.def("residue", &residue_density_integrated, py::arg("A"), "Non-commutative residue res(A)");
  m.def("canonical_trace", &canonical_trace, py::arg("A"), py::arg("split") = 1.0);
  m.def("smoothing_trace", &smoothing_trace, py::arg("A"));
  m.def("mellin_moment", &mellin_moment, py::arg("f"), py::arg("s"), py::arg("r") = 0);

  m.def(
      "predict",
      [](const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f, int N,
         const std::string& mode, int threads) {
        if (mode == "res") return prediction_dict(predict_expansion_res(A, L, f, N, threads));
        if (mode == "tr") return prediction_dict(predict_expansion_TR(A, L, f, N, threads));
        throw DomainError("mode must be 'res' or 'tr'");
      },
      py::arg("A"), py::arg("L"), py::arg("f"), py::arg("N"), py::arg("mode") = "res", py::arg("threads") = 0,
      "Predicted expansion of tr(A f(tL)): {'terms': [(exponent, coefficient, provenance)], 'constant', ...}");

  m.def("lattice_trace", &multiplier_trace, py::arg("A"), py::arg("L"), py::arg("f"), py::arg("t"));
  m.def(
      "matrix_traces",
      [](const PolyHomogeneousSymbol& A, const EllipticOperatorSpec& L, const TestFunction& f,
         const std::vector<double>& ts, int K, double safety) {
        MatrixOracle oracle(A, L, MatrixOracleOptions{K, safety});
        const OracleSeries series = oracle.series(f, ts);
        std::vector<cplx> out;
        for (const auto& s : series.samples()) out.push_back(s.value);
        return out;
      },
      py::arg("A"), py::arg("L"), py::arg("f"), py::arg("ts"), py::arg("K") = 16, py::arg("safety") = 2.0,
      "tr(M_A f(t H)) on the Fourier modes |k|_inf <= K; ts strictly decreasing");
  m.def(
      "operator_matrix",
      [](const PolyHomogeneousSymbol& sigma, int K) { return operator_matrix(sigma, fourier_modes(sigma.dim(), K)); },
      py::arg("symbol"), py::arg("K"));
  m.def(
      "hs_matrix_function",
      [](const Eigen::MatrixXcd& H, const TestFunction& f, double tol) {
        HSOptions opt;
        opt.tol = tol;
        return hs_matrix_function(H, f, opt).value;
      },
      py::arg("H"), py::arg("f"), py::arg("tol") = 1e-7, "f(H) through the Helffer-Sjostrand integral");

  m.def(
      "normalize_config", [](const std::string& text) { return parse_config(text).to_text(); }, py::arg("text"),
      "Parses a config and returns its canonical serialization");
  m.def(
      "run",
      [](const std::string& command, const std::string& config_text, bool write_files) {
        ConfigFile file = parse_config(config_text);
        py::list out;
        for (const auto& c : file.experiments) out.append(report_dict(run_command(parse_command(command), c, write_files)));
        return out;
      },
      py::arg("command"), py::arg("config_text"), py::arg("write_files") = false,
      "Runs residue, predict or verify on every stanza of a config; returns one report dict per stanza");
}
