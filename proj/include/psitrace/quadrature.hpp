#pragma once

#include <functional>
#include <vector>

#include "psitrace/common.hpp"

namespace psitrace::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n points on [-1, 1] (Newton iteration on P_n).
const Rule& gauss_legendre(int n);

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels of `order` points.
Rule composite_gauss(double a, double b, int panels, int order = 16);

/// Composite rule over consecutive breakpoints, about `density` panels per unit length, with
/// panels refined geometrically (halving `levels` times) toward every breakpoint. Suited to
/// integrands that are smooth but flat to infinite order at the breakpoints.
Rule graded_gauss(const std::vector<double>& breaks, double density, int order = 16, int levels = 24);
/// Panel edges used by graded_gauss.
std::vector<double> graded_edges(const std::vector<double>& breaks, double density, int levels);
/// Composite rule over the given panel edges.
Rule panel_gauss(const std::vector<double>& edges, int order);

/// Adaptive Gauss-Kronrod integral of a smooth real integrand on a finite interval.
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-14);

/// Complex-valued integrand, real and imaginary parts integrated separately.
cplx integrate_complex(const std::function<cplx(double)>& f, double a, double b, double rel_tol = 1e-14);

/// Double-exponential (tanh-sinh) quadrature, tolerant to integrable endpoint singularities.
cplx integrate_endpoint_singular(const std::function<cplx(double)>& f, double a, double b,
                                 double rel_tol = 1e-13);

}  // namespace psitrace::quad
