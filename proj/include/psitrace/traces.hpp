#pragma once

#include "psitrace/symcore.hpp"

namespace psitrace {

/// Integral over T^n x S^{n-1} of the degree -n component; zero when the order is off the
/// integer ladder {-n, -n+1, ...} or that component is absent.
cplx residue_density_integrated(const PolyHomogeneousSymbol& A);

/// Finite part of int_0^inf psi_1(t r) r^{s-1} dr for s != 0. The integral is evaluated
/// numerically on [0, split / t] and the pure power R^s / s is dropped at R = split / t.
/// t == 0 (no cutoff) gives 0.
cplx radial_finite_part(cplx s, double t, double split = 1.0);

/// tr(A) = int a(x, xi) dx dxi for Re(order) < -n.
cplx smoothing_trace(const PolyHomogeneousSymbol& A);

/// Kontsevich-Vishik canonical trace by finite-part radial integrals; order must lie off
/// the integer ladder {-n, -n+1, ...}. `split` moves the radius where the numeric part ends.
cplx canonical_trace(const PolyHomogeneousSymbol& A, double split = 1.0);

}  // namespace psitrace
