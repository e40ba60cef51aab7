#pragma once

#include <vector>

#include "psitrace/symcore.hpp"

namespace psitrace {

/// All multi-indices in N_0^dim of length `order`, in lexicographic order.
std::vector<Index3> multi_indices(int dim, int order);
double factorial(const Index3& alpha);
/// (2 pi i)^{-|alpha|} / alpha!
cplx star_coefficient(const Index3& alpha);

/// Component count that leaves a dropped remainder of order < -n - 1.
int default_order_count(cplx order, int dim);

/// Components j' < N of a # b.
/// Component j' collects (2 pi i)^{-|alpha|}/alpha! d_xi^alpha a_{j1} d_x^alpha b_{j2}
/// over j1 + j2 + |alpha| = j'. Each result component gets the largest participating
/// cutoff radius (no cutoff counts as radius 0). N < 0 selects default_order_count.
PolyHomogeneousSymbol compose_expansion(const PolyHomogeneousSymbol& a, const PolyHomogeneousSymbol& b,
                                        int N = -1);

/// Components j' < N of the formal adjoint symbol.
PolyHomogeneousSymbol adjoint_expansion(const PolyHomogeneousSymbol& a, int N = -1);

}  // namespace psitrace
