#pragma once

#include <map>
#include <vector>

#include "psitrace/symcore.hpp"

namespace psitrace {

/// sum_p d_p(x, xi) (l_{m0}(x, xi) - z)^{-p} with z-free coefficients.
/// deg d_p = weight + p * m0 for every stored p; for the parametrix order j the weight is
/// -m0 - j.
class ResolventSymbol {
 public:
  ResolventSymbol() = default;
  ResolventSymbol(int dim, double m0, cplx weight);

  int dim() const { return dim_; }
  double m0() const { return m0_; }
  cplx weight() const { return weight_; }
  cplx degree_at(int p) const { return snap(weight_ + static_cast<double>(p) * m0_); }
  const std::map<int, HomogeneousSymbol>& powers() const { return powers_; }
  bool is_zero() const { return powers_.empty(); }
  HomogeneousSymbol coefficient(int p) const;
  int min_power() const { return powers_.empty() ? 0 : powers_.begin()->first; }
  int max_power() const { return powers_.empty() ? 0 : powers_.rbegin()->first; }
  double max_abs_coefficient() const;

  /// Adds d at power p; rejects a degree that breaks deg d = weight + p m0.
  void add(int p, const HomogeneousSymbol& d);

  cplx evaluate(std::span<const double> x, std::span<const double> xi, cplx z,
                const HomogeneousSymbol& principal) const;

  ResolventSymbol& operator+=(const ResolventSymbol& other);
  ResolventSymbol& operator*=(cplx s);
  bool approx_equal(const ResolventSymbol& other, double tol) const;
  bool operator==(const ResolventSymbol&) const = default;

 private:
  int dim_ = 0;
  double m0_ = 0.0;
  cplx weight_{0.0, 0.0};
  std::map<int, HomogeneousSymbol> powers_;
};

ResolventSymbol rs_mul_hs(const ResolventSymbol& q, const HomogeneousSymbol& g);
/// Chain rule with d(l - z)^{-p} = -p (d l)(l - z)^{-p-1}.
ResolventSymbol rs_dxi(const ResolventSymbol& q, int axis, const HomogeneousSymbol& principal);
ResolventSymbol rs_dx(const ResolventSymbol& q, int axis, const HomogeneousSymbol& principal);
ResolventSymbol rs_dxi(const ResolventSymbol& q, const Index3& alpha, const HomogeneousSymbol& principal);
ResolventSymbol rs_dx(const ResolventSymbol& q, const Index3& alpha, const HomogeneousSymbol& principal);
/// Multiplies by (l - z)^{-by}.
ResolventSymbol rs_shift(const ResolventSymbol& q, int by);

class EllipticOperatorSpec;

/// q_0, ..., q_J of the resolvent parametrix of L.
std::vector<ResolventSymbol> build_parametrix(const EllipticOperatorSpec& L, int J, int threads = 0);

struct ParametrixReport {
  /// Per order j' = 0..J: largest coefficient of the symbolic residual (component 0 minus 1),
  /// relative to the largest contribution.
  std::vector<double> symbolic_residual;
  /// Largest |residual component| over the numeric samples, j' = 1..J.
  double numeric_residual = 0.0;
  int samples = 0;
  bool ok = false;
};

/// Assembles (sum l_{m0-j} - z) # (sum q_j) order by order and checks it is 1 + O(order -J-1),
/// symbolically and at random (x, xi, z) with |xi| = 1, |Im z| >= 1.
ParametrixReport verify_parametrix(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs,
                                   int J, int samples = 100, unsigned seed = 1, double tol = 1e-10);

/// The j'-th component of (l - z) # q (power 0 allowed); j' = 0 returns the shifted q_0.
ResolventSymbol composition_residual(const EllipticOperatorSpec& L, const std::vector<ResolventSymbol>& qs,
                                     int jp);

}  // namespace psitrace
