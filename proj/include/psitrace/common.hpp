#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace psitrace {

using cplx = std::complex<double>;

/// Integer vector in Z^n (n <= 3); unused trailing entries are zero.
using Index3 = std::array<int, 3>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kTwoPiI{0.0, 2.0 * std::numbers::pi};

/// Raised for violated preconditions (degree mismatch, ellipticity, hypotheses).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degrees and exponents are kept on a 2^-40 grid so that sums of them are
/// exact and key comparisons are stable.
inline double snap(double v) { return std::ldexp(std::nearbyint(std::ldexp(v, 40)), -40); }
inline cplx snap(cplx v) { return {snap(v.real()), snap(v.imag())}; }

inline int abs_index(const Index3& a) { return a[0] + a[1] + a[2]; }

inline bool is_integer(double v, double tol = 1e-12) { return std::abs(v - std::round(v)) <= tol; }

/// True when m belongs to {-n, -n+1, -n+2, ...}.
inline bool in_integer_ladder(cplx m, int n) {
  return std::abs(m.imag()) <= 1e-12 && is_integer(m.real()) && std::round(m.real()) >= -n;
}

inline std::string format_complex(cplx z) {
  char buf[96];
  if (z.imag() == 0.0) {
    std::snprintf(buf, sizeof buf, "%.17g", z.real());
  } else {
    std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  }
  return buf;
}

/// Neumaier compensated accumulator.
template <typename T>
class CompensatedSum {
 public:
  void add(T v) {
    if constexpr (std::is_same_v<T, cplx>) {
      re_.add(v.real());
      im_.add(v.imag());
    } else {
      T t = sum_ + v;
      if (std::abs(sum_) >= std::abs(v)) {
        comp_ += (sum_ - t) + v;
      } else {
        comp_ += (v - t) + sum_;
      }
      sum_ = t;
    }
  }
  T value() const {
    if constexpr (std::is_same_v<T, cplx>) {
      return {re_.value(), im_.value()};
    } else {
      return sum_ + comp_;
    }
  }

 private:
  struct Empty {};
  T sum_{};
  T comp_{};
  std::conditional_t<std::is_same_v<T, cplx>, CompensatedSum<double>, Empty> re_{}, im_{};
};

}  // namespace psitrace
