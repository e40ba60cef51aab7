#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psitrace/text.hpp"

namespace psitrace {

struct Interval {
  double lo;
  double hi;
  bool operator==(const Interval&) const = default;
};

/// Finite union of closed intervals (endpoints may be infinite), kept sorted and disjoint.
class IntervalSet {
 public:
  IntervalSet() = default;
  static IntervalSet all();
  static IntervalSet span(double lo, double hi);

  const std::vector<Interval>& parts() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  bool bounded() const;
  double lo() const;
  double hi() const;
  bool contains(double u) const;

  IntervalSet unite(const IntervalSet& o) const;
  IntervalSet intersect(const IntervalSet& o) const;
  /// {u : a u + b in this}
  IntervalSet preimage(double a, double b) const;
  bool operator==(const IntervalSet&) const = default;

 private:
  void normalize();
  std::vector<Interval> parts_;
};

/// B0(u) = exp(-1/(1-u^2)) on (-1, 1), zero elsewhere; exact k-th derivative.
double bump_derivative(int k, double u);
/// S(u) = int_{-1}^u B0 / int_{-1}^1 B0.
double smoothstep_value(double u);
/// int_{-1}^1 B0.
double bump_mass();

/// Real smooth function given as an expression tree; exact derivatives of every order.
class TestFunction {
 public:
  enum class Kind { Poly, Exp, Bump, Smoothstep, Affine, Sum, Prod };

  TestFunction();  // zero polynomial
  static TestFunction poly(std::vector<double> coeffs);
  static TestFunction constant(double c) { return poly({c}); }
  static TestFunction exp(double c);
  static TestFunction bump();
  static TestFunction smoothstep();
  static TestFunction affine(double a, double b, const TestFunction& f);
  static TestFunction sum(const TestFunction& f, const TestFunction& g);
  static TestFunction prod(const TestFunction& f, const TestFunction& g);

  /// Bump supported on [a, b], peak e^{-1} at the midpoint.
  static TestFunction bump_on(double a, double b);
  /// Equal to 1 on [-1, c], decreasing to 0 at d; vanishes below -2.
  static TestFunction cutoff(double c, double d);

  Kind kind() const;
  double operator()(double u) const { return derivative(0, u); }
  double derivative(int k, double u) const;

  /// Closed set containing the support of f (resp. f^{(k)}).
  IntervalSet support() const;
  IntervalSet derivative_support(int k) const;
  /// Value of f when it is provably constant on [lo, hi].
  std::optional<double> constant_on(double lo, double hi) const;

  bool is_zero() const;
  /// Support bounded and contained in (0, infinity).
  bool supported_in_positive() const;
  /// f == 1 on [lo, hi] provably.
  bool equals_one_on(double lo, double hi) const;
  /// Largest c with f == 1 on [0, c] as certified by f(0) = 1 and the support of f'; 0 when
  /// no such c > 0 exists.
  double flat_radius() const;
  /// supp f^{(k)} intersected with [0, inf) stays away from 0 and is bounded.
  bool derivative_away_from_zero(int k) const;

  std::string to_text() const;
  static TestFunction parse(const std::string& text);
  static TestFunction parse(TextCursor& in);

  bool operator==(const TestFunction& o) const;

 private:
  struct Node;
  explicit TestFunction(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

}  // namespace psitrace
