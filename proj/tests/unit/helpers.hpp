#pragma once

#include <array>
#include <functional>
#include <map>
#include <random>

#include "psitrace/symcore.hpp"

namespace th {

using psitrace::cplx;
using psitrace::HomogeneousSymbol;
using psitrace::Index3;
using psitrace::TorusSeries;

inline TorusSeries one(int n = 2) { return TorusSeries::constant(n, 1.0); }

inline HomogeneousSymbol mono(int a1, int a2, double s, const TorusSeries& g = one()) {
  return HomogeneousSymbol::monomial(2, {a1, a2, 0}, s, g);
}

inline HomogeneousSymbol lap() { return mono(2, 0, 0) + mono(0, 2, 0); }

inline std::array<double, 3> rand_point(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

// Fourier coefficients of a function on T^2 from an M x M sample grid (exact for |freq| < M/2).
inline std::map<std::pair<int, int>, cplx> dft2(const std::function<cplx(double, double)>& f, int M = 32) {
  std::vector<cplx> v(M * M);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) v[a * M + b] = f(double(a) / M, double(b) / M);
  std::vector<cplx> tw(M);
  for (int i = 0; i < M; ++i) tw[i] = std::polar(1.0, -2.0 * psitrace::kPi * i / M);
  // separable transform: rows first, then columns
  std::vector<cplx> r(M * M), c(M * M);
  for (int a = 0; a < M; ++a)
    for (int g = 0; g < M; ++g) {
      cplx s{};
      for (int b = 0; b < M; ++b) s += v[a * M + b] * tw[(g * b) % M];
      r[a * M + g] = s;
    }
  for (int g1 = 0; g1 < M; ++g1)
    for (int g2 = 0; g2 < M; ++g2) {
      cplx s{};
      for (int a = 0; a < M; ++a) s += r[a * M + g2] * tw[(g1 * a) % M];
      c[g1 * M + g2] = s / double(M * M);
    }
  std::map<std::pair<int, int>, cplx> out;
  for (int g1 = -M / 2 + 1; g1 < M / 2; ++g1)
    for (int g2 = -M / 2 + 1; g2 < M / 2; ++g2) {
      cplx s = c[((g1 + M) % M) * M + (g2 + M) % M];
      if (std::abs(s) > 1e-14) out[{g1, g2}] = s;
    }
  return out;
}

}  // namespace th
