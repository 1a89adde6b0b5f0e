#pragma once

// Quadrature oracles local to the tests. They share no code with the library
// paths under test: plain composite Simpson against closed-form integrands.

#include "caplab/numeric.hpp"

#include <functional>

namespace oracle {

using caplab::Real;

// Composite Simpson on [a, b].
inline Real simpson(const std::function<Real(Real)>& g, Real a, Real b,
                    int intervals = 4096) {
  if (intervals % 2) ++intervals;
  const Real h = (b - a) / intervals;
  Real acc = g(a) + g(b);
  for (int i = 1; i < intervals; ++i)
    acc += g(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Integral of a radial function over the spherical shell r < |x| < R.
inline Real radial_integral(const std::function<Real(Real)>& g, int n, Real r,
                            Real R, int intervals = 4096) {
  return caplab::unit_sphere_area(n) *
         simpson([&](Real rho) { return g(rho) * std::pow(rho, n - 1); }, r, R,
                 intervals);
}

// Ring capacity from the radial variational reduction: the optimal profile
// satisfies f'(rho) ~ rho^{-(n-1)/(p-1)}, and with a unit potential drop the
// energy is omega_{n-1} * I^{1-p} where I integrates that power over [r, R].
// Quadrature only; shares nothing with the closed form under test.
inline Real ring_capacity_quadrature(int n, Real p, Real r, Real R) {
  const Real I = simpson(
      [&](Real rho) { return std::pow(rho, -(n - 1.0) / (p - 1.0)); }, r, R,
      1 << 14);
  return caplab::unit_sphere_area(n) * std::pow(I, 1.0 - p);
}

}  // namespace oracle
