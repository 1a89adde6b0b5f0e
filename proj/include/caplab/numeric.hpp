#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace caplab {

using Real = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector2 = Eigen::Vector2d;
using Vector3 = Eigen::Vector3d;
using Matrix2 = Eigen::Matrix2d;
using Matrix3 = Eigen::Matrix3d;

inline constexpr Real kInf = std::numeric_limits<Real>::infinity();
inline constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();
inline constexpr Real kPi = 3.14159265358979323846;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedSchemeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoInverseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-order pairwise (tree) reduction. Same input order => same rounding,
// independent of chunking or thread count upstream.
Real pairwise_sum(std::span<const Real> v);

// Surface measure of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
Real unit_sphere_area(int n);

// Weighted L_kappa norm of a nonnegative cell field:
//   (sum_i v_i^kappa w_i)^{1/kappa},  kappa == inf -> max_i v_i.
// Entries with mask[i] != 0 are skipped. Any +inf value (unmasked) makes the
// result +inf; values are scaled by their maximum before exponentiation so a
// large kappa cannot overflow on finite input.
Real weighted_lebesgue_norm(std::span<const Real> values,
                            std::span<const Real> weights, Real kappa,
                            std::span<const std::uint8_t> mask = {});

}  // namespace caplab
