#pragma once

#include "caplab/numeric.hpp"

#include <algorithm>
#include <functional>

namespace caplab {

// Singular values of a 2x2 matrix from the rotation-invariant closed form.
// Stable for all inputs including the zero matrix; sigma(0) >= sigma(1) >= 0.
template <typename Derived>
Eigen::Vector2d singular_values_2x2(const Eigen::MatrixBase<Derived>& m) {
  const Real a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  const Real e = 0.5 * (a + d), f = 0.5 * (a - d);
  const Real g = 0.5 * (c + b), h = 0.5 * (c - b);
  const Real q = std::hypot(e, h), r = std::hypot(f, g);
  return {q + r, std::abs(q - r)};
}

// One-sided Jacobi on columns; singular values are the column norms after the
// Gram matrix has been driven to diagonal. High relative accuracy for the
// small well-scaled matrices produced by differential sampling.
template <typename Derived>
Vector singular_values_jacobi(const Eigen::MatrixBase<Derived>& m) {
  Matrix v = m;
  const Eigen::Index n = v.cols();
  const Real tol = 1e-15;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Real alpha = v.col(p).squaredNorm();
        const Real beta = v.col(q).squaredNorm();
        const Real gamma = v.col(p).dot(v.col(q));
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const Real zeta = (beta - alpha) / (2.0 * gamma);
        const Real t =
            (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const Real c = 1.0 / std::hypot(1.0, t);
        const Real s = c * t;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
          const Real vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  Vector sigma(n);
  for (Eigen::Index j = 0; j < n; ++j) sigma[j] = v.col(j).norm();
  std::sort(sigma.data(), sigma.data() + n, std::greater<Real>());
  return sigma;
}

// Descending singular values; closed form for 2x2, Jacobi otherwise.
template <typename Derived>
Vector singular_values(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols())
    throw ValidationError("singular_values: matrix must be square");
  if (m.rows() == 2) {
    const Eigen::Vector2d s = singular_values_2x2(m);
    Vector out(2);
    out << s[0], s[1];
    return out;
  }
  return singular_values_jacobi(m);
}

// Adjugate (transposed cofactor matrix): A adj(A) = det(A) I. Written out for
// n = 2 and via row cross products for n = 3 so it stays exact at J = 0.
template <typename Derived>
Matrix adjugate(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols())
    throw ValidationError("adjugate: matrix must be square");
  if (m.rows() == 2) {
    Matrix adj(2, 2);
    adj << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return adj;
  }
  if (m.rows() == 3) {
    const Vector3 r0 = m.row(0), r1 = m.row(1), r2 = m.row(2);
    Matrix adj(3, 3);
    adj.col(0) = r1.cross(r2);
    adj.col(1) = r2.cross(r0);
    adj.col(2) = r0.cross(r1);
    return adj;
  }
  throw ValidationError("adjugate: only n in {2,3} supported");
}

}  // namespace caplab
