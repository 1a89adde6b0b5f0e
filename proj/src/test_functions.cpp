#include "caplab/test_functions.hpp"

#include <algorithm>

namespace caplab {

namespace {

TestFunction coordinate(int i) {
  TestFunction f;
  f.name = "coordinate_x" + std::to_string(i + 1);
  f.value = [i](const Vector& y) { return y[i]; };
  f.gradient = [i](const Vector& y) {
    Vector g = Vector::Zero(y.size());
    g[i] = 1.0;
    return g;
  };
  return f;
}

// ln|y - c|; the center must keep a positive distance from the domain.
TestFunction radial_log(const Vector& c) {
  TestFunction f;
  f.name = "radial_log";
  f.value = [c](const Vector& y) { return std::log((y - c).norm()); };
  f.gradient = [c](const Vector& y) {
    const Vector d = y - c;
    return Vector((d / d.squaredNorm()).eval());
  };
  return f;
}

// Smooth bump supported on |y - c| < R: exp(1 - 1/(1 - rho^2)).
TestFunction bump(const Vector& c, Real radius) {
  TestFunction f;
  f.name = "bump";
  const Real r2 = radius * radius;
  f.value = [c, r2](const Vector& y) {
    const Real rho2 = (y - c).squaredNorm() / r2;
    return rho2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - rho2)) : 0.0;
  };
  f.gradient = [c, r2](const Vector& y) {
    const Vector d = y - c;
    const Real rho2 = d.squaredNorm() / r2;
    if (rho2 >= 1.0) return Vector(Vector::Zero(y.size()));
    const Real u = 1.0 - rho2;
    const Real val = std::exp(1.0 - 1.0 / u);
    return Vector((-2.0 * val / (r2 * u * u)) * d);
  };
  return f;
}

// Product of half-period cosines spanning the bounding box.
TestFunction tensor_cosine(const Vector& lo, const Vector& hi) {
  TestFunction f;
  f.name = "tensor_cosine";
  const int dim = static_cast<int>(lo.size());
  Vector omega(dim);
  for (int i = 0; i < dim; ++i) omega[i] = kPi / (hi[i] - lo[i]);
  f.value = [lo, omega, dim](const Vector& y) {
    Real v = 1.0;
    for (int i = 0; i < dim; ++i) v *= std::cos(omega[i] * (y[i] - lo[i]));
    return v;
  };
  f.gradient = [lo, omega, dim](const Vector& y) {
    Vector g(dim);
    for (int i = 0; i < dim; ++i) {
      Real v = 1.0;
      for (int j = 0; j < dim; ++j) {
        const Real t = omega[j] * (y[j] - lo[j]);
        v *= j == i ? -omega[j] * std::sin(t) : std::cos(t);
      }
      g[i] = v;
    }
    return g;
  };
  return f;
}

Vector log_center(const Domain& d) {
  if (d.kind == DomainKind::annulus) return d.center;
  // outside the closed bounding box, at a distance of 15% of the extent
  return Vector((d.lo - 0.15 * (d.hi - d.lo)).eval());
}

void bump_placement(const Domain& d, Vector& c, Real& radius) {
  switch (d.kind) {
    case DomainKind::box:
      c = 0.5 * (d.lo + d.hi);
      radius = 0.4 * (d.hi - d.lo).minCoeff();
      return;
    case DomainKind::ball:
      c = d.center;
      radius = 0.8 * d.radius;
      return;
    case DomainKind::annulus:
      c = d.center;
      c[0] += 0.5 * (d.r_inner + d.r_outer);
      radius = 0.45 * (d.r_outer - d.r_inner);
      return;
  }
  throw ValidationError("family: unknown domain kind");
}

}  // namespace

std::vector<TestFunction> make_family(const FamilySpec& family,
                                      const Domain& image_domain) {
  const int dim = image_domain.dim;
  if (family.center.size() != 0 &&
      family.center.size() != static_cast<Eigen::Index>(dim))
    throw ValidationError("family: center dimension mismatch");

  std::vector<TestFunction> out;
  const auto add_coordinates = [&](int count) {
    const int n = count > 0 ? std::min(count, dim) : dim;
    for (int i = 0; i < n; ++i) out.push_back(coordinate(i));
  };
  const auto add_radial_log = [&]() {
    const Vector c =
        family.center.size() ? family.center : log_center(image_domain);
    out.push_back(radial_log(c));
  };
  const auto add_bump = [&]() {
    Vector c;
    Real radius;
    bump_placement(image_domain, c, radius);
    if (family.center.size()) c = family.center;
    if (family.scale > 0.0) radius = family.scale;
    out.push_back(bump(c, radius));
  };
  const auto add_tensor_cosine = [&]() {
    out.push_back(tensor_cosine(image_domain.lo, image_domain.hi));
  };

  if (family.kind == "default") {
    add_coordinates(0);
    add_radial_log();
    add_bump();
    add_tensor_cosine();
  } else if (family.kind == "coordinate") {
    add_coordinates(family.count);
  } else if (family.kind == "radial_log") {
    add_radial_log();
  } else if (family.kind == "bump") {
    add_bump();
  } else if (family.kind == "tensor_cosine") {
    add_tensor_cosine();
  } else {
    throw ValidationError("family: unknown kind '" + family.kind + "'");
  }
  return out;
}

std::function<Real(const Vector&)> scalar_field(const std::string& kind) {
  if (kind == "one") return [](const Vector&) { return 1.0; };
  if (kind == "radial_norm") return [](const Vector& y) { return y.norm(); };
  throw ValidationError("scalar field: unknown kind '" + kind + "'");
}

}  // namespace caplab
