#include "caplab/mapping.hpp"

#include <doctest.h>

#include <cstdio>
#include <memory>

using namespace caplab;

namespace {

Vector vec2(Real a, Real b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix mat2(Real a, Real b, Real c, Real d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("evaluate across families") {
  CHECK(evaluate(MappingSpec::identity(), vec2(0.3, -0.7)).isApprox(vec2(0.3, -0.7)));

  const MappingSpec lin = MappingSpec::linear(mat2(2, 0, 0, 1));
  CHECK(evaluate(lin, vec2(1, 3)).isApprox(vec2(2, 3)));

  // |x| = 5, y = |x|^{a-1} x
  const MappingSpec rad = MappingSpec::radial_power(2.0);
  CHECK(evaluate(rad, vec2(3, 4)).isApprox(vec2(15, 20), 1e-14));
  CHECK(evaluate(rad, vec2(0, 0)).isApprox(vec2(0, 0)));

  const MappingSpec st = MappingSpec::planar_stretch(2.0);
  CHECK(evaluate(st, vec2(1, 1)).isApprox(vec2(2, 1)));

  const MappingSpec comp = MappingSpec::composed(rad, lin);
  CHECK(evaluate(comp, vec2(3, 4)).isApprox(vec2(30, 20), 1e-14));
}

TEST_CASE("dimension pinning and validation") {
  CHECK(MappingSpec::planar_stretch(2.0).fixed_dim() == 2);
  CHECK(MappingSpec::radial_power(2.0).fixed_dim() == 0);
  CHECK(MappingSpec::linear(Matrix::Identity(3, 3)).fixed_dim() == 3);

  Vector x3(3);
  x3 << 1, 2, 3;
  CHECK_THROWS_AS(evaluate(MappingSpec::planar_stretch(2.0), x3), ValidationError);
  CHECK_THROWS_AS(MappingSpec::composed(
                      MappingSpec::composed(MappingSpec::identity(),
                                            MappingSpec::identity()),
                      MappingSpec::identity()),
                  ValidationError);
  CHECK_THROWS_AS(MappingSpec::composed(MappingSpec::planar_stretch(2.0),
                                        MappingSpec::linear(Matrix::Identity(3, 3))),
                  ValidationError);
}

TEST_CASE("radial jacobian branches at the origin") {
  const Vector o = vec2(0, 0);
  CHECK(jacobian(MappingSpec::radial_power(2.0), o, Scheme::analytic())
            .isZero(0.0));
  CHECK(jacobian(MappingSpec::radial_power(1.0), o, Scheme::analytic())
            .isIdentity(0.0));
  const Matrix j = jacobian(MappingSpec::radial_power(0.5), o, Scheme::analytic());
  CHECK(std::isinf(j(0, 0)));
}

TEST_CASE("radial jacobian matches its closed form off the origin") {
  // Dphi = r^{a-1} (I + (a-1) u u^T): eigenvalues a r^{a-1} and r^{a-1}
  const MappingSpec rad = MappingSpec::radial_power(2.0);
  const Vector x = vec2(0.6, 0.8);  // r = 1
  const Matrix j = jacobian(rad, x, Scheme::analytic());
  const Vector u = x;
  const Matrix expect = Matrix::Identity(2, 2) + u * u.transpose();
  CHECK(j.isApprox(expect, 1e-14));
}

TEST_CASE("central differences agree with analytic jacobians") {
  const MappingSpec rad = MappingSpec::radial_power(2.0);
  const Vector x = vec2(0.4, -0.9);
  const Matrix ja = jacobian(rad, x, Scheme::analytic());
  const Matrix jf = jacobian(rad, x, Scheme::central_fd());
  CHECK((ja - jf).norm() / ja.norm() < 1e-8);
}

TEST_CASE("boundary-aware differencing falls back to one-sided stencils") {
  const Domain d = Domain::box(vec2(0, 0), vec2(1, 1), 8);
  const MappingSpec rad = MappingSpec::radial_power(2.0);
  const Vector x = vec2(1.0 - 1e-7, 0.5);  // within one step of the face
  const Matrix ja = jacobian(rad, x, Scheme::analytic());
  const Matrix jf = jacobian(rad, d, x, Scheme::central_fd());
  CHECK((ja - jf).norm() / ja.norm() < 1e-5);
}

TEST_CASE("checked evaluate rejects outside points") {
  const Domain d = Domain::box(vec2(0, 0), vec2(1, 1), 8);
  CHECK_THROWS_AS(evaluate(MappingSpec::identity(), d, vec2(2, 0.5)), DomainError);
  CHECK(evaluate(MappingSpec::identity(), d, vec2(0.5, 0.5)).isApprox(vec2(0.5, 0.5)));
}

TEST_CASE("inverse specs undo the forward map") {
  const MappingSpec lin = MappingSpec::linear(mat2(2, 1, 0, 1));
  const MappingSpec rad = MappingSpec::radial_power(2.0);
  const MappingSpec comp = MappingSpec::composed(rad, lin);
  const MappingSpec inv = inverse_spec(comp);
  const Vector x = vec2(0.7, -0.2);
  CHECK(evaluate(inv, evaluate(comp, x)).isApprox(x, 1e-12));
  CHECK(inverse_spec(rad).exponent == doctest::Approx(0.5));

  auto field = std::make_shared<GridFieldData>();
  field->dim = 2;
  field->nodes = 2;
  field->lo = vec2(0, 0);
  field->hi = vec2(1, 1);
  field->values = {0, 0, 0, 1, 1, 0, 1, 1};
  CHECK_THROWS_AS(inverse_spec(MappingSpec::grid_field(field)), NoInverseError);
  CHECK_THROWS_AS(MappingSpec::grid_field(nullptr), ValidationError);
}

TEST_CASE("singular points appear only for contracting radial powers") {
  CHECK(singular_points(MappingSpec::radial_power(2.0)).empty());
  CHECK(singular_points(MappingSpec::radial_power(0.5)).size() == 1);
  const auto pts = singular_points(MappingSpec::composed(
      MappingSpec::linear(mat2(2, 0, 0, 1)), MappingSpec::radial_power(0.5)));
  CHECK(pts.size() == 1);
}

TEST_CASE("grid field round trips through csv and reproduces linear maps") {
  // sample y = A x on a node lattice; multilinear interpolation is exact on it
  const Matrix a = mat2(2, 0.5, -1, 1);
  auto field = std::make_shared<GridFieldData>();
  field->dim = 2;
  field->nodes = 5;
  field->lo = vec2(0, 0);
  field->hi = vec2(1, 1);
  field->values.resize(static_cast<std::size_t>(field->node_count()) * 2);
  std::size_t k = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const Vector y = a * vec2(i / 4.0, j / 4.0);
      field->values[k++] = y[0];
      field->values[k++] = y[1];
    }

  const MappingSpec spec = MappingSpec::grid_field(field);
  const Vector x = vec2(0.37, 0.81);
  CHECK(evaluate(spec, x).isApprox(a * x, 1e-13));

  const std::string path = "test_mapping_field_tmp.csv";
  save_grid_field_csv(*field, path);
  const GridFieldData back = load_grid_field_csv(path);
  std::remove(path.c_str());
  CHECK(back.nodes == field->nodes);
  CHECK(back.values.size() == field->values.size());
  for (std::size_t i = 0; i < back.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(field->values[i]).epsilon(1e-15));

  const Domain d = Domain::box(vec2(0, 0), vec2(1, 1), 8);
  const Matrix jf = jacobian(spec, d, vec2(0.5, 0.5), Scheme::central_fd());
  CHECK(jf.isApprox(a, 1e-9));
  CHECK_THROWS_AS(jacobian(spec, vec2(0.5, 0.5), Scheme::analytic()),
                  UnsupportedSchemeError);
}

TEST_CASE("grid sampling flags cells near a singular point") {
  const Domain d = Domain::box(vec2(-1, -1), vec2(1, 1), 16);
  const GridSamples gs =
      sample_grid(MappingSpec::radial_power(0.5), d, Scheme::analytic());
  CHECK(gs.size() == 256);
  CHECK(gs.excluded_count > 0);
  CHECK(gs.excluded_count < 64);
  CHECK(gs.exclusion_radius == doctest::Approx(0.25));  // 2h
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const Vector x = d.cell_center(gs.cells[i]);
    const bool near = x.norm() < gs.exclusion_radius;
    CHECK(static_cast<bool>(gs.excluded[i]) == near);
    CHECK(gs.weights[i] == doctest::Approx(d.cell_volume()));
  }

  const GridSamples none =
      sample_grid(MappingSpec::radial_power(2.0), d, Scheme::analytic());
  CHECK(none.excluded_count == 0);
}

TEST_CASE("grid sampling validates scheme and sizes") {
  const Domain d = Domain::box(vec2(0, 0), vec2(1, 1), 8);
  auto field = std::make_shared<GridFieldData>();
  field->dim = 2;
  field->nodes = 2;
  field->lo = vec2(0, 0);
  field->hi = vec2(1, 1);
  field->values = {0, 0, 0, 1, 1, 0, 1, 1};
  CHECK_THROWS_AS(sample_grid(MappingSpec::grid_field(field), d, Scheme::analytic()),
                  UnsupportedSchemeError);
  CHECK_THROWS_AS(sample_grid(MappingSpec::identity(),
                              Domain::box(vec2(0, 0), vec2(1, 1), 2),
                              Scheme::analytic()),
                  ValidationError);
}

TEST_CASE("differential samples expose determinant and singular values") {
  const DifferentialSample s = differential_sample(
      MappingSpec::linear(mat2(2, 0, 0, 1)), vec2(0.3, 0.3), Scheme::analytic());
  CHECK(s.det == doctest::Approx(2.0));
  CHECK(s.op_norm == doctest::Approx(2.0));
  CHECK(s.min_stretch == doctest::Approx(1.0));
  // |adj A|_op = |det| / sigma_min
  CHECK(s.adj_norm == doctest::Approx(2.0));
}

TEST_CASE("default differencing step grows with the point") {
  CHECK(default_fd_step(vec2(0, 0)) == doctest::Approx(1e-5));
  Vector big(2);
  big << 3e7, 4e7;
  CHECK(default_fd_step(big) == doctest::Approx(1e-6 * (1 + 5e7)).epsilon(1e-9));
}
