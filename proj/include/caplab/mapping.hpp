#pragma once

#include "caplab/domain.hpp"
#include "caplab/numeric.hpp"

#include <memory>

namespace caplab {

enum class Family {
  identity,
  linear,
  radial_power,
  planar_stretch,
  grid_field,
  composed
};

// Vector samples on the node lattice of a uniform box grid, row-major with
// the last axis fastest, dim components per node. Interpolated multilinearly.
struct GridFieldData {
  int dim = 0;
  int nodes = 0;  // nodes per axis, >= 2
  Vector lo, hi;
  std::vector<Real> values;  // nodes^dim * dim
  int order = 1;
  std::string source_path;

  std::int64_t node_count() const;
  Vector node_value(std::span<const int> idx) const;
};

GridFieldData load_grid_field_csv(const std::string& path);
GridFieldData load_grid_field_binary(const std::string& path);
void save_grid_field_csv(const GridFieldData& field, const std::string& path);

struct MappingSpec {
  Family family = Family::identity;
  Matrix matrix;        // linear
  Real exponent = 1.0;  // radial_power
  Real stretch = 1.0;   // planar_stretch
  std::shared_ptr<const GridFieldData> field;  // grid_field
  std::vector<MappingSpec> parts;  // composed: {inner, outer}

  static MappingSpec identity();
  static MappingSpec linear(const Matrix& a);
  static MappingSpec radial_power(Real a);
  static MappingSpec planar_stretch(Real k);
  static MappingSpec grid_field(std::shared_ptr<const GridFieldData> data);
  // phi = outer o inner; neither part may itself be composed.
  static MappingSpec composed(MappingSpec inner, MappingSpec outer);

  bool analytic() const;
  // Dimension pinned by the parameters; 0 when the family works in any dim.
  int fixed_dim() const;
  std::string describe() const;
};

struct Scheme {
  enum class Kind { analytic, central_fd };
  Kind kind = Kind::analytic;
  Real step = 0.0;  // central_fd: 0 selects the default step

  static Scheme analytic() { return {Kind::analytic, 0.0}; }
  static Scheme central_fd(Real h = 0.0) { return {Kind::central_fd, h}; }
};

// Default differencing step: max(1e-5, 1e-6 * (1 + |x|)).
Real default_fd_step(const Vector& x);

Vector evaluate(const MappingSpec& spec, const Vector& x);
// Checked variant: throws DomainError when x lies outside the domain.
Vector evaluate(const MappingSpec& spec, const Domain& domain, const Vector& x);

Matrix jacobian(const MappingSpec& spec, const Vector& x, const Scheme& scheme);
// Domain-aware variant: central differences in the interior, one-sided within
// one step of the boundary.
Matrix jacobian(const MappingSpec& spec, const Domain& domain, const Vector& x,
                const Scheme& scheme);

MappingSpec inverse_spec(const MappingSpec& spec);

// Points where the differential is undefined or unbounded and a neighborhood
// must be excluded from quadrature (e.g. the origin of radial_power, a < 1).
std::vector<Vector> singular_points(const MappingSpec& spec);

struct DifferentialSample {
  Vector x;
  Matrix jacobian;
  Real det = 0.0;
  Real op_norm = 0.0;      // largest singular value
  Real min_stretch = 0.0;  // smallest singular value
  Real adj_norm = 0.0;     // operator norm of the adjugate
};

DifferentialSample make_differential_sample(const Vector& x, const Matrix& j);
DifferentialSample differential_sample(const MappingSpec& spec, const Vector& x,
                                       const Scheme& scheme);

struct GridSamples {
  Domain domain;
  std::vector<std::int64_t> cells;  // flat indices of inside cells
  std::vector<DifferentialSample> samples;
  std::vector<Real> weights;            // cell volume per sample
  std::vector<std::uint8_t> excluded;   // singularity exclusion flags
  std::int64_t excluded_count = 0;
  Real exclusion_radius = 0.0;

  std::size_t size() const { return samples.size(); }
};

// One sample per cell center strictly inside the domain. Cells within the
// exclusion radius of a singular point are flagged, not dropped. A negative
// eps_sing selects the default 2h.
GridSamples sample_grid(const MappingSpec& spec, const Domain& domain,
                        const Scheme& scheme, Real eps_sing = -1.0);

}  // namespace caplab
