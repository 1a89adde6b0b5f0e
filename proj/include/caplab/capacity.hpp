#pragma once

#include "caplab/domain.hpp"
#include "caplab/mapping.hpp"

namespace caplab {

enum class MaskKind {
  inner_ring,    // annulus domains: cells with |c - center| <= r_inner
  outer_ring,    // cells beyond the outer radius; outermost layer for boxes
  ball,          // cells with |c - center| <= radius
  outside_ball,  // cells with |c - center| >= radius
  box,           // cells with lo <= c <= hi componentwise
  slab,          // a number of whole cell layers at one side of an axis
  cells,         // explicit flat cell indices
  all            // every cell (selection sets, not plates)
};

// A set of grid cells, either geometric (carries an analytic boundary used to
// shorten plate-crossing links) or grid-aligned (slab, cells).
struct CellMask {
  MaskKind kind = MaskKind::all;
  Vector center;
  Real radius = 0.0;
  Vector lo, hi;
  int axis = 0;
  bool at_min = true;
  int layers = 1;
  std::vector<std::int64_t> cell_list;

  static CellMask inner_ring();
  static CellMask outer_ring();
  static CellMask ball(const Vector& center, Real radius);
  static CellMask outside_ball(const Vector& center, Real radius);
  static CellMask box(const Vector& lo, const Vector& hi);
  static CellMask slab(int axis, bool at_min, int layers = 1);
  static CellMask cells(std::vector<std::int64_t> flat);
  static CellMask all();

  bool geometric() const;
  std::string describe() const;
};

std::vector<std::uint8_t> rasterize_mask(const CellMask& mask,
                                         const Domain& domain);

struct Condenser {
  Domain domain;
  CellMask plate_zero;  // F0, potential 0
  CellMask plate_one;   // F1, potential 1
  Real p = 2.0;
  // Optional replacement for the geometric inside test, used for image
  // condensers whose domain is a rasterized image of the source domain.
  std::vector<std::uint8_t> active_override;
};

struct SolverConfig {
  Real tol_energy = 1e-10;
  std::int64_t max_iter = 40000;
  std::vector<Real> eps_schedule{1e-2, 1e-4, 1e-6, 1e-8};
  int jacobi_sweeps = 500;
  bool bracket = false;
};

struct CapacityResult {
  Real value = 0.0;
  std::vector<Real> minimizer;  // full grid; NaN outside the solve region
  int grid_n = 0;
  int dim = 0;
  std::int64_t iterations = 0;
  Real final_grad_norm = 0.0;
  std::int64_t cells_f0 = 0;
  std::int64_t cells_f1 = 0;
  std::int64_t cells_unknown = 0;
  std::vector<Real> eps_used;
  std::vector<std::string> warnings;
  // Plate-sensitivity bracket (solved with plates grown/shrunk by one cell);
  // NaN unless requested.
  Real value_plates_grown = kNaN;
  Real value_plates_shrunk = kNaN;
};

// Thrown when an iteration budget is exhausted; carries the best state so the
// caller can still report it.
struct SolverFailure : std::runtime_error {
  CapacityResult partial;
  SolverFailure(const std::string& msg, CapacityResult state)
      : std::runtime_error(msg), partial(std::move(state)) {}
};

CapacityResult solve_capacity(const Condenser& condenser,
                              const SolverConfig& config = {});

// Capacity of the spherical condenser (S_r, S_R) in the annulus r < |x| < R.
// Reduces to a radial variational problem; see the derivation note in
// tests covering the quadrature cross-check.
Real analytic_ring_capacity(int n, Real p, Real r, Real R);

// Push a condenser forward: plates become image cell sets via the preimage of
// each image cell center (geometric masks of radial maps stay geometric).
Condenser image_condenser(const Condenser& condenser, const MappingSpec& spec,
                          const Domain& image_domain);

}  // namespace caplab
