#pragma once

#include "caplab/numeric.hpp"

#include <cstdint>

namespace caplab {

enum class DomainKind { box, ball, annulus };

// Axis-aligned sampling region: a box, or a ball/annulus embedded in its
// bounding box. Cells are the uniform grid over the bounding box with grid_n
// points per axis; a cell is "inside" when its center lies strictly inside
// the geometry.
struct Domain {
  DomainKind kind = DomainKind::box;
  int dim = 2;
  int grid_n = 64;
  Vector lo, hi;       // bounding box corners
  Vector center;       // ball/annulus
  Real radius = 0.0;   // ball
  Real r_inner = 0.0;  // annulus
  Real r_outer = 0.0;  // annulus

  static Domain box(const Vector& lo, const Vector& hi, int grid_n);
  static Domain ball(const Vector& center, Real radius, int grid_n);
  static Domain annulus(const Vector& center, Real r_inner, Real r_outer,
                        int grid_n);

  bool inside(const Vector& x) const;

  Vector cell_width() const;       // per-axis width
  Real max_cell_width() const;     // h used for exclusion radii
  Real cell_volume() const;        // product of per-axis widths
  std::int64_t cell_count() const; // grid_n^dim

  Vector cell_center(std::int64_t flat) const;
  std::int64_t flat_index(std::span<const int> idx) const;
  void unflatten(std::int64_t flat, std::span<int> idx) const;

  // Flat index of the cell containing x; -1 if x is outside the bounding box.
  std::int64_t locate_cell(const Vector& x) const;

  // Mask over all cells: 1 where the center is strictly inside the geometry.
  std::vector<std::uint8_t> inside_mask() const;
};

}  // namespace caplab
