#include "caplab/domain.hpp"

namespace caplab {

namespace {

void check_common(int dim, int grid_n) {
  if (dim < 2) throw ValidationError("domain: dimension must be >= 2");
  if (grid_n < 1) throw ValidationError("domain: grid must be >= 1");
}

void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite())
    throw ValidationError(std::string("domain: non-finite ") + what);
}

}  // namespace

Domain Domain::box(const Vector& lo, const Vector& hi, int grid_n) {
  check_common(static_cast<int>(lo.size()), grid_n);
  if (lo.size() != hi.size())
    throw ValidationError("domain: box corner dimensions differ");
  check_finite(lo, "box corner");
  check_finite(hi, "box corner");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]))
      throw ValidationError("domain: box corners must satisfy lo < hi");
  Domain d;
  d.kind = DomainKind::box;
  d.dim = static_cast<int>(lo.size());
  d.grid_n = grid_n;
  d.lo = lo;
  d.hi = hi;
  d.center = 0.5 * (lo + hi);
  return d;
}

Domain Domain::ball(const Vector& center, Real radius, int grid_n) {
  check_common(static_cast<int>(center.size()), grid_n);
  check_finite(center, "center");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ValidationError("domain: ball radius must be positive and finite");
  Domain d;
  d.kind = DomainKind::ball;
  d.dim = static_cast<int>(center.size());
  d.grid_n = grid_n;
  d.center = center;
  d.radius = radius;
  d.lo = center.array() - radius;
  d.hi = center.array() + radius;
  return d;
}

Domain Domain::annulus(const Vector& center, Real r_inner, Real r_outer,
                       int grid_n) {
  check_common(static_cast<int>(center.size()), grid_n);
  check_finite(center, "center");
  if (!(r_inner > 0.0) || !(r_outer > r_inner) || !std::isfinite(r_outer))
    throw ValidationError("domain: annulus radii must satisfy 0 < r_inner < r_outer");
  Domain d;
  d.kind = DomainKind::annulus;
  d.dim = static_cast<int>(center.size());
  d.grid_n = grid_n;
  d.center = center;
  d.r_inner = r_inner;
  d.r_outer = r_outer;
  d.lo = center.array() - r_outer;
  d.hi = center.array() + r_outer;
  return d;
}

bool Domain::inside(const Vector& x) const {
  if (x.size() != dim) throw ValidationError("domain: point dimension mismatch");
  switch (kind) {
    case DomainKind::box:
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!(lo[i] < x[i] && x[i] < hi[i])) return false;
      return true;
    case DomainKind::ball:
      return (x - center).norm() < radius;
    case DomainKind::annulus: {
      const Real r = (x - center).norm();
      return r_inner < r && r < r_outer;
    }
  }
  return false;
}

Vector Domain::cell_width() const {
  return (hi - lo) / static_cast<Real>(grid_n);
}

Real Domain::max_cell_width() const { return cell_width().maxCoeff(); }

Real Domain::cell_volume() const { return cell_width().prod(); }

std::int64_t Domain::cell_count() const {
  std::int64_t n = 1;
  for (int i = 0; i < dim; ++i) n *= grid_n;
  return n;
}

Vector Domain::cell_center(std::int64_t flat) const {
  Vector x(dim);
  const Vector h = cell_width();
  for (int i = dim - 1; i >= 0; --i) {
    const std::int64_t k = flat % grid_n;
    flat /= grid_n;
    x[i] = lo[i] + (static_cast<Real>(k) + 0.5) * h[i];
  }
  return x;
}

std::int64_t Domain::flat_index(std::span<const int> idx) const {
  std::int64_t flat = 0;
  for (int i = 0; i < dim; ++i) flat = flat * grid_n + idx[i];
  return flat;
}

void Domain::unflatten(std::int64_t flat, std::span<int> idx) const {
  for (int i = dim - 1; i >= 0; --i) {
    idx[i] = static_cast<int>(flat % grid_n);
    flat /= grid_n;
  }
}

std::int64_t Domain::locate_cell(const Vector& x) const {
  std::int64_t flat = 0;
  const Vector h = cell_width();
  for (int i = 0; i < dim; ++i) {
    if (x[i] < lo[i] || x[i] > hi[i]) return -1;
    auto k = static_cast<std::int64_t>((x[i] - lo[i]) / h[i]);
    k = std::min<std::int64_t>(k, grid_n - 1);
    flat = flat * grid_n + k;
  }
  return flat;
}

std::vector<std::uint8_t> Domain::inside_mask() const {
  std::vector<std::uint8_t> mask(cell_count(), 0);
  for (std::int64_t c = 0; c < cell_count(); ++c)
    mask[c] = inside(cell_center(c)) ? 1 : 0;
  return mask;
}

}  // namespace caplab
