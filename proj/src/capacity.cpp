#include "caplab/capacity.hpp"

#include <algorithm>
#include <deque>

namespace caplab {

namespace {

constexpr Real kMinCut = 0.05;  // lower clamp for shortened links

void check_center_dim(const Vector& c, int dim, const char* what) {
  if (c.size() != dim)
    throw ValidationError(std::string(what) + ": center dimension mismatch");
}

}  // namespace

CellMask CellMask::inner_ring() {
  CellMask m;
  m.kind = MaskKind::inner_ring;
  return m;
}

CellMask CellMask::outer_ring() {
  CellMask m;
  m.kind = MaskKind::outer_ring;
  return m;
}

CellMask CellMask::ball(const Vector& center, Real radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ValidationError("mask: ball radius must be positive and finite");
  CellMask m;
  m.kind = MaskKind::ball;
  m.center = center;
  m.radius = radius;
  return m;
}

CellMask CellMask::outside_ball(const Vector& center, Real radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ValidationError("mask: radius must be positive and finite");
  CellMask m;
  m.kind = MaskKind::outside_ball;
  m.center = center;
  m.radius = radius;
  return m;
}

CellMask CellMask::box(const Vector& lo, const Vector& hi) {
  if (lo.size() != hi.size())
    throw ValidationError("mask: box corner dimensions differ");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]))
      throw ValidationError("mask: box corners must satisfy lo < hi");
  CellMask m;
  m.kind = MaskKind::box;
  m.lo = lo;
  m.hi = hi;
  return m;
}

CellMask CellMask::slab(int axis, bool at_min, int layers) {
  if (axis < 0) throw ValidationError("mask: slab axis must be >= 0");
  if (layers < 1) throw ValidationError("mask: slab needs >= 1 layer");
  CellMask m;
  m.kind = MaskKind::slab;
  m.axis = axis;
  m.at_min = at_min;
  m.layers = layers;
  return m;
}

CellMask CellMask::cells(std::vector<std::int64_t> flat) {
  CellMask m;
  m.kind = MaskKind::cells;
  m.cell_list = std::move(flat);
  return m;
}

CellMask CellMask::all() { return {}; }

bool CellMask::geometric() const {
  switch (kind) {
    case MaskKind::inner_ring:
    case MaskKind::outer_ring:
    case MaskKind::ball:
    case MaskKind::outside_ball:
    case MaskKind::box:
      return true;
    default:
      return false;
  }
}

std::string CellMask::describe() const {
  switch (kind) {
    case MaskKind::inner_ring:
      return "inner_ring";
    case MaskKind::outer_ring:
      return "outer_ring";
    case MaskKind::ball:
      return "ball(r=" + std::to_string(radius) + ")";
    case MaskKind::outside_ball:
      return "outside_ball(r=" + std::to_string(radius) + ")";
    case MaskKind::box:
      return "box";
    case MaskKind::slab:
      return "slab(axis=" + std::to_string(axis) + ")";
    case MaskKind::cells:
      return "cells(" + std::to_string(cell_list.size()) + ")";
    case MaskKind::all:
      return "all";
  }
  return "mask";
}

std::vector<std::uint8_t> rasterize_mask(const CellMask& mask,
                                         const Domain& domain) {
  const std::int64_t total = domain.cell_count();
  std::vector<std::uint8_t> out(total, 0);
  switch (mask.kind) {
    case MaskKind::all:
      std::fill(out.begin(), out.end(), 1);
      return out;
    case MaskKind::cells:
      for (std::int64_t c : mask.cell_list) {
        if (c < 0 || c >= total)
          throw ValidationError("mask: cell index out of range");
        out[c] = 1;
      }
      return out;
    case MaskKind::slab: {
      if (mask.axis >= domain.dim)
        throw ValidationError("mask: slab axis out of range");
      std::vector<int> idx(domain.dim);
      for (std::int64_t c = 0; c < total; ++c) {
        domain.unflatten(c, idx);
        const int k = idx[mask.axis];
        out[c] = (mask.at_min ? k < mask.layers
                              : k >= domain.grid_n - mask.layers)
                     ? 1
                     : 0;
      }
      return out;
    }
    case MaskKind::inner_ring: {
      if (domain.kind != DomainKind::annulus)
        throw ValidationError("mask: inner_ring requires an annulus domain");
      for (std::int64_t c = 0; c < total; ++c)
        out[c] = (domain.cell_center(c) - domain.center).norm() <=
                         domain.r_inner
                     ? 1
                     : 0;
      return out;
    }
    case MaskKind::outer_ring: {
      if (domain.kind == DomainKind::box) {
        std::vector<int> idx(domain.dim);
        for (std::int64_t c = 0; c < total; ++c) {
          domain.unflatten(c, idx);
          bool edge = false;
          for (int i = 0; i < domain.dim; ++i)
            edge = edge || idx[i] == 0 || idx[i] == domain.grid_n - 1;
          out[c] = edge ? 1 : 0;
        }
        return out;
      }
      const Real rad =
          domain.kind == DomainKind::ball ? domain.radius : domain.r_outer;
      for (std::int64_t c = 0; c < total; ++c)
        out[c] = (domain.cell_center(c) - domain.center).norm() >= rad ? 1 : 0;
      return out;
    }
    case MaskKind::ball: {
      check_center_dim(mask.center, domain.dim, "ball mask");
      for (std::int64_t c = 0; c < total; ++c)
        out[c] =
            (domain.cell_center(c) - mask.center).norm() <= mask.radius ? 1 : 0;
      return out;
    }
    case MaskKind::outside_ball: {
      check_center_dim(mask.center, domain.dim, "outside_ball mask");
      for (std::int64_t c = 0; c < total; ++c)
        out[c] =
            (domain.cell_center(c) - mask.center).norm() >= mask.radius ? 1 : 0;
      return out;
    }
    case MaskKind::box: {
      if (mask.lo.size() != domain.dim)
        throw ValidationError("box mask: dimension mismatch");
      for (std::int64_t c = 0; c < total; ++c) {
        const Vector x = domain.cell_center(c);
        bool in = true;
        for (int i = 0; i < domain.dim; ++i)
          in = in && mask.lo[i] <= x[i] && x[i] <= mask.hi[i];
        out[c] = in ? 1 : 0;
      }
      return out;
    }
  }
  throw ValidationError("mask: unknown kind");
}

namespace {

// Analytic description of a geometric plate boundary, used to shorten links
// that cross it.
struct PlateGeometry {
  enum class Kind { none, sphere, box } kind = Kind::none;
  Vector center;
  Real radius = 0.0;
  Vector lo, hi;
};

PlateGeometry plate_geometry(const CellMask& mask, const Domain& domain) {
  PlateGeometry g;
  switch (mask.kind) {
    case MaskKind::ball:
    case MaskKind::outside_ball:
      g.kind = PlateGeometry::Kind::sphere;
      g.center = mask.center;
      g.radius = mask.radius;
      return g;
    case MaskKind::inner_ring:
      g.kind = PlateGeometry::Kind::sphere;
      g.center = domain.center;
      g.radius = domain.r_inner;
      return g;
    case MaskKind::outer_ring:
      if (domain.kind == DomainKind::box) return g;
      g.kind = PlateGeometry::Kind::sphere;
      g.center = domain.center;
      g.radius = domain.kind == DomainKind::ball ? domain.radius
                                                 : domain.r_outer;
      return g;
    case MaskKind::box:
      g.kind = PlateGeometry::Kind::box;
      g.lo = mask.lo;
      g.hi = mask.hi;
      return g;
    default:
      return g;
  }
}

// Fraction of the segment from an unknown cell center to a plate cell center
// that lies outside the plate region. 1 when no boundary information exists.
Real cross_fraction(const PlateGeometry& g, const Vector& from,
                    const Vector& to) {
  if (g.kind == PlateGeometry::Kind::none) return 1.0;
  if (g.kind == PlateGeometry::Kind::sphere) {
    const Vector w = from - g.center;
    const Vector v = to - from;
    const Real a = v.squaredNorm();
    const Real b = 2.0 * w.dot(v);
    const Real c = w.squaredNorm() - g.radius * g.radius;
    const Real disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return 1.0;
    const Real sq = std::sqrt(disc);
    Real best = 1.0;
    for (const Real t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)})
      if (t > 0.0 && t <= 1.0) best = std::min(best, t);
    return best;
  }
  // axis-aligned segment entering an axis-aligned box: a single coordinate
  // varies, and the unknown endpoint lies outside along that coordinate
  Real best = 1.0;
  for (Eigen::Index i = 0; i < from.size(); ++i) {
    const Real v = to[i] - from[i];
    if (v == 0.0) continue;
    for (const Real face : {g.lo[i], g.hi[i]}) {
      const Real t = (face - from[i]) / v;
      if (t > 0.0 && t <= 1.0) best = std::min(best, t);
    }
  }
  return best;
}

constexpr std::int8_t kRoleOut = 0;
constexpr std::int8_t kRoleUnknown = 1;
constexpr std::int8_t kRoleF0 = 2;
constexpr std::int8_t kRoleF1 = 3;

struct Problem {
  int dim = 0;
  Real p = 2.0;
  Real w = 0.0;  // cell volume
  std::vector<std::int64_t> solve_cells;     // local -> flat
  std::vector<std::int64_t> fwd, bwd;        // local*dim + d -> local / -1
  std::vector<Real> invlen;                  // for fwd links
  std::vector<std::uint8_t> fixed;           // local
  std::vector<Real> f;                       // local values
  std::vector<std::int64_t> unknowns;        // local ids
  std::size_t size() const { return solve_cells.size(); }
};

Real energy(const Problem& P, std::span<const Real> f, Real eps,
            std::vector<Real>& terms) {
  const std::size_t n = P.size();
  const int dim = P.dim;
  const Real e2 = eps * eps;
  const Real half_p = 0.5 * P.p;
  const bool quadratic = P.p == 2.0;
  terms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real g2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      const std::int64_t j = P.fwd[i * dim + d];
      if (j < 0) continue;
      const Real diff = (f[j] - f[i]) * P.invlen[i * dim + d];
      g2 += diff * diff;
    }
    terms[i] = quadratic ? g2 + e2 : std::pow(g2 + e2, half_p);
  }
  return P.w * pairwise_sum(terms);
}

void gradient(const Problem& P, std::span<const Real> f, Real eps,
              std::vector<Real>& grad) {
  const std::size_t n = P.size();
  const int dim = P.dim;
  const Real e2 = eps * eps;
  const Real exp_w = 0.5 * P.p - 1.0;
  const bool quadratic = P.p == 2.0;
  grad.assign(n, 0.0);
  Real diffs[3];
  for (std::size_t i = 0; i < n; ++i) {
    Real g2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      const std::int64_t j = P.fwd[i * dim + d];
      if (j < 0) {
        diffs[d] = 0.0;
        continue;
      }
      diffs[d] = (f[j] - f[i]) * P.invlen[i * dim + d];
      g2 += diffs[d] * diffs[d];
    }
    const Real a =
        P.w * P.p * (quadratic ? 1.0 : std::pow(g2 + e2, exp_w));
    for (int d = 0; d < dim; ++d) {
      const std::int64_t j = P.fwd[i * dim + d];
      if (j < 0) continue;
      const Real pull = a * diffs[d] * P.invlen[i * dim + d];
      grad[j] += pull;
      grad[i] -= pull;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (P.fixed[i]) grad[i] = 0.0;
}

// Gauss-Newton curvature of the energy along direction dvec.
Real gn_form(const Problem& P, std::span<const Real> f,
             std::span<const Real> dvec, Real eps, std::vector<Real>& terms) {
  const std::size_t n = P.size();
  const int dim = P.dim;
  const Real e2 = eps * eps;
  const Real exp_w = 0.5 * P.p - 1.0;
  const bool quadratic = P.p == 2.0;
  terms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real g2 = 0.0, q2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      const std::int64_t j = P.fwd[i * dim + d];
      if (j < 0) continue;
      const Real il = P.invlen[i * dim + d];
      const Real df = (f[j] - f[i]) * il;
      const Real dd = (dvec[j] - dvec[i]) * il;
      g2 += df * df;
      q2 += dd * dd;
    }
    const Real a = P.p * (quadratic ? 1.0 : std::pow(g2 + e2, exp_w));
    terms[i] = a * q2;
  }
  return P.w * pairwise_sum(terms);
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
  return Eigen::Map<const Vector>(a.data(), a.size())
      .dot(Eigen::Map<const Vector>(b.data(), b.size()));
}

void jacobi_init(Problem& P, int sweeps) {
  const int dim = P.dim;
  std::vector<Real> next(P.f);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (const std::int64_t i : P.unknowns) {
      Real num = 0.0, den = 0.0;
      for (int d = 0; d < dim; ++d) {
        const std::int64_t j = P.fwd[i * dim + d];
        if (j >= 0) {
          const Real il = P.invlen[i * dim + d];
          num += il * il * P.f[j];
          den += il * il;
        }
        const std::int64_t k = P.bwd[i * dim + d];
        if (k >= 0) {
          const Real il = P.invlen[k * dim + d];
          num += il * il * P.f[k];
          den += il * il;
        }
      }
      if (den > 0.0) next[i] = num / den;
    }
    std::swap(P.f, next);
  }
}

struct StageOutcome {
  std::int64_t iterations = 0;
  bool converged = false;
  Real grad_norm = 0.0;
};

StageOutcome ncg_stage(Problem& P, Real eps, Real tol, std::int64_t max_iter) {
  const std::size_t n = P.size();
  std::vector<Real> terms, g, gnew, d(n, 0.0), trial(n, 0.0);
  Real e = energy(P, P.f, eps, terms);
  gradient(P, P.f, eps, g);
  for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];

  StageOutcome out;
  int small = 0;
  for (std::int64_t it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    Real gd = dot(g, d);
    if (gd >= 0.0) {
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      gd = dot(g, d);
      if (gd >= -1e-300) {  // stationary
        out.converged = true;
        break;
      }
    }
    const Real hgn = gn_form(P, P.f, d, eps, terms);
    Real t = (std::isfinite(hgn) && hgn > 0.0) ? -gd / hgn : 1.0;
    if (!std::isfinite(t) || t <= 0.0) t = 1.0;

    bool accepted = false;
    Real et = e;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = P.f[i] + t * d[i];
      et = energy(P, trial, eps, terms);
      if (et <= e + 1e-4 * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {  // no descent along d at machine scale
      out.converged = true;
      break;
    }
    std::swap(P.f, trial);
    const Real rel = (e - et) / std::max(std::abs(et), 1e-300);
    e = et;
    gradient(P, P.f, eps, gnew);
    const Real gg = dot(g, g);
    Real beta = 0.0;
    if (gg > 0.0 && it % 50 != 0) {
      beta = (dot(gnew, gnew) - dot(gnew, g)) / gg;  // Polak-Ribiere
      beta = std::max(0.0, beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -gnew[i] + beta * d[i];
    std::swap(g, gnew);
    small = rel < tol ? small + 1 : 0;
    if (small >= 5) {
      out.converged = true;
      break;
    }
  }
  out.grad_norm = std::sqrt(dot(g, g));
  return out;
}

std::vector<std::int64_t> face_neighbors(const Domain& domain,
                                         std::int64_t flat) {
  std::vector<std::int64_t> out;
  std::vector<int> idx(domain.dim);
  domain.unflatten(flat, idx);
  for (int d = 0; d < domain.dim; ++d) {
    std::int64_t stride = 1;
    for (int i = domain.dim - 1; i > d; --i) stride *= domain.grid_n;
    if (idx[d] > 0) out.push_back(flat - stride);
    if (idx[d] < domain.grid_n - 1) out.push_back(flat + stride);
  }
  return out;
}

int component_count(const Domain& domain,
                    const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> seen(mask.size(), 0);
  int components = 0;
  for (std::int64_t start = 0; start < std::ssize(mask); ++start) {
    if (!mask[start] || seen[start]) continue;
    ++components;
    std::deque<std::int64_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::int64_t c = queue.front();
      queue.pop_front();
      for (const std::int64_t nb : face_neighbors(domain, c)) {
        if (mask[nb] && !seen[nb]) {
          seen[nb] = 1;
          queue.push_back(nb);
        }
      }
    }
  }
  return components;
}

std::vector<std::uint8_t> dilate(const Domain& domain,
                                 const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> out(mask);
  for (std::int64_t c = 0; c < std::ssize(mask); ++c) {
    if (mask[c]) continue;
    for (const std::int64_t nb : face_neighbors(domain, c))
      if (mask[nb]) {
        out[c] = 1;
        break;
      }
  }
  return out;
}

std::vector<std::uint8_t> erode(const Domain& domain,
                                const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> out(mask);
  for (std::int64_t c = 0; c < std::ssize(mask); ++c) {
    if (!mask[c]) continue;
    for (const std::int64_t nb : face_neighbors(domain, c))
      if (!mask[nb]) {
        out[c] = 0;
        break;
      }
  }
  return out;
}

std::vector<std::int64_t> mask_to_list(const std::vector<std::uint8_t>& mask) {
  std::vector<std::int64_t> out;
  for (std::int64_t c = 0; c < std::ssize(mask); ++c)
    if (mask[c]) out.push_back(c);
  return out;
}

}  // namespace

CapacityResult solve_capacity(const Condenser& condenser,
                              const SolverConfig& config) {
  const Domain& domain = condenser.domain;
  if (domain.dim != 2 && domain.dim != 3)
    throw ValidationError("solve_capacity: only n in {2,3} supported");
  if (domain.grid_n < 4)
    throw ValidationError("solve_capacity: grid must be >= 4 points per axis");
  if (!(condenser.p >= 1.1 && condenser.p <= 10.0))
    throw ValidationError("solve_capacity: exponent p must lie in [1.1, 10]");

  const std::int64_t total = domain.cell_count();
  const std::vector<std::uint8_t> m0 =
      rasterize_mask(condenser.plate_zero, domain);
  const std::vector<std::uint8_t> m1 =
      rasterize_mask(condenser.plate_one, domain);

  std::int64_t n0 = 0, n1 = 0;
  for (std::int64_t c = 0; c < total; ++c) {
    if (m0[c] && m1[c])
      throw ValidationError("solve_capacity: plates overlap");
    n0 += m0[c];
    n1 += m1[c];
  }
  if (n0 == 0) throw ValidationError("solve_capacity: plate F0 is empty");
  if (n1 == 0) throw ValidationError("solve_capacity: plate F1 is empty");
  for (std::int64_t c = 0; c < total; ++c) {
    if (!m0[c]) continue;
    for (const std::int64_t nb : face_neighbors(domain, c))
      if (m1[nb])
        throw ValidationError(
            "solve_capacity: plates touch; refine the grid or separate them");
  }

  const bool has_override = !condenser.active_override.empty();
  if (has_override && std::ssize(condenser.active_override) != total)
    throw ValidationError("solve_capacity: active_override size mismatch");

  std::vector<std::int8_t> role(total, kRoleOut);
  for (std::int64_t c = 0; c < total; ++c) {
    if (m0[c]) {
      role[c] = kRoleF0;
    } else if (m1[c]) {
      role[c] = kRoleF1;
    } else {
      const bool in = has_override ? condenser.active_override[c] != 0
                                   : domain.inside(domain.cell_center(c));
      if (in) role[c] = kRoleUnknown;
    }
  }

  Problem P;
  P.dim = domain.dim;
  P.p = condenser.p;
  P.w = domain.cell_volume();

  std::vector<std::int64_t> local(total, -1);
  for (std::int64_t c = 0; c < total; ++c) {
    if (role[c] == kRoleOut) continue;
    local[c] = std::ssize(P.solve_cells);
    P.solve_cells.push_back(c);
  }
  const std::size_t n = P.solve_cells.size();
  P.fwd.assign(n * P.dim, -1);
  P.bwd.assign(n * P.dim, -1);
  P.invlen.assign(n * P.dim, 0.0);
  P.fixed.assign(n, 0);
  P.f.assign(n, 0.0);

  const PlateGeometry geom0 = plate_geometry(condenser.plate_zero, domain);
  const PlateGeometry geom1 = plate_geometry(condenser.plate_one, domain);
  const Vector h = domain.cell_width();

  std::vector<int> idx(domain.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t c = P.solve_cells[i];
    domain.unflatten(c, idx);
    for (int d = 0; d < domain.dim; ++d) {
      if (idx[d] + 1 >= domain.grid_n) continue;
      std::int64_t stride = 1;
      for (int k = domain.dim - 1; k > d; --k) stride *= domain.grid_n;
      const std::int64_t nb = c + stride;
      const std::int64_t j = local[nb];
      if (j < 0) continue;
      P.fwd[i * domain.dim + d] = j;
      P.bwd[j * domain.dim + d] = static_cast<std::int64_t>(i);
      Real cut = 1.0;
      const std::int8_t ri = role[c], rj = role[nb];
      const bool i_plate = ri == kRoleF0 || ri == kRoleF1;
      const bool j_plate = rj == kRoleF0 || rj == kRoleF1;
      if (i_plate != j_plate) {
        const std::int8_t plate_role = i_plate ? ri : rj;
        const PlateGeometry& g = plate_role == kRoleF0 ? geom0 : geom1;
        const Vector from = domain.cell_center(i_plate ? nb : c);
        const Vector to = domain.cell_center(i_plate ? c : nb);
        cut = std::clamp(cross_fraction(g, from, to), kMinCut, 1.0);
      }
      // Shortened links difference against the plate boundary, not the
      // plate cell center, so flat plates (slabs, boxes) stay exact.
      // Curved plates keep a first-order staircase error either way; of
      // the shortening variants measured on ring condensers this one has
      // the smallest error at moderate grids.
      P.invlen[i * domain.dim + d] = 1.0 / (h[d] * cut);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::int8_t r = role[P.solve_cells[i]];
    if (r == kRoleUnknown) {
      P.f[i] = 0.5;
      P.unknowns.push_back(static_cast<std::int64_t>(i));
    } else {
      P.fixed[i] = 1;
      P.f[i] = r == kRoleF1 ? 1.0 : 0.0;
    }
  }
  if (P.unknowns.empty())
    throw ValidationError("solve_capacity: no unknown cells between plates");

  CapacityResult result;
  result.grid_n = domain.grid_n;
  result.dim = domain.dim;
  result.cells_f0 = n0;
  result.cells_f1 = n1;
  result.cells_unknown = std::ssize(P.unknowns);
  if (component_count(domain, m0) > 1)
    result.warnings.push_back("plate F0 is disconnected on this grid");
  if (component_count(domain, m1) > 1)
    result.warnings.push_back("plate F1 is disconnected on this grid");

  auto finish = [&](Problem& prob) {
    std::vector<Real> terms;
    result.value = energy(prob, prob.f, 0.0, terms);
    result.minimizer.assign(total, kNaN);
    for (std::size_t i = 0; i < prob.size(); ++i)
      result.minimizer[prob.solve_cells[i]] = prob.f[i];
  };

  jacobi_init(P, config.jacobi_sweeps);

  std::vector<Real> schedule = config.eps_schedule;
  if (schedule.empty()) schedule.push_back(0.0);
  result.eps_used = schedule;

  for (const Real eps : schedule) {
    const StageOutcome stage =
        ncg_stage(P, eps, config.tol_energy, config.max_iter);
    result.iterations += stage.iterations;
    result.final_grad_norm = stage.grad_norm;
    if (!stage.converged) {
      finish(P);
      throw SolverFailure(
          "solve_capacity: iteration budget exhausted at eps = " +
              std::to_string(eps),
          result);
    }
  }

  // The discrete minimizer obeys the maximum principle; enforce it by extra
  // polishing rather than clamping.
  auto bounds_ok = [&]() {
    for (const std::int64_t i : P.unknowns)
      if (P.f[i] < -1e-9 || P.f[i] > 1.0 + 1e-9) return false;
    return true;
  };
  if (!bounds_ok()) {
    const StageOutcome polish =
        ncg_stage(P, schedule.back(), config.tol_energy * 0.1, config.max_iter);
    result.iterations += polish.iterations;
    result.final_grad_norm = polish.grad_norm;
    if (!bounds_ok())
      result.warnings.push_back(
          "minimizer exceeds [0,1] beyond tolerance after polishing");
  }

  finish(P);

  if (config.bracket) {
    SolverConfig inner = config;
    inner.bracket = false;
    auto solve_variant = [&](const std::vector<std::uint8_t>& v0,
                             const std::vector<std::uint8_t>& v1) -> Real {
      Condenser c = condenser;
      c.plate_zero = CellMask::cells(mask_to_list(v0));
      c.plate_one = CellMask::cells(mask_to_list(v1));
      return solve_capacity(c, inner).value;
    };
    try {
      result.value_plates_grown =
          solve_variant(dilate(domain, m0), dilate(domain, m1));
    } catch (const std::exception& e) {
      result.warnings.push_back(std::string("bracket (grown plates): ") +
                                e.what());
    }
    try {
      const std::vector<std::uint8_t> e0 = erode(domain, m0);
      const std::vector<std::uint8_t> e1 = erode(domain, m1);
      result.value_plates_shrunk = solve_variant(e0, e1);
    } catch (const std::exception& e) {
      result.warnings.push_back(std::string("bracket (shrunk plates): ") +
                                e.what());
    }
  }

  return result;
}

Real analytic_ring_capacity(int n, Real p, Real r, Real R) {
  if (n < 2) throw ValidationError("ring capacity: dimension must be >= 2");
  if (!(p > 1.0) || !std::isfinite(p))
    throw ValidationError("ring capacity: exponent must satisfy 1 < p < inf");
  if (!(0.0 < r && r < R) || !std::isfinite(R))
    throw ValidationError("ring capacity: radii must satisfy 0 < r < R < inf");
  const Real omega = unit_sphere_area(n);
  // Radial reduction: the extremal profile satisfies f'(rho) proportional to
  // rho^{-(n-1)/(p-1)}; the capacity is omega * |c|^{p-1} with 1/|c| the
  // integral of that power over [r, R].
  if (p == static_cast<Real>(n))
    return omega * std::pow(std::log(R / r), 1.0 - n);
  const Real beta = (p - n) / (p - 1.0);
  const Real gap = std::abs(std::pow(R, beta) - std::pow(r, beta));
  return omega * std::pow(std::abs((n - p) / (p - 1.0)), p - 1.0) *
         std::pow(gap, 1.0 - p);
}

namespace {

bool origin_centered(const Vector& c) {
  return c.size() == 0 || c.norm() == 0.0;
}

// Same discretization: grid-indexed masks transfer only between equal grids.
bool same_domain(const Domain& a, const Domain& b) {
  return a.kind == b.kind && a.dim == b.dim && a.grid_n == b.grid_n &&
         (a.lo.array() == b.lo.array()).all() &&
         (a.hi.array() == b.hi.array()).all() && a.radius == b.radius &&
         a.r_inner == b.r_inner && a.r_outer == b.r_outer;
}

// Geometric pushforward for the radial family: spheres about the origin map
// to spheres of radius r^a.
bool push_geometric(const CellMask& mask, const Condenser& source,
                    const MappingSpec& spec, const Domain& image_domain,
                    CellMask& out) {
  if (spec.family == Family::identity) {
    // analytic shapes survive any regridding; cell-indexed ones do not
    if (mask.kind == MaskKind::ball || mask.kind == MaskKind::outside_ball ||
        mask.kind == MaskKind::box ||
        same_domain(source.domain, image_domain)) {
      out = mask;
      return true;
    }
    return false;
  }
  if (spec.family != Family::radial_power) return false;
  const Real a = spec.exponent;
  switch (mask.kind) {
    case MaskKind::ball:
      if (!origin_centered(mask.center)) return false;
      out = CellMask::ball(mask.center, std::pow(mask.radius, a));
      return true;
    case MaskKind::outside_ball:
      if (!origin_centered(mask.center)) return false;
      out = CellMask::outside_ball(mask.center, std::pow(mask.radius, a));
      return true;
    case MaskKind::inner_ring: {
      if (!origin_centered(source.domain.center)) return false;
      Vector zero = Vector::Zero(source.domain.dim);
      out = CellMask::ball(zero, std::pow(source.domain.r_inner, a));
      return true;
    }
    case MaskKind::outer_ring: {
      if (source.domain.kind == DomainKind::box) return false;
      if (!origin_centered(source.domain.center)) return false;
      const Real rad = source.domain.kind == DomainKind::ball
                           ? source.domain.radius
                           : source.domain.r_outer;
      Vector zero = Vector::Zero(source.domain.dim);
      out = CellMask::outside_ball(zero, std::pow(rad, a));
      return true;
    }
    default:
      return false;
  }
}

CellMask push_by_preimage(const CellMask& mask, const Condenser& source,
                          const MappingSpec& inv, const Domain& image_domain) {
  std::vector<std::uint8_t> src = rasterize_mask(mask, source.domain);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<std::int64_t> image_cells;
    for (std::int64_t c = 0; c < image_domain.cell_count(); ++c) {
      const Vector x = evaluate(inv, image_domain.cell_center(c));
      const std::int64_t sc = source.domain.locate_cell(x);
      if (sc >= 0 && src[sc]) image_cells.push_back(c);
    }
    if (!image_cells.empty()) return CellMask::cells(std::move(image_cells));
    // Thin plates can fall between image cell centers; widen once and retry.
    src = dilate(source.domain, src);
  }
  throw ResolutionError("image_condenser: plate " + mask.describe() +
                        " is lost on the image grid; refine it");
}

}  // namespace

Condenser image_condenser(const Condenser& condenser, const MappingSpec& spec,
                          const Domain& image_domain) {
  if (image_domain.dim != condenser.domain.dim)
    throw ValidationError("image_condenser: dimension mismatch");
  const MappingSpec inv = inverse_spec(spec);

  Condenser out;
  out.domain = image_domain;
  out.p = condenser.p;

  if (!push_geometric(condenser.plate_zero, condenser, spec, image_domain,
                      out.plate_zero))
    out.plate_zero =
        push_by_preimage(condenser.plate_zero, condenser, inv, image_domain);
  if (!push_geometric(condenser.plate_one, condenser, spec, image_domain,
                      out.plate_one))
    out.plate_one =
        push_by_preimage(condenser.plate_one, condenser, inv, image_domain);

  const bool src_override = !condenser.active_override.empty();
  out.active_override.assign(image_domain.cell_count(), 0);
  for (std::int64_t c = 0; c < image_domain.cell_count(); ++c) {
    const Vector y = image_domain.cell_center(c);
    if (!image_domain.inside(y)) continue;
    const Vector x = evaluate(inv, y);
    bool in_source;
    if (src_override) {
      const std::int64_t sc = condenser.domain.locate_cell(x);
      in_source = sc >= 0 && condenser.active_override[sc];
    } else {
      in_source = x.size() == condenser.domain.dim &&
                  condenser.domain.inside(x);
    }
    out.active_override[c] = in_source ? 1 : 0;
  }

  const std::vector<std::uint8_t> i0 =
      rasterize_mask(out.plate_zero, image_domain);
  const std::vector<std::uint8_t> i1 =
      rasterize_mask(out.plate_one, image_domain);
  for (std::int64_t c = 0; c < image_domain.cell_count(); ++c)
    if (i0[c] && i1[c])
      throw ResolutionError(
          "image_condenser: pushed plates overlap; the image grid is too "
          "coarse for this mapping");
  return out;
}

}  // namespace caplab
