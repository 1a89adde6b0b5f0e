#include "caplab/verify.hpp"

#include <algorithm>
#include <cstdio>

namespace caplab {

namespace {

std::string str(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

void put(Metadata& m, std::string key, std::string value) {
  m.emplace_back(std::move(key), std::move(value));
}

bool constant_jacobian(const MappingSpec& spec) {
  switch (spec.family) {
    case Family::identity:
    case Family::linear:
    case Family::planar_stretch:
      return true;
    case Family::composed:
      return std::all_of(spec.parts.begin(), spec.parts.end(),
                         [](const MappingSpec& p) {
                           return constant_jacobian(p);
                         });
    default:
      return false;
  }
}

void finish_inequality(VerificationVerdict& v, Real tol) {
  v.tolerance_used = tol;
  v.vacuous = std::isinf(v.rhs);
  v.passed = v.vacuous || v.lhs <= v.rhs * (1.0 + tol);
  v.slack = v.rhs - v.lhs;
}

void finish_identity(VerificationVerdict& v, Real tol) {
  v.identity = true;
  v.tolerance_used = tol;
  Real residual;
  if (std::isinf(v.lhs) && std::isinf(v.rhs)) {
    residual = 0.0;
    v.vacuous = true;
  } else if (v.lhs == v.rhs) {
    residual = 0.0;
  } else {
    residual = std::abs(v.lhs - v.rhs) /
               std::max({std::abs(v.lhs), std::abs(v.rhs), 1e-300});
  }
  v.slack = residual;
  v.passed = residual <= tol;
}

// Cell centers of the image grid that lie inside the geometry, with their
// volume weight.
void image_points(const Domain& image_domain, std::vector<Vector>& pts,
                  std::vector<Real>& weights) {
  pts.clear();
  weights.clear();
  const Real w = image_domain.cell_volume();
  for (std::int64_t c = 0; c < image_domain.cell_count(); ++c) {
    Vector y = image_domain.cell_center(c);
    if (!image_domain.inside(y)) continue;
    pts.push_back(std::move(y));
    weights.push_back(w);
  }
  if (pts.empty())
    throw ValidationError("image domain has no inside cells at this grid");
}

struct CompositeNorms {
  GridSamples samples;
  std::vector<Vector> mapped;  // phi at each sample point
};

CompositeNorms source_side(const MappingSpec& spec, const Domain& domain,
                           const Scheme& scheme) {
  CompositeNorms out{sample_grid(spec, domain, scheme), {}};
  out.mapped.reserve(out.samples.size());
  for (const auto& s : out.samples.samples)
    out.mapped.push_back(evaluate(spec, s.x));
  return out;
}

// || |D phi(x)^T grad f(phi x)| ||_{L_q}, excluded cells masked out.
Real composite_norm(const CompositeNorms& src, const TestFunction& f, Real q) {
  std::vector<Real> vals(src.samples.size());
  for (std::size_t i = 0; i < src.samples.size(); ++i) {
    if (src.samples.excluded[i]) {
      vals[i] = 0.0;  // masked below
      continue;
    }
    const Vector g = f.gradient(src.mapped[i]);
    vals[i] = (src.samples.samples[i].jacobian.transpose() * g).norm();
  }
  return weighted_lebesgue_norm(vals, src.samples.weights, q,
                                src.samples.excluded);
}

}  // namespace

Real identity_tol(const MappingSpec& spec, int grid_n) {
  if (constant_jacobian(spec)) return 1e-6;
  return std::max(1e-3, 10.0 / (static_cast<Real>(grid_n) * grid_n));
}

VerificationVerdict transfer_identity_residual(const MappingSpec& spec,
                                               const Domain& domain,
                                               const Domain& image_domain,
                                               Real q, Real s,
                                               const Scheme& scheme,
                                               Real tol_override) {
  if (!(s >= 1.0))
    throw ValidationError("transfer identity: s must be >= 1");
  if (!(q > s)) throw ValidationError("transfer identity: requires s < q");

  VerificationVerdict v;
  v.name = "transfer_identity";

  const Real A = global_KI_qs(spec, domain, q, s, scheme);
  const MappingSpec inv = inverse_spec(spec);
  const GridSamples img = sample_grid(inv, image_domain, scheme);

  std::vector<Real> gvals, weights;
  gvals.reserve(img.size());
  weights.reserve(img.size());
  std::int64_t skipped_outside = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img.excluded[i]) continue;
    const DifferentialSample& smp = img.samples[i];
    if (!domain.inside(evaluate(inv, smp.x))) {
      ++skipped_outside;
      continue;
    }
    if (std::isinf(q)) {
      gvals.push_back(smp.op_norm);
    } else {
      const Real det = std::abs(smp.det);
      gvals.push_back(det > 0.0
                          ? std::pow(smp.op_norm, q) / det
                          : (smp.op_norm > 0.0 ? kInf : 0.0));
    }
    weights.push_back(img.weights[i]);
  }
  if (gvals.empty())
    throw ValidationError("transfer identity: no usable image cells");

  Real B;
  if (std::isinf(q)) {
    B = weighted_lebesgue_norm(gvals, weights, s);
  } else {
    // (integral of g^{s/(q-s)})^{(q-s)/(qs)}, scaled to avoid overflow
    const Real gmax = *std::max_element(gvals.begin(), gvals.end());
    if (std::isinf(gmax)) {
      B = kInf;
    } else if (gmax == 0.0) {
      B = 0.0;
    } else {
      const Real e1 = s / (q - s);
      std::vector<Real> terms(gvals.size());
      for (std::size_t i = 0; i < gvals.size(); ++i)
        terms[i] = std::pow(gvals[i] / gmax, e1) * weights[i];
      B = std::pow(gmax, 1.0 / q) *
          std::pow(pairwise_sum(terms), (q - s) / (q * s));
    }
  }

  v.lhs = A;
  v.rhs = B;
  const Real tol =
      tol_override > 0.0
          ? tol_override
          : identity_tol(spec, std::min(domain.grid_n, image_domain.grid_n));
  finish_identity(v, tol);
  put(v.metadata, "map", spec.describe());
  put(v.metadata, "q", str(q));
  put(v.metadata, "s", str(s));
  put(v.metadata, "grid_source", std::to_string(domain.grid_n));
  put(v.metadata, "grid_image", std::to_string(image_domain.grid_n));
  put(v.metadata, "image_cells_used", std::to_string(gvals.size()));
  put(v.metadata, "image_cells_outside_source",
      std::to_string(skipped_outside));
  put(v.metadata, "image_cells_excluded", std::to_string(img.excluded_count));
  return v;
}

VerificationVerdict change_of_variables_residual(
    const MappingSpec& spec, const Domain& domain,
    const std::function<Real(const Vector&)>& f, const std::string& f_name,
    const CellMask& set, const Scheme& scheme, Real tol_override) {
  const GridSamples src = sample_grid(spec, domain, scheme);
  const std::vector<std::uint8_t> mask = rasterize_mask(set, domain);
  const MappingSpec inv = inverse_spec(spec);

  std::vector<Real> lhs_terms;
  Vector blo, bhi;
  Real max_op = 1.0;
  std::int64_t used = 0, excluded_in_set = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!mask[src.cells[i]]) continue;
    if (src.excluded[i]) {
      ++excluded_in_set;
      continue;
    }
    const DifferentialSample& smp = src.samples[i];
    const Vector y = evaluate(spec, smp.x);
    const Real fy = f(y);
    if (fy < 0.0)
      throw ValidationError(
          "change of variables: integrand is negative at a sampled point");
    lhs_terms.push_back(fy * std::abs(smp.det) * src.weights[i]);
    if (used == 0) {
      blo = y;
      bhi = y;
    } else {
      blo = blo.cwiseMin(y);
      bhi = bhi.cwiseMax(y);
    }
    if (std::isfinite(smp.op_norm)) max_op = std::max(max_op, smp.op_norm);
    ++used;
  }
  if (used == 0)
    throw ValidationError("change of variables: set has no usable cells");
  const Real lhs = pairwise_sum(lhs_terms);

  // Image grid over the mapped set: bounding box of the mapped cell centers
  // padded by the image of half a source cell, so a mapped cell interior
  // never leaks past the box.
  const int n_img = domain.grid_n;
  const Vector pad = 0.5 * max_op * domain.cell_width();
  const Domain img =
      Domain::box(blo - pad, bhi + pad, n_img);
  std::vector<Real> rhs_terms;
  std::int64_t image_cells = 0;
  const Real wimg = img.cell_volume();
  for (std::int64_t c = 0; c < img.cell_count(); ++c) {
    const Vector y = img.cell_center(c);
    const Vector x = evaluate(inv, y);
    const std::int64_t sc = domain.locate_cell(x);
    if (sc < 0 || !mask[sc] || !domain.inside(x)) continue;
    const Real fy = f(y);
    if (fy < 0.0)
      throw ValidationError(
          "change of variables: integrand is negative at a sampled point");
    rhs_terms.push_back(fy * wimg);
    ++image_cells;
  }
  const Real rhs = rhs_terms.empty() ? 0.0 : pairwise_sum(rhs_terms);

  VerificationVerdict v;
  v.name = "change_of_variables";
  v.lhs = lhs;
  v.rhs = rhs;
  const Real tol = tol_override > 0.0
                       ? tol_override
                       : std::max(1e-2, 2.0 / static_cast<Real>(n_img));
  finish_identity(v, tol);
  put(v.metadata, "map", spec.describe());
  put(v.metadata, "integrand", f_name);
  put(v.metadata, "set", set.describe());
  put(v.metadata, "grid", std::to_string(domain.grid_n));
  put(v.metadata, "source_cells_used", std::to_string(used));
  put(v.metadata, "source_cells_excluded", std::to_string(excluded_in_set));
  put(v.metadata, "image_cells_used", std::to_string(image_cells));
  return v;
}

VerificationVerdict capacity_distortion_check(
    const MappingSpec& spec, const Condenser& condenser,
    const Domain& image_domain, Real q, Real s, const SolverConfig& solver,
    const Scheme& scheme, bool same_exponent, Real tol_override) {
  const Real tau = tol_override > 0.0 ? tol_override : kInequalityTol;
  VerificationVerdict v;

  Condenser source = condenser;
  Condenser image = image_condenser(condenser, spec, image_domain);

  if (same_exponent) {
    if (s != q)
      throw ValidationError(
          "capacity distortion (same exponent): s must equal q");
    v.name = "capacity_distortion_pp";
    const Real K =
        global_K_pq(spec, condenser.domain, ExponentPair::make(q, q), scheme);
    source.p = q;
    image.p = q;
    const CapacityResult cs = solve_capacity(source, solver);
    const CapacityResult ci = solve_capacity(image, solver);
    v.lhs = std::pow(cs.value, 1.0 / q);
    v.rhs = K * std::pow(ci.value, 1.0 / q);
    put(v.metadata, "K", str(K));
    put(v.metadata, "cap_source", str(cs.value));
    put(v.metadata, "cap_image", str(ci.value));
    put(v.metadata, "iterations",
        std::to_string(cs.iterations + ci.iterations));
  } else {
    if (!(s > 1.0 && s < q))
      throw ValidationError("capacity distortion: requires 1 < s < q");
    v.name = "capacity_distortion";
    const Real K = global_KI_qs(spec, condenser.domain, q, s, scheme);
    source.p = q;
    image.p = s;
    const CapacityResult cs = solve_capacity(source, solver);
    const CapacityResult ci = solve_capacity(image, solver);
    v.lhs = std::pow(ci.value, 1.0 / s);
    v.rhs = K * std::pow(cs.value, 1.0 / q);
    put(v.metadata, "K_inner", str(K));
    put(v.metadata, "cap_source_q", str(cs.value));
    put(v.metadata, "cap_image_s", str(ci.value));
    put(v.metadata, "iterations",
        std::to_string(cs.iterations + ci.iterations));
  }
  put(v.metadata, "map", spec.describe());
  put(v.metadata, "q", str(q));
  put(v.metadata, "s", str(s));
  put(v.metadata, "grid_source", std::to_string(condenser.domain.grid_n));
  put(v.metadata, "grid_image", std::to_string(image_domain.grid_n));
  finish_inequality(v, tau);
  return v;
}

std::vector<VerificationVerdict> energy_bounds_check(
    const MappingSpec& spec, const Domain& domain, const Domain& image_domain,
    Real q, Real s, const FamilySpec& family, const Scheme& scheme,
    Real tol_override) {
  if (!(s >= 1.0 && s <= q))
    throw ValidationError("energy bounds: requires 1 <= s <= q");
  const Real tau = tol_override > 0.0 ? tol_override : kInequalityTol;

  const std::vector<TestFunction> members = make_family(family, image_domain);
  const Real K = global_KI_qs(spec, domain, q, s, scheme);
  const Real phi_seminorm = sobolev_seminorm(spec, domain, q, scheme);
  const CompositeNorms src = source_side(spec, domain, scheme);

  std::vector<Vector> ypts;
  std::vector<Real> yweights;
  image_points(image_domain, ypts, yweights);

  std::vector<VerificationVerdict> out;
  std::vector<Real> gmag(ypts.size());
  for (const TestFunction& f : members) {
    Real sup_g = 0.0;
    for (std::size_t i = 0; i < ypts.size(); ++i) {
      gmag[i] = f.gradient(ypts[i]).norm();
      sup_g = std::max(sup_g, gmag[i]);
    }
    const Real norm_s = weighted_lebesgue_norm(gmag, yweights, s);
    const Real norm_q_composite = composite_norm(src, f, q);

    VerificationVerdict lower;
    lower.name = "energy_lower:" + f.name;
    lower.lhs = std::isinf(K) ? 0.0 : norm_s / K;
    lower.rhs = norm_q_composite;
    finish_inequality(lower, tau);
    lower.vacuous = lower.vacuous || std::isinf(K);
    if (std::isinf(K))
      put(lower.metadata, "note",
          "distortion is infinite; the lower bound is vacuous");
    put(lower.metadata, "K_inner", str(K));
    put(lower.metadata, "norm_image_s", str(norm_s));
    out.push_back(std::move(lower));

    VerificationVerdict upper;
    upper.name = "energy_upper:" + f.name;
    upper.lhs = norm_q_composite;
    upper.rhs = phi_seminorm * sup_g;
    finish_inequality(upper, tau);
    put(upper.metadata, "map_seminorm_q", str(phi_seminorm));
    put(upper.metadata, "sup_grad", str(sup_g));
    out.push_back(std::move(upper));
  }
  for (VerificationVerdict& v : out) {
    put(v.metadata, "map", spec.describe());
    put(v.metadata, "q", str(q));
    put(v.metadata, "s", str(s));
    put(v.metadata, "excluded_cells",
        std::to_string(src.samples.excluded_count));
  }
  return out;
}

VerificationVerdict operator_norm_lower_bound(
    const MappingSpec& spec, const Domain& domain, const Domain& image_domain,
    Real p, Real q, const FamilySpec& family, const Scheme& scheme,
    Real tol_override) {
  if (!(q >= 1.0 && q <= p))
    throw ValidationError("operator norm: requires 1 <= q <= p");
  const Real tau = tol_override > 0.0 ? tol_override : kInequalityTol;

  const std::vector<TestFunction> members = make_family(family, image_domain);
  const ExponentPair pair = ExponentPair::make(p, q);
  const Real K = global_K_pq(spec, domain, pair, scheme);
  const CompositeNorms src = source_side(spec, domain, scheme);

  std::vector<Vector> ypts;
  std::vector<Real> yweights;
  image_points(image_domain, ypts, yweights);

  VerificationVerdict v;
  v.name = "operator_norm";
  Real best = -1.0;
  std::string best_name;
  std::vector<Real> gmag(ypts.size());
  int skipped = 0;
  for (const TestFunction& f : members) {
    for (std::size_t i = 0; i < ypts.size(); ++i)
      gmag[i] = f.gradient(ypts[i]).norm();
    const Real denom = weighted_lebesgue_norm(gmag, yweights, p);
    if (denom == 0.0) {
      ++skipped;
      put(v.metadata, "skipped:" + f.name, "zero gradient, ratio undefined");
      continue;
    }
    const Real ratio = composite_norm(src, f, q) / denom;
    put(v.metadata, "ratio:" + f.name, str(ratio));
    if (ratio > best) {
      best = ratio;
      best_name = f.name;
    }
  }
  if (best < 0.0)
    throw ValidationError(
        "operator norm: every family member has zero gradient");

  v.lhs = best;
  v.rhs = K;
  finish_inequality(v, tau);
  put(v.metadata, "map", spec.describe());
  put(v.metadata, "p", str(p));
  put(v.metadata, "q", str(q));
  put(v.metadata, "best_member", best_name);
  put(v.metadata, "skipped_members", std::to_string(skipped));
  if (p > q && !std::isinf(v.lhs)) {
    const Real kappa = pair.kappa();
    if (std::isfinite(kappa))
      put(v.metadata, "set_function_lower_estimate",
          str(std::pow(best, kappa)));
  }
  return v;
}

}  // namespace caplab
