#include "caplab/distortion.hpp"

#include <functional>

namespace caplab {

namespace {

constexpr Real kZeroMatrixTol = 1e-14;

void check_exponent(Real e, const char* name) {
  if (std::isnan(e) || e < 1.0)
    throw ValidationError(std::string(name) + " must satisfy >= 1");
}

std::vector<Real> field_values(const GridSamples& g,
                               const std::function<Real(const DifferentialSample&)>& f) {
  std::vector<Real> v;
  v.reserve(g.size());
  for (const DifferentialSample& s : g.samples) v.push_back(f(s));
  return v;
}

}  // namespace

ExponentPair ExponentPair::make(Real p, Real q) {
  check_exponent(p, "exponent p");
  check_exponent(q, "exponent q");
  if (q > p) throw ValidationError("exponents must satisfy q <= p");
  return {p, q};
}

Real ExponentPair::kappa() const {
  if (p == q) return kInf;
  if (std::isinf(p)) return q;
  return p * q / (p - q);
}

Real jacobian_zero_tol(const DifferentialSample& s) {
  const auto n = static_cast<Real>(s.jacobian.rows());
  return 1e-12 * (1.0 + std::pow(s.op_norm, n));
}

Real pointwise_Kp(const DifferentialSample& s, Real p) {
  check_exponent(p, "exponent p");
  if (std::isinf(s.op_norm)) return kInf;
  if (std::abs(s.det) <= jacobian_zero_tol(s))
    return s.op_norm <= kZeroMatrixTol ? 0.0 : kInf;
  const Real inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
  return s.op_norm / std::pow(std::abs(s.det), inv_p);
}

Real pointwise_KI_s(const DifferentialSample& s, Real s_exp) {
  check_exponent(s_exp, "exponent s");
  if (std::isinf(s.op_norm)) return kInf;
  if (std::abs(s.det) <= jacobian_zero_tol(s)) return 0.0;
  if (s.min_stretch <= 0.0) return kInf;
  const Real inv_s = std::isinf(s_exp) ? 0.0 : 1.0 / s_exp;
  return std::pow(std::abs(s.det), inv_s) / s.min_stretch;
}

Real global_K_pq(const GridSamples& samples, const ExponentPair& pair) {
  const std::vector<Real> v =
      field_values(samples, [&](const DifferentialSample& s) {
        return pointwise_Kp(s, pair.p);
      });
  return weighted_lebesgue_norm(v, samples.weights, pair.kappa(),
                                samples.excluded);
}

Real global_K_pq(const MappingSpec& spec, const Domain& domain,
                 const ExponentPair& pair, const Scheme& scheme) {
  return global_K_pq(sample_grid(spec, domain, scheme), pair);
}

Real global_KI_qs(const GridSamples& samples, Real q, Real s) {
  check_exponent(s, "exponent s");
  if (std::isnan(q) || q <= 1.0)
    throw ValidationError("exponent q must satisfy q > 1");
  if (s > q) throw ValidationError("exponents must satisfy s <= q");
  Real kappa;
  if (q == s)
    kappa = kInf;
  else if (std::isinf(q))
    kappa = s;
  else
    kappa = q * s / (q - s);
  const std::vector<Real> v =
      field_values(samples, [&](const DifferentialSample& smp) {
        return pointwise_KI_s(smp, s);
      });
  return weighted_lebesgue_norm(v, samples.weights, kappa, samples.excluded);
}

Real global_KI_qs(const MappingSpec& spec, const Domain& domain, Real q, Real s,
                  const Scheme& scheme) {
  return global_KI_qs(sample_grid(spec, domain, scheme), q, s);
}

Real sobolev_seminorm(const GridSamples& samples, Real q) {
  check_exponent(q, "exponent q");
  const std::vector<Real> v = field_values(
      samples, [](const DifferentialSample& s) { return s.op_norm; });
  return weighted_lebesgue_norm(v, samples.weights, q, samples.excluded);
}

Real sobolev_seminorm(const MappingSpec& spec, const Domain& domain, Real q,
                      const Scheme& scheme) {
  return sobolev_seminorm(sample_grid(spec, domain, scheme), q);
}

Real adjugate_Lr_norm(const GridSamples& samples, Real r) {
  check_exponent(r, "exponent r");
  const std::vector<Real> v = field_values(
      samples, [](const DifferentialSample& s) { return s.adj_norm; });
  return weighted_lebesgue_norm(v, samples.weights, r, samples.excluded);
}

Real adjugate_Lr_norm(const MappingSpec& spec, const Domain& domain, Real r,
                      const Scheme& scheme) {
  return adjugate_Lr_norm(sample_grid(spec, domain, scheme), r);
}

DistortionReport ball_membership(const MappingSpec& spec, const Domain& domain,
                                 Real q, Real r, const Scheme& scheme) {
  if (std::isnan(q) || q <= 1.0)
    throw ValidationError("exponent q must satisfy q > 1");
  check_exponent(r, "exponent r");

  const GridSamples g = sample_grid(spec, domain, scheme);

  DistortionReport rep;
  rep.q = q;
  rep.r = r;
  rep.grid_n = domain.grid_n;
  rep.dim = domain.dim;
  rep.excluded_cell_count = g.excluded_count;
  rep.K_pq = global_K_pq(g, ExponentPair::make(q, q));
  rep.K_I_qs = global_KI_qs(g, q, 1.0);
  rep.seminorm_L1q = sobolev_seminorm(g, q);
  rep.adj_Lr_norm = adjugate_Lr_norm(g, r);

  std::int64_t considered = 0, positive = 0, negative = 0, degenerate = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.excluded[i]) continue;
    ++considered;
    const DifferentialSample& s = g.samples[i];
    const Real tol = jacobian_zero_tol(s);
    if (s.det > tol) {
      ++positive;
    } else if (s.det < -tol) {
      ++negative;
    } else if (s.op_norm > kZeroMatrixTol) {
      ++degenerate;
    }
  }
  rep.jacobian_sign_fraction =
      considered > 0 ? static_cast<Real>(positive) / considered : 0.0;
  rep.finite_distortion_flag = degenerate == 0 && std::isfinite(rep.K_pq);

  rep.hyp_q_gt_n_minus_1 = q > domain.dim - 1;
  const Real conj = std::isinf(q) ? 1.0 : q / (q - 1.0);
  rep.hyp_r_ge_conjugate = r >= conj;

  const bool norms_finite =
      std::isfinite(rep.seminorm_L1q) && std::isfinite(rep.adj_Lr_norm);
  if (negative == considered && considered > 0) {
    rep.ball_class_verdict = "not_member";
    rep.reason = "J < 0 on all cells";
  } else if (negative > 0 || degenerate > 0 || positive < considered) {
    rep.ball_class_verdict = "not_member";
    rep.reason = "J > 0 fails on " +
                 std::to_string(considered - positive) + " of " +
                 std::to_string(considered) + " sampled cells";
  } else if (!norms_finite) {
    rep.ball_class_verdict = "not_member";
    rep.reason = "seminorm or adjugate norm is not finite on the grid";
  } else if (g.excluded_count > 0) {
    rep.ball_class_verdict = "inconclusive";
    rep.reason = std::to_string(g.excluded_count) +
                 " cells near singular points are excluded; Jacobian sign is "
                 "not certified there (grid evidence only; the Luzin "
                 "N-property is not checked)";
  } else {
    rep.ball_class_verdict = "member";
    rep.reason = "J > 0 and norms finite on all " + std::to_string(considered) +
                 " sampled cells (grid evidence only; the Luzin N-property is "
                 "not checked)";
  }
  return rep;
}

}  // namespace caplab
