#pragma once

#include "caplab/mapping.hpp"

namespace caplab {

// Exponent pair with 1 <= q <= p <= inf. The interpolation exponent kappa
// satisfies 1/kappa = 1/q - 1/p, with kappa = inf when p == q and kappa = q
// when p == inf.
struct ExponentPair {
  Real p = 2.0;
  Real q = 2.0;

  static ExponentPair make(Real p, Real q);
  Real kappa() const;
};

// Jacobian zero threshold, scaled so that near-degenerate differentials of
// large norm are still classified as degenerate.
Real jacobian_zero_tol(const DifferentialSample& s);

// Outer distortion at a point: |Dphi| / |J|^{1/p}; 0 when the differential
// vanishes with J, +inf when J = 0 but Dphi != 0.
Real pointwise_Kp(const DifferentialSample& s, Real p);

// Inner distortion at a point: |J|^{1/s} / l(Dphi) when J != 0, else 0.
Real pointwise_KI_s(const DifferentialSample& s, Real s_exp);

Real global_K_pq(const GridSamples& samples, const ExponentPair& pair);
Real global_K_pq(const MappingSpec& spec, const Domain& domain,
                 const ExponentPair& pair, const Scheme& scheme);

Real global_KI_qs(const GridSamples& samples, Real q, Real s);
Real global_KI_qs(const MappingSpec& spec, const Domain& domain, Real q, Real s,
                  const Scheme& scheme);

// L_q norm of |Dphi| over the domain: the seminorm of phi as a Sobolev map.
Real sobolev_seminorm(const GridSamples& samples, Real q);
Real sobolev_seminorm(const MappingSpec& spec, const Domain& domain, Real q,
                      const Scheme& scheme);

Real adjugate_Lr_norm(const GridSamples& samples, Real r);
Real adjugate_Lr_norm(const MappingSpec& spec, const Domain& domain, Real r,
                      const Scheme& scheme);

struct DistortionReport {
  Real K_pq = 0.0;
  Real K_I_qs = 0.0;
  Real seminorm_L1q = 0.0;
  Real adj_Lr_norm = 0.0;
  Real jacobian_sign_fraction = 0.0;
  bool finite_distortion_flag = false;
  std::string ball_class_verdict;  // member | not_member | inconclusive
  std::string reason;
  bool hyp_q_gt_n_minus_1 = false;
  bool hyp_r_ge_conjugate = false;
  std::int64_t excluded_cell_count = 0;
  Real q = 0.0, r = 0.0;
  int grid_n = 0;
  int dim = 0;
};

// Grid evidence for membership in the ball class with integrability exponents
// (q, r): positive Jacobian sign on every sampled cell plus finite seminorm
// and adjugate norms. Exclusion zones downgrade the verdict to inconclusive.
DistortionReport ball_membership(const MappingSpec& spec, const Domain& domain,
                                 Real q, Real r, const Scheme& scheme);

}  // namespace caplab
