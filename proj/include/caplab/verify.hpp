#pragma once

#include "caplab/capacity.hpp"
#include "caplab/distortion.hpp"
#include "caplab/test_functions.hpp"

namespace caplab {

// Outcome of one identity or inequality check. For inequalities slack is
// rhs - lhs; for identities it is the relative residual. A verdict is
// vacuous when the right-hand side is infinite: it passes formally but
// carries no evidence and is reported distinctly.
struct VerificationVerdict {
  std::string name;
  Real lhs = 0.0;
  Real rhs = 0.0;
  Real slack = 0.0;
  Real tolerance_used = 0.0;
  bool passed = false;
  bool vacuous = false;
  bool identity = false;
  std::vector<std::pair<std::string, std::string>> metadata;
};

// Inequalities pass when lhs <= rhs * (1 + tol); 5% absorbs the two-grid
// discretization error of the built-in suite.
inline constexpr Real kInequalityTol = 0.05;

// Identity tolerance: 1e-6 when both sides reduce to constant integrands
// (constant-Jacobian mappings), otherwise resolution-scaled.
Real identity_tol(const MappingSpec& spec, int grid_n);

// Compares the global inner distortion computed on the source grid against
// the equivalent image-side integral of the inverse differential.
VerificationVerdict transfer_identity_residual(const MappingSpec& spec,
                                               const Domain& domain,
                                               const Domain& image_domain,
                                               Real q, Real s,
                                               const Scheme& scheme,
                                               Real tol_override = 0.0);

// Mass balance: source-side integral of f(phi(x)) |J| over the cells of
// `set` against the image-grid integral of f over the rasterized image of
// `set`. f must be nonnegative.
VerificationVerdict change_of_variables_residual(
    const MappingSpec& spec, const Domain& domain,
    const std::function<Real(const Vector&)>& f, const std::string& f_name,
    const CellMask& set, const Scheme& scheme, Real tol_override = 0.0);

// Capacity transport: cp_s^{1/s} of the pushed condenser against
// K^I_{q,s} * cp_q^{1/q} of the source condenser. When same_exponent is set
// the check instead bounds the source capacity by K_{q,q} times the image
// capacity at the single exponent q (s must equal q).
VerificationVerdict capacity_distortion_check(
    const MappingSpec& spec, const Condenser& condenser,
    const Domain& image_domain, Real q, Real s, const SolverConfig& solver,
    const Scheme& scheme, bool same_exponent = false, Real tol_override = 0.0);

// Two-sided gradient-energy bounds for each family member f:
//   K^I_{q,s}^{-1} ||f||_{1,s;image}  <=  ||f o phi||_{1,q;source}
//   ||f o phi||_{1,q;source}          <=  |phi|_{1,q} * sup|grad f|.
// Composite gradients use the chain rule with the closed-form grad f.
std::vector<VerificationVerdict> energy_bounds_check(
    const MappingSpec& spec, const Domain& domain, const Domain& image_domain,
    Real q, Real s, const FamilySpec& family, const Scheme& scheme,
    Real tol_override = 0.0);

// Empirical operator-norm witness: the best ratio
// ||f o phi||_{1,q;source} / ||f||_{1,p;image} over the family must not
// exceed the global distortion bound K_{p,q}.
VerificationVerdict operator_norm_lower_bound(
    const MappingSpec& spec, const Domain& domain, const Domain& image_domain,
    Real p, Real q, const FamilySpec& family, const Scheme& scheme,
    Real tol_override = 0.0);

}  // namespace caplab
