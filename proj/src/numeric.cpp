#include "caplab/numeric.hpp"

#include <algorithm>

namespace caplab {

Real pairwise_sum(std::span<const Real> v) {
  if (v.size() <= 16) {
    Real s = 0.0;
    for (Real x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

Real unit_sphere_area(int n) {
  if (n < 2) throw ValidationError("unit_sphere_area: dimension must be >= 2");
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

Real weighted_lebesgue_norm(std::span<const Real> values,
                            std::span<const Real> weights, Real kappa,
                            std::span<const std::uint8_t> mask) {
  if (values.size() != weights.size())
    throw ValidationError("weighted_lebesgue_norm: value/weight size mismatch");
  if (!mask.empty() && mask.size() != values.size())
    throw ValidationError("weighted_lebesgue_norm: mask size mismatch");
  if (!(kappa >= 1.0))
    throw ValidationError("weighted_lebesgue_norm: kappa must be >= 1");

  Real vmax = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask.empty() && mask[i]) continue;
    any = true;
    const Real v = values[i];
    if (std::isnan(v) || v < 0.0)
      throw ValidationError("weighted_lebesgue_norm: negative or NaN value");
    vmax = std::max(vmax, v);
  }
  if (!any) throw ValidationError("weighted_lebesgue_norm: no unmasked cells");
  if (std::isinf(vmax) || std::isinf(kappa) || vmax == 0.0) return vmax;

  std::vector<Real> terms;
  terms.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask.empty() && mask[i]) continue;
    terms.push_back(std::pow(values[i] / vmax, kappa) * weights[i]);
  }
  return vmax * std::pow(pairwise_sum(terms), 1.0 / kappa);
}

}  // namespace caplab
