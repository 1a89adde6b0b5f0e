#include "caplab/numeric.hpp"

#include <doctest.h>

#include <numeric>

using namespace caplab;

TEST_CASE("pairwise_sum matches extended-precision accumulation") {
  std::vector<Real> v(10001);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = std::sin(0.1 * static_cast<Real>(i)) * 1e-3 + 1.0;
  long double exact = 0.0L;
  for (const Real x : v) exact += x;
  const Real got = pairwise_sum(v);
  CHECK(std::abs(got - static_cast<Real>(exact)) <
        1e-12 * static_cast<Real>(exact));
}

TEST_CASE("pairwise_sum is invariant under recomputation") {
  std::vector<Real> v(777);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 1.0 / static_cast<Real>(i + 1);
  CHECK(pairwise_sum(v) == pairwise_sum(v));
  CHECK(pairwise_sum(std::span<const Real>{}) == 0.0);
}

TEST_CASE("unit sphere areas") {
  CHECK(unit_sphere_area(2) == doctest::Approx(2.0 * kPi).epsilon(1e-14));
  CHECK(unit_sphere_area(3) == doctest::Approx(4.0 * kPi).epsilon(1e-14));
  CHECK(unit_sphere_area(4) ==
        doctest::Approx(2.0 * kPi * kPi).epsilon(1e-14));
}

TEST_CASE("weighted norm: finite exponents") {
  const std::vector<Real> v{1.0, 2.0, 3.0};
  const std::vector<Real> w{0.5, 0.25, 0.25};
  CHECK(weighted_lebesgue_norm(v, w, 1.0) ==
        doctest::Approx(0.5 + 0.5 + 0.75).epsilon(1e-15));
  CHECK(weighted_lebesgue_norm(v, w, 2.0) ==
        doctest::Approx(std::sqrt(0.5 + 1.0 + 2.25)).epsilon(1e-15));
}

TEST_CASE("weighted norm: sup exponent and masks") {
  const std::vector<Real> v{1.0, 5.0, 2.0};
  const std::vector<Real> w{1.0, 1.0, 1.0};
  CHECK(weighted_lebesgue_norm(v, w, kInf) == 5.0);
  const std::vector<std::uint8_t> mask{0, 1, 0};
  CHECK(weighted_lebesgue_norm(v, w, kInf, mask) == 2.0);
}

TEST_CASE("weighted norm: scaling guard for huge values and exponents") {
  const std::vector<Real> v{1e200, 5e199};
  const std::vector<Real> w{1.0, 1.0};
  const Real got = weighted_lebesgue_norm(v, w, 50.0);
  CHECK(std::isfinite(got));
  CHECK(got >= 1e200);  // at least the dominant value
  CHECK(got <= 1e200 * 1.1);
}

TEST_CASE("weighted norm: infinity propagates, validation rejects") {
  const std::vector<Real> v{1.0, kInf};
  const std::vector<Real> w{1.0, 1.0};
  CHECK(std::isinf(weighted_lebesgue_norm(v, w, 2.0)));
  const std::vector<Real> bad{-1.0};
  const std::vector<Real> w1{1.0};
  CHECK_THROWS_AS(weighted_lebesgue_norm(bad, w1, 2.0), ValidationError);
  CHECK_THROWS_AS(weighted_lebesgue_norm(v, w1, 2.0), ValidationError);
  CHECK_THROWS_AS(weighted_lebesgue_norm(w1, w1, 0.5), ValidationError);
  const std::vector<std::uint8_t> all_masked{1};
  CHECK_THROWS_AS(weighted_lebesgue_norm(w1, w1, 2.0, all_masked),
                  ValidationError);
}
