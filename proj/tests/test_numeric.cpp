#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "bsamp/numeric.hpp"
#include "bsamp/rng.hpp"

using namespace bsamp;

TEST_CASE("totient small values") {
  CHECK(totient(1) == 1);
  CHECK(totient(2) == 1);
  CHECK(totient(3) == 2);
  CHECK(totient(4) == 2);
  CHECK(totient(6) == 2);
  CHECK(totient(12) == 4);
  CHECK(totient(97) == 96);
}

TEST_CASE("divisors") {
  CHECK(divisors(1) == std::vector<std::uint64_t>{1});
  CHECK(divisors(12) == std::vector<std::uint64_t>({1, 2, 3, 4, 6, 12}));
  CHECK(divisors(49) == std::vector<std::uint64_t>({1, 7, 49}));
}

TEST_CASE("partition sequences") {
  // p(k) for k = 0..8: 1 1 2 3 5 7 11 15 22
  const int expected[] = {1, 1, 2, 3, 5, 7, 11, 15, 22};
  for (int k = 0; k <= 8; ++k) {
    auto parts = partition_sequences(k);
    CHECK(parts.size() == static_cast<std::size_t>(expected[k]));
    for (const auto& p : parts) {
      int total = 0;
      for (std::size_t i = 0; i < p.size(); ++i)
        total += static_cast<int>(i + 1) * p[i];
      CHECK(total == k);
    }
  }
}

TEST_CASE("quadrature on closed forms") {
  const double third =
      integrate([](double x) { return x * x; }, 0.0, 1.0, 1e-13);
  CHECK(std::abs(third - 1.0 / 3.0) < 1e-12);
  const double two =
      integrate([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-13);
  CHECK(std::abs(two - 2.0) < 1e-11);
  // arctan integral used by increasing binary trees
  const double atanv = integrate(
      [](double t) { return 1.0 / (1.0 + t * t); }, 0.0, 1.0, 1e-13);
  CHECK(std::abs(atanv - M_PI / 4.0) < 1e-12);
}

TEST_CASE("chi-square survival function") {
  CHECK(chi2_sf(0.0, 5) == doctest::Approx(1.0));
  // classic critical values
  CHECK(chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(chi2_sf(11.070497693516351, 5) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(chi2_sf(2.0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("golden section") {
  auto [x, f] = golden_section_min(
      [](double v) { return (v - 2.0) * (v - 2.0) + 1.0; }, 0.0, 5.0, 1e-9);
  CHECK(std::abs(x - 2.0) < 1e-7);
  CHECK(std::abs(f - 1.0) < 1e-12);
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(42, 0), b(42, 0), c(42, 1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    seen.insert(va);
  }
  CHECK(seen.size() == 1000);
  int same = 0;
  Rng a2(42, 0);
  for (int i = 0; i < 1000; ++i)
    if (a2.next_u64() == c.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("rng uniform range and mean") {
  Rng r(7, 3);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 100000 - 0.5) < 0.005);
}
