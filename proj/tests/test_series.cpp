#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsamp/numeric.hpp"
#include "bsamp/series.hpp"
#include "helpers.hpp"

using namespace bsamp;
using bsamp::testing::parse_or_die;

TEST_CASE("binary tree counts (Catalan at odd sizes)") {
  auto spec = bsamp::testing::binary_trees();
  TruncatedSeries s = truncated_series(spec, "B", 9);
  auto by = s.by_total_size();
  CHECK(by[0] == 0);
  CHECK(by[1] == 1);
  CHECK(by[2] == 0);
  CHECK(by[3] == 1);
  CHECK(by[5] == 2);
  CHECK(by[7] == 5);
  CHECK(by[9] == 14);
}

TEST_CASE("Motzkin numbers") {
  auto spec = bsamp::testing::motzkin();
  auto by = truncated_series(spec, "M", 6).by_total_size();
  CHECK(by[1] == 1);
  CHECK(by[2] == 1);
  CHECK(by[3] == 2);
  CHECK(by[4] == 4);
  CHECK(by[5] == 9);
  CHECK(by[6] == 21);
}

TEST_CASE("neutral class series") {
  auto spec = parse_or_die("C = 1\ntarget C size 1\n");
  TruncatedSeries s = truncated_series(spec, "C", 4);
  CHECK(s.constant_term() == 1.0);
  auto by = s.by_total_size();
  for (int i = 1; i <= 4; ++i) CHECK(by[i] == 0);
}

TEST_CASE("Seq(Z) is the all-ones sequence") {
  auto spec = parse_or_die("F = Seq(Z)\ntarget F size 10\n");
  auto by = truncated_series(spec, "F", 8).by_total_size();
  for (int i = 0; i <= 8; ++i) CHECK(by[i] == doctest::Approx(1.0));
}

TEST_CASE("rooted unlabelled trees (A000081)") {
  auto spec = bsamp::testing::unlabelled_trees();
  auto by = truncated_series(spec, "T", 10).by_total_size();
  const double expected[] = {0, 1, 1, 2, 4, 9, 20, 48, 115, 286, 719};
  for (int i = 1; i <= 10; ++i)
    CHECK_MESSAGE(by[i] == doctest::Approx(expected[i]), "size ", i);
}

TEST_CASE("binary necklaces via restricted cycle") {
  auto spec = parse_or_die(
      "atom a size 1\natom b size 1\nC = Cyc[=4](a + b)\ntarget C size 4\n");
  auto by = truncated_series(spec, "C", 4).by_total_size();
  // binary necklaces of length 4: 0000 0001 0011 0101 0111 1111
  CHECK(by[4] == doctest::Approx(6.0));
}

TEST_CASE("unrestricted unlabelled cycles count necklaces by length") {
  auto spec = parse_or_die(
      "atom a size 1\natom b size 1\nC = Cyc(a + b)\ntarget C size 6\n");
  auto by = truncated_series(spec, "C", 6).by_total_size();
  const double necklaces[] = {0, 2, 3, 4, 6, 8, 14};
  for (int i = 1; i <= 6; ++i) CHECK(by[i] == doctest::Approx(necklaces[i]));
}

TEST_CASE("labelled Set(Z) is e^z") {
  auto spec = parse_or_die("labelled\nC = Set(Z)\ntarget C size 8\n");
  auto by = truncated_series(spec, "C", 8).by_total_size();
  for (int n = 0; n <= 8; ++n)
    CHECK(by[n] == doctest::Approx(1.0 / factorial(n)));
}

TEST_CASE("labelled Cycle(Z) EGF is log 1/(1-z)") {
  auto spec = parse_or_die("labelled\nC = Cyc(Z)\ntarget C size 8\n");
  auto by = truncated_series(spec, "C", 8).by_total_size();
  CHECK(by[0] == 0);
  for (int n = 1; n <= 8; ++n) CHECK(by[n] == doctest::Approx(1.0 / n));
}

TEST_CASE("set partitions: labelled Set of non-empty sets (Bell EGF)") {
  auto spec =
      parse_or_die("labelled\nP = Set(Set[>=1](Z))\ntarget P size 7\n");
  auto by = truncated_series(spec, "P", 7).by_total_size();
  const double bell[] = {1, 1, 2, 5, 15, 52, 203, 877};
  for (int n = 0; n <= 7; ++n)
    CHECK(by[n] == doctest::Approx(bell[n] / factorial(n)));
}

TEST_CASE("integer partitions via MSet of Seq>=1") {
  auto spec = parse_or_die("P = MSet(Seq[>=1](Z))\ntarget P size 10\n");
  auto by = truncated_series(spec, "P", 10).by_total_size();
  const double parts[] = {1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42};
  for (int n = 0; n <= 10; ++n) CHECK(by[n] == doctest::Approx(parts[n]));
}

TEST_CASE("MSet[=2] matches the Otter construction") {
  // unordered pairs of rooted plane trees
  auto pair_spec = parse_or_die(
      "T = Z + Z*T^2\nP = MSet[=2](T)\ntarget P size 8\n");
  auto by = truncated_series(pair_spec, "P", 8).by_total_size();
  // (T(z)^2 + T(z^2))/2 computed from Catalan numbers by hand:
  // T = z + z^3 + 2 z^5 + 5 z^7; T^2 = z^2 + 2 z^4 + 5 z^6 + 14 z^8;
  // T(z^2) = z^2 + z^6; P = z^2 + z^4 + 3 z^6 + 7 z^8
  CHECK(by[2] == doctest::Approx(1));
  CHECK(by[4] == doctest::Approx(1));
  CHECK(by[6] == doctest::Approx(3));
  CHECK(by[8] == doctest::Approx(7));
}

TEST_CASE("boltzmann pmf from series") {
  auto spec = bsamp::testing::binary_trees();
  TruncatedSeries s = truncated_series(spec, "B", 13);
  // closed form B(0.25) = (1 - sqrt(1 - 4 z^2)) / (2 z) at z = 0.25
  const double b = (1.0 - std::sqrt(1.0 - 4 * 0.25 * 0.25)) / (2 * 0.25);
  const double p1 = boltzmann_pmf(s, {0.25}, 1, b);
  CHECK(p1 == doctest::Approx(0.25 / b).epsilon(1e-12));
  // degenerate C = Z
  auto cz = parse_or_die("C = Z\ntarget C size 1\n");
  TruncatedSeries sz = truncated_series(cz, "C", 4);
  CHECK(boltzmann_pmf(sz, {0.5}, 1) == doctest::Approx(1.0));
  // Seq(Z) at 1/2: P(k) = 0.5^{k+1}
  auto seq = parse_or_die("F = Seq(Z)\ntarget F size 10\n");
  TruncatedSeries sq = truncated_series(seq, "F", 40);
  for (int k = 0; k <= 10; ++k)
    CHECK(boltzmann_pmf(sq, {0.5}, k, 2.0) ==
          doctest::Approx(std::pow(0.5, k + 1)).epsilon(1e-9));
}

TEST_CASE("oracle matches evaluator monotonically in max size") {
  auto spec = bsamp::testing::binary_trees();
  TruncatedSeries s8 = truncated_series(spec, "B", 8);
  TruncatedSeries s16 = truncated_series(spec, "B", 16);
  const double v8 = s8.eval({0.2});
  const double v16 = s16.eval({0.2});
  const double exact = (1.0 - std::sqrt(1.0 - 4 * 0.04)) / 0.4;
  CHECK(v8 <= v16 + 1e-15);
  CHECK(v16 <= exact + 1e-12);
  CHECK(exact - v16 < 1e-6);
}
