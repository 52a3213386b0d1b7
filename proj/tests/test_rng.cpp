#include <catch2/catch_amalgamated.hpp>

#include "twinbeam/rng.hpp"

using namespace twinbeam;
using Catch::Approx;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Published Random123 test vectors (counter c0..c3, key k0,k1).
  {
    Philox4x32 g(0, 0);
    auto b = g.block(0);
    CHECK(b[0] == 0x6627e8d5u);
    CHECK(b[1] == 0xe169c58du);
    CHECK(b[2] == 0xbc57ac4cu);
    CHECK(b[3] == 0x9b00dbd8u);
  }
  {
    Philox4x32 g(0xffffffffffffffffull, 0xffffffffffffffffull);
    auto b = g.block(0xffffffffffffffffull);
    CHECK(b[0] == 0x408f276du);
    CHECK(b[1] == 0x41c83b0eu);
    CHECK(b[2] == 0xa20bc7c6u);
    CHECK(b[3] == 0x6d5451fdu);
  }
  {
    // c = {243f6a88, 85a308d3, 13198a2e, 03707344}, k = {a4093822, 299f31d0}
    Philox4x32 g(0x299f31d0a4093822ull, 0x0370734413198a2eull);
    auto b = g.block(0x85a308d3243f6a88ull);
    CHECK(b[0] == 0xd16cfe09u);
    CHECK(b[1] == 0x94fdccebu);
    CHECK(b[2] == 0x5001e420u);
    CHECK(b[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are bit-identical for identical (seed, index)") {
  RandomStream a(123456789, 42), b(123456789, 42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.uniform() == b.uniform());
}

TEST_CASE("distinct trajectory indices give distinct streams") {
  RandomStream a(123456789, 42), b(123456789, 43);
  int same = 0;
  for (int i = 0; i < 1000; ++i)
    if (a.uniform() == b.uniform()) ++same;
  CHECK(same == 0);
}

TEST_CASE("gaussian_pair moments: zero mean, variance 1/2 per quadrature") {
  RandomStream s(2024, 0);
  const int n = 200000;
  double sr = 0, si = 0, vr = 0, vi = 0, cross = 0;
  for (int i = 0; i < n; ++i) {
    cplx z = s.gaussian_pair();
    sr += z.real();
    si += z.imag();
    vr += z.real() * z.real();
    vi += z.imag() * z.imag();
    cross += z.real() * z.imag();
  }
  // std err of the mean: sqrt(0.5/n) ~ 0.0016
  CHECK(std::abs(sr / n) < 4 * std::sqrt(0.5 / n));
  CHECK(std::abs(si / n) < 4 * std::sqrt(0.5 / n));
  CHECK(vr / n == Approx(0.5).epsilon(0.02));
  CHECK(vi / n == Approx(0.5).epsilon(0.02));
  CHECK(std::abs(cross / n) < 4 * std::sqrt(0.25 / n));
}

TEST_CASE("uniform stays in (0, 1]") {
  RandomStream s(7, 7);
  for (int i = 0; i < 10000; ++i) {
    double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}
