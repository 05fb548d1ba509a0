#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <random>

#include "boundary_oracle.hpp"
#include "polarseg/boundary_targets.hpp"
#include "polarseg/error.hpp"
#include "shapes.hpp"

using namespace polarseg;
using testing::as_set;
using testing::no_nested_components;
using testing::oracle_border;
using testing::random_blobs;

TEST_CASE("border following on simple shapes") {
  SUBCASE("single pixel") {
    BitMask m(5, 5);
    m.set(2, 3, true);
    const auto c = trace_outer_borders(m);
    REQUIRE(c.size() == 1);
    REQUIRE(c[0].size() == 1);
    CHECK(c[0][0] == Pixel{2, 3});
  }
  SUBCASE("4x4 block has 12 perimeter pixels") {
    const auto m = testing::rect(10, 10, 3, 3, 6, 6);
    const auto b = extract_boundaries({m});
    CHECK(b.point_count() == 12);
    CHECK(as_set(b.instances[0].contours) == oracle_border(m));
  }
  SUBCASE("block touching the image edge") {
    const auto m = testing::rect(6, 6, 0, 0, 5, 2);
    CHECK(as_set(trace_outer_borders(m)) == oracle_border(m));
  }
  SUBCASE("ring: hole border is not returned") {
    auto m = testing::rect(12, 12, 2, 2, 9, 9);
    for (std::size_t i = 4; i <= 7; ++i)
      for (std::size_t j = 4; j <= 7; ++j) m.set(i, j, false);
    const auto c = trace_outer_borders(m);
    REQUIRE(c.size() == 1);
    CHECK(as_set(c).size() == 28);
    CHECK(as_set(c) == oracle_border(m));
  }
  SUBCASE("two components in one mask") {
    auto m = testing::rect(12, 12, 1, 1, 3, 3);
    m.set(8, 8, true);
    m.set(9, 9, true);  // diagonal neighbours form one 8-connected piece
    CHECK(trace_outer_borders(m).size() == 2);
  }
  SUBCASE("two instances") {
    const auto a = testing::rect(16, 16, 1, 1, 4, 4);
    const auto b = testing::disk(16, 16, 11, 11, 3);
    const auto set = extract_boundaries({a, b});
    REQUIRE(set.instance_count() == 2);
    CHECK(as_set(set.instances[0].contours) == oracle_border(a));
    CHECK(as_set(set.instances[1].contours) == oracle_border(b));
  }
}

TEST_CASE("boundary extraction errors") {
  CHECK_THROWS_AS(extract_boundaries({BitMask(4, 4)}), Error);
  CHECK_THROWS_AS(extract_boundaries({testing::rect(4, 4, 0, 0, 1, 1), testing::rect(5, 4, 0, 0, 1, 1)}),
                  Error);
  try {
    build_boundary_mask({}, 0, 8, 8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StrideInvalid);
  }
}

TEST_CASE("boundary mask downsampling") {
  SUBCASE("(17, 9) at stride 8 lands in cell (2, 1)") {
    BoundaryPointSet s;
    s.instances.push_back({{{Pixel{17, 9}}}});
    const auto m = build_boundary_mask(s, 8, 20, 30);
    CHECK(m.height() == 3);
    CHECK(m.width() == 4);
    CHECK(m.count() == 1);
    CHECK(m.at(2, 1));
  }
  SUBCASE("stride 1 reproduces the traced pixels") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
      const auto a = random_blobs(rng, 24, 20);
      const auto set = extract_boundaries({a});
      const auto m = build_boundary_mask(set, 1, 24, 20);
      const auto pts = as_set(set.instances[0].contours);
      for (long i = 0; i < 24; ++i)
        for (long j = 0; j < 20; ++j) CHECK(m.at_or_zero(i, j) == (pts.count({i, j}) > 0));
    }
  }
  SUBCASE("matches the set-comprehension definition") {
    std::mt19937_64 rng(11);
    for (std::size_t s : {2u, 3u, 5u, 8u}) {
      const auto a = random_blobs(rng, 29, 37), b = random_blobs(rng, 29, 37);
      const auto set = extract_boundaries({a, b});
      std::set<std::pair<long, long>> cells;
      for (const auto& inst : set.instances)
        for (auto [r, c] : as_set(inst.contours)) cells.insert({r / long(s), c / long(s)});
      const auto m = build_boundary_mask(set, s, 29, 37);
      CHECK(m.height() == (29 + s - 1) / s);
      CHECK(m.width() == (37 + s - 1) / s);
      CHECK(m.count() == cells.size());
      for (auto [r, c] : cells) CHECK(m.at(r, c));
    }
  }
}

TEST_CASE("boundary properties on random masks") {
  std::mt19937_64 rng(2024);
  int tested = 0;
  for (int t = 0; t < 200 && tested < 60; ++t) {
    const auto m = random_blobs(rng, 32, 32);
    if (!no_nested_components(m)) continue;
    ++tested;
    const auto contours = trace_outer_borders(m);
    CHECK(as_set(contours) == oracle_border(m));
    for (const auto& c : contours) {
      for (std::size_t k = 0; k < c.size(); ++k) {
        const auto& p = c[k];
        const auto& q = c[(k + 1) % c.size()];
        CHECK(m.at(p.row, p.col));
        CHECK(std::max(std::labs(p.row - q.row), std::labs(p.col - q.col)) <= 1);
      }
    }
  }
  CHECK(tested >= 30);

  SUBCASE("instance order does not change the per-instance result") {
    std::mt19937_64 r2(5);
    const auto a = random_blobs(r2, 32, 32), b = random_blobs(r2, 32, 32), c = random_blobs(r2, 32, 32);
    const auto abc = extract_boundaries({a, b, c}), cab = extract_boundaries({c, a, b});
    CHECK(abc.instances[0].contours == cab.instances[1].contours);
    CHECK(abc.instances[1].contours == cab.instances[2].contours);
    CHECK(abc.instances[2].contours == cab.instances[0].contours);
    CHECK(build_boundary_mask(abc, 4, 32, 32) == build_boundary_mask(cab, 4, 32, 32));
  }
}
