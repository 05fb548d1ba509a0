#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "polarseg/error.hpp"
#include "polarseg/image_io.hpp"
#include "polarseg/polar_codec.hpp"
#include "shapes.hpp"

using namespace polarseg;
using testing::dense_ray_radius;

namespace {

bool segments_cross(Point a, Point b, Point c, Point d) {
  auto orient = [](Point p, Point q, Point r) {
    return (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

TEST_CASE("mass_center") {
  SUBCASE("centred square") {
    const auto m = testing::rect(9, 9, 2, 2, 6, 6);
    const auto c = mass_center(m);
    CHECK(c.x == 4.5);
    CHECK(c.y == 4.5);
  }
  SUBCASE("single pixel is its own centre") {
    BitMask m(10, 10);
    m.set(7, 3, true);
    const auto c = mass_center(m);
    CHECK(c.x == 3.5);
    CHECK(c.y == 7.5);
  }
  SUBCASE("L shape matches exhaustive summation") {
    BitMask m(12, 12);
    for (std::size_t i = 2; i < 10; ++i) m.set(i, 2, true), m.set(i, 3, true);
    for (std::size_t j = 2; j < 9; ++j) m.set(8, j, true), m.set(9, j, true);
    double sx = 0, sy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j)
        if (m.at(i, j)) sx += j + 0.5, sy += i + 0.5, ++n;
    const auto c = mass_center(m);
    CHECK(c.x == doctest::Approx(sx / n).epsilon(1e-14));
    CHECK(c.y == doctest::Approx(sy / n).epsilon(1e-14));
  }
  SUBCASE("empty mask") {
    BitMask m(4, 4);
    CHECK_THROWS_AS(mass_center(m), Error);
    CHECK_THROWS_AS(encode(m), Error);
  }
}

TEST_CASE("encode disk and square") {
  SUBCASE("disk radii within 0.75 px of R") {
    for (double R : {6.0, 10.0, 17.0, 25.0}) {
      const auto m = testing::disk(64, 64, 32.0, 32.0, R);
      const auto s = encode(m);
      REQUIRE(s.rays() == 36);
      CHECK(s.center().x == doctest::Approx(32.0));
      for (double r : s.radii()) CHECK(std::abs(r - R) <= 0.75);
    }
  }
  SUBCASE("square: w on axes, w*sqrt2 on diagonals, agrees with dense march") {
    // Pixels 22..41 -> edges at 22 and 42, centroid 32, half-width 10.
    const auto m = testing::rect(64, 64, 22, 22, 41, 41);
    const auto s = encode(m);
    const double w = 10.0;
    for (std::size_t k = 0; k < 36; ++k) {
      const double th = testing::theta(k, 36);
      const double oracle = dense_ray_radius(m, s.center(), th);
      CHECK(std::abs(s.radii()[k] - oracle) <= 1.0);
      if ((k + 1) % 9 == 0) CHECK(std::abs(s.radii()[k] - w) <= 1.0);
    }
    const auto s8 = encode(m, 8);  // 45-degree steps hit the corners exactly
    for (std::size_t k = 0; k < 8; ++k) {
      const double expect = (k % 2 == 0) ? w * std::numbers::sqrt2 : w;
      CHECK(std::abs(s8.radii()[k] - expect) <= 1.0);
    }
  }
  SUBCASE("annulus with centroid in the hole keeps outer crossings") {
    auto m = testing::draw(64, 64, [](double x, double y) {
      const double d = std::hypot(x - 32.0, y - 32.0);
      return d <= 20.0 && d >= 8.0;
    });
    const auto s = encode(m);
    for (std::size_t k = 0; k < 36; ++k) {
      const double oracle = dense_ray_radius(m, s.center(), testing::theta(k, 36));
      CHECK(std::abs(s.radii()[k] - oracle) <= 0.15);
      CHECK(s.radii()[k] > 19.0);
    }
  }
  SUBCASE("rays that never enter the mask get epsilon") {
    // A thin arc whose centroid lies outside it: most rays miss.
    BitMask m(32, 32);
    for (std::size_t j = 4; j < 28; ++j) m.set(4, j, true);
    const auto s = encode_about(m, {16.0, 20.0});
    std::size_t eps = 0;
    for (double r : s.radii()) eps += r == kMinRadius;
    CHECK(eps > 18);
  }
  SUBCASE("too few rays") { CHECK_THROWS_AS(encode(testing::disk(16, 16, 8, 8, 4), 2), Error); }
}

TEST_CASE("decode") {
  SUBCASE("epsilon radii collapse to the centre") {
    const PolarShape s({5.0, 6.0}, std::vector<double>(36, kMinRadius));
    for (const auto& v : decode(s).vertices) {
      CHECK(std::abs(v.x - 5.0) <= kMinRadius);
      CHECK(std::abs(v.y - 6.0) <= kMinRadius);
    }
  }
  SUBCASE("ray 9 at pi/2 moves along +x") {
    std::vector<double> r(36, 1.0);
    r[8] = 16.0;
    const auto p = decode(PolarShape({10.0, 10.0}, r));
    CHECK(p.vertices[8].x == doctest::Approx(26.0));
    CHECK(p.vertices[8].y == doctest::Approx(10.0));
  }
  SUBCASE("encoded disk decodes onto the circle") {
    const auto p = decode(encode(testing::disk(64, 64, 32, 32, 15)));
    for (const auto& v : p.vertices) CHECK(std::abs(std::hypot(v.x - 32, v.y - 32) - 15.0) <= 1.0);
  }
  SUBCASE("non-positive radius rejected") {
    CHECK_THROWS_AS(PolarShape({0, 0}, std::vector<double>(36, 0.0)), Error);
  }
}

TEST_CASE("rasterize") {
  SUBCASE("triangle matches per-pixel oracle") {
    Polygon tri{{{0, 0}, {0, 4}, {4, 0}}};
    const auto m = rasterize(tri, 8, 8);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        CHECK(m.at(i, j) == testing::point_in_polygon(tri.vertices, j + 0.5, i + 0.5));
    CHECK(std::abs(static_cast<double>(m.count()) - 8.0) <= 2.0);
  }
  SUBCASE("outside the image") {
    Polygon p{{{-20, -20}, {-10, -20}, {-10, -10}}};
    CHECK(rasterize(p, 8, 8).count() == 0);
  }
  SUBCASE("round trip of a disk") {
    for (double R : {10.0, 14.0, 22.0}) {
      const auto m = testing::disk(64, 64, 32, 32, R);
      const auto back = rasterize(decode(encode(m)), 64, 64);
      CHECK(mask_iou(m, back) >= 0.93);
    }
  }
}

TEST_CASE("mask_iou") {
  const auto a = testing::rect(16, 16, 0, 0, 7, 7);
  const auto b = testing::rect(16, 16, 2, 2, 5, 5);
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(a, testing::rect(16, 16, 8, 8, 15, 15)) == 0.0);
  CHECK(mask_iou(a, b) == doctest::Approx(0.25));
  CHECK(mask_iou(BitMask(3, 3), BitMask(3, 3)) == 1.0);
  CHECK_THROWS_AS(mask_iou(a, BitMask(8, 16)), Error);
}

TEST_CASE("codec properties") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);

  SUBCASE("ellipse round trip IoU >= 0.90") {
    for (int seed = 0; seed < 100; ++seed) {
      const double minor = 10.0 + 6.0 * U(rng);
      const double major = minor * (1.0 + 2.0 * U(rng));
      const double ang = std::numbers::pi * U(rng);
      const auto m = testing::ellipse(96, 96, 48 + 4 * U(rng), 48 + 4 * U(rng), major, minor, ang);
      const auto back = rasterize(decode(encode(m)), 96, 96);
      CHECK(mask_iou(m, back) >= 0.90);
    }
  }
  SUBCASE("decoded polygons are simple with increasing angles") {
    for (int t = 0; t < 30; ++t) {
      std::vector<double> r(36);
      for (auto& v : r) v = 1.0 + 20.0 * U(rng);
      const PolarShape s({32, 32}, r);
      const auto v = decode(s).vertices;
      double prev = -1.0;
      for (std::size_t k = 0; k < v.size(); ++k) {
        // Angle measured the same way the rays are laid out (from +y toward +x).
        double a = std::atan2(v[k].x - 32.0, v[k].y - 32.0);
        if (a <= 0) a += 2 * std::numbers::pi;
        CHECK(a > prev);
        prev = a;
      }
      for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 2; j < v.size(); ++j) {
          if (i == 0 && j == v.size() - 1) continue;
          CHECK_FALSE(segments_cross(v[i], v[(i + 1) % v.size()], v[j], v[(j + 1) % v.size()]));
        }
    }
  }
  SUBCASE("integer translation shifts the centre and keeps radii") {
    for (int t = 0; t < 20; ++t) {
      const double cx = 20 + 5 * U(rng), cy = 20 + 5 * U(rng);
      const auto m = testing::ellipse(64, 64, cx, cy, 8 + 6 * U(rng), 6 + 3 * U(rng), U(rng) * 3);
      const long dx = 1 + static_cast<long>(U(rng) * 10), dy = 1 + static_cast<long>(U(rng) * 10);
      BitMask shifted(64, 64);
      for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j)
          if (m.at(i, j)) shifted.set(i + dy, j + dx, true);
      const auto a = encode(m), b = encode(shifted);
      CHECK(b.center().x == doctest::Approx(a.center().x + dx).epsilon(1e-14));
      CHECK(b.center().y == doctest::Approx(a.center().y + dy).epsilon(1e-14));
      CHECK(a.radii() == b.radii());
    }
  }
  SUBCASE("rasterize agrees with point-in-polygon on every pixel") {
    for (int t = 0; t < 50; ++t) {
      std::vector<double> r(36);
      for (auto& v : r) v = 0.5 + 25.0 * U(rng);
      const auto poly = decode(PolarShape({10 + 40 * U(rng), 10 + 40 * U(rng)}, r));
      const auto m = rasterize(poly, 48, 56);
      for (std::size_t i = 0; i < 48; ++i)
        for (std::size_t j = 0; j < 56; ++j)
          REQUIRE(m.at(i, j) == testing::point_in_polygon(poly.vertices, j + 0.5, i + 0.5));
    }
  }
}

TEST_CASE("serialisation") {
  SUBCASE("polar shape json line") {
    const auto s = encode(testing::disk(32, 32, 16, 16, 7));
    const auto back = polar_shape_from_json(to_json_line(s));
    CHECK(back.center().x == s.center().x);
    CHECK(back.radii() == s.radii());
    CHECK_THROWS_AS(polar_shape_from_json("{\"cx\":1}"), Error);
  }
  SUBCASE("mask pgm") {
    const auto path = std::filesystem::temp_directory_path() / "polarseg_mask_test.pgm";
    const auto m = testing::disk(13, 21, 10, 6, 4);
    write_mask_pgm(path, m);
    CHECK(read_mask_pgm(path) == m);
    std::filesystem::remove(path);
  }
}
