#pragma once

// Mask drawing helpers and brute-force oracles shared by the unit tests.
// Deliberately independent of the library's own geometry code.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "polarseg/polar_codec.hpp"

namespace testing {

using polarseg::BitMask;

template <typename Pred>
BitMask draw(std::size_t h, std::size_t w, Pred inside) {
  BitMask m(h, w);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      if (inside(static_cast<double>(j) + 0.5, static_cast<double>(i) + 0.5)) m.set(i, j, true);
  return m;
}

inline BitMask disk(std::size_t h, std::size_t w, double cx, double cy, double r) {
  return draw(h, w, [=](double x, double y) { return std::hypot(x - cx, y - cy) <= r; });
}

// Ellipse with semi-axes (a, b) rotated by `angle`.
inline BitMask ellipse(std::size_t h, std::size_t w, double cx, double cy, double a, double b,
                       double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return draw(h, w, [=](double x, double y) {
    const double u = (x - cx) * c + (y - cy) * s, v = -(x - cx) * s + (y - cy) * c;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  });
}

inline BitMask rect(std::size_t h, std::size_t w, long r0, long c0, long r1, long c1) {
  BitMask m(h, w);
  for (long i = r0; i <= r1; ++i)
    for (long j = c0; j <= c1; ++j) m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), true);
  return m;
}

// Distance along the ray from `c` at angle theta to the farthest
// inside->outside transition, sampling at multiples of `step` (no
// refinement). Axis-aligned rays are snapped to the axis.
inline double dense_ray_radius(const BitMask& m, polarseg::Point c, double theta, double step = 0.1) {
  double dx = std::sin(theta), dy = std::cos(theta);
  if (std::abs(dx) < 1e-12) dx = 0.0;
  if (std::abs(dy) < 1e-12) dy = 0.0;
  const double reach = std::hypot(static_cast<double>(m.height()), static_cast<double>(m.width())) * 2.0;
  bool prev = m.at_or_zero(static_cast<long>(std::floor(c.y)), static_cast<long>(std::floor(c.x)));
  double last = -1.0;
  for (long s = 1; s * step <= reach; ++s) {
    const double t = static_cast<double>(s) * step;
    const bool cur = m.at_or_zero(static_cast<long>(std::floor(c.y + t * dy)),
                                  static_cast<long>(std::floor(c.x + t * dx)));
    if (prev && !cur) last = t - 0.5 * step;
    prev = cur;
  }
  return last;
}

// Crossing-number point-in-polygon test.
inline bool point_in_polygon(const std::vector<polarseg::Point>& v, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (((v[i].y > y) != (v[j].y > y)) &&
        (x < (v[j].x - v[i].x) * (y - v[i].y) / (v[j].y - v[i].y) + v[i].x))
      inside = !inside;
  }
  return inside;
}

inline double theta(std::size_t k, std::size_t n) {
  return static_cast<double>(k + 1) * 2.0 * std::numbers::pi / static_cast<double>(n);
}

}  // namespace testing
