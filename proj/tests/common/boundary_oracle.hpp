#pragma once

// Brute-force boundary oracles shared by the unit tests and the acceptance run.

#include <cstdint>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "polarseg/boundary_targets.hpp"
#include "shapes.hpp"

namespace testing {

using polarseg::BitMask;
using polarseg::Contour;

using PixelSet = std::set<std::pair<long, long>>;

// Background pixels 4-connected to the area outside the image.
inline std::vector<std::uint8_t> exterior(const BitMask& m) {
  const long H = static_cast<long>(m.height()) + 2, W = static_cast<long>(m.width()) + 2;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(H * W), 0);
  std::queue<std::pair<long, long>> q;
  q.push({0, 0});
  seen[0] = 1;
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop();
    const long dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const long rr = r + dr[d], cc = c + dc[d];
      if (rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
      if (seen[rr * W + cc] || m.at_or_zero(rr - 1, cc - 1)) continue;
      seen[rr * W + cc] = 1;
      q.push({rr, cc});
    }
  }
  return seen;
}

// Foreground pixels with a 4-neighbour in the exterior background.
inline PixelSet oracle_border(const BitMask& m) {
  const auto ext = exterior(m);
  const long W = static_cast<long>(m.width()) + 2;
  PixelSet out;
  for (long i = 0; i < static_cast<long>(m.height()); ++i)
    for (long j = 0; j < static_cast<long>(m.width()); ++j) {
      if (!m.at_or_zero(i, j)) continue;
      const long dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d)
        if (ext[(i + 1 + dr[d]) * W + (j + 1 + dc[d])]) {
          out.insert({i, j});
          break;
        }
    }
  return out;
}

// True when every 8-connected component touches the exterior background,
// i.e. no component sits inside another's hole.
inline bool no_nested_components(const BitMask& m) {
  const auto border = oracle_border(m);
  const long H = static_cast<long>(m.height()), W = static_cast<long>(m.width());
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(H * W), 0);
  for (long i = 0; i < H; ++i)
    for (long j = 0; j < W; ++j) {
      if (!m.at_or_zero(i, j) || seen[i * W + j]) continue;
      bool touches = false;
      std::queue<std::pair<long, long>> q;
      q.push({i, j});
      seen[i * W + j] = 1;
      while (!q.empty()) {
        auto [r, c] = q.front();
        q.pop();
        touches |= border.count({r, c}) > 0;
        for (long dr = -1; dr <= 1; ++dr)
          for (long dc = -1; dc <= 1; ++dc) {
            const long rr = r + dr, cc = c + dc;
            if (!m.at_or_zero(rr, cc) || seen[rr * W + cc]) continue;
            seen[rr * W + cc] = 1;
            q.push({rr, cc});
          }
      }
      if (!touches) return false;
    }
  return true;
}

inline PixelSet as_set(const std::vector<Contour>& contours) {
  PixelSet s;
  for (const auto& c : contours)
    for (const auto& p : c) s.insert({p.row, p.col});
  return s;
}

inline BitMask random_blobs(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  BitMask m(h, w);
  const int parts = 1 + static_cast<int>(U(rng) * 4);
  for (int p = 0; p < parts; ++p) {
    const double cx = U(rng) * w, cy = U(rng) * h;
    const auto e = ellipse(h, w, cx, cy, 1 + U(rng) * 8, 1 + U(rng) * 8, U(rng) * 3.14);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        if (e.at(i, j)) m.set(i, j, true);
  }
  if (m.empty()) m.set(h / 2, w / 2, true);
  return m;
}

}  // namespace testing
