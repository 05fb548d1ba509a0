#include "polarseg/boundary_targets.hpp"

#include <cstdlib>

#include "polarseg/error.hpp"

namespace polarseg {

namespace {

// Clockwise in image coordinates (row down): E, SE, S, SW, W, NW, N, NE.
constexpr int kDRow[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDCol[8] = {1, 1, 0, -1, -1, -1, 0, 1};

int direction(long from_r, long from_c, long to_r, long to_c) {
  const long dr = to_r - from_r, dc = to_c - from_c;
  for (int d = 0; d < 8; ++d)
    if (kDRow[d] == dr && kDCol[d] == dc) return d;
  return -1;
}

class BorderFollower {
 public:
  explicit BorderFollower(const BitMask& mask)
      : rows_(static_cast<long>(mask.height()) + 2), cols_(static_cast<long>(mask.width()) + 2),
        f_(static_cast<std::size_t>(rows_ * cols_), 0) {
    for (std::size_t i = 0; i < mask.height(); ++i)
      for (std::size_t j = 0; j < mask.width(); ++j)
        if (mask.at(i, j)) at(static_cast<long>(i) + 1, static_cast<long>(j) + 1) = 1;
  }

  std::vector<Contour> run() {
    std::vector<Contour> outer;
    int nbd = 1;
    for (long i = 1; i < rows_ - 1; ++i) {
      for (long j = 1; j < cols_ - 1; ++j) {
        const int v = at(i, j);
        if (v == 0) continue;
        const bool starts_outer = v == 1 && at(i, j - 1) == 0;
        const bool starts_hole = !starts_outer && v >= 1 && at(i, j + 1) == 0;
        if (starts_outer || starts_hole) {
          ++nbd;
          Contour c = follow(i, j, i, starts_outer ? j - 1 : j + 1, nbd);
          if (starts_outer) outer.push_back(std::move(c));
        }
      }
    }
    return outer;
  }

 private:
  int& at(long r, long c) { return f_[static_cast<std::size_t>(r * cols_ + c)]; }

  Contour follow(long i, long j, long from_r, long from_c, int nbd) {
    Contour contour;
    // Clockwise search from the background neighbour for the first nonzero pixel.
    const int d0 = direction(i, j, from_r, from_c);
    int found = -1;
    for (int s = 0; s < 8; ++s) {
      const int d = (d0 + s) % 8;
      if (at(i + kDRow[d], j + kDCol[d]) != 0) {
        found = d;
        break;
      }
    }
    if (found < 0) {
      at(i, j) = -nbd;
      contour.push_back({i - 1, j - 1});
      return contour;
    }
    const long r1 = i + kDRow[found], c1 = j + kDCol[found];
    long r2 = r1, c2 = c1, r3 = i, c3 = j;
    while (true) {
      // Counterclockwise search around (r3, c3) starting after (r2, c2).
      const int back = direction(r3, c3, r2, c2);
      bool east_zero = false;
      long r4 = r3, c4 = c3;
      for (int s = 1; s <= 8; ++s) {
        const int d = ((back - s) % 8 + 8) % 8;
        const long rr = r3 + kDRow[d], cc = c3 + kDCol[d];
        if (at(rr, cc) != 0) {
          r4 = rr;
          c4 = cc;
          break;
        }
        if (d == 0) east_zero = true;
      }
      if (east_zero)
        at(r3, c3) = -nbd;
      else if (at(r3, c3) == 1)
        at(r3, c3) = nbd;
      contour.push_back({r3 - 1, c3 - 1});
      if (r4 == i && c4 == j && r3 == r1 && c3 == c1) break;
      r2 = r3;
      c2 = c3;
      r3 = r4;
      c3 = c4;
    }
    return contour;
  }

  long rows_;
  long cols_;
  std::vector<int> f_;
};

}  // namespace

std::size_t BoundaryPointSet::point_count() const {
  std::size_t n = 0;
  for (const auto& inst : instances)
    for (const auto& c : inst.contours) n += c.size();
  return n;
}

std::vector<Contour> trace_outer_borders(const BitMask& mask) { return BorderFollower(mask).run(); }

BoundaryPointSet extract_boundaries(const std::vector<BitMask>& masks) {
  BoundaryPointSet out;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const auto& m = masks[k];
    if (m.empty()) fail(ErrorCode::EmptyMask, "instance " + std::to_string(k) + " has no pixels");
    if (m.height() != masks[0].height() || m.width() != masks[0].width())
      fail(ErrorCode::DimensionMismatch, "instance masks differ in size");
    out.instances.push_back({trace_outer_borders(m)});
  }
  return out;
}

BitMask build_boundary_mask(const BoundaryPointSet& points, std::size_t stride, std::size_t height,
                            std::size_t width) {
  if (stride < 1) fail(ErrorCode::StrideInvalid, "boundary stride must be >= 1");
  const std::size_t h = (height + stride - 1) / stride, w = (width + stride - 1) / stride;
  BitMask out(h, w);
  const long s = static_cast<long>(stride);
  for (const auto& inst : points.instances)
    for (const auto& contour : inst.contours)
      for (const auto& p : contour) {
        const long r = p.row / s, c = p.col / s;
        if (r >= 0 && c >= 0 && r < static_cast<long>(h) && c < static_cast<long>(w))
          out.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), true);
      }
  return out;
}

}  // namespace polarseg
