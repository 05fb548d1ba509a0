#pragma once

#include <cstddef>
#include <vector>

#include "polarseg/polar_codec.hpp"

namespace polarseg {

struct Pixel {
  long row = 0;
  long col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// One closed 8-connected traversal; consecutive points (and last to first)
// are 8-adjacent. Thin parts may be visited more than once.
using Contour = std::vector<Pixel>;

struct InstanceBorder {
  std::vector<Contour> contours;  // one outer border per connected component
};

struct BoundaryPointSet {
  std::vector<InstanceBorder> instances;

  std::size_t instance_count() const { return instances.size(); }
  // Total traversal length over all instances and contours.
  std::size_t point_count() const;
};

// Outer borders of every 8-connected component of the mask, by Suzuki-Abe
// border following. Hole borders are followed for labelling but not
// returned. The frame outside the image counts as background.
std::vector<Contour> trace_outer_borders(const BitMask& mask);

BoundaryPointSet extract_boundaries(const std::vector<BitMask>& masks);

// Instance-agnostic boundary map of size ceil(H/s) x ceil(W/s): cell
// (floor(row/s), floor(col/s)) is set for every traced point.
BitMask build_boundary_mask(const BoundaryPointSet& points, std::size_t stride, std::size_t height,
                            std::size_t width);

}  // namespace polarseg
