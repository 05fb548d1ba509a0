#pragma once

#include <vector>

#include "polarseg/network.hpp"
#include "polarseg/polar_codec.hpp"
#include "polarseg/synthetic.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

struct AssignConfig {
  // Positive cells lie within this many strides of the mass centre.
  double center_radius = 1.5;
  // Upper bounds on the largest ground-truth radius for every level but the
  // last; empty means 3 * stride of each level.
  std::vector<double> scale_bounds;
  // Also require the pole to fall on a foreground pixel of the instance.
  bool pole_inside = true;

  // (lo, hi] radius range for each level.
  std::vector<std::pair<double, double>> ranges(const std::vector<LevelSpec>& levels) const;
};

struct LevelTargets {
  std::size_t stride = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> labels;        // per cell; class id, 0 = background
  std::vector<std::size_t> positives;     // ascending flat cell indices
  std::vector<std::size_t> instance;      // instance index per positive
  ad::Tensor radii;                       // [P, n], re-encoded about each cell's pole
  std::vector<double> centerness;         // per positive

  // Classification target laid out like cls logits [1, K, H, W].
  ad::Tensor class_map(std::size_t num_classes) const;
};

struct TargetSet {
  std::vector<LevelTargets> levels;
  BitMask boundary{1, 1};  // instance-agnostic border map at the first level's stride

  std::size_t positive_count() const;
};

// Image-space pole of grid cell (i, j) at `stride`: the centre of its
// receptive block, ((j + 0.5) s, (i + 0.5) s).
Point cell_pole(std::size_t cell, std::size_t width, std::size_t stride);

TargetSet assign_targets(const std::vector<SceneInstance>& instances, std::size_t height,
                         std::size_t width, const std::vector<LevelSpec>& levels, std::size_t rays,
                         const AssignConfig& config);

}  // namespace polarseg
