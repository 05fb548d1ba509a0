#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polarseg/polar_codec.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

enum class ShapeKind { Ellipse = 1, Rectangle = 2, Star = 3 };

const char* shape_name(ShapeKind kind);

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_instances = 1;
  std::size_t max_instances = 3;
  // Characteristic half-size of a shape (semi-major axis, half-width, outer
  // star radius), in pixels.
  double min_size = 6.0;
  double max_size = 20.0;
  double noise_sigma = 0.03;
  // Shape kinds in class order: class id k + 1 draws palette[k].
  std::vector<ShapeKind> palette = {ShapeKind::Ellipse, ShapeKind::Rectangle, ShapeKind::Star};

  void validate() const;
};

struct SceneInstance {
  std::size_t class_id = 0;  // 1-based; 0 is background
  BitMask mask;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  ad::Tensor image;  // [3, H, W], values k / 255
  std::vector<SceneInstance> instances;
};

// Deterministic in (seed, config). Later shapes cover earlier ones; shapes
// left without visible pixels are dropped.
SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& config);

// Mask of one shape of the given kind, as drawn by the generator.
BitMask draw_shape(ShapeKind kind, std::size_t height, std::size_t width, double cx, double cy,
                   double size, double aspect, double angle);

}  // namespace polarseg
