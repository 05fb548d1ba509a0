#include "polarseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "polarseg/error.hpp"

namespace polarseg {

namespace {

struct Rgb {
  double r, g, b;
};

Rgb base_colour(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Ellipse: return {0.85, 0.30, 0.22};
    case ShapeKind::Rectangle: return {0.25, 0.78, 0.35};
    case ShapeKind::Star: return {0.28, 0.38, 0.92};
  }
  return {0.5, 0.5, 0.5};
}

double quantise(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

const char* shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::Rectangle: return "rectangle";
    case ShapeKind::Star: return "star";
  }
  return "unknown";
}

void SceneConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::ConfigInvalid, what); };
  if (height < 8 || width < 8) bad("scene must be at least 8x8");
  if (min_instances > max_instances) bad("min_instances exceeds max_instances");
  if (!(min_size > 0.0) || min_size > max_size) bad("shape size range is invalid");
  if (!(noise_sigma >= 0.0)) bad("noise_sigma must be >= 0");
  if (palette.empty()) bad("palette must name at least one shape kind");
}

BitMask draw_shape(ShapeKind kind, std::size_t height, std::size_t width, double cx, double cy,
                   double size, double aspect, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  BitMask m(height, width);
  if (kind == ShapeKind::Star) {
    // Five-pointed star; `aspect` is the inner to outer radius ratio.
    Polygon star;
    for (int k = 0; k < 10; ++k) {
      const double r = (k % 2 == 0) ? size : size * aspect;
      const double t = angle + k * std::numbers::pi / 5.0;
      star.vertices.push_back({cx + r * std::sin(t), cy + r * std::cos(t)});
    }
    return rasterize(star, height, width);
  }
  const double a = size, b = size * aspect;
  for (std::size_t i = 0; i < height; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      const double x = static_cast<double>(j) + 0.5 - cx, y = static_cast<double>(i) + 0.5 - cy;
      const double u = x * c + y * s, v = -x * s + y * c;
      const bool in = kind == ShapeKind::Ellipse ? (u * u) / (a * a) + (v * v) / (b * b) <= 1.0
                                                 : std::abs(u) <= a && std::abs(v) <= b;
      if (in) m.set(i, j, true);
    }
  return m;
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t H = config.height, W = config.width;

  SyntheticScene scene;
  scene.seed = seed;
  scene.image = ad::Tensor({3, H, W});

  // Background: a gentle gradient plus a low-frequency ripple.
  const double level = 0.35 + 0.2 * U(rng);
  const double gx = (U(rng) - 0.5) * 0.3, gy = (U(rng) - 0.5) * 0.3;
  const double fx = 0.1 + 0.25 * U(rng), fy = 0.1 + 0.25 * U(rng), phase = 2 * std::numbers::pi * U(rng);
  Rgb tint{U(rng) * 0.1, U(rng) * 0.1, U(rng) * 0.1};
  std::vector<double> bg(H * W);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      const double u = static_cast<double>(j) / W - 0.5, v = static_cast<double>(i) / H - 0.5;
      bg[i * W + j] = level + gx * u + gy * v + 0.05 * std::sin(fx * j + fy * i + phase);
    }
  for (std::size_t i = 0; i < H * W; ++i) {
    scene.image[i] = bg[i] + tint.r;
    scene.image[H * W + i] = bg[i] + tint.g;
    scene.image[2 * H * W + i] = bg[i] + tint.b;
  }

  const std::size_t count =
      config.min_instances +
      static_cast<std::size_t>(U(rng) * static_cast<double>(config.max_instances - config.min_instances + 1));
  std::vector<SceneInstance> drawn;
  for (std::size_t n = 0; n < std::min(count, config.max_instances); ++n) {
    const std::size_t cls = static_cast<std::size_t>(U(rng) * static_cast<double>(config.palette.size()));
    const ShapeKind kind = config.palette[std::min(cls, config.palette.size() - 1)];
    const double size = config.min_size + (config.max_size - config.min_size) * U(rng);
    const double margin = std::min(0.5 * size, 0.25 * std::min<double>(H, W));
    const double cx = margin + (static_cast<double>(W) - 2 * margin) * U(rng);
    const double cy = margin + (static_cast<double>(H) - 2 * margin) * U(rng);
    const double aspect = kind == ShapeKind::Star ? 0.4 + 0.2 * U(rng) : 0.45 + 0.55 * U(rng);
    const double angle = std::numbers::pi * U(rng);
    BitMask mask = draw_shape(kind, H, W, cx, cy, size, aspect, angle);

    const Rgb base = base_colour(kind);
    const Rgb col{base.r + 0.16 * (U(rng) - 0.5), base.g + 0.16 * (U(rng) - 0.5), base.b + 0.16 * (U(rng) - 0.5)};
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        if (mask.at(i, j)) {
          scene.image[i * W + j] = col.r;
          scene.image[H * W + i * W + j] = col.g;
          scene.image[2 * H * W + i * W + j] = col.b;
          for (auto& earlier : drawn)
            if (earlier.mask.at(i, j)) earlier.mask.set(i, j, false);
        }
    if (!mask.empty()) drawn.push_back({std::min(cls, config.palette.size() - 1) + 1, std::move(mask)});
  }
  for (auto& inst : drawn)
    if (!inst.mask.empty()) scene.instances.push_back(std::move(inst));

  for (auto& v : scene.image.values()) v = quantise(v + config.noise_sigma * noise(rng));
  return scene;
}

}  // namespace polarseg
