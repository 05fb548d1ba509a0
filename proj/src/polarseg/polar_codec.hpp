#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace polarseg {

// Continuous image coordinates: x to the right, y down. Pixel (row i,
// column j) has its centre at (j + 0.5, i + 0.5).
struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr std::size_t kDefaultRays = 36;
// Radius assigned to rays that never leave the instance (and the floor for
// predicted radii).
inline constexpr double kMinRadius = 0.01;

class BitMask {
 public:
  BitMask(std::size_t height, std::size_t width);
  BitMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool at(std::size_t row, std::size_t col) const { return bits_[row * width_ + col] != 0; }
  // Out-of-bounds reads are background.
  bool at_or_zero(long row, long col) const {
    return row >= 0 && col >= 0 && row < static_cast<long>(height_) &&
           col < static_cast<long>(width_) && bits_[row * width_ + col] != 0;
  }
  void set(std::size_t row, std::size_t col, bool on);

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const BitMask& a, const BitMask& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.bits_ == b.bits_;
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> bits_;  // 0 or 1, row-major
  std::size_t count_ = 0;
};

// Pole plus n radii; radius k (0-based) lies along angle (k + 1) * 2pi / n,
// measured so that x advances by r sin(angle) and y by r cos(angle).
class PolarShape {
 public:
  PolarShape(Point center, std::vector<double> radii);

  const Point& center() const { return center_; }
  const std::vector<double>& radii() const { return radii_; }
  std::size_t rays() const { return radii_.size(); }
  double angle(std::size_t k) const;

 private:
  Point center_;
  std::vector<double> radii_;
};

// (sin, cos) of ray k's angle. Quarter turns are exact, so axis rays run
// exactly along pixel edges instead of drifting by rounding error.
Point ray_direction(std::size_t k, std::size_t n);

struct Polygon {
  std::vector<Point> vertices;
};

// Mean of the foreground pixel centres.
Point mass_center(const BitMask& mask);

// Polar encoding around the mass centre. Each ray keeps its farthest
// inside-to-outside transition; rays that never cross the mask get kMinRadius.
PolarShape encode(const BitMask& mask, std::size_t rays = kDefaultRays);
// Same ray casting around an arbitrary pole.
PolarShape encode_about(const BitMask& mask, Point pole, std::size_t rays = kDefaultRays);

Polygon decode(const PolarShape& shape);

// Even-odd scanline fill sampled at pixel centres, clipped to the image.
BitMask rasterize(const Polygon& polygon, std::size_t height, std::size_t width);

// |a & b| / |a | b|; two empty masks compare as 1.
double mask_iou(const BitMask& a, const BitMask& b);

// One JSON object per line: {"cx":..,"cy":..,"radii":[..]}.
std::string to_json_line(const PolarShape& shape);
PolarShape polar_shape_from_json(const std::string& line);

}  // namespace polarseg
