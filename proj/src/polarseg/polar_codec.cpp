#include "polarseg/polar_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "polarseg/error.hpp"

namespace polarseg {

namespace {

// Ray-march resolution in pixels. Sub-step clips of pixel corners are not
// resolved; crossings found are refined by bisection.
constexpr double kMarchStep = 0.1;
constexpr int kBisectionSteps = 10;

// A coordinate split as integer + fraction so that integer translations of
// the mask move only the integer part; keeps encode exactly shift-invariant.
struct SplitCoord {
  long whole;
  double frac;
};

SplitCoord split(double v) {
  const double w = std::floor(v);
  return {static_cast<long>(w), v - w};
}

// Exact rational mean of (2k + 1) / 2 over the foreground coordinates k.
SplitCoord half_integer_mean(long long numerator, long long denominator) {
  long long q = numerator / denominator;
  long long r = numerator % denominator;
  if (r < 0) {
    r += denominator;
    --q;
  }
  return {static_cast<long>(q), static_cast<double>(r) / static_cast<double>(denominator)};
}

std::pair<SplitCoord, SplitCoord> center_split(const BitMask& mask) {
  if (mask.empty()) fail(ErrorCode::EmptyMask, "mass centre of an empty mask");
  long long sx = 0, sy = 0;
  for (std::size_t i = 0; i < mask.height(); ++i)
    for (std::size_t j = 0; j < mask.width(); ++j)
      if (mask.at(i, j)) {
        sx += 2 * static_cast<long long>(j) + 1;
        sy += 2 * static_cast<long long>(i) + 1;
      }
  const long long d = 2 * static_cast<long long>(mask.count());
  return {half_integer_mean(sx, d), half_integer_mean(sy, d)};
}

struct Box {
  long r0, r1, c0, c1;  // inclusive pixel bounds
};

Box bounding_box(const BitMask& m) {
  Box b{static_cast<long>(m.height()), -1, static_cast<long>(m.width()), -1};
  for (std::size_t i = 0; i < m.height(); ++i)
    for (std::size_t j = 0; j < m.width(); ++j)
      if (m.at(i, j)) {
        b.r0 = std::min(b.r0, static_cast<long>(i));
        b.r1 = std::max(b.r1, static_cast<long>(i));
        b.c0 = std::min(b.c0, static_cast<long>(j));
        b.c1 = std::max(b.c1, static_cast<long>(j));
      }
  return b;
}

PolarShape cast_rays(const BitMask& mask, SplitCoord px, SplitCoord py, std::size_t rays) {
  if (rays < 3) fail(ErrorCode::InvalidArgument, "ray count must be >= 3");
  if (mask.empty()) fail(ErrorCode::EmptyMask, "cannot encode an empty mask");

  const Box box = bounding_box(mask);
  const double cx = static_cast<double>(px.whole) + px.frac;
  const double cy = static_cast<double>(py.whole) + py.frac;
  double reach = 0.0;
  for (double x : {static_cast<double>(box.c0), static_cast<double>(box.c1 + 1)})
    for (double y : {static_cast<double>(box.r0), static_cast<double>(box.r1 + 1)})
      reach = std::max(reach, std::hypot(x - cx, y - cy));
  reach += 2.0 * kMarchStep;

  std::vector<double> radii(rays, kMinRadius);
  for (std::size_t k = 0; k < rays; ++k) {
    const Point dir = ray_direction(k, rays);
    const double dx = dir.x, dy = dir.y;
    auto inside = [&](double t) {
      const long col = px.whole + static_cast<long>(std::floor(px.frac + t * dx));
      const long row = py.whole + static_cast<long>(std::floor(py.frac + t * dy));
      return mask.at_or_zero(row, col);
    };
    bool prev = inside(0.0);
    double last_exit = -1.0;
    const auto steps = static_cast<std::size_t>(std::ceil(reach / kMarchStep));
    for (std::size_t s = 1; s <= steps; ++s) {
      const double t = static_cast<double>(s) * kMarchStep;
      const bool cur = inside(t);
      if (prev && !cur) last_exit = t;
      prev = cur;
    }
    if (last_exit < 0.0) continue;
    double lo = last_exit - kMarchStep, hi = last_exit;
    for (int b = 0; b < kBisectionSteps; ++b) {
      const double mid = 0.5 * (lo + hi);
      (inside(mid) ? lo : hi) = mid;
    }
    radii[k] = std::max(kMinRadius, 0.5 * (lo + hi));
  }
  return PolarShape({cx, cy}, std::move(radii));
}

}  // namespace

BitMask::BitMask(std::size_t height, std::size_t width)
    : height_(height), width_(width), bits_(height * width, 0) {
  if (height == 0 || width == 0) fail(ErrorCode::InvalidArgument, "mask dimensions must be >= 1");
}

BitMask::BitMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (height == 0 || width == 0) fail(ErrorCode::InvalidArgument, "mask dimensions must be >= 1");
  if (bits_.size() != height * width)
    fail(ErrorCode::DimensionMismatch, "mask bit count does not match its dimensions");
  for (auto& b : bits_) {
    b = b ? 1 : 0;
    count_ += b;
  }
}

void BitMask::set(std::size_t row, std::size_t col, bool on) {
  auto& b = bits_[row * width_ + col];
  const std::uint8_t v = on ? 1 : 0;
  count_ += v;
  count_ -= b;
  b = v;
}

PolarShape::PolarShape(Point center, std::vector<double> radii)
    : center_(center), radii_(std::move(radii)) {
  if (radii_.size() < 3) fail(ErrorCode::InvalidArgument, "a polar shape needs >= 3 rays");
  for (double r : radii_)
    if (!(r > 0.0)) fail(ErrorCode::NonPositiveRadius, "polar radii must be positive");
}

double PolarShape::angle(std::size_t k) const {
  return static_cast<double>(k + 1) * 2.0 * std::numbers::pi / static_cast<double>(radii_.size());
}

Point mass_center(const BitMask& mask) {
  const auto [x, y] = center_split(mask);
  return {static_cast<double>(x.whole) + x.frac, static_cast<double>(y.whole) + y.frac};
}

PolarShape encode(const BitMask& mask, std::size_t rays) {
  const auto [x, y] = center_split(mask);
  return cast_rays(mask, x, y, rays);
}

PolarShape encode_about(const BitMask& mask, Point pole, std::size_t rays) {
  return cast_rays(mask, split(pole.x), split(pole.y), rays);
}

Point ray_direction(std::size_t k, std::size_t n) {
  const std::size_t turn = (k + 1) % n;
  if ((4 * turn) % n == 0) {
    static constexpr Point quarter[4] = {{0.0, 1.0}, {1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}};
    return quarter[(4 * turn) / n];
  }
  const double theta = static_cast<double>(k + 1) * 2.0 * std::numbers::pi / static_cast<double>(n);
  return {std::sin(theta), std::cos(theta)};
}

Polygon decode(const PolarShape& shape) {
  Polygon poly;
  poly.vertices.reserve(shape.rays());
  const auto& c = shape.center();
  for (std::size_t k = 0; k < shape.rays(); ++k) {
    const Point d = ray_direction(k, shape.rays());
    const double r = shape.radii()[k];
    poly.vertices.push_back({c.x + r * d.x, c.y + r * d.y});
  }
  return poly;
}

BitMask rasterize(const Polygon& polygon, std::size_t height, std::size_t width) {
  BitMask out(height, width);
  const auto& v = polygon.vertices;
  const std::size_t n = v.size();
  if (n < 3) return out;
  std::vector<double> crossings;
  for (std::size_t i = 0; i < height; ++i) {
    const double y = static_cast<double>(i) + 0.5;
    crossings.clear();
    for (std::size_t a = 0, b = n - 1; a < n; b = a++) {
      const Point& p = v[a];
      const Point& q = v[b];
      // Half-open rule on y so shared vertices are counted once.
      if ((p.y > y) != (q.y > y)) crossings.push_back((q.x - p.x) * (y - p.y) / (q.y - p.y) + p.x);
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    // A centre is inside iff an odd number of crossings lie strictly to its right.
    std::size_t passed = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const double x = static_cast<double>(j) + 0.5;
      while (passed < crossings.size() && crossings[passed] <= x) ++passed;
      if ((crossings.size() - passed) % 2 == 1) out.set(i, j, true);
    }
  }
  return out;
}

double mask_iou(const BitMask& a, const BitMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    fail(ErrorCode::DimensionMismatch, "mask_iou needs masks of equal size");
  std::size_t inter = 0;
  const auto& x = a.bits();
  const auto& y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) inter += x[i] & y[i];
  const std::size_t uni = a.count() + b.count() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string to_json_line(const PolarShape& shape) {
  nlohmann::json j;
  j["cx"] = shape.center().x;
  j["cy"] = shape.center().y;
  j["radii"] = shape.radii();
  return j.dump();
}

PolarShape polar_shape_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return PolarShape({j.at("cx").get<double>(), j.at("cy").get<double>()},
                      j.at("radii").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("bad polar shape record: ") + e.what());
  }
}

}  // namespace polarseg
