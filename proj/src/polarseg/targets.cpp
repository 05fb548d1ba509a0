#include "polarseg/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "polarseg/boundary_targets.hpp"
#include "polarseg/error.hpp"
#include "polarseg/losses.hpp"

namespace polarseg {

std::vector<std::pair<double, double>> AssignConfig::ranges(const std::vector<LevelSpec>& levels) const {
  if (!scale_bounds.empty() && scale_bounds.size() + 1 != levels.size())
    fail(ErrorCode::ConfigInvalid, "scale_bounds needs one entry fewer than there are levels");
  std::vector<std::pair<double, double>> out;
  double lo = 0.0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    double hi = std::numeric_limits<double>::infinity();
    if (l + 1 < levels.size())
      hi = scale_bounds.empty() ? 3.0 * static_cast<double>(levels[l].stride) : scale_bounds[l];
    if (!(hi > lo)) fail(ErrorCode::ConfigInvalid, "scale bounds must increase from level to level");
    out.emplace_back(lo, hi);
    lo = hi;
  }
  return out;
}

ad::Tensor LevelTargets::class_map(std::size_t num_classes) const {
  const std::size_t hw = height * width;
  ad::Tensor t({1, num_classes, height, width});
  for (std::size_t c = 0; c < hw; ++c)
    if (labels[c] > 0 && labels[c] <= num_classes) t[(labels[c] - 1) * hw + c] = 1.0;
  return t;
}

std::size_t TargetSet::positive_count() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.positives.size();
  return n;
}

Point cell_pole(std::size_t cell, std::size_t width, std::size_t stride) {
  const double s = static_cast<double>(stride);
  return {(static_cast<double>(cell % width) + 0.5) * s, (static_cast<double>(cell / width) + 0.5) * s};
}

TargetSet assign_targets(const std::vector<SceneInstance>& instances, std::size_t height,
                         std::size_t width, const std::vector<LevelSpec>& levels, std::size_t rays,
                         const AssignConfig& config) {
  if (levels.empty()) fail(ErrorCode::ConfigInvalid, "no pyramid levels to assign to");
  const auto ranges = config.ranges(levels);

  TargetSet out;
  for (const auto& lv : levels) {
    LevelTargets t;
    t.stride = lv.stride;
    t.height = (height + lv.stride - 1) / lv.stride;
    t.width = (width + lv.stride - 1) / lv.stride;
    t.labels.assign(t.height * t.width, 0);
    out.levels.push_back(std::move(t));
  }

  // claims[level][cell] = instance index; the smaller instance keeps a contested cell.
  std::vector<std::map<std::size_t, std::size_t>> claims(levels.size());
  auto claim = [&](std::size_t level, std::size_t cell, std::size_t inst) {
    auto [it, fresh] = claims[level].emplace(cell, inst);
    if (!fresh && instances[inst].mask.count() < instances[it->second].mask.count()) it->second = inst;
  };

  for (std::size_t k = 0; k < instances.size(); ++k) {
    const BitMask& mask = instances[k].mask;
    if (mask.height() != height || mask.width() != width)
      fail(ErrorCode::DimensionMismatch, "instance mask does not match the image size");
    const PolarShape gt = encode(mask, rays);
    const double rmax = *std::max_element(gt.radii().begin(), gt.radii().end());
    std::size_t level = 0;
    while (level + 1 < levels.size() && rmax > ranges[level].second) ++level;

    const auto& lt = out.levels[level];
    const double s = static_cast<double>(lt.stride);
    const Point c = gt.center();
    auto pole_ok = [&](const Point& p) {
      return !config.pole_inside ||
             mask.at_or_zero(static_cast<long>(std::floor(p.y)), static_cast<long>(std::floor(p.x)));
    };
    bool any = false;
    std::size_t nearest = 0, nearest_inside = lt.labels.size();
    double best = std::numeric_limits<double>::infinity(), best_inside = best;
    for (std::size_t cell = 0; cell < lt.labels.size(); ++cell) {
      const Point p = cell_pole(cell, lt.width, lt.stride);
      const double d = std::hypot(p.x - c.x, p.y - c.y);
      const bool inside = pole_ok(p);
      if (d < best) best = d, nearest = cell;
      if (inside && d < best_inside) best_inside = d, nearest_inside = cell;
      if (d <= config.center_radius * s && inside) {
        claim(level, cell, k);
        any = true;
      }
    }
    // Every instance gets at least one positive.
    if (!any) claim(level, nearest_inside < lt.labels.size() ? nearest_inside : nearest, k);
  }

  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto& lt = out.levels[l];
    std::vector<double> radii;
    for (const auto& [cell, inst] : claims[l]) {
      lt.labels[cell] = instances[inst].class_id;
      lt.positives.push_back(cell);
      lt.instance.push_back(inst);
      const PolarShape shape = encode_about(instances[inst].mask, cell_pole(cell, lt.width, lt.stride), rays);
      radii.insert(radii.end(), shape.radii().begin(), shape.radii().end());
      lt.centerness.push_back(polar_centerness(shape.radii()));
    }
    lt.radii = ad::Tensor({lt.positives.size(), rays}, std::move(radii));
  }

  const std::size_t s0 = levels[0].stride;
  if (instances.empty()) {
    out.boundary = BitMask((height + s0 - 1) / s0, (width + s0 - 1) / s0);
  } else {
    std::vector<BitMask> masks;
    for (const auto& inst : instances) masks.push_back(inst.mask);
    out.boundary = build_boundary_mask(extract_boundaries(masks), s0, height, width);
  }
  return out;
}

}  // namespace polarseg
