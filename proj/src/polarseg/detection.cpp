#include "polarseg/detection.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "polarseg/error.hpp"
#include "polarseg/targets.hpp"

namespace polarseg {

namespace {

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.level != b.level) return a.level < b.level;
  if (a.cell != b.cell) return a.cell < b.cell;
  return a.class_id < b.class_id;
}

}  // namespace

const BitMask& Detection::mask(std::size_t height, std::size_t width) const {
  if (!mask_ || mask_->height() != height || mask_->width() != width)
    mask_ = rasterize(decode(shape), height, width);
  return *mask_;
}

std::vector<Detection> decode_detections(const HeadOutputs& outputs, const DecodeConfig& config) {
  std::vector<Detection> out;
  for (std::size_t l = 0; l < outputs.levels.size(); ++l) {
    const auto& lv = outputs.levels[l];
    const std::size_t HW = lv.height * lv.width;
    const std::size_t K = lv.cls_logits->shape()[1];
    const std::size_t n = lv.coarse_radii->shape()[1];
    if (lv.fine_cells.size() != HW)
      fail(ErrorCode::InvalidArgument, "decoding needs refined radii at every cell");

    struct Candidate {
      double score;
      std::size_t cell, cls;
    };
    std::vector<Candidate> cand;
    for (std::size_t c = 0; c < HW; ++c) {
      const double q = sigmoid(lv.centerness_logits->value[c]);
      for (std::size_t k = 0; k < K; ++k) {
        const double s = sigmoid(lv.cls_logits->value[k * HW + c]) * q;
        if (s > config.score_threshold) cand.push_back({s, c, k});
      }
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.cell != b.cell ? a.cell < b.cell : a.cls < b.cls;
    });
    if (cand.size() > config.topk_per_level) cand.resize(config.topk_per_level);

    for (const auto& c : cand) {
      // fine_cells enumerates every cell in order, so row c holds cell c.
      std::vector<double> radii(n);
      for (std::size_t k = 0; k < n; ++k) radii[k] = std::max(lv.fine_radii->value[c.cell * n + k], kMinRadius);
      Detection d;
      d.class_id = c.cls + 1;
      d.score = c.score;
      d.shape = PolarShape(cell_pole(c.cell, lv.width, lv.stride), std::move(radii));
      d.level = l;
      d.cell = c.cell;
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold, std::size_t height,
                           std::size_t width) {
  std::sort(detections.begin(), detections.end(), ranks_before);
  std::vector<Detection> kept;
  for (auto& d : detections) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.class_id != d.class_id) continue;
      if (mask_iou(k.mask(height, width), d.mask(height, width)) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<Detection> detect(const Model& model, const ad::Tensor& input, const DecodeConfig& config) {
  const HeadOutputs out = model.forward(input, ForwardOptions{std::nullopt, false, nullptr});
  auto dets = nms(decode_detections(out, config), config.nms_iou, input.dim(1), input.dim(2));
  if (dets.size() > config.max_detections) dets.resize(config.max_detections);
  return dets;
}

std::string detection_json_line(const Detection& d) {
  nlohmann::json j;
  j["class"] = d.class_id;
  j["score"] = d.score;
  j["level"] = d.level;
  j["cell"] = d.cell;
  j["cx"] = d.shape.center().x;
  j["cy"] = d.shape.center().y;
  j["radii"] = d.shape.radii();
  return j.dump();
}

}  // namespace polarseg
