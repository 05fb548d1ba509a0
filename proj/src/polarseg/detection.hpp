#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polarseg/network.hpp"
#include "polarseg/polar_codec.hpp"

namespace polarseg {

struct Detection {
  std::size_t class_id = 0;  // 1-based
  double score = 0.0;
  PolarShape shape{{0.0, 0.0}, std::vector<double>(3, kMinRadius)};
  std::size_t level = 0;  // index into the model's pyramid levels
  std::size_t cell = 0;

  // Rasterised once on first use.
  const BitMask& mask(std::size_t height, std::size_t width) const;

 private:
  mutable std::optional<BitMask> mask_;
};

struct DecodeConfig {
  double score_threshold = 0.05;
  std::size_t topk_per_level = 100;
  double nms_iou = 0.5;
  std::size_t max_detections = 100;
};

// Per level: score = sigmoid(cls) * sigmoid(centerness) for every class,
// keeps the top-k above threshold, and builds shapes from the refined radii
// around each cell's pole. Requires fine radii at every cell.
std::vector<Detection> decode_detections(const HeadOutputs& outputs, const DecodeConfig& config);

// Class-wise greedy suppression by mask IoU, highest score first. Ties in
// score are broken by (level order, cell) so the result does not depend on
// input order.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold, std::size_t height,
                           std::size_t width);

// Forward pass, decode and suppression for one [3, H, W] network input.
std::vector<Detection> detect(const Model& model, const ad::Tensor& input, const DecodeConfig& config);

std::string detection_json_line(const Detection& d);

}  // namespace polarseg
