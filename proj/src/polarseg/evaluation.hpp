#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polarseg/detection.hpp"
#include "polarseg/polar_codec.hpp"
#include "polarseg/synthetic.hpp"

namespace polarseg {

struct ScoredMask {
  std::size_t class_id = 0;
  double score = 0.0;
  BitMask mask;
};

struct EvalConfig {
  // Area buckets as fractions of the image area: small below the first,
  // large from the second up.
  double small_fraction = 0.05;
  double medium_fraction = 0.2;
  std::size_t max_detections = 100;
};

struct EvalReport {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  // Buckets without ground truth have no value.
  std::optional<double> ap_small, ap_medium, ap_large;
  std::map<std::size_t, std::optional<double>> per_class;  // class id -> AP
  std::vector<double> ap_by_threshold;  // 0.50, 0.55, ..., 0.95
  std::size_t images = 0;
  std::size_t detections = 0;
  std::size_t ground_truth = 0;

  std::string to_json() const;
  std::string to_table() const;
};

inline constexpr std::size_t kIouThresholds = 10;
double iou_threshold(std::size_t t);  // 0.5 + 0.05 t

ScoredMask to_scored_mask(const Detection& d, std::size_t height, std::size_t width);

// COCO-style mask AP: per class and threshold, detections are matched in
// descending score to the unmatched ground truth of highest IoU; precision
// is made monotone and read at 101 recall points. Fails with
// DimensionMismatch when a mask's size differs from its image's ground truth.
EvalReport evaluate(const std::vector<std::vector<ScoredMask>>& predictions,
                    const std::vector<std::vector<SceneInstance>>& ground_truth, const EvalConfig& config);

}  // namespace polarseg
