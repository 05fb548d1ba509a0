#include "polarseg/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "polarseg/error.hpp"

namespace polarseg {

namespace {

struct AreaRange {
  double lo, hi;
  bool contains(double a) const { return a >= lo && a < hi; }
};

// One class, one area range, one threshold, over every image.
double average_precision(const std::vector<std::vector<ScoredMask>>& preds,
                         const std::vector<std::vector<SceneInstance>>& gts,
                         const std::vector<std::vector<std::vector<double>>>& ious, std::size_t cls,
                         AreaRange range, double thr, std::size_t max_dets, bool& defined) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> flat;
  std::size_t positives = 0;

  for (std::size_t img = 0; img < gts.size(); ++img) {
    std::vector<std::size_t> g_idx;
    for (std::size_t g = 0; g < gts[img].size(); ++g)
      if (gts[img][g].class_id == cls) g_idx.push_back(g);
    // Ground truth outside the range is ignored; non-ignored entries come first.
    std::stable_sort(g_idx.begin(), g_idx.end(), [&](std::size_t a, std::size_t b) {
      return range.contains(gts[img][a].mask.count()) > range.contains(gts[img][b].mask.count());
    });
    std::vector<bool> g_ignore(g_idx.size());
    for (std::size_t i = 0; i < g_idx.size(); ++i) {
      g_ignore[i] = !range.contains(gts[img][g_idx[i]].mask.count());
      positives += !g_ignore[i];
    }

    std::vector<std::size_t> d_idx;
    for (std::size_t d = 0; d < preds[img].size(); ++d)
      if (preds[img][d].class_id == cls) d_idx.push_back(d);
    std::stable_sort(d_idx.begin(), d_idx.end(),
                     [&](std::size_t a, std::size_t b) { return preds[img][a].score > preds[img][b].score; });
    if (d_idx.size() > max_dets) d_idx.resize(max_dets);

    std::vector<bool> g_taken(g_idx.size(), false);
    for (std::size_t d : d_idx) {
      double best = std::min(thr, 1.0 - 1e-10);
      long match = -1;
      for (std::size_t i = 0; i < g_idx.size(); ++i) {
        if (g_taken[i]) continue;
        // Once matched to a counted object, ignored ones cannot take over.
        if (match >= 0 && !g_ignore[match] && g_ignore[i]) break;
        const double iou = ious[img][d][g_idx[i]];
        if (iou < best) continue;
        best = iou;
        match = static_cast<long>(i);
      }
      bool ignore;
      bool tp = false;
      if (match >= 0) {
        g_taken[match] = true;
        ignore = g_ignore[match];
        tp = true;
      } else {
        ignore = !range.contains(preds[img][d].mask.count());
      }
      if (!ignore) flat.push_back({preds[img][d].score, tp});
    }
  }

  defined = positives > 0;
  if (!defined) return 0.0;
  std::stable_sort(flat.begin(), flat.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& s : flat) {
    (s.tp ? tp : fp) += 1;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = r / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), target);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "  n/a "; }

}  // namespace

double iou_threshold(std::size_t t) { return 0.5 + 0.05 * static_cast<double>(t); }

ScoredMask to_scored_mask(const Detection& d, std::size_t height, std::size_t width) {
  return {d.class_id, d.score, d.mask(height, width)};
}

EvalReport evaluate(const std::vector<std::vector<ScoredMask>>& predictions,
                    const std::vector<std::vector<SceneInstance>>& ground_truth, const EvalConfig& config) {
  if (predictions.size() != ground_truth.size())
    fail(ErrorCode::DimensionMismatch, "predictions and ground truth cover different numbers of images");

  EvalReport report;
  report.images = ground_truth.size();
  std::set<std::size_t> classes;
  std::vector<std::vector<std::vector<double>>> ious(ground_truth.size());
  double image_area = 0.0;
  for (std::size_t img = 0; img < ground_truth.size(); ++img) {
    const auto& gts = ground_truth[img];
    const auto& preds = predictions[img];
    report.ground_truth += gts.size();
    report.detections += preds.size();
    for (const auto& g : gts) classes.insert(g.class_id);
    for (std::size_t a = 1; a < gts.size(); ++a)
      if (gts[a].mask.height() != gts[0].mask.height() || gts[a].mask.width() != gts[0].mask.width())
        fail(ErrorCode::DimensionMismatch, "ground-truth masks of one image differ in size");
    ious[img].resize(preds.size());
    for (std::size_t d = 0; d < preds.size(); ++d) {
      if (!gts.empty() && (preds[d].mask.height() != gts[0].mask.height() ||
                           preds[d].mask.width() != gts[0].mask.width()))
        fail(ErrorCode::DimensionMismatch, "predicted mask size differs from the ground truth of image " +
                                               std::to_string(img));
      for (const auto& g : gts) ious[img][d].push_back(mask_iou(preds[d].mask, g.mask));
    }
    if (image_area == 0.0 && !gts.empty())
      image_area = static_cast<double>(gts[0].mask.height() * gts[0].mask.width());
    else if (image_area == 0.0 && !preds.empty())
      image_area = static_cast<double>(preds[0].mask.height() * preds[0].mask.width());
  }

  const double inf = std::numeric_limits<double>::infinity();
  const AreaRange all{0.0, inf};
  const AreaRange small{0.0, config.small_fraction * image_area};
  const AreaRange medium{config.small_fraction * image_area, config.medium_fraction * image_area};
  const AreaRange large{config.medium_fraction * image_area, inf};

  // Mean over (class, threshold) pairs with ground truth; nullopt if none.
  auto summarise = [&](AreaRange range, std::optional<std::size_t> only_threshold,
                       std::optional<std::size_t> only_class) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < kIouThresholds; ++t) {
      if (only_threshold && t != *only_threshold) continue;
      for (std::size_t c : classes) {
        if (only_class && c != *only_class) continue;
        bool defined = false;
        const double ap = average_precision(predictions, ground_truth, ious, c, range, iou_threshold(t),
                                            config.max_detections, defined);
        if (defined) sum += ap, ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };

  report.ap = summarise(all, std::nullopt, std::nullopt).value_or(0.0);
  for (std::size_t t = 0; t < kIouThresholds; ++t)
    report.ap_by_threshold.push_back(summarise(all, t, std::nullopt).value_or(0.0));
  report.ap50 = report.ap_by_threshold[0];
  report.ap75 = report.ap_by_threshold[5];
  report.ap_small = summarise(small, std::nullopt, std::nullopt);
  report.ap_medium = summarise(medium, std::nullopt, std::nullopt);
  report.ap_large = summarise(large, std::nullopt, std::nullopt);
  for (std::size_t c : classes) report.per_class[c] = summarise(all, std::nullopt, c);
  return report;
}

std::string EvalReport::to_json() const {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["AP"] = ap;
  j["AP50"] = ap50;
  j["AP75"] = ap75;
  j["AP_S"] = opt(ap_small);
  j["AP_M"] = opt(ap_medium);
  j["AP_L"] = opt(ap_large);
  json pc = json::object();
  for (const auto& [c, v] : per_class) pc[std::to_string(c)] = opt(v);
  j["per_class"] = pc;
  j["AP_by_threshold"] = ap_by_threshold;
  j["images"] = images;
  j["detections"] = detections;
  j["ground_truth"] = ground_truth;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "AP      AP50    AP75    AP_S    AP_M    AP_L\n"
     << fmt(ap) << "  " << fmt(ap50) << "  " << fmt(ap75) << "  " << fmt(ap_small) << "  " << fmt(ap_medium)
     << "  " << fmt(ap_large) << "\n";
  for (const auto& [c, v] : per_class) os << "class " << c << "  AP " << fmt(v) << "\n";
  os << images << " images, " << ground_truth << " objects, " << detections << " detections\n";
  return os.str();
}

}  // namespace polarseg
