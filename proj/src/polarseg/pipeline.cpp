#include "polarseg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "polarseg/boundary_targets.hpp"
#include "polarseg/checkpoint.hpp"
#include "polarseg/dataset.hpp"
#include "polarseg/error.hpp"
#include "polarseg/io_util.hpp"

namespace polarseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* split_name(Split s) { return s == Split::Train ? "train" : "eval"; }

std::size_t split_count(const RunConfig& c, Split s) { return s == Split::Train ? c.train_count : c.eval_count; }

std::vector<std::vector<ScoredMask>> scored_masks(const std::vector<std::vector<Detection>>& detections,
                                                  const std::vector<SyntheticScene>& scenes) {
  std::vector<std::vector<ScoredMask>> out(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const std::size_t h = scenes[i].image.dim(1), w = scenes[i].image.dim(2);
    for (const auto& d : detections[i]) out[i].push_back(to_scored_mask(d, h, w));
  }
  return out;
}

std::string scene_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace

std::vector<SyntheticScene> generate_split(const RunConfig& config, Split split) {
  config.data.validate();
  return generate_scenes(scene_seed(config.seed, static_cast<std::uint64_t>(split)), split_count(config, split),
                         config.data);
}

void generate_data(const RunConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(out);
  for (Split s : {Split::Train, Split::Eval})
    write_dataset(out / split_name(s), scene_seed(config.seed, static_cast<std::uint64_t>(s)), config.data,
                  generate_split(config, s));
  write_text_atomically(out / "config.ini", config.to_ini());
}

std::vector<SyntheticScene> load_split(const RunConfig& config, Split split,
                                       const std::optional<fs::path>& data_dir) {
  if (!data_dir) return generate_split(config, split);
  const fs::path dir = fs::exists(*data_dir / split_name(split)) ? *data_dir / split_name(split) : *data_dir;
  auto scenes = read_dataset(dir);
  for (const auto& s : scenes)
    if (s.image.dim(1) != config.data.height || s.image.dim(2) != config.data.width)
      fail(ErrorCode::ConfigInvalid, dir.string() + ": scene size differs from data.height x data.width");
  return scenes;
}

std::unique_ptr<Model> build_model(const RunConfig& config, bool inference) {
  ModelConfig mc = config.model;
  if (inference) mc.hbb_enabled = false;
  return std::make_unique<Model>(mc, config.seed);
}

std::unique_ptr<Model> load_model(const RunConfig& config, const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) fail(ErrorCode::Io, checkpoint.string() + ": checkpoint not found");
  auto model = build_model(config, true);
  ad::load_checkpoint(model->parameters(), checkpoint, true);
  return model;
}

TrainResult run_training(const RunConfig& config, Model& model, const std::vector<SyntheticScene>& scenes,
                         const std::optional<fs::path>& out, const ProgressFn& progress) {
  config.validate();
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  const auto samples = prepare_samples(scenes, model.config(), tc.assign);
  if (out) {
    fs::create_directories(*out);
    write_text_atomically(*out / "config.ini", config.to_ini());
  }
  return train(model, samples, tc, out, progress);
}

std::vector<std::vector<Detection>> run_detection(const Model& model, const std::vector<SyntheticScene>& scenes,
                                                  const DecodeConfig& config) {
  std::vector<std::vector<Detection>> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(detect(model, network_input(s.image), config));
  return out;
}

EvalReport evaluate_detections(const std::vector<std::vector<Detection>>& detections,
                               const std::vector<SyntheticScene>& scenes, const EvalConfig& config) {
  std::vector<std::vector<SceneInstance>> gts;
  for (const auto& s : scenes) gts.push_back(s.instances);
  return evaluate(scored_masks(detections, scenes), gts, config);
}

EvalReport train_and_evaluate(const RunConfig& config, const std::vector<SyntheticScene>& train,
                              const std::vector<SyntheticScene>& eval, const ProgressFn& progress) {
  auto model = build_model(config, false);
  run_training(config, *model, train, std::nullopt, progress);
  return evaluate_detections(run_detection(*model, eval, config.decode), eval, config.eval);
}

void write_eval_outputs(const fs::path& out, const RunConfig& config, const EvalReport& report,
                        const std::vector<std::vector<Detection>>& detections) {
  fs::create_directories(out);
  write_text_atomically(out / "report.json", report.to_json() + "\n");
  write_text_atomically(out / "report.txt", report.to_table());
  write_atomically(out / "predictions.jsonl", [&](std::ostream& os) {
    for (std::size_t i = 0; i < detections.size(); ++i)
      for (const auto& d : detections[i]) {
        json j = json::parse(detection_json_line(d));
        j["scene"] = i;
        os << j.dump() << "\n";
      }
  });
  write_text_atomically(out / "config.ini", config.to_ini());
}

RgbImage render_overlay(const SyntheticScene& scene, const std::vector<Detection>& detections) {
  static const std::uint8_t tints[][3] = {{255, 220, 0}, {0, 230, 230}, {255, 0, 200}, {255, 128, 0}};
  const std::size_t h = scene.image.dim(1), w = scene.image.dim(2), hw = h * w;
  RgbImage img;
  img.height = h;
  img.width = w;
  img.pixels.resize(hw * 3);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::clamp(scene.image[c * hw + p], 0.0, 1.0) * 255.0 + 0.5);

  // Lowest score first so the strongest detections end up on top.
  std::vector<const Detection*> order;
  for (const auto& d : detections) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->score < b->score; });
  for (const Detection* d : order) {
    const auto& tint = tints[(d->class_id - 1) % 4];
    const BitMask& m = d->mask(h, w);
    for (std::size_t p = 0; p < hw; ++p) {
      if (!m.bits()[p]) continue;
      for (std::size_t c = 0; c < 3; ++c)
        img.pixels[p * 3 + c] = static_cast<std::uint8_t>((img.pixels[p * 3 + c] + tint[c]) / 2);
    }
    for (const auto& contour : trace_outer_borders(m))
      for (const auto& px : contour) {
        const std::size_t p = static_cast<std::size_t>(px.row) * w + static_cast<std::size_t>(px.col);
        img.pixels[p * 3] = img.pixels[p * 3 + 1] = img.pixels[p * 3 + 2] = 255;
      }
  }
  return img;
}

void write_infer_outputs(const fs::path& out, const RunConfig& config, const std::vector<SyntheticScene>& scenes,
                         const std::vector<std::vector<Detection>>& detections) {
  build_directory_atomically(out, [&](const fs::path& tmp) {
    std::ofstream os(tmp / "detections.jsonl");
    for (std::size_t i = 0; i < detections.size(); ++i) {
      for (const auto& d : detections[i]) {
        json j = json::parse(detection_json_line(d));
        j["scene"] = i;
        os << j.dump() << "\n";
      }
      write_ppm(tmp / ("overlay_" + scene_tag(i) + ".ppm"), render_overlay(scenes[i], detections[i]));
    }
    if (!os) fail(ErrorCode::Io, (tmp / "detections.jsonl").string() + ": write failed");
    std::ofstream(tmp / "config.ini") << config.to_ini();
  });
}

std::vector<double> alpha_grid() {
  std::vector<double> out;
  for (int i = 3; i <= 10; ++i) out.push_back(i / 10.0);
  return out;
}

std::vector<AlphaPoint> sweep_alpha(const RunConfig& config, const std::vector<SyntheticScene>& train,
                                    const std::vector<SyntheticScene>& eval, const ProgressFn& progress) {
  std::vector<AlphaPoint> out;
  for (double a : alpha_grid()) {
    RunConfig c = config;
    c.train.loss.alpha = a;
    out.push_back({a, train_and_evaluate(c, train, eval, progress)});
  }
  return out;
}

std::string alpha_table(const std::vector<AlphaPoint>& points) {
  std::ostringstream os;
  os << "alpha  AP      AP50    AP75\n";
  char buf[96];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.1f    %.4f  %.4f  %.4f\n", p.alpha, p.report.ap, p.report.ap50,
                  p.report.ap75);
    os << buf;
  }
  return os.str();
}

void write_sweep_outputs(const fs::path& out, const RunConfig& config, const std::vector<AlphaPoint>& points) {
  fs::create_directories(out);
  json rows = json::array();
  for (const auto& p : points)
    rows.push_back({{"alpha", p.alpha}, {"AP", p.report.ap}, {"AP50", p.report.ap50}, {"AP75", p.report.ap75}});
  write_text_atomically(out / "sweep.json", rows.dump(2) + "\n");
  write_text_atomically(out / "sweep.txt", alpha_table(points));
  write_text_atomically(out / "config.ini", config.to_ini());
}

std::string count_manifest(const RunConfig& config) {
  config.validate();
  const auto train_model = build_model(config, false);
  const auto infer_model = build_model(config, true);
  json j;
  j["fpn_channels"] = config.model.fpn_channels;
  j["rays"] = config.model.num_rays;
  j["height"] = config.data.height;
  j["width"] = config.data.width;
  std::size_t total = 0;
  json params = json::object();
  for (const auto& [g, n] : train_model->count_params()) {
    params[g] = n;
    total += n;
  }
  j["params"] = params;
  j["params_total"] = total;
  j["params_manifest_total"] = ad::manifest_total(ad::make_manifest(train_model->parameters()));
  for (auto [key, model, inference] : {std::tuple{"macs_train", train_model.get(), false},
                                       std::tuple{"macs_inference", infer_model.get(), true}}) {
    json m = json::object();
    double sum = 0.0;
    for (const auto& [g, v] : model->count_macs(config.data.height, config.data.width, inference)) {
      m[g] = v;
      sum += v;
    }
    j[key] = m;
    j[std::string(key) + "_total"] = sum;
  }
  return j.dump(2);
}

}  // namespace polarseg
