#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polarseg/detection.hpp"
#include "polarseg/evaluation.hpp"
#include "polarseg/image_io.hpp"
#include "polarseg/run_config.hpp"
#include "polarseg/trainer.hpp"

namespace polarseg {

enum class Split { Train = 1, Eval = 2 };

// Scenes of one split generated from the run seed: split s uses the base
// seed scene_seed(seed, s).
std::vector<SyntheticScene> generate_split(const RunConfig& config, Split split);

// Writes <out>/train, <out>/eval and <out>/config.ini.
void generate_data(const RunConfig& config, const std::filesystem::path& out);

// Reads a dataset directory when given, otherwise generates the split.
std::vector<SyntheticScene> load_split(const RunConfig& config, Split split,
                                       const std::optional<std::filesystem::path>& data_dir);

// Freshly initialised from the run seed. `inference` drops the HBB branch.
std::unique_ptr<Model> build_model(const RunConfig& config, bool inference);
// Inference model with parameters from a checkpoint; HBB parameters in the
// file are skipped. Fails with CheckpointMismatch on any other disagreement.
std::unique_ptr<Model> load_model(const RunConfig& config, const std::filesystem::path& checkpoint);

// Trains `model` on `scenes`. With an output directory the resolved config is
// written next to the logs and checkpoints.
TrainResult run_training(const RunConfig& config, Model& model, const std::vector<SyntheticScene>& scenes,
                         const std::optional<std::filesystem::path>& out = std::nullopt,
                         const ProgressFn& progress = {});

std::vector<std::vector<Detection>> run_detection(const Model& model, const std::vector<SyntheticScene>& scenes,
                                                  const DecodeConfig& config);

EvalReport evaluate_detections(const std::vector<std::vector<Detection>>& detections,
                               const std::vector<SyntheticScene>& scenes, const EvalConfig& config);

// Builds a fresh model, trains it on `train` and evaluates on `eval`.
EvalReport train_and_evaluate(const RunConfig& config, const std::vector<SyntheticScene>& train,
                              const std::vector<SyntheticScene>& eval, const ProgressFn& progress = {});

// report.json, report.txt, predictions.jsonl and config.ini.
void write_eval_outputs(const std::filesystem::path& out, const RunConfig& config, const EvalReport& report,
                        const std::vector<std::vector<Detection>>& detections);

// Scene image with each detection's mask tinted by class and its outline
// drawn in white.
RgbImage render_overlay(const SyntheticScene& scene, const std::vector<Detection>& detections);

// detections.jsonl plus overlay_<scene>.ppm per scene, and config.ini.
void write_infer_outputs(const std::filesystem::path& out, const RunConfig& config,
                         const std::vector<SyntheticScene>& scenes,
                         const std::vector<std::vector<Detection>>& detections);

struct AlphaPoint {
  double alpha = 0.0;
  EvalReport report;
};

std::vector<double> alpha_grid();  // 0.3, 0.4, ..., 1.0
std::vector<AlphaPoint> sweep_alpha(const RunConfig& config, const std::vector<SyntheticScene>& train,
                                    const std::vector<SyntheticScene>& eval, const ProgressFn& progress = {});
std::string alpha_table(const std::vector<AlphaPoint>& points);
void write_sweep_outputs(const std::filesystem::path& out, const RunConfig& config,
                         const std::vector<AlphaPoint>& points);

// Parameter and MAC manifest (training and inference) of the configured
// model, as JSON.
std::string count_manifest(const RunConfig& config);

}  // namespace polarseg
