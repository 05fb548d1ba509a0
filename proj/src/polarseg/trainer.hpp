#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "polarseg/losses.hpp"
#include "polarseg/network.hpp"
#include "polarseg/synthetic.hpp"
#include "polarseg/targets.hpp"

namespace polarseg {

struct TrainConfig {
  std::size_t steps = 6000;
  std::size_t batch = 8;  // scenes per step, accumulated one graph at a time
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t warmup_steps = 200;
  double warmup_ratio = 1.0 / 3.0;
  double clip_norm = 35.0;  // 0 disables clipping
  std::size_t checkpoint_every = 0;  // 0 keeps only the final checkpoint
  std::uint64_t seed = 0;  // data order
  LossWeights loss;
  bool implicit_coarse = false;
  AssignConfig assign;

  void validate() const;
  // Step-decay schedule: 10x drops at 2/3 and 8/9 of the budget, after a
  // linear warmup.
  double learning_rate(std::size_t step) const;
};

// Network input: image rescaled from [0, 1] to [-1, 1].
ad::Tensor network_input(const ad::Tensor& image);

struct TrainSample {
  ad::Tensor input;
  TargetSet targets;
};

std::vector<TrainSample> prepare_samples(const std::vector<SyntheticScene>& scenes, const ModelConfig& model,
                                         const AssignConfig& assign);

struct LossValues {
  double cls = 0, cnt = 0, coarse = 0, fine = 0, hbb = 0, total = 0;
};

struct SceneLoss {
  LossComponents parts;
  ad::Var total;
  LossValues values() const;
};

// All loss terms of one scene. Without the fine module the coarse radii are
// supervised through the `fine` slot at full weight.
SceneLoss scene_loss(const Model& model, const TrainSample& sample, const LossWeights& weights,
                     bool implicit_coarse);

// SGD with momentum and L2 weight decay on every trainable parameter.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  // One optimiser step on the mean loss of `batch`. Throws Divergence, with
  // the parameters untouched, if any loss or gradient is not finite.
  LossValues step(const std::vector<const TrainSample*>& batch);
  std::size_t steps_done() const { return step_; }

 private:
  Model& model_;
  TrainConfig config_;
  std::vector<ad::Tensor> velocity_;
  std::size_t step_ = 0;
};

struct TrainResult {
  std::vector<LossValues> log;  // one entry per step
};

using ProgressFn = std::function<void(std::size_t step, const LossValues&)>;

// Full training loop. With an output directory, writes loss_log.jsonl (one
// JSON object per step), periodic checkpoints under checkpoints/ and
// final.ckpt; on divergence, last_good.ckpt holds the parameters from
// before the failing step.
TrainResult train(Model& model, const std::vector<TrainSample>& samples, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const ProgressFn& progress = {});

std::string loss_log_line(std::size_t step, const LossValues& v);

}  // namespace polarseg
