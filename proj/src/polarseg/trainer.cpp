#include "polarseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include <json.hpp>

#include "polarseg/checkpoint.hpp"
#include "polarseg/error.hpp"
#include "polarseg/io_util.hpp"
#include "polarseg/ops.hpp"

namespace polarseg {

namespace fs = std::filesystem;

namespace {

double value_of(const ad::Var& v) { return v ? v->value[0] : 0.0; }

bool all_finite(const ad::Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::ConfigInvalid, what); };
  if (steps < 1) bad("train.steps must be >= 1");
  if (batch < 1) bad("train.batch must be >= 1");
  if (!(lr > 0.0)) bad("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) bad("train.weight_decay must be >= 0");
  if (!(warmup_ratio > 0.0 && warmup_ratio <= 1.0)) bad("train.warmup_ratio must lie in (0, 1]");
  if (!(clip_norm >= 0.0)) bad("train.clip_norm must be >= 0");
  loss.validate();
}

double TrainConfig::learning_rate(std::size_t step) const {
  double rate = lr;
  if (step >= (2 * steps) / 3) rate *= 0.1;
  if (step >= (8 * steps) / 9) rate *= 0.1;
  if (step < warmup_steps) {
    const double t = static_cast<double>(step) / static_cast<double>(warmup_steps);
    rate *= warmup_ratio + (1.0 - warmup_ratio) * t;
  }
  return rate;
}

ad::Tensor network_input(const ad::Tensor& image) {
  ad::Tensor x = image;
  for (double& v : x.storage()) v = 2.0 * v - 1.0;
  return x;
}

std::vector<TrainSample> prepare_samples(const std::vector<SyntheticScene>& scenes, const ModelConfig& model,
                                         const AssignConfig& assign) {
  std::vector<TrainSample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    TrainSample t;
    t.input = network_input(s.image);
    t.targets = assign_targets(s.instances, s.image.dim(1), s.image.dim(2), model.fpn_levels, model.num_rays,
                               assign);
    out.push_back(std::move(t));
  }
  return out;
}

LossValues SceneLoss::values() const {
  LossValues v;
  v.cls = value_of(parts.cls);
  v.cnt = value_of(parts.cnt);
  v.coarse = value_of(parts.coarse);
  v.fine = value_of(parts.fine);
  v.hbb = value_of(parts.hbb);
  v.total = value_of(total);
  return v;
}

SceneLoss scene_loss(const Model& model, const TrainSample& sample, const LossWeights& weights,
                     bool implicit_coarse) {
  const auto& cfg = model.config();
  const auto& targets = sample.targets;
  if (targets.levels.size() != cfg.fpn_levels.size())
    fail(ErrorCode::ShapeMismatch, "targets were assigned for a different set of levels");

  ForwardOptions opt;
  std::vector<std::vector<std::size_t>> cells;
  for (const auto& l : targets.levels) cells.push_back(l.positives);
  opt.fine_cells = cells;
  opt.run_hbb = cfg.hbb_enabled;
  const HeadOutputs out = model.forward(sample.input, opt);

  std::vector<ad::Var> cls_logits, cnt_logits, coarse, fine;
  std::vector<double> cls_targets, cnt_targets, radius_targets;
  for (std::size_t l = 0; l < out.levels.size(); ++l) {
    const auto& lo = out.levels[l];
    const auto& lt = targets.levels[l];
    if (lt.height != lo.height || lt.width != lo.width)
      fail(ErrorCode::ShapeMismatch, "target grid of level " + lo.name + " does not match the model output");
    cls_logits.push_back(ad::reshape(lo.cls_logits, {lo.cls_logits->value.size()}));
    const auto cm = lt.class_map(cfg.num_classes);
    cls_targets.insert(cls_targets.end(), cm.values().begin(), cm.values().end());
    if (lt.positives.empty()) continue;
    cnt_logits.push_back(ad::reshape(ad::gather_cells(lo.centerness_logits, lt.positives), {lt.positives.size()}));
    cnt_targets.insert(cnt_targets.end(), lt.centerness.begin(), lt.centerness.end());
    coarse.push_back(ad::gather_cells(lo.coarse_radii, lt.positives));
    fine.push_back(lo.fine_radii);
    radius_targets.insert(radius_targets.end(), lt.radii.values().begin(), lt.radii.values().end());
  }

  SceneLoss loss;
  const std::size_t n_cls = cls_targets.size();
  loss.parts.cls = focal_loss(ad::concat_rows(cls_logits), ad::Tensor({n_cls}, std::move(cls_targets)),
                              weights.gamma, weights.focal_balance);
  if (!cnt_targets.empty()) {
    const std::size_t P = cnt_targets.size();
    const ad::Tensor radii({P, cfg.num_rays}, std::move(radius_targets));
    loss.parts.cnt = centerness_bce(ad::concat_rows(cnt_logits), ad::Tensor({P}, cnt_targets));
    // Regression rows are weighted by their centerness targets.
    auto iou = [&](const std::vector<ad::Var>& pred) {
      return polar_iou_loss(ad::concat_rows(pred), radii, cnt_targets);
    };
    if (cfg.fine_enabled) {
      loss.parts.coarse = iou(coarse);
      loss.parts.fine = iou(fine);
    } else {
      loss.parts.fine = iou(coarse);
    }
  }
  if (out.hbb_logits) {
    const auto& b = targets.boundary;
    ad::Tensor map({1, 1, b.height(), b.width()});
    for (std::size_t i = 0; i < b.bits().size(); ++i) map[i] = b.bits()[i];
    if (map.size() != out.hbb_logits->value.size())
      fail(ErrorCode::ShapeMismatch, "boundary target does not match the boundary branch output");
    loss.parts.hbb = focal_loss(out.hbb_logits, map, weights.gamma, weights.focal_balance);
  }
  loss.total = total_loss(loss.parts, weights.alpha, implicit_coarse);
  return loss;
}

Trainer::Trainer(Model& model, TrainConfig config) : model_(model), config_(std::move(config)) {
  config_.validate();
  for (const auto& p : model_.parameters().all()) velocity_.emplace_back(p.value.shape());
}

LossValues Trainer::step(const std::vector<const TrainSample*>& batch) {
  if (batch.empty()) fail(ErrorCode::InvalidArgument, "empty training batch");
  auto& params = model_.parameters();
  params.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossValues mean;
  for (const TrainSample* s : batch) {
    SceneLoss l = scene_loss(model_, *s, config_.loss, config_.implicit_coarse);
    const LossValues v = l.values();
    if (!std::isfinite(v.total))
      fail(ErrorCode::Divergence, "non-finite loss at step " + std::to_string(step_));
    mean.cls += inv * v.cls;
    mean.cnt += inv * v.cnt;
    mean.coarse += inv * v.coarse;
    mean.fine += inv * v.fine;
    mean.hbb += inv * v.hbb;
    mean.total += inv * v.total;
    ad::backward(ad::scale(l.total, inv));
  }

  double sq = 0.0;
  for (const auto& p : params.all()) {
    if (!p.trainable) continue;
    if (!all_finite(p.grad)) fail(ErrorCode::Divergence, "non-finite gradient in " + p.name);
    for (double g : p.grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  const double lr = config_.learning_rate(step_);
  std::size_t i = 0;
  for (auto& p : params.all()) {
    auto& vel = velocity_[i++];
    if (!p.trainable) continue;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = clip * p.grad[k] + config_.weight_decay * p.value[k];
      vel[k] = config_.momentum * vel[k] + g;
      p.value[k] -= lr * vel[k];
    }
  }
  ++step_;
  return mean;
}

std::string loss_log_line(std::size_t step, const LossValues& v) {
  nlohmann::json j;
  j["step"] = step;
  j["cls"] = v.cls;
  j["cnt"] = v.cnt;
  j["coarse"] = v.coarse;
  j["fine"] = v.fine;
  j["hbb"] = v.hbb;
  j["total"] = v.total;
  return j.dump();
}

TrainResult train(Model& model, const std::vector<TrainSample>& samples, const TrainConfig& config,
                  const std::optional<fs::path>& out_dir, const ProgressFn& progress) {
  config.validate();
  if (samples.empty()) fail(ErrorCode::InvalidArgument, "no training samples");
  Trainer trainer(model, config);
  TrainResult result;
  std::ostringstream log;

  auto flush_log = [&] {
    if (out_dir) write_text_atomically(*out_dir / "loss_log.jsonl", log.str());
  };

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::size_t cursor = order.size();
  for (std::size_t s = 0; s < config.steps; ++s) {
    std::vector<const TrainSample*> batch;
    while (batch.size() < config.batch) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&samples[order[cursor++]]);
    }
    LossValues v;
    try {
      v = trainer.step(batch);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Divergence && out_dir) {
        ad::save_checkpoint(model.parameters(), *out_dir / "last_good.ckpt");
        flush_log();
      }
      throw;
    }
    result.log.push_back(v);
    log << loss_log_line(s, v) << '\n';
    if (progress) progress(s, v);
    if (out_dir && config.checkpoint_every && (s + 1) % config.checkpoint_every == 0 && s + 1 < config.steps) {
      char name[40];
      std::snprintf(name, sizeof name, "step_%07zu.ckpt", s + 1);
      ad::save_checkpoint(model.parameters(), *out_dir / "checkpoints" / name);
      flush_log();
    }
  }
  if (out_dir) {
    ad::save_checkpoint(model.parameters(), *out_dir / "final.ckpt");
    flush_log();
  }
  return result;
}

}  // namespace polarseg
