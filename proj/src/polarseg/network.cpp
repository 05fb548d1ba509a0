#include "polarseg/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polarseg/error.hpp"
#include "polarseg/ops.hpp"
#include "polarseg/polar_codec.hpp"

namespace polarseg {

namespace {

constexpr double kPriorProbability = 0.01;

bool is_power_of_two(std::size_t v) { return v && !(v & (v - 1)); }

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

double MacCounter::total() const {
  double t = 0.0;
  for (const auto& [_, v] : by_group) t += v;
  return t;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::ConfigInvalid, what); };
  if (num_classes < 1) bad("num_classes must be >= 1");
  if (num_rays < 3) bad("num_rays must be >= 3");
  if (fpn_channels < 1) bad("fpn_channels must be >= 1");
  if (backbone_widths.empty()) bad("backbone needs at least a stem width");
  if (fpn_levels.empty()) bad("at least one pyramid level is required");
  for (std::size_t i = 0; i < fpn_levels.size(); ++i) {
    const auto s = fpn_levels[i].stride;
    if (!is_power_of_two(s) || s < 2) bad("level strides must be powers of two >= 2");
    if (i && s != 2 * fpn_levels[i - 1].stride) bad("level strides must double from level to level");
  }
  if (fpn_levels[0].stride > backbone_max_stride())
    bad("the first pyramid level needs a backbone stage of the same stride");
  if (hbb_enabled && fpn_levels[0].name != "P3") bad("the boundary branch attaches to P3, the first level");
  if (hbb_enabled && hbb_widths.empty()) bad("boundary branch needs at least one conv");
  if (!(radius_prior > 0.0)) bad("radius_prior must be positive");
}

std::size_t ModelConfig::backbone_max_stride() const {
  return std::size_t{1} << backbone_widths.size();
}

std::vector<LevelSpec> ModelConfig::levels_from_strides(const std::vector<std::size_t>& strides) {
  std::vector<LevelSpec> out;
  for (std::size_t i = 0; i < strides.size(); ++i) out.push_back({"P" + std::to_string(3 + i), strides[i]});
  return out;
}

// Binds each parameter to one leaf per forward pass, so weights shared across
// levels appear once in the graph.
class Model::Binder {
 public:
  ad::Var operator()(ad::Parameter* p) {
    if (!p) return nullptr;
    auto it = bound_.find(p);
    if (it != bound_.end()) return it->second;
    return bound_[p] = ad::param(*p);
  }

 private:
  std::unordered_map<ad::Parameter*, ad::Var> bound_;
};

ConvSpec& Model::add_conv(const std::string& name, const std::string& group, std::size_t in,
                          std::size_t out, std::size_t kernel, std::size_t stride, bool bias) {
  ConvSpec c;
  c.group = group;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.stride = stride;
  c.padding = kernel / 2;
  c.weight = &params_.add(name + ".weight", group, {out, in, kernel, kernel});
  if (bias) c.bias = &params_.add(name + ".bias", group, {out});
  convs_.push_back(c);
  return convs_.back();
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  const auto& cfg = config_;
  const std::size_t F = cfg.fpn_channels, n = cfg.num_rays;
  convs_.reserve(64);

  // Backbone.
  add_conv("backbone.stem", "backbone", 3, cfg.backbone_widths[0], 3, 2);
  backbone_.push_back(convs_.size() - 1);
  stage_end_.push_back(convs_.size() - 1);
  for (std::size_t k = 1; k < cfg.backbone_widths.size(); ++k) {
    const auto name = "backbone.stage" + std::to_string(k);
    add_conv(name + ".down", "backbone", cfg.backbone_widths[k - 1], cfg.backbone_widths[k], 3, 2);
    backbone_.push_back(convs_.size() - 1);
    add_conv(name + ".conv", "backbone", cfg.backbone_widths[k], cfg.backbone_widths[k], 3, 1);
    backbone_.push_back(convs_.size() - 1);
    stage_end_.push_back(convs_.size() - 1);
  }

  // Pyramid: laterals and output convs where a backbone stage exists, strided
  // 1x1 convs above it.
  for (const auto& lv : cfg.fpn_levels) {
    if (lv.stride <= cfg.backbone_max_stride()) {
      const auto stage = static_cast<std::size_t>(std::log2(static_cast<double>(lv.stride))) - 1;
      add_conv("fpn.lateral." + lv.name, "fpn", cfg.backbone_widths[stage], F, 1, 1);
      fpn_lateral_[lv.name] = convs_.size() - 1;
      add_conv("fpn.output." + lv.name, "fpn", F, F, 3, 1);
      fpn_output_[lv.name] = convs_.size() - 1;
    } else {
      add_conv("fpn.extra." + lv.name, "fpn", F, F, 1, 2);
      fpn_extra_[lv.name] = convs_.size() - 1;
    }
  }

  // Shared heads.
  for (std::size_t i = 0; i < cfg.head_convs; ++i) {
    add_conv("head.cls.trunk" + std::to_string(i), "cls_head", F, F, 3, 1);
    cls_trunk_.push_back(convs_.size() - 1);
  }
  add_conv("head.cls.logits", "cls_head", F, cfg.num_classes, 1, 1);
  cls_logits_ = convs_.size() - 1;
  add_conv("head.cls.centerness", "cls_head", F, 1, 1, 1);
  centerness_ = convs_.size() - 1;
  for (std::size_t i = 0; i < cfg.head_convs; ++i) {
    add_conv("head.reg.trunk" + std::to_string(i), "reg_head", F, F, 3, 1);
    reg_trunk_.push_back(convs_.size() - 1);
  }
  add_conv("head.reg.radii", "reg_head", F, n, 1, 1);
  radii_ = convs_.size() - 1;
  for (const auto& lv : cfg.fpn_levels)
    coarse_scales_.push_back(&params_.add("scales.coarse." + lv.name, "coarse_scales", {1}));

  if (cfg.fine_enabled) {
    if (cfg.regressor == RegressorKind::Grouped) {
      fine_weight_ = &params_.add("head.fine.weight", "fine", {n, F});
      fine_bias_ = &params_.add("head.fine.bias", "fine", {n});
    } else {
      add_conv("head.fine", "fine", n * F, n, 1, 1);
      fine_standard_ = convs_.size() - 1;
      fine_weight_ = convs_.back().weight;
      fine_bias_ = convs_.back().bias;
    }
    for (const auto& lv : cfg.fpn_levels)
      fine_scales_.push_back(&params_.add("scales.fine." + lv.name, "fine_scales", {1}));
  }

  if (cfg.hbb_enabled) {
    std::size_t in = F;
    for (std::size_t i = 0; i < cfg.hbb_widths.size(); ++i) {
      add_conv("hbb.conv" + std::to_string(i), "hbb", in, cfg.hbb_widths[i], 3, 1);
      hbb_stack_.push_back(convs_.size() - 1);
      in = cfg.hbb_widths[i];
    }
    add_conv("hbb.logits", "hbb", in, 1, 1, 1);
    hbb_logits_ = convs_.size() - 1;
  }

  initialise(init_seed);
}

void Model::initialise(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto normal = [&rng](ad::Tensor& t, double stddev) {
    std::normal_distribution<double> d(0.0, stddev);
    for (double& v : t.storage()) v = d(rng);
  };
  const double prior_bias = -std::log((1.0 - kPriorProbability) / kPriorProbability);
  std::vector<std::size_t> predictors{cls_logits_, centerness_, radii_};
  if (config_.hbb_enabled) predictors.push_back(hbb_logits_);

  for (std::size_t i = 0; i < convs_.size(); ++i) {
    auto& c = convs_[i];
    if (config_.fine_enabled && config_.regressor == RegressorKind::Standard && i == fine_standard_)
      continue;  // zero-initialised below
    const bool predictor = std::find(predictors.begin(), predictors.end(), i) != predictors.end();
    const double fan_in = static_cast<double>(c.in * c.kernel * c.kernel);
    normal(c.weight->value, predictor ? 0.01 : std::sqrt(2.0 / fan_in));
    if (c.bias) c.bias->value.fill(0.0);
  }
  convs_[cls_logits_].bias->value.fill(prior_bias);
  convs_[radii_].bias->value.fill(std::log(config_.radius_prior));
  if (config_.hbb_enabled) convs_[hbb_logits_].bias->value.fill(prior_bias);
  for (auto* s : coarse_scales_) s->value.fill(1.0);
  for (auto* s : fine_scales_) s->value.fill(1.0);
  if (fine_weight_) fine_weight_->value.fill(0.0);
  if (fine_bias_) fine_bias_->value.fill(0.0);
}

ad::Var Model::apply(Binder& b, const ConvSpec& c, const ad::Var& x, MacCounter* macs) const {
  ad::Var y = ad::conv2d(x, b(c.weight), b(c.bias), c.stride, c.padding);
  if (macs) {
    const auto& s = y->shape();
    macs->add(c.group, static_cast<double>(s[1] * s[2] * s[3] * c.in * c.kernel * c.kernel));
  }
  return y;
}

FeaturePyramid Model::build_pyramid(Binder& b, const ad::Var& image, MacCounter* macs) const {
  const auto& cfg = config_;
  const auto& s = image->shape();
  if (s.size() != 4 || s[1] != 3) fail(ErrorCode::ShapeMismatch, "model input must be a 3-channel image");
  const std::size_t top = cfg.backbone_max_stride();
  if (s[2] % top || s[3] % top)
    fail(ErrorCode::ShapeMismatch, "image size must be a multiple of " + std::to_string(top));

  std::vector<ad::Var> stages;
  ad::Var x = image;
  std::size_t next_stage = 0;
  for (std::size_t idx : backbone_) {
    x = ad::relu(apply(b, convs_[idx], x, macs));
    if (idx == stage_end_[next_stage]) {
      stages.push_back(x);
      ++next_stage;
    }
  }

  // Top-down merge over the backbone-backed levels, finest first in output.
  FeaturePyramid pyr;
  pyr.levels.resize(cfg.fpn_levels.size());
  ad::Var above;
  for (std::size_t i = cfg.fpn_levels.size(); i-- > 0;) {
    const auto& lv = cfg.fpn_levels[i];
    auto it = fpn_lateral_.find(lv.name);
    if (it == fpn_lateral_.end()) continue;
    const auto stage = static_cast<std::size_t>(std::log2(static_cast<double>(lv.stride))) - 1;
    ad::Var merged = apply(b, convs_[it->second], stages[stage], macs);
    if (above) {
      const auto& ms = merged->shape();
      merged = ad::add(merged, ad::upsample_nearest(above, ms[2], ms[3]));
    }
    above = merged;
    pyr.levels[i] = apply(b, convs_[fpn_output_.at(lv.name)], merged, macs);
  }
  for (std::size_t i = 0; i < cfg.fpn_levels.size(); ++i) {
    auto it = fpn_extra_.find(cfg.fpn_levels[i].name);
    if (it != fpn_extra_.end()) pyr.levels[i] = apply(b, convs_[it->second], pyr.levels[i - 1], macs);
  }
  return pyr;
}

ad::Var fine_module(const FineModuleInputs& in) {
  const auto& fs = in.features->shape();
  const auto& rs = in.coarse_radii->shape();
  const std::size_t F = fs[1], H = fs[2], W = fs[3], n = rs[1];
  if (in.cells.empty()) return ad::constant(ad::Tensor({0, n}));

  ad::Var coarse = ad::gather_cells(in.coarse_radii, in.cells);  // [P, n]
  std::vector<double> xs, ys;
  xs.reserve(in.cells.size());
  ys.reserve(in.cells.size());
  for (auto c : in.cells) {
    xs.push_back(static_cast<double>(c % W));
    ys.push_back(static_cast<double>(c / W));
  }
  ad::Var ray_source = in.detach_coords ? ad::detach(coarse) : coarse;
  ad::Var points = ad::polar_to_grid(ray_source, xs, ys, static_cast<double>(in.stride));
  ad::Var sampled = ad::bilinear_sample(ad::reshape(in.features, {F, H, W}), points);  // [P*n, F]
  const std::size_t P = in.cells.size();
  ad::Var grouped = ad::reshape(sampled, {P, n * F, 1, 1});
  ad::Var corr = in.regressor == RegressorKind::Grouped
                     ? ad::grouped_conv1x1(grouped, in.weight, in.bias, n)
                     : ad::conv2d(grouped, in.weight, in.bias, 1, 0);
  corr = ad::scalar_scale(ad::reshape(corr, {P, n}), in.scale);
  return ad::clamp_min(ad::add(coarse, corr), kMinRadius);
}

LevelOutputs Model::run_heads(Binder& b, const ad::Var& features, std::size_t level,
                              const std::vector<std::size_t>* cells, MacCounter* macs) const {
  const auto& cfg = config_;
  const auto& lv = cfg.fpn_levels[level];
  LevelOutputs out;
  out.name = lv.name;
  out.stride = lv.stride;
  out.height = features->shape()[2];
  out.width = features->shape()[3];
  out.features = features;

  ad::Var t = features;
  for (auto idx : cls_trunk_) t = ad::relu(apply(b, convs_[idx], t, macs));
  out.cls_logits = apply(b, convs_[cls_logits_], t, macs);
  out.centerness_logits = apply(b, convs_[centerness_], t, macs);

  ad::Var r = features;
  for (auto idx : reg_trunk_) r = ad::relu(apply(b, convs_[idx], r, macs));
  r = apply(b, convs_[radii_], r, macs);
  out.coarse_radii = ad::exp(ad::scalar_scale(r, b(coarse_scales_[level])));

  const std::size_t HW = out.height * out.width;
  if (cells) {
    out.fine_cells = *cells;
  } else {
    out.fine_cells.resize(HW);
    for (std::size_t i = 0; i < HW; ++i) out.fine_cells[i] = i;
  }

  if (!cfg.fine_enabled) {
    out.fine_radii = out.fine_cells.empty() ? ad::constant(ad::Tensor({0, cfg.num_rays}))
                                            : ad::gather_cells(out.coarse_radii, out.fine_cells);
    return out;
  }
  FineModuleInputs fin;
  fin.features = features;
  fin.coarse_radii = out.coarse_radii;
  fin.cells = out.fine_cells;
  fin.stride = lv.stride;
  fin.weight = b(fine_weight_);
  fin.bias = b(fine_bias_);
  fin.scale = b(fine_scales_[level]);
  fin.regressor = cfg.regressor;
  fin.detach_coords = cfg.detach_sampling_coords;
  out.fine_radii = fine_module(fin);
  if (macs) {
    const double points = static_cast<double>(out.fine_cells.size() * cfg.num_rays);
    const double F = static_cast<double>(cfg.fpn_channels);
    const double regress = cfg.regressor == RegressorKind::Grouped ? F : F * static_cast<double>(cfg.num_rays);
    macs->add("fine", points * 4.0 * F + points * regress);
  }
  return out;
}

HeadOutputs Model::forward(const ad::Tensor& image, const ForwardOptions& options) const {
  if (image.rank() != 3 || image.dim(0) != 3)
    fail(ErrorCode::ShapeMismatch, "model input must be [3, H, W], got " + ad::shape_string(image.shape()));
  if (options.fine_cells && options.fine_cells->size() != config_.fpn_levels.size())
    fail(ErrorCode::ShapeMismatch, "fine cells must be given for every level");
  Binder b;
  ad::Var x = ad::constant(image.reshaped({1, 3, image.dim(1), image.dim(2)}));
  FeaturePyramid pyr = build_pyramid(b, x, options.macs);
  HeadOutputs out;
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
    const std::vector<std::size_t>* cells = options.fine_cells ? &(*options.fine_cells)[l] : nullptr;
    out.levels.push_back(run_heads(b, pyr.levels[l], l, cells, options.macs));
  }
  if (config_.hbb_enabled && options.run_hbb) {
    ad::Var h = pyr.levels[0];
    for (auto idx : hbb_stack_) h = ad::relu(apply(b, convs_[idx], h, options.macs));
    out.hbb_logits = apply(b, convs_[hbb_logits_], h, options.macs);
  }
  return out;
}

std::map<std::string, std::size_t> Model::count_params() const {
  std::map<std::string, std::size_t> out;
  for (const auto& p : params_.all()) out[p.group] += p.value.size();
  return out;
}

std::map<std::string, double> Model::count_macs(std::size_t height, std::size_t width,
                                                bool inference) const {
  const auto& cfg = config_;
  std::map<std::string, double> out;
  auto conv = [&](const ConvSpec& c, std::size_t& h, std::size_t& w) {
    h = conv_out(h, c.kernel, c.stride, c.padding);
    w = conv_out(w, c.kernel, c.stride, c.padding);
    out[c.group] += static_cast<double>(h * w * c.out * c.in * c.kernel * c.kernel);
  };

  std::size_t h = height, w = width;
  std::vector<std::pair<std::size_t, std::size_t>> stage_sizes;
  std::size_t next_stage = 0;
  for (auto idx : backbone_) {
    conv(convs_[idx], h, w);
    if (idx == stage_end_[next_stage]) {
      stage_sizes.emplace_back(h, w);
      ++next_stage;
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> level_sizes(cfg.fpn_levels.size());
  for (std::size_t i = 0; i < cfg.fpn_levels.size(); ++i) {
    const auto& lv = cfg.fpn_levels[i];
    if (auto it = fpn_lateral_.find(lv.name); it != fpn_lateral_.end()) {
      const auto stage = static_cast<std::size_t>(std::log2(static_cast<double>(lv.stride))) - 1;
      auto [lh, lw] = stage_sizes[stage];
      conv(convs_[it->second], lh, lw);
      conv(convs_[fpn_output_.at(lv.name)], lh, lw);
      level_sizes[i] = {lh, lw};
    } else {
      auto [lh, lw] = level_sizes[i - 1];
      conv(convs_[fpn_extra_.at(lv.name)], lh, lw);
      level_sizes[i] = {lh, lw};
    }
  }
  for (std::size_t i = 0; i < level_sizes.size(); ++i) {
    const auto [lh, lw] = level_sizes[i];
    for (auto idx : cls_trunk_) {
      auto a = lh, b = lw;
      conv(convs_[idx], a, b);
    }
    for (auto idx : {cls_logits_, centerness_, radii_}) {
      auto a = lh, b = lw;
      conv(convs_[idx], a, b);
    }
    for (auto idx : reg_trunk_) {
      auto a = lh, b = lw;
      conv(convs_[idx], a, b);
    }
    if (cfg.fine_enabled) {
      const double points = static_cast<double>(lh * lw * cfg.num_rays);
      const double F = static_cast<double>(cfg.fpn_channels);
      const double regress =
          cfg.regressor == RegressorKind::Grouped ? F : F * static_cast<double>(cfg.num_rays);
      out["fine"] += points * 4.0 * F + points * regress;
    }
  }
  if (cfg.hbb_enabled && !inference) {
    auto [a, b] = level_sizes[0];
    for (auto idx : hbb_stack_) conv(convs_[idx], a, b);
    conv(convs_[hbb_logits_], a, b);
  }
  return out;
}

}  // namespace polarseg
