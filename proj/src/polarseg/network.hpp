#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "polarseg/autodiff.hpp"

namespace polarseg {

struct LevelSpec {
  std::string name;
  std::size_t stride = 0;
};

enum class RegressorKind { Grouped, Standard };

struct ModelConfig {
  std::size_t num_classes = 3;
  std::size_t num_rays = 36;
  std::vector<LevelSpec> fpn_levels = {{"P3", 4}, {"P4", 8}, {"P5", 16}};
  std::size_t fpn_channels = 32;
  std::size_t head_convs = 4;
  // Stem plus one stride-2 stage per further entry; stage k has stride 2^(k+1).
  std::vector<std::size_t> backbone_widths = {16, 32, 48, 64};
  bool hbb_enabled = true;
  std::vector<std::size_t> hbb_widths = {128, 64, 64, 64};
  bool fine_enabled = true;
  bool detach_sampling_coords = false;
  RegressorKind regressor = RegressorKind::Grouped;
  // Initial radius (pixels) produced by the coarse head before training.
  double radius_prior = 10.0;

  void validate() const;
  std::size_t backbone_max_stride() const;
  // Level names P<k> for the given strides, starting at P3.
  static std::vector<LevelSpec> levels_from_strides(const std::vector<std::size_t>& strides);
};

// [1, F, H_l, W_l] per level.
struct FeaturePyramid {
  std::vector<ad::Var> levels;
};

struct LevelOutputs {
  std::string name;
  std::size_t stride = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  ad::Var features;           // [1, F, H, W]
  ad::Var cls_logits;         // [1, K, H, W]
  ad::Var centerness_logits;  // [1, 1, H, W]
  ad::Var coarse_radii;       // [1, n, H, W], pixels, > 0
  // Refined radii [P, n] at `fine_cells` (flat indices i * W + j). Equal to
  // the coarse radii at those cells when the fine module is disabled.
  ad::Var fine_radii;
  std::vector<std::size_t> fine_cells;
};

struct HeadOutputs {
  std::vector<LevelOutputs> levels;
  ad::Var hbb_logits;  // [1, 1, H_P3, W_P3]; null when the branch is off
};

// Multiply-accumulate tally keyed by accounting group.
struct MacCounter {
  std::map<std::string, double> by_group;
  void add(const std::string& group, double macs) { by_group[group] += macs; }
  double total() const;
};

struct ForwardOptions {
  // Cells per level that get refined radii; nullopt refines every cell.
  std::optional<std::vector<std::vector<std::size_t>>> fine_cells;
  bool run_hbb = true;
  MacCounter* macs = nullptr;
};

struct ConvSpec {
  ad::Parameter* weight = nullptr;
  ad::Parameter* bias = nullptr;
  std::string group;
  std::size_t in = 0, out = 0, kernel = 1, stride = 1, padding = 0;
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }

  // image is [3, H, W]; H and W must be multiples of the backbone stride.
  HeadOutputs forward(const ad::Tensor& image, const ForwardOptions& options = {}) const;

  // Parameter totals per accounting group.
  std::map<std::string, std::size_t> count_params() const;
  // MACs per group for an input of the given size, from layer shapes alone.
  // With `inference` the HBB branch is left out.
  std::map<std::string, double> count_macs(std::size_t height, std::size_t width, bool inference) const;

 private:
  class Binder;

  ConvSpec& add_conv(const std::string& name, const std::string& group, std::size_t in,
                     std::size_t out, std::size_t kernel, std::size_t stride, bool bias = true);
  void initialise(std::uint64_t seed);

  ad::Var apply(Binder& b, const ConvSpec& c, const ad::Var& x, MacCounter* macs) const;
  FeaturePyramid build_pyramid(Binder& b, const ad::Var& image, MacCounter* macs) const;
  LevelOutputs run_heads(Binder& b, const ad::Var& features, std::size_t level,
                         const std::vector<std::size_t>* cells, MacCounter* macs) const;

  ModelConfig config_;
  ad::ParameterStore params_;
  std::vector<ConvSpec> convs_;  // stable after construction
  std::vector<std::size_t> backbone_;  // indices into convs_, in order
  std::vector<std::size_t> stage_end_;  // conv index ending each backbone stage
  std::unordered_map<std::string, std::size_t> fpn_lateral_, fpn_output_, fpn_extra_;
  std::vector<std::size_t> cls_trunk_, reg_trunk_, hbb_stack_;
  std::size_t cls_logits_ = 0, centerness_ = 0, radii_ = 0, hbb_logits_ = 0;
  std::size_t fine_standard_ = 0;
  ad::Parameter* fine_weight_ = nullptr;
  ad::Parameter* fine_bias_ = nullptr;
  std::vector<ad::Parameter*> coarse_scales_, fine_scales_;
};

// Applies the fine module to one level: rays from each pole in `cells` end
// at the coarse radii, features are sampled there and regressed per ray.
// Exposed for testing; Model::forward uses it.
struct FineModuleInputs {
  ad::Var features;      // [1, F, H, W]
  ad::Var coarse_radii;  // [1, n, H, W]
  std::vector<std::size_t> cells;
  std::size_t stride = 1;
  ad::Var weight;        // [n, F] grouped, or [n, n*F, 1, 1] standard
  ad::Var bias;          // [n]
  ad::Var scale;         // [1]
  RegressorKind regressor = RegressorKind::Grouped;
  bool detach_coords = false;
};
ad::Var fine_module(const FineModuleInputs& in);

}  // namespace polarseg
