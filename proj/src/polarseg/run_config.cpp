#include "polarseg/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "polarseg/error.hpp"
#include "polarseg/io_util.hpp"

namespace polarseg {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  fail(ErrorCode::ConfigInvalid, key + ": '" + value + "' is not " + want);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw, const char* want) {
  const std::string v = trim(raw);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, raw, want);
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, raw, "a boolean");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + f(items[i]);
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Acc>
Field size_field(const std::string& key, Acc acc) {
  return {[acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); },
          [acc, key](RunConfig& c, const std::string& v) {
            acc(c) = parse_number<std::size_t>(key, v, "a non-negative integer");
          }};
}

template <typename Acc>
Field u64_field(const std::string& key, Acc acc) {
  return {[acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); },
          [acc, key](RunConfig& c, const std::string& v) {
            acc(c) = parse_number<std::uint64_t>(key, v, "a non-negative integer");
          }};
}

template <typename Acc>
Field double_field(const std::string& key, Acc acc) {
  return {[acc](const RunConfig& c) { return format_double(acc(const_cast<RunConfig&>(c))); },
          [acc, key](RunConfig& c, const std::string& v) { acc(c) = parse_number<double>(key, v, "a number"); }};
}

template <typename Acc>
Field bool_field(const std::string& key, Acc acc) {
  return {[acc](const RunConfig& c) { return std::string(acc(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [acc, key](RunConfig& c, const std::string& v) { acc(c) = parse_bool(key, v); }};
}

template <typename Acc>
Field size_list_field(const std::string& key, Acc acc) {
  return {[acc](const RunConfig& c) {
            return join<std::size_t>(acc(const_cast<RunConfig&>(c)),
                                     [](const std::size_t& v) { return std::to_string(v); });
          },
          [acc, key](RunConfig& c, const std::string& v) {
            std::vector<std::size_t> out;
            for (const auto& item : split_list(v)) out.push_back(parse_number<std::size_t>(key, item, "an integer list"));
            acc(c) = out;
          }};
}

template <typename Acc>
Field double_list_field(const std::string& key, Acc acc) {
  return {[acc](const RunConfig& c) {
            return join<double>(acc(const_cast<RunConfig&>(c)), [](const double& v) { return format_double(v); });
          },
          [acc, key](RunConfig& c, const std::string& v) {
            std::vector<double> out;
            for (const auto& item : split_list(v)) out.push_back(parse_number<double>(key, item, "a number list"));
            acc(c) = out;
          }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    // [model]
    f["model.num_classes"] = size_field("model.num_classes", [](RunConfig& c) -> auto& { return c.model.num_classes; });
    f["model.rays"] = size_field("model.rays", [](RunConfig& c) -> auto& { return c.model.num_rays; });
    f["model.strides"] = {
        [](const RunConfig& c) {
          return join<LevelSpec>(c.model.fpn_levels, [](const LevelSpec& l) { return std::to_string(l.stride); });
        },
        [](RunConfig& c, const std::string& v) {
          std::vector<std::size_t> s;
          for (const auto& item : split_list(v))
            s.push_back(parse_number<std::size_t>("model.strides", item, "an integer list"));
          c.model.fpn_levels = ModelConfig::levels_from_strides(s);
        }};
    f["model.fpn_channels"] = size_field("model.fpn_channels", [](RunConfig& c) -> auto& { return c.model.fpn_channels; });
    f["model.head_convs"] = size_field("model.head_convs", [](RunConfig& c) -> auto& { return c.model.head_convs; });
    f["model.backbone_widths"] =
        size_list_field("model.backbone_widths", [](RunConfig& c) -> auto& { return c.model.backbone_widths; });
    f["model.hbb"] = bool_field("model.hbb", [](RunConfig& c) -> auto& { return c.model.hbb_enabled; });
    f["model.hbb_widths"] = size_list_field("model.hbb_widths", [](RunConfig& c) -> auto& { return c.model.hbb_widths; });
    f["model.fine"] = bool_field("model.fine", [](RunConfig& c) -> auto& { return c.model.fine_enabled; });
    f["model.detach_coords"] =
        bool_field("model.detach_coords", [](RunConfig& c) -> auto& { return c.model.detach_sampling_coords; });
    f["model.regressor"] = {
        [](const RunConfig& c) {
          return std::string(c.model.regressor == RegressorKind::Grouped ? "grouped" : "standard");
        },
        [](RunConfig& c, const std::string& raw) {
          const auto v = trim(raw);
          if (v == "grouped") c.model.regressor = RegressorKind::Grouped;
          else if (v == "standard") c.model.regressor = RegressorKind::Standard;
          else bad_value("model.regressor", raw, "'grouped' or 'standard'");
        }};
    f["model.radius_prior"] = double_field("model.radius_prior", [](RunConfig& c) -> auto& { return c.model.radius_prior; });
    // [data]
    f["data.height"] = size_field("data.height", [](RunConfig& c) -> auto& { return c.data.height; });
    f["data.width"] = size_field("data.width", [](RunConfig& c) -> auto& { return c.data.width; });
    f["data.train_count"] = size_field("data.train_count", [](RunConfig& c) -> auto& { return c.train_count; });
    f["data.eval_count"] = size_field("data.eval_count", [](RunConfig& c) -> auto& { return c.eval_count; });
    f["data.min_instances"] = size_field("data.min_instances", [](RunConfig& c) -> auto& { return c.data.min_instances; });
    f["data.max_instances"] = size_field("data.max_instances", [](RunConfig& c) -> auto& { return c.data.max_instances; });
    f["data.min_size"] = double_field("data.min_size", [](RunConfig& c) -> auto& { return c.data.min_size; });
    f["data.max_size"] = double_field("data.max_size", [](RunConfig& c) -> auto& { return c.data.max_size; });
    f["data.noise_sigma"] = double_field("data.noise_sigma", [](RunConfig& c) -> auto& { return c.data.noise_sigma; });
    f["data.shapes"] = {
        [](const RunConfig& c) {
          return join<ShapeKind>(c.data.palette, [](const ShapeKind& k) { return std::string(shape_name(k)); });
        },
        [](RunConfig& c, const std::string& v) {
          std::vector<ShapeKind> out;
          for (const auto& item : split_list(v)) {
            if (item == "ellipse") out.push_back(ShapeKind::Ellipse);
            else if (item == "rectangle") out.push_back(ShapeKind::Rectangle);
            else if (item == "star") out.push_back(ShapeKind::Star);
            else bad_value("data.shapes", item, "one of ellipse, rectangle, star");
          }
          c.data.palette = out;
        }};
    // [train]
    f["train.steps"] = size_field("train.steps", [](RunConfig& c) -> auto& { return c.train.steps; });
    f["train.batch"] = size_field("train.batch", [](RunConfig& c) -> auto& { return c.train.batch; });
    f["train.lr"] = double_field("train.lr", [](RunConfig& c) -> auto& { return c.train.lr; });
    f["train.momentum"] = double_field("train.momentum", [](RunConfig& c) -> auto& { return c.train.momentum; });
    f["train.weight_decay"] = double_field("train.weight_decay", [](RunConfig& c) -> auto& { return c.train.weight_decay; });
    f["train.warmup_steps"] = size_field("train.warmup_steps", [](RunConfig& c) -> auto& { return c.train.warmup_steps; });
    f["train.warmup_ratio"] = double_field("train.warmup_ratio", [](RunConfig& c) -> auto& { return c.train.warmup_ratio; });
    f["train.clip_norm"] = double_field("train.clip_norm", [](RunConfig& c) -> auto& { return c.train.clip_norm; });
    f["train.checkpoint_every"] =
        size_field("train.checkpoint_every", [](RunConfig& c) -> auto& { return c.train.checkpoint_every; });
    f["train.alpha"] = double_field("train.alpha", [](RunConfig& c) -> auto& { return c.train.loss.alpha; });
    f["train.gamma"] = double_field("train.gamma", [](RunConfig& c) -> auto& { return c.train.loss.gamma; });
    f["train.focal_balance"] =
        double_field("train.focal_balance", [](RunConfig& c) -> auto& { return c.train.loss.focal_balance; });
    f["train.implicit_coarse"] =
        bool_field("train.implicit_coarse", [](RunConfig& c) -> auto& { return c.train.implicit_coarse; });
    f["train.center_radius"] =
        double_field("train.center_radius", [](RunConfig& c) -> auto& { return c.train.assign.center_radius; });
    f["train.scale_bounds"] =
        double_list_field("train.scale_bounds", [](RunConfig& c) -> auto& { return c.train.assign.scale_bounds; });
    f["train.pole_inside"] = bool_field("train.pole_inside", [](RunConfig& c) -> auto& { return c.train.assign.pole_inside; });
    // [eval]
    f["eval.score_threshold"] =
        double_field("eval.score_threshold", [](RunConfig& c) -> auto& { return c.decode.score_threshold; });
    f["eval.topk"] = size_field("eval.topk", [](RunConfig& c) -> auto& { return c.decode.topk_per_level; });
    f["eval.nms_iou"] = double_field("eval.nms_iou", [](RunConfig& c) -> auto& { return c.decode.nms_iou; });
    f["eval.max_detections"] = size_field("eval.max_detections", [](RunConfig& c) -> auto& { return c.decode.max_detections; });
    f["eval.small_fraction"] = double_field("eval.small_fraction", [](RunConfig& c) -> auto& { return c.eval.small_fraction; });
    f["eval.medium_fraction"] =
        double_field("eval.medium_fraction", [](RunConfig& c) -> auto& { return c.eval.medium_fraction; });
    // [run]
    f["run.seed"] = u64_field("run.seed", [](RunConfig& c) -> auto& { return c.seed; });
    return f;
  }();
  return fields;
}

}  // namespace

RunConfig::RunConfig() = default;

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& r = registry();
  auto it = r.find(key);
  if (it == r.end()) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
  it->second.set(*this, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto& r = registry();
  auto it = r.find(key);
  if (it == r.end()) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : registry()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::validate() const {
  model.validate();
  data.validate();
  train.validate();
  train.assign.ranges(model.fpn_levels);
  if (data.palette.size() != model.num_classes)
    fail(ErrorCode::ConfigInvalid, "model.num_classes must equal the number of data.shapes");
  const std::size_t top = model.backbone_max_stride();
  if (data.height % top || data.width % top)
    fail(ErrorCode::ConfigInvalid, "image size must be a multiple of the backbone stride " + std::to_string(top));
  if (!(decode.nms_iou > 0.0 && decode.nms_iou <= 1.0)) fail(ErrorCode::ConfigInvalid, "eval.nms_iou must lie in (0, 1]");
  if (!(decode.score_threshold >= 0.0 && decode.score_threshold < 1.0))
    fail(ErrorCode::ConfigInvalid, "eval.score_threshold must lie in [0, 1)");
  if (!(eval.small_fraction > 0.0 && eval.small_fraction < eval.medium_fraction))
    fail(ErrorCode::ConfigInvalid, "eval.small_fraction must be positive and below eval.medium_fraction");
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, field] : registry()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << field.get(*this) << "\n";
  }
  return os.str();
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::ConfigInvalid, origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail(ErrorCode::ConfigInvalid, origin + ": key '" + section + "' is outside any section");
    for (const auto& [name, value] : body) cfg.set(section + "." + name, value.data());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text(path), path.string());
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"no-fine", "no-hbb", "implicit-coarse", "detach-coords",
                                              "standard-conv"};
  return names;
}

void apply_ablation(RunConfig& config, const std::string& name) {
  if (name == "no-fine") config.model.fine_enabled = false;
  else if (name == "no-hbb") config.model.hbb_enabled = false;
  else if (name == "implicit-coarse") config.train.implicit_coarse = true;
  else if (name == "detach-coords") config.model.detach_sampling_coords = true;
  else if (name == "standard-conv") config.model.regressor = RegressorKind::Standard;
  else fail(ErrorCode::ConfigInvalid, "unknown ablation '" + name + "'");
}

}  // namespace polarseg
