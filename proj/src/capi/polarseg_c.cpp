#include "polarseg/polarseg.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "polarseg/error.hpp"
#include "polarseg/pipeline.hpp"

struct psg_config {
  polarseg::RunConfig cfg;
};

struct psg_model {
  polarseg::RunConfig cfg;
  std::unique_ptr<polarseg::Model> model;
};

namespace {

thread_local std::string g_last_error;

psg_status map_code(polarseg::ErrorCode c) {
  using polarseg::ErrorCode;
  switch (c) {
    case ErrorCode::EmptyMask: return PSG_ERR_EMPTY_MASK;
    case ErrorCode::DimensionMismatch: return PSG_ERR_DIMENSION_MISMATCH;
    case ErrorCode::StrideInvalid: return PSG_ERR_STRIDE_INVALID;
    case ErrorCode::ShapeMismatch: return PSG_ERR_SHAPE_MISMATCH;
    case ErrorCode::NonPositiveRadius: return PSG_ERR_NON_POSITIVE_RADIUS;
    case ErrorCode::ConfigInvalid: return PSG_ERR_CONFIG_INVALID;
    case ErrorCode::Divergence: return PSG_ERR_DIVERGENCE;
    case ErrorCode::Io: return PSG_ERR_IO;
    case ErrorCode::CheckpointMismatch: return PSG_ERR_CHECKPOINT_MISMATCH;
    case ErrorCode::InvalidArgument: return PSG_ERR_INVALID_ARGUMENT;
  }
  return PSG_ERR_INTERNAL;
}

// Runs `f`, translating exceptions into status codes and the thread's last
// error message.
template <typename F>
psg_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return PSG_OK;
  } catch (const polarseg::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return PSG_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PSG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return PSG_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) polarseg::fail(polarseg::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::optional<std::filesystem::path> opt_path(const char* p) {
  if (!p || !*p) return std::nullopt;
  return std::filesystem::path(p);
}

polarseg::ProgressFn wrap(psg_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](std::size_t step, const polarseg::LossValues& v) { fn(step, v.total, user); };
}

}  // namespace

extern "C" {

const char* psg_last_error(void) { return g_last_error.c_str(); }

const char* psg_status_string(psg_status status) {
  switch (status) {
    case PSG_OK: return "ok";
    case PSG_ERR_EMPTY_MASK: return "empty mask";
    case PSG_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case PSG_ERR_STRIDE_INVALID: return "invalid stride";
    case PSG_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case PSG_ERR_NON_POSITIVE_RADIUS: return "non-positive radius";
    case PSG_ERR_CONFIG_INVALID: return "invalid config";
    case PSG_ERR_DIVERGENCE: return "training diverged";
    case PSG_ERR_IO: return "i/o error";
    case PSG_ERR_CHECKPOINT_MISMATCH: return "checkpoint mismatch";
    case PSG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PSG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void psg_string_free(char* s) { std::free(s); }

psg_status psg_config_new(psg_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new psg_config{};
  });
}

psg_status psg_config_load(const char* path, psg_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new psg_config{polarseg::load_run_config(path)};
  });
}

psg_status psg_config_parse(const char* text, psg_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new psg_config{polarseg::parse_run_config(text)};
  });
}

void psg_config_free(psg_config* config) { delete config; }

psg_status psg_config_set(psg_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->cfg.set(key, value);
  });
}

psg_status psg_config_get(const psg_config* config, const char* key, char** value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    *value = dup(config->cfg.get(key));
  });
}

psg_status psg_config_ablate(psg_config* config, const char* name) {
  return guarded([&] {
    require(config, "config");
    require(name, "name");
    polarseg::apply_ablation(config->cfg, name);
  });
}

psg_status psg_config_validate(const psg_config* config) {
  return guarded([&] {
    require(config, "config");
    config->cfg.validate();
  });
}

psg_status psg_config_to_ini(const psg_config* config, char** ini) {
  return guarded([&] {
    require(config, "config");
    require(ini, "ini");
    *ini = dup(config->cfg.to_ini());
  });
}

psg_status psg_gen_data(const psg_config* config, const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    polarseg::generate_data(config->cfg, out_dir);
  });
}

psg_status psg_train(const psg_config* config, const char* data_dir, const char* out_dir,
                     psg_progress_fn progress, void* user) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const auto& cfg = config->cfg;
    cfg.validate();
    const auto scenes = polarseg::load_split(cfg, polarseg::Split::Train, opt_path(data_dir));
    auto model = polarseg::build_model(cfg, false);
    polarseg::run_training(cfg, *model, scenes, std::filesystem::path(out_dir), wrap(progress, user));
  });
}

psg_status psg_eval(const psg_config* config, const char* checkpoint, const char* data_dir, const char* out_dir,
                    char** report_table) {
  return guarded([&] {
    require(config, "config");
    require(checkpoint, "checkpoint");
    require(out_dir, "out_dir");
    const auto& cfg = config->cfg;
    cfg.validate();
    const auto model = polarseg::load_model(cfg, checkpoint);
    const auto scenes = polarseg::load_split(cfg, polarseg::Split::Eval, opt_path(data_dir));
    const auto dets = polarseg::run_detection(*model, scenes, cfg.decode);
    const auto report = polarseg::evaluate_detections(dets, scenes, cfg.eval);
    polarseg::write_eval_outputs(out_dir, cfg, report, dets);
    if (report_table) *report_table = dup(report.to_table());
  });
}

psg_status psg_infer(const psg_config* config, const char* checkpoint, const char* data_dir, const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(checkpoint, "checkpoint");
    require(out_dir, "out_dir");
    const auto& cfg = config->cfg;
    cfg.validate();
    const auto model = polarseg::load_model(cfg, checkpoint);
    const auto scenes = polarseg::load_split(cfg, polarseg::Split::Eval, opt_path(data_dir));
    polarseg::write_infer_outputs(out_dir, cfg, scenes, polarseg::run_detection(*model, scenes, cfg.decode));
  });
}

psg_status psg_sweep_alpha(const psg_config* config, const char* data_dir, const char* out_dir,
                           psg_progress_fn progress, void* user, char** table) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const auto& cfg = config->cfg;
    cfg.validate();
    const auto train = polarseg::load_split(cfg, polarseg::Split::Train, opt_path(data_dir));
    const auto eval = polarseg::load_split(cfg, polarseg::Split::Eval, opt_path(data_dir));
    const auto points = polarseg::sweep_alpha(cfg, train, eval, wrap(progress, user));
    polarseg::write_sweep_outputs(out_dir, cfg, points);
    if (table) *table = dup(polarseg::alpha_table(points));
  });
}

psg_status psg_count(const psg_config* config, char** manifest_json) {
  return guarded([&] {
    require(config, "config");
    require(manifest_json, "manifest_json");
    *manifest_json = dup(polarseg::count_manifest(config->cfg));
  });
}

psg_status psg_model_load(const psg_config* config, const char* checkpoint, psg_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    config->cfg.validate();
    auto m = std::make_unique<psg_model>();
    m->cfg = config->cfg;
    m->model = checkpoint && *checkpoint ? polarseg::load_model(m->cfg, checkpoint)
                                         : polarseg::build_model(m->cfg, true);
    *out = m.release();
  });
}

void psg_model_free(psg_model* model) { delete model; }

psg_status psg_model_param_count(const psg_model* model, size_t* count) {
  return guarded([&] {
    require(model, "model");
    require(count, "count");
    std::size_t n = 0;
    for (const auto& [_, v] : model->model->count_params()) n += v;
    *count = n;
  });
}

psg_status psg_model_detect(const psg_model* model, const double* rgb, size_t height, size_t width,
                            char** detections_jsonl) {
  return guarded([&] {
    require(model, "model");
    require(rgb, "rgb");
    require(detections_jsonl, "detections_jsonl");
    polarseg::ad::Tensor image({3, height, width}, std::vector<double>(rgb, rgb + 3 * height * width));
    std::string out;
    for (const auto& d : polarseg::detect(*model->model, polarseg::network_input(image), model->cfg.decode))
      out += polarseg::detection_json_line(d) + "\n";
    *detections_jsonl = dup(out);
  });
}

}  // extern "C"
