#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polarseg/polarseg.h"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string ckpt;
  std::string data;
  std::vector<std::string> ablate;
  std::optional<double> alpha;
  std::string levels;
  std::optional<std::size_t> rays;
  std::vector<std::string> overrides;
  std::size_t log_every = 100;
};

struct Failure {
  psg_status status;
};

void check(psg_status s) {
  if (s != PSG_OK) throw Failure{s};
}

struct ConfigHandle {
  psg_config* ptr = nullptr;
  ~ConfigHandle() { psg_config_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { psg_string_free(ptr); }
};

// Config file first, then --set overrides, then the dedicated flags.
void resolve_config(const Options& o, ConfigHandle& h) {
  check(o.config.empty() ? psg_config_new(&h.ptr) : psg_config_load(o.config.c_str(), &h.ptr));
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{PSG_ERR_INVALID_ARGUMENT};
    }
    check(psg_config_set(h.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (o.seed) check(psg_config_set(h.ptr, "run.seed", std::to_string(*o.seed).c_str()));
  if (o.alpha) check(psg_config_set(h.ptr, "train.alpha", std::to_string(*o.alpha).c_str()));
  if (!o.levels.empty()) check(psg_config_set(h.ptr, "model.strides", o.levels.c_str()));
  if (o.rays) check(psg_config_set(h.ptr, "model.rays", std::to_string(*o.rays).c_str()));
  for (const auto& a : o.ablate) check(psg_config_ablate(h.ptr, a.c_str()));
  check(psg_config_validate(h.ptr));
}

const char* opt_c(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void print_progress(size_t step, double loss, void* user) {
  const auto every = *static_cast<const std::size_t*>(user);
  if (every && (step + 1) % every == 0) std::fprintf(stderr, "step %zu  loss %.5f\n", step + 1, loss);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polar-boundary instance segmentation: data, training, evaluation and accounting"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Run seed");
    sub->add_option("--set", o.overrides, "Override a config key, section.name=value");
    sub->add_option("--ablate", o.ablate, "Ablation switch")
        ->check(CLI::IsMember({"no-fine", "no-hbb", "implicit-coarse", "detach-coords", "standard-conv"}));
    sub->add_option("--alpha", o.alpha, "Weight of the coarse radius loss");
    sub->add_option("--levels", o.levels, "Pyramid strides, comma separated (e.g. 4,8,16)");
    sub->add_option("--rays", o.rays, "Number of rays");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic train and eval splits");
  add_common(gen);
  gen->add_option("--out", o.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model and write logs and checkpoints");
  add_common(train);
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--data", o.data, "Dataset directory (default: generate from the config)");
  train->add_option("--log-every", o.log_every, "Print the loss every N steps (0 silences)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with mask AP");
  add_common(eval);
  eval->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  eval->add_option("--out", o.out, "Output directory")->required();
  eval->add_option("--data", o.data, "Dataset directory (default: generate from the config)");

  auto* infer = app.add_subcommand("infer", "Write detections and overlay renders");
  add_common(infer);
  infer->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  infer->add_option("--out", o.out, "Output directory")->required();
  infer->add_option("--data", o.data, "Dataset directory (default: generate from the config)");

  auto* sweep = app.add_subcommand("sweep-alpha", "Train and evaluate for alpha in 0.3..1.0");
  add_common(sweep);
  sweep->add_option("--out", o.out, "Output directory")->required();
  sweep->add_option("--data", o.data, "Dataset directory (default: generate from the config)");
  sweep->add_option("--log-every", o.log_every, "Print the loss every N steps (0 silences)");

  auto* count = app.add_subcommand("count", "Print the parameter and MAC manifest");
  add_common(count);

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigHandle cfg;
    resolve_config(o, cfg);
    if (gen->parsed()) {
      check(psg_gen_data(cfg.ptr, o.out.c_str()));
      std::printf("wrote %s/train and %s/eval\n", o.out.c_str(), o.out.c_str());
    } else if (train->parsed()) {
      check(psg_train(cfg.ptr, opt_c(o.data), o.out.c_str(), print_progress, &o.log_every));
      std::printf("wrote %s/final.ckpt\n", o.out.c_str());
    } else if (eval->parsed()) {
      OwnedString table;
      check(psg_eval(cfg.ptr, o.ckpt.c_str(), opt_c(o.data), o.out.c_str(), &table.ptr));
      std::fputs(table.ptr, stdout);
    } else if (infer->parsed()) {
      check(psg_infer(cfg.ptr, o.ckpt.c_str(), opt_c(o.data), o.out.c_str()));
      std::printf("wrote %s/detections.jsonl\n", o.out.c_str());
    } else if (sweep->parsed()) {
      OwnedString table;
      check(psg_sweep_alpha(cfg.ptr, opt_c(o.data), o.out.c_str(), print_progress, &o.log_every, &table.ptr));
      std::fputs(table.ptr, stdout);
    } else if (count->parsed()) {
      OwnedString manifest;
      check(psg_count(cfg.ptr, &manifest.ptr));
      std::printf("%s\n", manifest.ptr);
    }
  } catch (const Failure& f) {
    const char* msg = psg_last_error();
    std::fprintf(stderr, "error (%s): %s\n", psg_status_string(f.status), *msg ? msg : "see above");
    return 1;
  }
  return 0;
}
