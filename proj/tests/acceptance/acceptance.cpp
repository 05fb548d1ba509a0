// Acceptance run: one PASS/FAIL line per criterion. With arguments, only the
// listed criteria (1-9) run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "boundary_oracle.hpp"
#include "grad_suite.hpp"
#include "polarseg/boundary_targets.hpp"
#include "polarseg/checkpoint.hpp"
#include "polarseg/detection.hpp"
#include "polarseg/gradcheck.hpp"
#include "polarseg/losses.hpp"
#include "polarseg/pipeline.hpp"
#include "polarseg/polar_codec.hpp"
#include "polarseg/run_config.hpp"
#include "polarseg/synthetic.hpp"
#include "shapes.hpp"

using namespace polarseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig benchmark_config() { return load_run_config(fs::path(POLARSEG_CONFIG_DIR) / "benchmark.ini"); }

// 1. Parameter budget of the fine regressor and the boundary branch.
Outcome parameter_budget() {
  RunConfig c;
  c.model.fpn_channels = 256;
  c.model.num_rays = 36;
  const auto params = build_model(c, false)->count_params();
  const std::size_t fine = params.at("fine"), hbb = params.at("hbb");
  return {fine == 9252 && hbb >= 440000 && hbb <= 460000,
          fmt("fine %zu params (want 9252), hbb %zu params = %.3f M (want 0.44..0.46 M)", fine, hbb, hbb / 1e6)};
}

// 2. Finite-difference gradient checks of every op and of the toy model.
Outcome gradient_suite() {
  double op_worst = 0.0;
  std::string op_where;
  std::size_t op_cases = 0, kinks = 0;
  for (int seed = 0; seed < 20; ++seed)
    for (const auto& c : testing::op_grad_cases(seed)) {
      const auto r = ad::grad_check(c.fn, c.inputs);
      ++op_cases;
      kinks += r.kinks.size();
      if (r.max_rel_error_smooth > op_worst) op_worst = r.max_rel_error_smooth, op_where = c.name;
    }
  double model_worst = 0.0;
  std::size_t probes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::toy_model_grad_check(seed, 6);
    probes += r.checked;
    model_worst = std::max(model_worst, r.worst);
  }
  return {op_worst < 1e-4 && model_worst < 1e-3,
          fmt("ops: %zu checks over 20 seeds, max rel error %.2e (%s), %zu kink coordinates excluded; "
              "toy model: %zu probes over 20 seeds, max rel error %.2e",
              op_cases, op_worst, op_where.c_str(), kinks, probes, model_worst)};
}

// 3. Codec round trip on ellipses and agreement with a dense ray march.
Outcome codec_round_trip() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst_iou = 1.0;
  for (int t = 0; t < 100; ++t) {
    const double minor = 5.0 + 10.0 * U(rng);  // semi-axes: minor axis >= 10 px
    const double major = minor * (1.0 + 2.0 * U(rng));
    const auto m = testing::ellipse(96, 96, 44 + 8 * U(rng), 44 + 8 * U(rng), major, minor, std::numbers::pi * U(rng));
    worst_iou = std::min(worst_iou, mask_iou(m, rasterize(decode(encode(m)), 96, 96)));
  }
  double worst_ray = 0.0;
  std::size_t over = 0;
  const ShapeKind kinds[3] = {ShapeKind::Ellipse, ShapeKind::Rectangle, ShapeKind::Star};
  for (int t = 0; t < 50; ++t) {
    const auto m = draw_shape(kinds[t % 3], 64, 64, 24 + 16 * U(rng), 24 + 16 * U(rng), 8 + 14 * U(rng),
                              0.4 + 0.6 * U(rng), std::numbers::pi * U(rng));
    const auto s = encode(m);
    for (std::size_t k = 0; k < s.rays(); ++k) {
      const double d = std::abs(s.radii()[k] - testing::dense_ray_radius(m, s.center(), testing::theta(k, s.rays())));
      worst_ray = std::max(worst_ray, d);
      over += d > 1.0;
    }
  }
  return {worst_iou >= 0.90 && over == 0,
          fmt("min round-trip IoU %.4f over 100 ellipses (want >= 0.90); max |encode - dense march| %.3f px over "
              "50 shapes x 36 rays, %zu rays beyond 1 px",
              worst_iou, worst_ray, over)};
}

// 4. Boundary targets against brute-force oracles on random scenes.
Outcome boundary_oracle() {
  SceneConfig sc;
  sc.max_instances = 5;
  std::size_t scenes = 0, instances = 0, failures = 0;
  std::string first;
  auto note = [&](const std::string& what) {
    if (failures++ == 0) first = what;
  };
  for (std::uint64_t seed = 0; scenes < 50; ++seed) {
    const auto scene = generate_scene(9000 + seed, sc);
    if (scene.instances.empty()) continue;
    ++scenes;
    std::vector<BitMask> masks;
    for (const auto& i : scene.instances) masks.push_back(i.mask);
    instances += masks.size();
    const auto points = extract_boundaries(masks);

    for (std::size_t n = 0; n < masks.size(); ++n) {
      const auto& m = masks[n];
      const auto& contours = points.instances[n].contours;
      const auto traced = testing::as_set(contours);
      // Closed 8-connected traversals over foreground pixels.
      for (const auto& c : contours)
        for (std::size_t k = 0; k < c.size(); ++k) {
          const auto &p = c[k], &q = c[(k + 1) % c.size()];
          if (!m.at_or_zero(p.row, p.col) || std::max(std::labs(p.row - q.row), std::labs(p.col - q.col)) > 1)
            note(fmt("scene %zu instance %zu: traversal broken at (%ld, %ld)", scenes, n, p.row, p.col));
        }
      // Traced pixels are foreground pixels 8-adjacent to background.
      for (auto [r, c] : traced) {
        bool touches = false;
        for (long dr = -1; dr <= 1; ++dr)
          for (long dc = -1; dc <= 1; ++dc) touches |= !m.at_or_zero(r + dr, c + dc);
        if (!touches) note(fmt("scene %zu instance %zu: interior pixel (%ld, %ld) traced", scenes, n, r, c));
      }
      // Every foreground pixel 4-adjacent to the exterior background is within
      // one pixel of a traced one.
      for (auto [r, c] : testing::oracle_border(m)) {
        bool near = false;
        for (long dr = -1; dr <= 1; ++dr)
          for (long dc = -1; dc <= 1; ++dc) near |= traced.count({r + dr, c + dc}) > 0;
        if (!near) note(fmt("scene %zu instance %zu: border pixel (%ld, %ld) missed", scenes, n, r, c));
      }
    }

    for (std::size_t s : {4u, 8u, 16u}) {
      std::set<std::pair<long, long>> cells;
      for (const auto& inst : points.instances)
        for (auto [r, c] : testing::as_set(inst.contours)) cells.insert({r / long(s), c / long(s)});
      const auto bm = build_boundary_mask(points, s, sc.height, sc.width);
      std::set<std::pair<long, long>> got;
      for (std::size_t i = 0; i < bm.height(); ++i)
        for (std::size_t j = 0; j < bm.width(); ++j)
          if (bm.at(i, j)) got.insert({long(i), long(j)});
      if (got != cells) note(fmt("scene %zu stride %zu: boundary mask differs from the floor set", scenes, s));
    }
  }
  return {failures == 0, failures == 0 ? fmt("%zu scenes, %zu instances, strides 4/8/16: all checks hold", scenes,
                                             instances)
                                       : fmt("%zu violations; first: %s", failures, first.c_str())};
}

// 5. Closed-form loss identities.
Outcome loss_identities() {
  using ad::constant;
  using ad::Tensor;
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> U(0.5, 20.0), X(-4.0, 4.0);

  double iou_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    Tensor target({8, 36});
    for (auto& v : target.values()) v = U(rng);
    Tensor pred = target;
    for (auto& v : pred.values()) v *= 2.0;
    iou_err = std::max(iou_err, std::abs(polar_iou_loss(constant(pred), target)->value[0] - std::log(2.0)));
  }

  double ce_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double a = 0.1 + 0.8 * (t / 20.0);
    Tensor x({64}), y({64});
    int pos = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      x[i] = X(rng);
      y[i] = (i * 7 + t) % 5 == 0;
      pos += y[i] > 0;
    }
    double ce = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x[i]));
      ce += y[i] > 0 ? -a * std::log(p) : -(1.0 - a) * std::log(1.0 - p);
    }
    ce /= std::max(1, pos);
    ce_err = std::max(ce_err, std::abs(focal_loss(constant(x), y, 0.0, a)->value[0] - ce));
  }

  // total(alpha) = rest + alpha * coarse exactly, with dyadic components so
  // every sum is representable.
  bool linear = true;
  auto s = [](double v) { return constant(Tensor({1}, v)); };
  for (double alpha : {0.25, 0.5, 0.75, 1.0, 1.5}) {
    const LossComponents parts{s(0.75), s(0.5), s(1.25), s(2.0), s(0.125)};
    const double got = total_loss(parts, alpha)->value[0];
    linear &= got == (0.75 + 0.5 + 2.0 + 0.125) + alpha * 1.25;
    const double base = total_loss(parts, 1.0)->value[0] - 1.25;
    linear &= got - base == alpha * 1.25;
  }
  return {iou_err <= 1e-12 && ce_err <= 1e-12 && linear,
          fmt("|L_iou(2t, t) - ln 2| max %.1e; |focal(gamma 0) - balanced CE| max %.1e; alpha linearity %s", iou_err,
              ce_err, linear ? "exact" : "broken")};
}

struct AblationRun {
  std::string name;
  std::uint64_t seed;
  EvalReport report;
};

EvalReport benchmark_run(RunConfig cfg, std::uint64_t seed, const std::string& ablation) {
  cfg.seed = seed;
  if (!ablation.empty()) apply_ablation(cfg, ablation);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = train_and_evaluate(cfg, generate_split(cfg, Split::Train), generate_split(cfg, Split::Eval));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  run %-16s seed %llu: AP %.4f  AP50 %.4f  AP75 %.4f  (%.0f s)\n",
              ablation.empty() ? "full" : ablation.c_str(), static_cast<unsigned long long>(seed), r.ap, r.ap50,
              r.ap75, secs);
  std::fflush(stdout);
  return r;
}

// 6 and 7 share the full-model runs.
std::map<int, Outcome> ablations(bool want6, bool want7) {
  const RunConfig cfg = benchmark_config();
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<EvalReport> full, nofine, implicit;
  for (auto s : seeds) full.push_back(benchmark_run(cfg, s, ""));
  if (want6)
    for (auto s : seeds) nofine.push_back(benchmark_run(cfg, s, "no-fine"));
  if (want7)
    for (auto s : seeds) implicit.push_back(benchmark_run(cfg, s, "implicit-coarse"));
  auto mean_ap = [](const std::vector<EvalReport>& v) {
    double s = 0.0;
    for (const auto& r : v) s += r.ap;
    return s / static_cast<double>(v.size());
  };

  std::map<int, Outcome> out;
  if (want6) {
    int ap75_wins = 0;
    std::string gains;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const double g50 = full[i].ap50 - nofine[i].ap50, g75 = full[i].ap75 - nofine[i].ap75;
      ap75_wins += g75 >= g50;
      gains += fmt("%s[seed %llu: AP50 %+.4f, AP75 %+.4f]", i ? " " : "", static_cast<unsigned long long>(seeds[i]),
                   g50, g75);
    }
    const double mf = mean_ap(full), mb = mean_ap(nofine);
    out[6] = {mf > mb && ap75_wins >= 2, fmt("mean AP full %.4f vs coarse-only %.4f; AP75 gain >= AP50 gain in %d/3 "
                                             "runs %s",
                                             mf, mb, ap75_wins, gains.c_str())};
  }
  if (want7) {
    const double me = mean_ap(full), mi = mean_ap(implicit);
    out[7] = {me >= mi - 0.005, fmt("mean AP explicit %.4f vs implicit %.4f (difference %+.4f; gate: not worse than "
                                    "-0.005)",
                                    me, mi, me - mi)};
  }
  return out;
}

// 8. A checkpoint trained with the boundary branch, loaded without it, gives
// the same inference outputs as the full model.
Outcome hbb_removability() {
  RunConfig cfg = benchmark_config();
  cfg.model.hbb_enabled = true;
  cfg.seed = 8;
  cfg.train_count = 8;
  cfg.eval_count = 4;
  cfg.train.steps = 30;
  cfg.train.batch = 2;
  cfg.train.warmup_steps = 5;
  const fs::path dir = fs::temp_directory_path() / "polarseg_acceptance_hbb";
  fs::remove_all(dir);
  auto trained = build_model(cfg, false);
  run_training(cfg, *trained, generate_split(cfg, Split::Train), dir);
  const auto slim = load_model(cfg, dir / "final.ckpt");
  const bool slim_has_hbb = slim->count_params().count("hbb") > 0;

  std::size_t compared = 0, differing = 0;
  bool dets_equal = true;
  for (const auto& scene : generate_split(cfg, Split::Eval)) {
    const auto input = network_input(scene.image);
    const auto with = trained->forward(input, ForwardOptions{std::nullopt, true, nullptr});
    const auto without = trained->forward(input, ForwardOptions{std::nullopt, false, nullptr});
    const auto loaded = slim->forward(input, ForwardOptions{std::nullopt, false, nullptr});
    for (std::size_t l = 0; l < with.levels.size(); ++l)
      for (const auto* other : {&without, &loaded}) {
        const auto &a = with.levels[l], &b = other->levels[l];
        const std::pair<ad::Var, ad::Var> maps[] = {{a.cls_logits, b.cls_logits},
                                                    {a.centerness_logits, b.centerness_logits},
                                                    {a.coarse_radii, b.coarse_radii},
                                                    {a.fine_radii, b.fine_radii}};
        for (const auto& [x, y] : maps) {
          compared += x->value.size();
          for (std::size_t i = 0; i < x->value.size(); ++i) differing += x->value[i] != y->value[i];
        }
      }
    const auto d1 = detect(*trained, input, cfg.decode), d2 = detect(*slim, input, cfg.decode);
    dets_equal &= d1.size() == d2.size();
    for (std::size_t i = 0; dets_equal && i < d1.size(); ++i)
      dets_equal &= detection_json_line(d1[i]) == detection_json_line(d2[i]);
  }
  fs::remove_all(dir);

  const auto train_macs = trained->count_macs(cfg.data.height, cfg.data.width, false);
  const auto infer_macs = trained->count_macs(cfg.data.height, cfg.data.width, true);
  double train_total = 0.0, infer_total = 0.0;
  for (const auto& [_, v] : train_macs) train_total += v;
  for (const auto& [_, v] : infer_macs) infer_total += v;
  const bool macs_ok = !infer_macs.count("hbb") && train_macs.count("hbb") &&
                       infer_total == train_total - train_macs.at("hbb");
  return {differing == 0 && dets_equal && !slim_has_hbb && macs_ok,
          fmt("%zu output values compared, %zu differ; detections %s; inference model holds %s HBB parameters; "
              "inference MACs %.0f = training %.0f - HBB %.0f: %s",
              compared, differing, dets_equal ? "identical" : "differ", slim_has_hbb ? "" : "no", infer_total,
              train_total, train_macs.count("hbb") ? train_macs.at("hbb") : 0.0, macs_ok ? "yes" : "no")};
}

// 9. A 10-scene training set is fitted almost perfectly.
Outcome overfit() {
  RunConfig cfg = benchmark_config();
  cfg.seed = 7;
  cfg.train_count = 10;
  cfg.train.steps = 2000;
  cfg.train.batch = 4;
  const auto scenes = generate_split(cfg, Split::Train);
  const auto r = train_and_evaluate(cfg, scenes, scenes);
  return {r.ap50 >= 0.9, fmt("train-set AP@0.5 %.4f (want >= 0.9), AP %.4f, 10 scenes, 2000 steps", r.ap50, r.ap)};
}

const char* kNames[10] = {"",
                          "parameter budget",
                          "gradient suite",
                          "codec round trip",
                          "boundary oracle",
                          "loss identities",
                          "coarse-to-fine ablation",
                          "explicit coarse supervision",
                          "HBB removability",
                          "overfit smoke test"};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> want;
  for (int i = 1; i < argc; ++i) {
    const int c = std::atoi(argv[i]);
    if (c < 1 || c > 9) {
      std::fprintf(stderr, "usage: %s [criterion 1-9]...\n", argv[0]);
      return 2;
    }
    want.insert(c);
  }
  if (want.empty())
    for (int c = 1; c <= 9; ++c) want.insert(c);

  const std::map<int, std::function<Outcome()>> single{{1, parameter_budget}, {2, gradient_suite},
                                                       {3, codec_round_trip}, {4, boundary_oracle},
                                                       {5, loss_identities},  {8, hbb_removability},
                                                       {9, overfit}};
  bool all = true;
  auto report = [&](int c, const Outcome& o, double secs) {
    all &= o.pass;
    std::printf("%s %d. %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c, kNames[c], o.detail.c_str(), secs);
    std::fflush(stdout);
  };
  std::map<int, Outcome> ablation;
  double ablation_secs = 0.0;
  for (int c : want) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      if (c == 6 || c == 7) {
        if (ablation.empty()) {
          ablation = ablations(want.count(6) > 0, want.count(7) > 0);
          ablation_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        report(c, ablation.at(c), ablation_secs);
        continue;
      }
      o = single.at(c)();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    report(c, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return all ? 0 : 1;
}
