#include <doctest.h>

#include "polarseg/error.hpp"
#include "polarseg/run_config.hpp"

using namespace polarseg;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("run configuration") {
  SUBCASE("defaults are valid") { CHECK_NOTHROW(RunConfig{}.validate()); }

  SUBCASE("every key survives a round trip through the INI text") {
    RunConfig c;
    c.set("model.strides", "4,8");
    c.set("model.fpn_channels", "24");
    c.set("model.regressor", "standard");
    c.set("train.alpha", "0.35");
    c.set("train.lr", "0.0123456789");
    c.set("data.shapes", "ellipse,star");
    c.set("run.seed", "42");
    const RunConfig back = parse_run_config(c.to_ini());
    for (const auto& k : RunConfig::keys()) CHECK_MESSAGE(back.get(k) == c.get(k), k);
    CHECK(back.to_ini() == c.to_ini());
    CHECK(back.train.loss.alpha == 0.35);
    CHECK(back.model.fpn_levels.size() == 2);
  }

  SUBCASE("unknown keys are rejected") {
    CHECK(code_of([] { parse_run_config("[model]\nfpn_chanels = 8\n"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { parse_run_config("[bogus]\nx = 1\n"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { RunConfig{}.set("train.nope", "1"); }) == ErrorCode::ConfigInvalid);
  }

  SUBCASE("malformed values are rejected") {
    RunConfig c;
    CHECK(code_of([&] { c.set("train.steps", "12x"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([&] { c.set("train.steps", "-3"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([&] { c.set("train.lr", "fast"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([&] { c.set("model.hbb", "maybe"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([&] { c.set("model.regressor", "dense"); }) == ErrorCode::ConfigInvalid);
  }

  SUBCASE("inconsistent settings fail validation") {
    RunConfig c;
    c.set("data.height", "60");  // not a multiple of the backbone stride
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigInvalid);
    RunConfig d;
    d.set("model.num_classes", "5");  // palette no longer matches
    CHECK(code_of([&] { d.validate(); }) == ErrorCode::ConfigInvalid);
  }

  SUBCASE("ablation switches") {
    RunConfig c;
    apply_ablation(c, "no-fine");
    apply_ablation(c, "no-hbb");
    apply_ablation(c, "implicit-coarse");
    apply_ablation(c, "detach-coords");
    apply_ablation(c, "standard-conv");
    CHECK_FALSE(c.model.fine_enabled);
    CHECK_FALSE(c.model.hbb_enabled);
    CHECK(c.train.implicit_coarse);
    CHECK(c.model.detach_sampling_coords);
    CHECK(c.model.regressor == RegressorKind::Standard);
    CHECK(code_of([&] { apply_ablation(c, "no-backbone"); }) == ErrorCode::ConfigInvalid);
  }

  SUBCASE("the shipped desk config spells out the defaults") {
    CHECK(load_run_config(std::string(POLARSEG_CONFIG_DIR) + "/desk.ini").to_ini() == RunConfig{}.to_ini());
    CHECK_NOTHROW(load_run_config(std::string(POLARSEG_CONFIG_DIR) + "/benchmark.ini").validate());
  }

  SUBCASE("missing config file is an I/O error") {
    CHECK(code_of([] { load_run_config("/nonexistent/run.ini"); }) == ErrorCode::Io);
  }
}
