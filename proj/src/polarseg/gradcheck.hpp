#pragma once

#include <functional>
#include <vector>

#include "polarseg/autodiff.hpp"

namespace polarseg::ad {

using ScalarFn = std::function<Var(const std::vector<Var>&)>;

struct KinkSite {
  std::size_t input = 0;
  std::size_t index = 0;
  double left_slope = 0.0;
  double right_slope = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;         // over every coordinate
  double max_rel_error_smooth = 0.0;  // over coordinates not flagged as kinks
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::vector<KinkSite> kinks;
  bool passed = false;  // max_rel_error_smooth < tol
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error, so near-zero gradients are
  // compared absolutely.
  double relative_floor = 1e-6;
  // One-sided slopes differing by more than this (relative) mark a kink.
  double kink_threshold = 1e-3;
};

// Compares reverse-mode gradients of a scalar function with central
// differences, one coordinate at a time.
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace polarseg::ad
