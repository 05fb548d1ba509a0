#pragma once

#include <span>
#include <vector>

#include "polarseg/autodiff.hpp"

namespace polarseg {

struct LossWeights {
  double alpha = 0.5;          // weight of the coarse radius loss
  double gamma = 2.0;          // focal focusing parameter
  double focal_balance = 0.25; // weight of the positive class

  void validate() const;
};

// Sigmoid focal loss over every element of `logits` against 0/1 targets,
// summed and divided by max(1, number of positive targets).
ad::Var focal_loss(const ad::Var& logits, const ad::Tensor& targets, double gamma, double balance);

// Per row of [P, n] radii: log(sum_k max(pred, target) / sum_k min(pred, target)).
// Rows are averaged with `weights` (uniform when empty); no rows gives 0.
// A 1-D input is treated as a single row.
ad::Var polar_iou_loss(const ad::Var& pred, const ad::Tensor& target,
                       std::span<const double> weights = {});

// Mean binary cross-entropy of logits [P] against soft targets in [0, 1].
ad::Var centerness_bce(const ad::Var& logits, const ad::Tensor& targets);

// sqrt(min r / max r).
double polar_centerness(std::span<const double> radii);

// Any component may be null and then contributes nothing.
struct LossComponents {
  ad::Var cls;
  ad::Var cnt;
  ad::Var coarse;
  ad::Var fine;
  ad::Var hbb;
};

// cls + cnt + alpha * coarse + fine + hbb. With implicit_coarse the coarse
// term is left out of the graph entirely.
ad::Var total_loss(const LossComponents& parts, double alpha, bool implicit_coarse = false);

}  // namespace polarseg
