#include "polarseg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "polarseg/error.hpp"
#include "polarseg/ops.hpp"
#include "polarseg/polar_codec.hpp"

namespace polarseg {

namespace {

// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha > 0.0)) fail(ErrorCode::ConfigInvalid, "alpha must be > 0");
  if (!(gamma >= 0.0)) fail(ErrorCode::ConfigInvalid, "gamma must be >= 0");
  if (!(focal_balance > 0.0 && focal_balance < 1.0))
    fail(ErrorCode::ConfigInvalid, "focal balance must lie in (0, 1)");
}

ad::Var focal_loss(const ad::Var& logits, const ad::Tensor& targets, double gamma, double balance) {
  if (logits->value.size() != targets.size())
    fail(ErrorCode::ShapeMismatch, "focal_loss: logits and targets differ in size");
  std::size_t positives = 0;
  for (double t : targets.values()) {
    if (t != 0.0 && t != 1.0) fail(ErrorCode::InvalidArgument, "focal_loss targets must be 0 or 1");
    positives += t == 1.0;
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, positives));

  // With z = +x for positives and -x for negatives, p_t = sigmoid(z).
  double total = 0.0;
  const auto& x = logits->value;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool pos = targets[i] == 1.0;
    const double z = pos ? x[i] : -x[i];
    const double a = pos ? balance : 1.0 - balance;
    const double one_minus_pt = sigmoid(-z);
    total += -a * std::pow(one_minus_pt, gamma) * log_sigmoid(z);
  }
  return ad::make_result(ad::Tensor::scalar(total * norm), {logits},
                         [targets, gamma, balance, norm](ad::Node& self) {
                           auto& in = *self.inputs[0];
                           auto& g = in.ensure_grad();
                           const double up = self.grad[0] * norm;
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const bool pos = targets[i] == 1.0;
                             const double sgn = pos ? 1.0 : -1.0;
                             const double z = sgn * in.value[i];
                             const double a = pos ? balance : 1.0 - balance;
                             const double pt = sigmoid(z), q = sigmoid(-z);
                             // dL/dz = -a [ (1-p)^(g+1) - g (1-p)^g p log p ]
                             const double dz = -a * (std::pow(q, gamma + 1.0) -
                                                     gamma * std::pow(q, gamma) * pt * log_sigmoid(z));
                             g[i] += up * sgn * dz;
                           }
                         });
}

ad::Var polar_iou_loss(const ad::Var& pred, const ad::Tensor& target, std::span<const double> weights) {
  const auto& ps = pred->shape();
  if (pred->value.size() != target.size())
    fail(ErrorCode::ShapeMismatch, "polar_iou_loss: prediction and target differ in size");
  const std::size_t rows = ps.size() == 2 ? ps[0] : 1;
  const std::size_t n = ps.size() == 2 ? ps[1] : pred->value.size();
  if (!weights.empty() && weights.size() != rows)
    fail(ErrorCode::ShapeMismatch, "polar_iou_loss: one weight per row required");
  for (double r : pred->value.values())
    if (!(r > 0.0)) fail(ErrorCode::NonPositiveRadius, "polar_iou_loss: predicted radius <= 0");
  if (rows == 0 || n == 0) return ad::constant(ad::Tensor::scalar(0.0));

  std::vector<double> w(rows, 1.0);
  if (!weights.empty()) w.assign(weights.begin(), weights.end());
  double wsum = 0.0;
  for (double v : w) wsum += v;
  if (wsum <= 0.0) return ad::constant(ad::Tensor::scalar(0.0));

  std::vector<double> tgt(target.values().begin(), target.values().end());
  for (double& t : tgt) t = std::max(t, kMinRadius);

  std::vector<double> smax(rows), smin(rows);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double hi = 0.0, lo = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double p = pred->value[r * n + k], t = tgt[r * n + k];
      hi += std::max(p, t);
      lo += std::min(p, t);
    }
    smax[r] = hi;
    smin[r] = lo;
    total += w[r] * std::log(hi / lo);
  }
  return ad::make_result(ad::Tensor::scalar(total / wsum), {pred},
                         [tgt = std::move(tgt), w, wsum, smax, smin, rows, n](ad::Node& self) {
                           auto& in = *self.inputs[0];
                           auto& g = in.ensure_grad();
                           const double up = self.grad[0] / wsum;
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t k = 0; k < n; ++k) {
                               const std::size_t i = r * n + k;
                               // Ties go to the max branch.
                               const double d = in.value[i] >= tgt[i] ? 1.0 / smax[r] : -1.0 / smin[r];
                               g[i] += up * w[r] * d;
                             }
                         });
}

ad::Var centerness_bce(const ad::Var& logits, const ad::Tensor& targets) {
  if (logits->value.size() != targets.size())
    fail(ErrorCode::ShapeMismatch, "centerness_bce: logits and targets differ in size");
  const std::size_t n = targets.size();
  if (n == 0) return ad::constant(ad::Tensor::scalar(0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits->value[i], t = targets[i];
    if (t < 0.0 || t > 1.0) fail(ErrorCode::InvalidArgument, "centerness targets must lie in [0, 1]");
    // softplus(x) - t x
    total += -log_sigmoid(-x) - t * x;
  }
  const double inv = 1.0 / static_cast<double>(n);
  return ad::make_result(ad::Tensor::scalar(total * inv), {logits}, [targets, inv](ad::Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[0] * inv * (sigmoid(in.value[i]) - targets[i]);
  });
}

double polar_centerness(std::span<const double> radii) {
  if (radii.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  if (!(*hi > 0.0)) return 0.0;
  return std::sqrt(std::max(*lo, 0.0) / *hi);
}

ad::Var total_loss(const LossComponents& parts, double alpha, bool implicit_coarse) {
  std::vector<ad::Var> terms;
  for (const ad::Var& v : {parts.cls, parts.cnt, parts.fine, parts.hbb})
    if (v) terms.push_back(v);
  if (parts.coarse && !implicit_coarse) terms.push_back(ad::scale(parts.coarse, alpha));
  if (terms.empty()) return ad::constant(ad::Tensor::scalar(0.0));
  ad::Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
  return acc;
}

}  // namespace polarseg
