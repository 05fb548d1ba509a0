#include "polarseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "polarseg/error.hpp"

namespace polarseg::ad {

namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(constant(t));
  Var out = fn(vars);
  if (out->value.size() != 1) fail(ErrorCode::ShapeMismatch, "grad_check needs a scalar function");
  return out->value[0];
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options) {
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(variable(t));
  Var out = fn(vars);
  backward(out);
  const double f0 = out->value[0];

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  const double h = options.step;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      const double x = inputs[a][i];
      probe[a][i] = x + h;
      const double fp = evaluate(fn, probe);
      probe[a][i] = x - h;
      const double fm = evaluate(fn, probe);
      probe[a][i] = x;

      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = vars[a]->grad.size() ? vars[a]->grad[i] : 0.0;
      const double abs_err = std::abs(numeric - analytic);
      const double rel_err =
          abs_err / std::max({std::abs(numeric), std::abs(analytic), options.relative_floor});

      const double right = (fp - f0) / h, left = (f0 - fm) / h;
      const bool kink = std::abs(right - left) >
                        options.kink_threshold * std::max({1.0, std::abs(left), std::abs(right)});
      if (kink) report.kinks.push_back({a, i, left, right});

      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_input = a;
        report.worst_index = i;
      }
      if (!kink) report.max_rel_error_smooth = std::max(report.max_rel_error_smooth, rel_err);
    }
  }
  report.passed = report.max_rel_error_smooth < options.tolerance;
  return report;
}

}  // namespace polarseg::ad
