#pragma once

// Gradient-check workloads shared by the unit tests and the acceptance run.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "polarseg/gradcheck.hpp"
#include "polarseg/network.hpp"

namespace testing {

polarseg::ad::Tensor random_tensor(std::mt19937_64& rng, polarseg::ad::Shape shape, double lo = -1.0,
                                   double hi = 1.0);

struct GradCase {
  std::string name;
  polarseg::ad::ScalarFn fn;
  std::vector<polarseg::ad::Tensor> inputs;
};

// Every differentiable op with random inputs drawn from `seed`, each
// contracted to a scalar with random weights.
std::vector<GradCase> op_grad_cases(int seed);

// Small model exercising every branch (two levels, fine module, HBB).
polarseg::ModelConfig toy_model_config();

struct ProbeResult {
  std::size_t checked = 0;
  double worst = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_numeric = 0.0, worst_analytic = 0.0;
};

// Central differences of the full training loss on a toy model against
// reverse mode, at `probes` random coordinates of every parameter.
ProbeResult toy_model_grad_check(std::uint64_t seed, std::size_t probes);

}  // namespace testing
