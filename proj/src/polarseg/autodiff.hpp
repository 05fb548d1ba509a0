#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "polarseg/tensor.hpp"

namespace polarseg::ad {

struct Parameter {
  std::string name;
  std::string group;  // accounting bucket, e.g. "backbone", "fine", "hbb"
  Tensor value;
  Tensor grad;        // allocated iff trainable
  bool trainable = true;
};

// Owns the parameters of one model. Addresses stay stable for the lifetime
// of the store, so graphs may hold raw pointers into it.
class ParameterStore {
 public:
  Parameter& add(std::string name, std::string group, Shape shape, bool trainable = true);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }

  std::size_t total_count() const;
  void zero_grad();

 private:
  std::deque<Parameter> params_;
};

struct Node;
using Var = std::shared_ptr<Node>;

// One vertex of the computation graph. `backward` reads `grad` and
// accumulates into the grads of `inputs`.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<Var> inputs;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  Parameter* param = nullptr;

  const Shape& shape() const { return value.shape(); }
  Tensor& ensure_grad();
};

Var constant(Tensor value);
// Leaf that collects its own gradient in `grad`.
Var variable(Tensor value);
// Leaf bound to a parameter; backward() adds its gradient into the
// parameter's grad buffer when the parameter is trainable.
Var param(Parameter& p);

// Reverse sweep from a scalar root with seed 1.
void backward(const Var& root);
// Reverse sweep with an explicit upstream gradient of the root's shape.
void backward(const Var& root, const Tensor& seed);

// Builds an op result. `inputs` decide whether the result requires grad;
// `fn` is attached only in that case.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn);

}  // namespace polarseg::ad
