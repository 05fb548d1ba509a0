#include "polarseg/autodiff.hpp"

#include <unordered_set>

#include "polarseg/error.hpp"

namespace polarseg::ad {

Parameter& ParameterStore::add(std::string name, std::string group, Shape shape,
                               bool trainable) {
  if (find(name)) fail(ErrorCode::InvalidArgument, "duplicate parameter name " + name);
  Parameter p;
  p.name = std::move(name);
  p.group = std::move(group);
  p.value = Tensor(shape);
  if (trainable) p.grad = Tensor(shape);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Parameter& ParameterStore::at(const std::string& name) {
  if (auto* p = find(name)) return *p;
  fail(ErrorCode::InvalidArgument, "no parameter named " + name);
}

std::size_t ParameterStore::total_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_)
    if (p.trainable) p.grad.fill(0.0);
}

Tensor& Node::ensure_grad() {
  if (grad.size() != value.size()) grad = Tensor(value.shape());
  return grad;
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var variable(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

Var param(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->requires_grad = p.trainable;
  n->param = &p;
  return n;
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in->requires_grad;
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward = std::move(fn);
  }
  return n;
}

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // (node, next input index) pairs emulate the recursive post-order walk.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* next = node->inputs[idx++].get();
      if (next->requires_grad && seen.insert(next).second) stack.emplace_back(next, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Var& root, const Tensor& seed) {
  if (!root->requires_grad) return;
  if (seed.size() != root->value.size())
    fail(ErrorCode::ShapeMismatch, "backward seed does not match root shape");
  auto order = topo_order(root.get());
  for (Node* n : order)
    if (n->backward) n->grad = Tensor();
  Tensor& g = root->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->param && n->param->trainable && n->grad.size() == n->value.size()) {
      double* dst = n->param->grad.data();
      const double* src = n->grad.data();
      for (std::size_t i = 0; i < n->grad.size(); ++i) dst[i] += src[i];
      n->grad.fill(0.0);
    }
  }
}

void backward(const Var& root) {
  if (root->value.size() != 1)
    fail(ErrorCode::ShapeMismatch, "backward() without seed needs a scalar root");
  backward(root, Tensor::scalar(1.0));
}

}  // namespace polarseg::ad
