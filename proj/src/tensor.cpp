#include "avtenet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace avtenet {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

std::vector<double>& TensorNode::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data.assign(shape_numel(node_->shape), fill);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor: " + shape_str(shape) + " cannot hold " +
                                std::to_string(values.size()) + " values");
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

const Shape& Tensor::shape() const {
  if (!node_) throw std::invalid_argument("tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::vector<double>& Tensor::values() {
  if (!node_) throw std::invalid_argument("tensor: undefined");
  return node_->data;
}

const std::vector<double>& Tensor::values() const {
  if (!node_) throw std::invalid_argument("tensor: undefined");
  return node_->data;
}

double Tensor::item() const {
  if (!node_ || node_->data.size() != 1)
    throw std::invalid_argument("tensor: item() requires exactly one element");
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  if (!node_) throw std::invalid_argument("tensor: undefined");
  node_->requires_grad = v;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (!node_) throw std::invalid_argument("tensor: undefined");
  if (node_->grad.size() == node_->data.size()) return node_->grad;
  return std::vector<double>(node_->data.size(), 0.0);
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::make_op(Shape shape, std::vector<double> data,
                       const std::vector<Tensor>& parents,
                       std::function<void(const TensorNode&)> fn) {
  Tensor out(std::move(shape), std::move(data));
  bool any = false;
  for (const Tensor& p : parents) any = any || p.requires_grad();
  if (any) {
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (const Tensor& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward_fn = std::move(fn);
  }
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a defined scalar");
  TensorNode* root = loss.node().get();
  if (!root->requires_grad) {
    root->ensure_grad()[0] = 1.0;
    return;
  }

  // Iterative post-order over the DAG; reversed, it is a valid topological
  // order for the backward sweep.
  std::vector<TensorNode*> post;
  std::unordered_set<TensorNode*> done;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  done.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx++].get();
      if (p->requires_grad && done.insert(p).second) stack.emplace_back(p, 0);
    } else {
      post.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] = 1.0;
  for (auto it = post.rbegin(); it != post.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

std::size_t parameter_count(const ParameterSet& ps) {
  std::size_t n = 0;
  for (const auto& [name, t] : ps) n += t.numel();
  return n;
}

void zero_grads(ParameterSet& ps) {
  for (auto& [name, t] : ps) t.zero_grad();
}

Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor normal_init(Shape shape, double mean, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal(mean, stddev);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace avtenet
