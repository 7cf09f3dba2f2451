#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "avtenet/rng.hpp"

namespace avtenet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One vertex of the autodiff graph. Graph edges (parents + backward_fn) are
// recorded only when some input requires gradients; pure inference therefore
// builds no graph at all and frozen parameters can be shared across threads.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily by ensure_grad()
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Invoked with *this during the reverse sweep; must accumulate into the
  // parents' grad buffers. Never captures the owning node (no cycles).
  std::function<void(const TensorNode&)> backward_fn;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);

  // Gradient accumulated by the last backward(); zeros if none reached this
  // tensor. Only meaningful for requires_grad tensors.
  std::vector<double> grad() const;
  void zero_grad();

  const std::shared_ptr<TensorNode>& node() const { return node_; }

  // Records an op node. parents keep their nodes alive; fn must accumulate
  // into parent grads. If no parent requires grad, the node is a plain leaf.
  static Tensor make_op(Shape shape, std::vector<double> data,
                        const std::vector<Tensor>& parents,
                        std::function<void(const TensorNode&)> fn);

 private:
  std::shared_ptr<TensorNode> node_;
};

// Reverse sweep from a scalar loss through the recorded graph. The graph is
// a DAG by construction; each node's backward_fn runs exactly once, in
// reverse topological order. Throws std::invalid_argument for non-scalar loss.
void backward(const Tensor& loss);

// ----- differentiable ops (see ops.cpp) -----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// m: r x c, v: length c; adds v to every row.
Tensor add_row(const Tensor& m, const Tensor& v);
// b: length c, broadcast over the trailing axes of t (c x ... layout).
Tensor add_channel_bias(const Tensor& t, const Tensor& b);
// axis: 0 for columns of a 2-D tensor (or the only axis of a 1-D tensor),
// 1 for rows of a 2-D tensor. Shift-invariant, rows sum to one.
Tensor softmax(const Tensor& t, std::size_t axis);
// Normalizes the last axis; gain/bias have that axis length.
Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor gelu(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor log_e(const Tensor& t);
Tensor clamp(const Tensor& t, double lo, double hi);
// x: c_in x t, ker: c_out x c_in x k.
Tensor conv1d(const Tensor& x, const Tensor& ker, std::size_t stride, std::size_t pad);
// x: c_in x h x w, ker: c_out x c_in x kh x kw.
Tensor conv2d(const Tensor& x, const Tensor& ker, std::size_t stride, std::size_t pad);
Tensor concat(std::size_t axis, const std::vector<Tensor>& parts);
Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& t, Shape shape);
Tensor mean_all(const Tensor& t);
Tensor sum_all(const Tensor& t);
// t: r x c -> length c (column means).
Tensor mean_rows(const Tensor& t);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // w*: d x d, b*: d
};

// Scaled dot-product attention, heads on column slices, concat, out-proj.
// q: tq x d, k/v: tk x d. d must be divisible by heads.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads, const AttentionWeights& w);

// Mean binary cross-entropy of predicted P(real) against labels y (1 = real);
// predictions are clamped to [1e-12, 1 - 1e-12] before the logs.
Tensor bce_loss(const Tensor& pred_real, const std::vector<double>& real_labels);

// ----- parameters and optimization (see optim.cpp) -----

using ParameterSet = std::map<std::string, Tensor>;

std::size_t parameter_count(const ParameterSet& ps);
void zero_grads(ParameterSet& ps);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// One Adam update with bias correction, reading each parameter's grad buffer.
// Moment shape mismatches throw std::invalid_argument.
void adam_step(ParameterSet& params, AdamState& state);

// Central finite differences against the analytic gradients of the scalar
// produced by forward(). Samples up to samples_per_tensor entries of each
// parameter (seeded); returns the worst relative error. sabotage shifts the
// analytic gradient of sampled entries and must trip the check (negative
// control). Throws numeric_error if forward() is non-finite.
double grad_check(const std::function<Tensor()>& forward, ParameterSet& params,
                  double eps = 1e-5, std::uint64_t seed = 1,
                  std::size_t samples_per_tensor = 4, double sabotage = 0.0);

// ----- init helpers -----

Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng);
Tensor normal_init(Shape shape, double mean, double stddev, Rng& rng);

}  // namespace avtenet
