#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "spcg/tensor.hpp"

namespace spcg::nn {

/// One vertex of a reverse-mode tape. Graphs are built define-by-run and
/// freed when the last Var referencing the root goes out of scope; parameter
/// leaves outlive the graphs that use them.
class Node {
 public:
  Tensor value;
  Tensor grad;  // leaves accumulate across backward() calls until zeroed
  bool requires_grad = false;
  bool leaf = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_op;

  void ensure_grad() {
    if (grad.v.size() != value.v.size()) grad = Tensor::zeros(value.shape);
  }
  void zero_grad() {
    if (grad.v.size() == value.v.size()) grad.fill(0.0);
  }
};

using Var = std::shared_ptr<Node>;

Var leaf(Tensor v, bool requires_grad);
Var constant(Tensor v);
Var constant_scalar(real_t v);
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_op);

/// Reverse-mode sweep from a scalar root. Interior adjoints are transient to
/// the call; leaf gradients accumulate until explicitly zeroed.
void backward(const Var& root);

// --- elementwise / scalar / reduction ops ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var add_const(const Var& a, real_t k);
Var mul_const(const Var& a, real_t k);
Var rsub_const(real_t k, const Var& a);  // k - a
Var mul_mask(const Var& a, const Tensor& mask);
Var pow_const(const Var& a, real_t exponent);  // requires a >= 0 elementwise
Var clamp_min(const Var& a, real_t floor_value);
Var abs_op(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

// --- activations ---
Var relu(const Var& a);
Var leaky_relu(const Var& a, real_t slope);
Var tanh_op(const Var& a);
Var sigmoid(const Var& a);
Var softmax_channels(const Var& a);

}  // namespace spcg::nn
