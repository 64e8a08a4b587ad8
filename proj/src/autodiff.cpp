#include "spcg/autodiff.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

namespace spcg::nn {

Var leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  n->leaf = true;
  return n;
}

Var constant(Tensor v) { return leaf(std::move(v), false); }

Var constant_scalar(real_t v) { return leaf(Tensor::scalar(v), false); }

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const Var& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backward_op = std::move(backward_op);
  return n;
}

void backward(const Var& root) {
  if (!root) throw_validation("backward: null root");
  if (root->value.numel() != 1) {
    throw_dimension("backward: root must be scalar, got " + root->value.shape.str());
  }
  if (!root->requires_grad) return;

  // Post-order DFS over the requires_grad subgraph: inputs precede consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->leaf) {
      n->ensure_grad();
    } else {
      n->grad = Tensor::zeros(n->value.shape);
    }
  }
  root->grad.v[0] += 1.0;

  // Reversed post-order: every consumer runs before the nodes it feeds from.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_op) n->backward_op(*n);
  }
}

namespace {

void accumulate(Node& parent, const std::function<real_t(std::int64_t)>& contribution) {
  const std::int64_t count = parent.value.numel();
  for (std::int64_t i = 0; i < count; ++i) {
    parent.grad.v[static_cast<std::size_t>(i)] += contribution(i);
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a->value.shape, b->value.shape, "add");
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] + b->value.v[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      accumulate(p, [&](std::int64_t i) { return self.grad.v[i]; });
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a->value.shape, b->value.shape, "sub");
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] - b->value.v[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) accumulate(pa, [&](std::int64_t i) { return self.grad.v[i]; });
    if (pb.requires_grad) accumulate(pb, [&](std::int64_t i) { return -self.grad.v[i]; });
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a->value.shape, b->value.shape, "mul");
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] * b->value.v[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      accumulate(pa, [&](std::int64_t i) { return self.grad.v[i] * pb.value.v[i]; });
    }
    if (pb.requires_grad) {
      accumulate(pb, [&](std::int64_t i) { return self.grad.v[i] * pa.value.v[i]; });
    }
  });
}

Var divide(const Var& a, const Var& b) {
  check_same_shape(a->value.shape, b->value.shape, "divide");
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] / b->value.v[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      accumulate(pa, [&](std::int64_t i) { return self.grad.v[i] / pb.value.v[i]; });
    }
    if (pb.requires_grad) {
      accumulate(pb, [&](std::int64_t i) {
        return -self.grad.v[i] * self.value.v[i] / pb.value.v[i];
      });
    }
  });
}

Var add_const(const Var& a, real_t k) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] + k;
  return make_node(std::move(out), {a}, [](Node& self) {
    accumulate(*self.parents[0], [&](std::int64_t i) { return self.grad.v[i]; });
  });
}

Var mul_const(const Var& a, real_t k) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] * k;
  return make_node(std::move(out), {a}, [k](Node& self) {
    accumulate(*self.parents[0], [&](std::int64_t i) { return self.grad.v[i] * k; });
  });
}

Var rsub_const(real_t k, const Var& a) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = k - a->value.v[i];
  return make_node(std::move(out), {a}, [](Node& self) {
    accumulate(*self.parents[0], [&](std::int64_t i) { return -self.grad.v[i]; });
  });
}

Var mul_mask(const Var& a, const Tensor& mask) {
  check_same_shape(a->value.shape, mask.shape, "mul_mask");
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] * mask.v[i];
  return make_node(std::move(out), {a}, [mask](Node& self) {
    accumulate(*self.parents[0], [&](std::int64_t i) { return self.grad.v[i] * mask.v[i]; });
  });
}

Var pow_const(const Var& a, real_t exponent) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = std::pow(a->value.v[i], exponent);
  return make_node(std::move(out), {a}, [exponent](Node& self) {
    Node& pa = *self.parents[0];
    accumulate(pa, [&](std::int64_t i) {
      return self.grad.v[i] * exponent * std::pow(pa.value.v[i], exponent - 1.0);
    });
  });
}

Var clamp_min(const Var& a, real_t floor_value) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = std::max(a->value.v[i], floor_value);
  return make_node(std::move(out), {a}, [floor_value](Node& self) {
    Node& pa = *self.parents[0];
    accumulate(pa, [&](std::int64_t i) {
      return pa.value.v[i] > floor_value ? self.grad.v[i] : 0.0;
    });
  });
}

Var abs_op(const Var& a) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = std::abs(a->value.v[i]);
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    accumulate(pa, [&](std::int64_t i) {
      const real_t x = pa.value.v[i];
      return x > 0.0 ? self.grad.v[i] : (x < 0.0 ? -self.grad.v[i] : 0.0);
    });
  });
}

Var square(const Var& a) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] * a->value.v[i];
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    accumulate(pa, [&](std::int64_t i) { return self.grad.v[i] * 2.0 * pa.value.v[i]; });
  });
}

Var sum(const Var& a) {
  real_t total = 0.0;
  for (real_t x : a->value.v) total += x;
  return make_node(Tensor::scalar(total), {a}, [](Node& self) {
    const real_t g = self.grad.v[0];
    accumulate(*self.parents[0], [&](std::int64_t) { return g; });
  });
}

Var mean(const Var& a) {
  const std::int64_t count = a->value.numel();
  if (count == 0) throw_validation("mean: empty tensor");
  real_t total = 0.0;
  for (real_t x : a->value.v) total += x;
  return make_node(Tensor::scalar(total / static_cast<real_t>(count)), {a}, [count](Node& self) {
    const real_t g = self.grad.v[0] / static_cast<real_t>(count);
    accumulate(*self.parents[0], [&](std::int64_t) { return g; });
  });
}

Var relu(const Var& a) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = a->value.v[i] > 0.0 ? a->value.v[i] : 0.0;
  return make_node(std::move(out), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    accumulate(pa, [&](std::int64_t i) { return pa.value.v[i] > 0.0 ? self.grad.v[i] : 0.0; });
  });
}

Var leaky_relu(const Var& a, real_t slope) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) {
    const real_t x = a->value.v[i];
    out.v[i] = x > 0.0 ? x : slope * x;
  }
  return make_node(std::move(out), {a}, [slope](Node& self) {
    Node& pa = *self.parents[0];
    accumulate(pa, [&](std::int64_t i) {
      return pa.value.v[i] > 0.0 ? self.grad.v[i] : slope * self.grad.v[i];
    });
  });
}

Var tanh_op(const Var& a) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = std::tanh(a->value.v[i]);
  return make_node(std::move(out), {a}, [](Node& self) {
    accumulate(*self.parents[0], [&](std::int64_t i) {
      const real_t y = self.value.v[i];
      return self.grad.v[i] * (1.0 - y * y);
    });
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape);
  const std::int64_t count = out.numel();
  for (std::int64_t i = 0; i < count; ++i) out.v[i] = 1.0 / (1.0 + std::exp(-a->value.v[i]));
  return make_node(std::move(out), {a}, [](Node& self) {
    accumulate(*self.parents[0], [&](std::int64_t i) {
      const real_t y = self.value.v[i];
      return self.grad.v[i] * y * (1.0 - y);
    });
  });
}

Var softmax_channels(const Var& a) {
  const Shape s = a->value.shape;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int h = 0; h < s.h; ++h) {
      for (int w = 0; w < s.w; ++w) {
        real_t mx = a->value.at(n, 0, h, w);
        for (int c = 1; c < s.c; ++c) mx = std::max(mx, a->value.at(n, c, h, w));
        real_t z = 0.0;
        for (int c = 0; c < s.c; ++c) z += std::exp(a->value.at(n, c, h, w) - mx);
        for (int c = 0; c < s.c; ++c) {
          out.at(n, c, h, w) = std::exp(a->value.at(n, c, h, w) - mx) / z;
        }
      }
    }
  }
  return make_node(std::move(out), {a}, [s](Node& self) {
    Node& pa = *self.parents[0];
    for (int n = 0; n < s.n; ++n) {
      for (int h = 0; h < s.h; ++h) {
        for (int w = 0; w < s.w; ++w) {
          real_t dot = 0.0;
          for (int c = 0; c < s.c; ++c) {
            dot += self.grad.at(n, c, h, w) * self.value.at(n, c, h, w);
          }
          for (int c = 0; c < s.c; ++c) {
            const real_t y = self.value.at(n, c, h, w);
            pa.grad.at(n, c, h, w) += y * (self.grad.at(n, c, h, w) - dot);
          }
        }
      }
    }
  });
}

}  // namespace spcg::nn
