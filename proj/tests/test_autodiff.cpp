#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spcg/nn_ops.hpp"
#include "test_support.hpp"

using namespace spcg;
using namespace spcg::nn;
using spcg_test::gradient_check;
using spcg_test::random_tensor;

namespace {
std::mt19937_64 rng(0xABCD1234);
}

TEST_CASE("elementwise ops match finite differences") {
  const Shape s{2, 3, 4, 4};
  const Tensor a = random_tensor(s, rng);
  const Tensor b = random_tensor(s, rng, 0.2, 1.5);  // away from 0 for divide

  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(add(in[0], in[1])); },
                       {a, b}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(sub(in[0], in[1])); },
                       {a, b}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(mul(in[0], in[1])); },
                       {a, b}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(divide(in[0], in[1])); },
                       {a, b}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return mean(square(in[0])); }, {a}) <
        1e-6);
  CHECK(gradient_check(
            [](const std::vector<Var>& in) { return sum(mul_const(add_const(in[0], 0.3), -2.5)); },
            {a}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(rsub_const(1.0, in[0])); },
                       {a}) < 1e-6);
}

TEST_CASE("smooth activations match finite differences") {
  const Shape s{1, 2, 4, 4};
  const Tensor a = random_tensor(s, rng, -2.0, 2.0);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(tanh_op(in[0])); }, {a}) <
        1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(sigmoid(in[0])); }, {a}) <
        1e-6);
  // weighted softmax so the gradient is not trivially zero
  const Tensor weights = random_tensor(s, rng);
  CHECK(gradient_check(
            [&](const std::vector<Var>& in) {
              return sum(mul_mask(softmax_channels(in[0]), weights));
            },
            {a}) < 1e-6);
}

TEST_CASE("piecewise-linear ops match finite differences away from kinks") {
  const Shape s{2, 2, 4, 4};
  Tensor a = random_tensor(s, rng, -2.0, 2.0);
  for (real_t& v : a.v) {
    if (std::abs(v) < 0.05) v += 0.2;  // keep clear of the kink
  }
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(relu(in[0])); }, {a}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(leaky_relu(in[0], 0.2)); },
                       {a}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(abs_op(in[0])); }, {a}) <
        1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(clamp_min(in[0], 0.5)); },
                       {a}) < 1e-6);
}

TEST_CASE("pow_const matches finite differences on positive inputs") {
  const Tensor a = random_tensor(Shape{1, 1, 3, 3}, rng, 0.2, 1.8);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(pow_const(in[0], 0.75)); },
                       {a}) < 1e-6);
}

TEST_CASE("conv2d matches finite differences") {
  const Tensor x = random_tensor(Shape{2, 3, 6, 6}, rng);
  const Tensor w = random_tensor(Shape{4, 3, 3, 3}, rng, -0.5, 0.5);
  const Tensor b = random_tensor(Shape{1, 4, 1, 1}, rng, -0.5, 0.5);
  for (int stride : {1, 2}) {
    CHECK(gradient_check(
              [stride](const std::vector<Var>& in) {
                return sum(conv2d(in[0], in[1], in[2], stride, 1));
              },
              {x, w, b}) < 1e-5);
  }
  // no-bias path
  CHECK(gradient_check(
            [](const std::vector<Var>& in) { return sum(conv2d(in[0], in[1], nullptr, 1, 0)); },
            {x, w}) < 1e-5);
}

TEST_CASE("conv2d shape contract") {
  const Var x = constant(Tensor(Shape{1, 3, 8, 8}));
  const Var w = leaf(Tensor(Shape{4, 3, 3, 3}), true);
  const Var y = conv2d(x, w, nullptr, 2, 1);
  CHECK(y->value.shape == Shape{1, 4, 4, 4});
  const Var w_bad = leaf(Tensor(Shape{4, 2, 3, 3}), true);
  CHECK_THROWS_AS(conv2d(x, w_bad, nullptr, 1, 1), Error);
}

TEST_CASE("conv_transpose2d matches finite differences and doubles size") {
  const Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng);
  const Tensor w = random_tensor(Shape{3, 2, 3, 3}, rng, -0.5, 0.5);
  const Tensor b = random_tensor(Shape{1, 2, 1, 1}, rng, -0.5, 0.5);
  CHECK(gradient_check(
            [](const std::vector<Var>& in) {
              return sum(conv_transpose2d(in[0], in[1], in[2], 2, 1, 1));
            },
            {x, w, b}) < 1e-5);
  const Var y = conv_transpose2d(constant(x), constant(w), constant(b), 2, 1, 1);
  CHECK(y->value.shape == Shape{2, 2, 8, 8});
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  // <conv(x), y> == <x, convT(y)> with shared weights
  std::mt19937_64 local(77);
  const Tensor x = random_tensor(Shape{1, 2, 6, 6}, local);
  const Tensor w = random_tensor(Shape{3, 2, 3, 3}, local);  // conv weight (out,in,k,k)
  const Var cx = conv2d(constant(x), constant(w), nullptr, 2, 1);
  const Tensor y = random_tensor(cx->value.shape, local);

  real_t lhs = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) lhs += cx->value.v[i] * y.v[i];

  // transpose weight layout (out,in,k,k) -> (in,out,k,k) flipped role
  Tensor wt(Shape{3, 2, 3, 3});
  wt.v = w.v;
  const Var xt = conv_transpose2d(constant(y), constant(wt), nullptr, 2, 1, 1);
  REQUIRE(xt->value.shape == x.shape);
  real_t rhs = 0.0;
  for (std::size_t i = 0; i < x.v.size(); ++i) rhs += x.v[i] * xt->value.v[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("instance_norm matches finite differences") {
  const Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng);
  const Tensor g = random_tensor(Shape{1, 3, 1, 1}, rng, 0.5, 1.5);
  const Tensor b = random_tensor(Shape{1, 3, 1, 1}, rng, -0.5, 0.5);
  const Tensor weights = random_tensor(Shape{2, 3, 4, 4}, rng);
  CHECK(gradient_check(
            [&](const std::vector<Var>& in) {
              return sum(mul_mask(instance_norm(in[0], in[1], in[2]), weights));
            },
            {x, g, b}, 1e-6) < 1e-4);
}

TEST_CASE("instance_norm normalizes per sample and channel") {
  std::mt19937_64 local(5);
  const Tensor x = random_tensor(Shape{2, 2, 8, 8}, local, -3.0, 5.0);
  const Var y = instance_norm(constant(x), constant(Tensor::full(Shape{1, 2, 1, 1}, 1.0)),
                              constant(Tensor(Shape{1, 2, 1, 1})));
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 2; ++c) {
      real_t mean = 0.0;
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) mean += y->value.at(n, c, i, j);
      }
      mean /= 64.0;
      CHECK(std::abs(mean) < 1e-10);
    }
  }
}

TEST_CASE("pooling, upsampling, concat, slice, gate, pad, crop gradients") {
  const Tensor x = random_tensor(Shape{2, 2, 4, 4}, rng);
  const Tensor x2 = random_tensor(Shape{2, 3, 4, 4}, rng);
  const Tensor gate = random_tensor(Shape{2, 1, 4, 4}, rng, 0.1, 0.9);
  const Tensor weights8 = random_tensor(Shape{2, 2, 8, 8}, rng);
  const Tensor weights_pad = random_tensor(Shape{2, 2, 7, 6}, rng);

  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(max_pool2x2(in[0])); }, {x}) <
        1e-5);
  CHECK(gradient_check(
            [&](const std::vector<Var>& in) {
              return sum(mul_mask(upsample_nearest2x(in[0]), weights8));
            },
            {x}) < 1e-6);
  CHECK(gradient_check(
            [](const std::vector<Var>& in) { return sum(concat_channels(in[0], in[1])); },
            {x, x2}) < 1e-6);
  CHECK(gradient_check(
            [](const std::vector<Var>& in) { return sum(slice_channels(in[0], 1, 2)); }, {x2}) <
        1e-6);
  CHECK(gradient_check(
            [](const std::vector<Var>& in) { return sum(mul_channel_gate(in[0], in[1])); },
            {x2, gate}) < 1e-6);
  CHECK(gradient_check(
            [&](const std::vector<Var>& in) {
              return sum(mul_mask(zero_pad2d(in[0], 1, 2, 1, 1), weights_pad));
            },
            {x}) < 1e-6);
  CHECK(gradient_check([](const std::vector<Var>& in) { return sum(crop2d(in[0], 1, 1, 2, 2)); },
                       {x}) < 1e-6);
}

TEST_CASE("upsample then pool is identity") {
  std::mt19937_64 local(9);
  const Tensor x = random_tensor(Shape{1, 2, 3, 3}, local, 0.0, 1.0);
  const Var y = max_pool2x2(upsample_nearest2x(constant(x)));
  REQUIRE(y->value.shape == x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(y->value.v[i] == x.v[i]);
}

TEST_CASE("backward accumulates into leaves across calls") {
  const Var p = leaf(Tensor::scalar(2.0), true);
  const Var root1 = mul_const(p, 3.0);
  backward(root1);
  CHECK(p->grad.v[0] == doctest::Approx(3.0));
  const Var root2 = mul_const(p, 4.0);
  backward(root2);
  CHECK(p->grad.v[0] == doctest::Approx(7.0));  // 3 + 4
  p->zero_grad();
  CHECK(p->grad.v[0] == 0.0);
}

TEST_CASE("interior adjoints are transient per backward call") {
  const Var p = leaf(Tensor::scalar(1.5), true);
  const Var mid = mul_const(p, 2.0);
  const Var root = square(mid);
  backward(root);
  backward(root);  // second sweep must not double-count interior grads
  // d/dp (2p)^2 = 8p = 12; two accumulations on the leaf
  CHECK(p->grad.v[0] == doctest::Approx(24.0));
}

TEST_CASE("backward rejects non-scalar roots and diverging shapes") {
  const Var p = leaf(Tensor(Shape{1, 1, 2, 2}), true);
  CHECK_THROWS_AS(backward(p), Error);
  const Var q = leaf(Tensor(Shape{1, 1, 2, 3}), true);
  CHECK_THROWS_AS(add(p, q), Error);
}
