#include "spcg/layers.hpp"

namespace spcg::nn {

Conv2dLayer Conv2dLayer::make(int in_ch, int out_ch, int k, int stride, int pad, bool bias) {
  Conv2dLayer layer;
  layer.w = leaf(Tensor(Shape{out_ch, in_ch, k, k}), true);
  if (bias) layer.b = leaf(Tensor(Shape{1, out_ch, 1, 1}), true);
  layer.stride = stride;
  layer.pad = pad;
  return layer;
}

void Conv2dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".w", w});
  if (b) out.push_back({prefix + ".b", b});
}

ConvTranspose2dLayer ConvTranspose2dLayer::make(int in_ch, int out_ch, int k, int stride, int pad,
                                                int out_pad) {
  ConvTranspose2dLayer layer;
  layer.w = leaf(Tensor(Shape{in_ch, out_ch, k, k}), true);
  layer.b = leaf(Tensor(Shape{1, out_ch, 1, 1}), true);
  layer.stride = stride;
  layer.pad = pad;
  layer.out_pad = out_pad;
  return layer;
}

void ConvTranspose2dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

InstanceNormLayer InstanceNormLayer::make(int channels) {
  InstanceNormLayer layer;
  layer.gamma = leaf(Tensor::full(Shape{1, channels, 1, 1}, 1.0), true);
  layer.beta = leaf(Tensor(Shape{1, channels, 1, 1}), true);
  return layer;
}

void InstanceNormLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

DoubleConvBlock DoubleConvBlock::make(int in_ch, int out_ch) {
  DoubleConvBlock block;
  block.conv1 = Conv2dLayer::make(in_ch, out_ch, 3, 1, 1);
  block.norm1 = InstanceNormLayer::make(out_ch);
  block.conv2 = Conv2dLayer::make(out_ch, out_ch, 3, 1, 1);
  block.norm2 = InstanceNormLayer::make(out_ch);
  return block;
}

Var DoubleConvBlock::operator()(const Var& x) const {
  Var h = relu(norm1(conv1(x)));
  return relu(norm2(conv2(h)));
}

void DoubleConvBlock::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  conv1.collect(prefix + ".conv1", out);
  norm1.collect(prefix + ".norm1", out);
  conv2.collect(prefix + ".conv2", out);
  norm2.collect(prefix + ".norm2", out);
}

AttentionGate AttentionGate::make(int channels) {
  AttentionGate gate;
  const int inner = std::max(channels / 2, 1);
  gate.theta_gate = Conv2dLayer::make(channels, inner, 1, 1, 0);
  gate.theta_skip = Conv2dLayer::make(channels, inner, 1, 1, 0);
  gate.psi = Conv2dLayer::make(inner, 1, 1, 1, 0);
  return gate;
}

Var AttentionGate::operator()(const Var& gate_signal, const Var& skip) const {
  Var attn = sigmoid(psi(relu(add(theta_gate(gate_signal), theta_skip(skip)))));
  return mul_channel_gate(skip, attn);
}

void AttentionGate::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  theta_gate.collect(prefix + ".theta_gate", out);
  theta_skip.collect(prefix + ".theta_skip", out);
  psi.collect(prefix + ".psi", out);
}

}  // namespace spcg::nn
