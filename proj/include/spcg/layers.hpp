#pragma once

#include <string>
#include <vector>

#include "spcg/nn_ops.hpp"

namespace spcg::nn {

struct NamedParam {
  std::string name;
  Var param;
};

struct Conv2dLayer {
  Var w;  // (out_ch, in_ch, k, k)
  Var b;  // (1, out_ch, 1, 1), optional
  int stride = 1;
  int pad = 0;

  static Conv2dLayer make(int in_ch, int out_ch, int k, int stride, int pad, bool bias = true);
  Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct ConvTranspose2dLayer {
  Var w;  // (in_ch, out_ch, k, k)
  Var b;
  int stride = 2;
  int pad = 1;
  int out_pad = 1;

  static ConvTranspose2dLayer make(int in_ch, int out_ch, int k, int stride, int pad, int out_pad);
  Var operator()(const Var& x) const { return conv_transpose2d(x, w, b, stride, pad, out_pad); }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct InstanceNormLayer {
  Var gamma;
  Var beta;

  static InstanceNormLayer make(int channels);
  Var operator()(const Var& x) const { return instance_norm(x, gamma, beta); }
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// conv3x3 -> instance norm -> relu, twice. The workhorse block of both
/// segmenter architectures.
struct DoubleConvBlock {
  Conv2dLayer conv1, conv2;
  InstanceNormLayer norm1, norm2;

  static DoubleConvBlock make(int in_ch, int out_ch);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Additive attention gate: a single-channel sigmoid mask computed from the
/// decoder signal and the skip features, applied to the skip features.
struct AttentionGate {
  Conv2dLayer theta_gate, theta_skip, psi;

  static AttentionGate make(int channels);
  Var operator()(const Var& gate_signal, const Var& skip) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

}  // namespace spcg::nn
