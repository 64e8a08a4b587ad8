#pragma once

#include "spcg/autodiff.hpp"

namespace spcg::nn {

/// 2-D convolution, zero padding. Weight layout (out_ch, in_ch, kh, kw);
/// bias (1, out_ch, 1, 1) or nullptr.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

/// Fractionally-strided convolution (adjoint of conv2d). Weight layout
/// (in_ch, out_ch, kh, kw). Output size (H-1)*stride - 2*pad + kh + out_pad.
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int out_pad);

/// Per-sample, per-channel normalization with affine parameters
/// gamma/beta of shape (1, C, 1, 1).
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, real_t eps = 1e-5);

Var max_pool2x2(const Var& x);
Var upsample_nearest2x(const Var& x);
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& a, int first, int count);

/// Broadcast multiply of x (N,C,H,W) by a single-channel gate (N,1,H,W).
Var mul_channel_gate(const Var& x, const Var& gate);

Var zero_pad2d(const Var& x, int top, int bottom, int left, int right);
Var crop2d(const Var& x, int top, int left, int out_h, int out_w);

}  // namespace spcg::nn
