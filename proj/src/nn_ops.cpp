#include "spcg/nn_ops.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace spcg::nn {

namespace {

using Matrix = Eigen::MatrixXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutableRowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Column r = (c*kh+ki)*kw+kj, column index (b*gh+gy)*gw+gx maps to image pixel
// (gy*stride + ki - pad, gx*stride + kj - pad). Used as im2col for conv2d
// (grid = output pixels) and as the adjoint gather for conv_transpose2d
// (grid = input pixels).
void gather_cols(const Tensor& img, int kh, int kw, int stride, int pad, int gh, int gw,
                 Matrix& cols) {
  const Shape s = img.shape;
  cols.resize(static_cast<Eigen::Index>(s.c) * kh * kw,
              static_cast<Eigen::Index>(s.n) * gh * gw);
  for (int b = 0; b < s.n; ++b) {
    for (int gy = 0; gy < gh; ++gy) {
      for (int gx = 0; gx < gw; ++gx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(b) * gh + gy) * gw + gx;
        Eigen::Index r = 0;
        for (int c = 0; c < s.c; ++c) {
          for (int ki = 0; ki < kh; ++ki) {
            const int iy = gy * stride + ki - pad;
            for (int kj = 0; kj < kw; ++kj, ++r) {
              const int ix = gx * stride + kj - pad;
              cols(r, col) = (iy >= 0 && iy < s.h && ix >= 0 && ix < s.w)
                                 ? img.at(b, c, iy, ix)
                                 : 0.0;
            }
          }
        }
      }
    }
  }
}

void scatter_cols_add(const Matrix& cols, int kh, int kw, int stride, int pad, int gh, int gw,
                      Tensor& img) {
  const Shape s = img.shape;
  for (int b = 0; b < s.n; ++b) {
    for (int gy = 0; gy < gh; ++gy) {
      for (int gx = 0; gx < gw; ++gx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(b) * gh + gy) * gw + gx;
        Eigen::Index r = 0;
        for (int c = 0; c < s.c; ++c) {
          for (int ki = 0; ki < kh; ++ki) {
            const int iy = gy * stride + ki - pad;
            for (int kj = 0; kj < kw; ++kj, ++r) {
              const int ix = gx * stride + kj - pad;
              if (iy >= 0 && iy < s.h && ix >= 0 && ix < s.w) {
                img.at(b, c, iy, ix) += cols(r, col);
              }
            }
          }
        }
      }
    }
  }
}

// (C x B*H*W) matrix view of an NCHW tensor, copied.
Matrix channels_by_pixels(const Tensor& t) {
  const Shape s = t.shape;
  Matrix m(s.c, static_cast<Eigen::Index>(s.n) * s.h * s.w);
  for (int b = 0; b < s.n; ++b) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          m(c, (static_cast<Eigen::Index>(b) * s.h + y) * s.w + x) = t.at(b, c, y, x);
        }
      }
    }
  }
  return m;
}

void add_channels_by_pixels(const Matrix& m, Tensor& t) {
  const Shape s = t.shape;
  for (int b = 0; b < s.n; ++b) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          t.at(b, c, y, x) += m(c, (static_cast<Eigen::Index>(b) * s.h + y) * s.w + x);
        }
      }
    }
  }
}

void validate_bias(const Var& b, int out_ch, const char* what) {
  if (!b) return;
  const Shape bs = b->value.shape;
  if (bs.n != 1 || bs.c != out_ch || bs.h != 1 || bs.w != 1) {
    throw_dimension(std::string(what) + ": bias shape " + bs.str() + " does not match " +
                    std::to_string(out_ch) + " output channels");
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Shape xs = x->value.shape;
  const Shape ws = w->value.shape;
  if (ws.c != xs.c) {
    throw_dimension("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                    std::to_string(ws.c));
  }
  const int ho = conv_out_dim(xs.h, ws.h, stride, pad);
  const int wo = conv_out_dim(xs.w, ws.w, stride, pad);
  if (ho < 1 || wo < 1) {
    throw_dimension("conv2d: input " + xs.str() + " too small for kernel " +
                    std::to_string(ws.h) + "x" + std::to_string(ws.w) + " stride " +
                    std::to_string(stride));
  }
  validate_bias(b, ws.n, "conv2d");

  const Eigen::Index kk = static_cast<Eigen::Index>(ws.c) * ws.h * ws.w;
  Matrix cols;
  gather_cols(x->value, ws.h, ws.w, stride, pad, ho, wo, cols);
  RowMajorMap wmat(w->value.data(), ws.n, kk);
  Matrix y = wmat * cols;

  Tensor out(Shape{xs.n, ws.n, ho, wo});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < ws.n; ++c) {
      const real_t bias = b ? b->value.v[static_cast<std::size_t>(c)] : 0.0;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          out.at(n, c, oy, ox) =
              y(c, (static_cast<Eigen::Index>(n) * ho + oy) * wo + ox) + bias;
        }
      }
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  const int kh = ws.h, kw = ws.w;
  return make_node(std::move(out), std::move(parents), [stride, pad, kh, kw, kk](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const Shape os = self.value.shape;
    const Shape xs2 = px.value.shape;

    Matrix dy(os.c, static_cast<Eigen::Index>(os.n) * os.h * os.w);
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox) {
            dy(c, (static_cast<Eigen::Index>(n) * os.h + oy) * os.w + ox) =
                self.grad.at(n, c, oy, ox);
          }
        }
      }
    }

    if (pb && pb->requires_grad) {
      for (int c = 0; c < os.c; ++c) pb->grad.v[static_cast<std::size_t>(c)] += dy.row(c).sum();
    }
    if (pw.requires_grad) {
      Matrix cols;
      gather_cols(px.value, kh, kw, stride, pad, os.h, os.w, cols);
      Matrix dw = dy * cols.transpose();
      MutableRowMajorMap(pw.grad.data(), os.c, kk) += dw;
    }
    if (px.requires_grad) {
      RowMajorMap wmat(pw.value.data(), os.c, kk);
      Matrix dcols = wmat.transpose() * dy;
      scatter_cols_add(dcols, kh, kw, stride, pad, os.h, os.w, px.grad);
    }
    (void)xs2;
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int out_pad) {
  const Shape xs = x->value.shape;
  const Shape ws = w->value.shape;  // (in_ch, out_ch, kh, kw)
  if (ws.n != xs.c) {
    throw_dimension("conv_transpose2d: input has " + std::to_string(xs.c) +
                    " channels, weight expects " + std::to_string(ws.n));
  }
  const int ho = (xs.h - 1) * stride - 2 * pad + ws.h + out_pad;
  const int wo = (xs.w - 1) * stride - 2 * pad + ws.w + out_pad;
  if (ho < 1 || wo < 1) {
    throw_dimension("conv_transpose2d: output collapses for input " + xs.str());
  }
  validate_bias(b, ws.c, "conv_transpose2d");

  const Eigen::Index kk = static_cast<Eigen::Index>(ws.c) * ws.h * ws.w;
  RowMajorMap wmat(w->value.data(), ws.n, kk);  // in_ch x (out_ch*kh*kw)
  Matrix xmat = channels_by_pixels(x->value);
  Matrix cols = wmat.transpose() * xmat;  // (out_ch*kh*kw) x (B*H*W)

  Tensor out(Shape{xs.n, ws.c, ho, wo});
  scatter_cols_add(cols, ws.h, ws.w, stride, pad, xs.h, xs.w, out);
  if (b) {
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < ws.c; ++c) {
        const real_t bias = b->value.v[static_cast<std::size_t>(c)];
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) out.at(n, c, oy, ox) += bias;
        }
      }
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  const int kh = ws.h, kw = ws.w;
  return make_node(std::move(out), std::move(parents), [stride, pad, kh, kw, kk](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    const Shape xs2 = px.value.shape;
    const Shape os = self.value.shape;

    if (pb && pb->requires_grad) {
      for (int n = 0; n < os.n; ++n) {
        for (int c = 0; c < os.c; ++c) {
          real_t acc = 0.0;
          for (int oy = 0; oy < os.h; ++oy) {
            for (int ox = 0; ox < os.w; ++ox) acc += self.grad.at(n, c, oy, ox);
          }
          pb->grad.v[static_cast<std::size_t>(c)] += acc;
        }
      }
    }

    Matrix dcols;
    gather_cols(self.grad, kh, kw, stride, pad, xs2.h, xs2.w, dcols);
    if (pw.requires_grad) {
      Matrix xmat = channels_by_pixels(px.value);
      Matrix dw = xmat * dcols.transpose();  // in_ch x (out_ch*kh*kw)
      MutableRowMajorMap(pw.grad.data(), xs2.c, kk) += dw;
    }
    if (px.requires_grad) {
      RowMajorMap wmat(pw.value.data(), xs2.c, kk);
      Matrix dx = wmat * dcols;  // in_ch x (B*H*W)
      add_channels_by_pixels(dx, px.grad);
    }
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, real_t eps) {
  const Shape s = x->value.shape;
  if (gamma->value.shape.c != s.c || beta->value.shape.c != s.c) {
    throw_dimension("instance_norm: affine parameters do not match " + std::to_string(s.c) +
                    " channels");
  }
  const std::int64_t area = static_cast<std::int64_t>(s.h) * s.w;
  if (area < 1) throw_dimension("instance_norm: empty spatial extent");

  std::vector<real_t> mean_bc(static_cast<std::size_t>(s.n) * s.c);
  std::vector<real_t> inv_std_bc(static_cast<std::size_t>(s.n) * s.c);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      real_t m = 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int x2 = 0; x2 < s.w; ++x2) m += x->value.at(n, c, y, x2);
      }
      m /= static_cast<real_t>(area);
      real_t var = 0.0;
      for (int y = 0; y < s.h; ++y) {
        for (int x2 = 0; x2 < s.w; ++x2) {
          const real_t d = x->value.at(n, c, y, x2) - m;
          var += d * d;
        }
      }
      var /= static_cast<real_t>(area);
      const real_t inv = 1.0 / std::sqrt(var + eps);
      mean_bc[static_cast<std::size_t>(n) * s.c + c] = m;
      inv_std_bc[static_cast<std::size_t>(n) * s.c + c] = inv;
      const real_t g = gamma->value.v[static_cast<std::size_t>(c)];
      const real_t be = beta->value.v[static_cast<std::size_t>(c)];
      for (int y = 0; y < s.h; ++y) {
        for (int x2 = 0; x2 < s.w; ++x2) {
          out.at(n, c, y, x2) = g * (x->value.at(n, c, y, x2) - m) * inv + be;
        }
      }
    }
  }

  return make_node(std::move(out), {x, gamma, beta},
                   [s, area, mean_bc = std::move(mean_bc),
                    inv_std_bc = std::move(inv_std_bc)](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    const real_t inv_area = 1.0 / static_cast<real_t>(area);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const real_t m = mean_bc[static_cast<std::size_t>(n) * s.c + c];
        const real_t inv = inv_std_bc[static_cast<std::size_t>(n) * s.c + c];
        const real_t g = pg.value.v[static_cast<std::size_t>(c)];

        real_t sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int y = 0; y < s.h; ++y) {
          for (int x2 = 0; x2 < s.w; ++x2) {
            const real_t dy = self.grad.at(n, c, y, x2);
            const real_t xhat = (px.value.at(n, c, y, x2) - m) * inv;
            sum_dy += dy;
            sum_dy_xhat += dy * xhat;
          }
        }
        if (pg.requires_grad) pg.grad.v[static_cast<std::size_t>(c)] += sum_dy_xhat;
        if (pb.requires_grad) pb.grad.v[static_cast<std::size_t>(c)] += sum_dy;
        if (px.requires_grad) {
          const real_t mean_dy = sum_dy * inv_area;
          const real_t mean_dy_xhat = sum_dy_xhat * inv_area;
          for (int y = 0; y < s.h; ++y) {
            for (int x2 = 0; x2 < s.w; ++x2) {
              const real_t dy = self.grad.at(n, c, y, x2);
              const real_t xhat = (px.value.at(n, c, y, x2) - m) * inv;
              px.grad.at(n, c, y, x2) += g * inv * (dy - mean_dy - xhat * mean_dy_xhat);
            }
          }
        }
      }
    }
  });
}

Var max_pool2x2(const Var& x) {
  const Shape s = x->value.shape;
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw_dimension("max_pool2x2: spatial dims must be even, got " + s.str());
  }
  const int ho = s.h / 2, wo = s.w / 2;
  Tensor out(Shape{s.n, s.c, ho, wo});
  std::vector<std::uint8_t> argmax(static_cast<std::size_t>(out.numel()));
  std::size_t k = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox, ++k) {
          real_t best = x->value.at(n, c, 2 * oy, 2 * ox);
          std::uint8_t best_i = 0;
          for (std::uint8_t i = 1; i < 4; ++i) {
            const real_t cand = x->value.at(n, c, 2 * oy + i / 2, 2 * ox + i % 2);
            if (cand > best) {
              best = cand;
              best_i = i;
            }
          }
          out.at(n, c, oy, ox) = best;
          argmax[k] = best_i;
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    Node& px = *self.parents[0];
    const Shape os = self.value.shape;
    std::size_t k = 0;
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        for (int oy = 0; oy < os.h; ++oy) {
          for (int ox = 0; ox < os.w; ++ox, ++k) {
            const std::uint8_t i = argmax[k];
            px.grad.at(n, c, 2 * oy + i / 2, 2 * ox + i % 2) += self.grad.at(n, c, oy, ox);
          }
        }
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  const Shape s = x->value.shape;
  Tensor out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h * 2; ++y) {
        for (int w2 = 0; w2 < s.w * 2; ++w2) {
          out.at(n, c, y, w2) = x->value.at(n, c, y / 2, w2 / 2);
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Node& px = *self.parents[0];
    const Shape os = self.value.shape;
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        for (int y = 0; y < os.h; ++y) {
          for (int w2 = 0; w2 < os.w; ++w2) {
            px.grad.at(n, c, y / 2, w2 / 2) += self.grad.at(n, c, y, w2);
          }
        }
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a->value.shape, sb = b->value.shape;
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw_dimension("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c) {
      for (int y = 0; y < sa.h; ++y) {
        for (int x = 0; x < sa.w; ++x) out.at(n, c, y, x) = a->value.at(n, c, y, x);
      }
    }
    for (int c = 0; c < sb.c; ++c) {
      for (int y = 0; y < sa.h; ++y) {
        for (int x = 0; x < sa.w; ++x) out.at(n, sa.c + c, y, x) = b->value.at(n, c, y, x);
      }
    }
  }
  const int ca = sa.c;
  return make_node(std::move(out), {a, b}, [ca](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Shape os = self.value.shape;
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        Node& dst = c < ca ? pa : pb;
        if (!dst.requires_grad) continue;
        const int cc = c < ca ? c : c - ca;
        for (int y = 0; y < os.h; ++y) {
          for (int x = 0; x < os.w; ++x) dst.grad.at(n, cc, y, x) += self.grad.at(n, c, y, x);
        }
      }
    }
  });
}

Var slice_channels(const Var& a, int first, int count) {
  const Shape s = a->value.shape;
  if (first < 0 || count < 1 || first + count > s.c) {
    throw_validation("slice_channels: range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") out of " + std::to_string(s.c) +
                     " channels");
  }
  Tensor out(Shape{s.n, count, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < count; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) out.at(n, c, y, x) = a->value.at(n, first + c, y, x);
      }
    }
  }
  return make_node(std::move(out), {a}, [first](Node& self) {
    Node& pa = *self.parents[0];
    const Shape os = self.value.shape;
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        for (int y = 0; y < os.h; ++y) {
          for (int x = 0; x < os.w; ++x) {
            pa.grad.at(n, first + c, y, x) += self.grad.at(n, c, y, x);
          }
        }
      }
    }
  });
}

Var mul_channel_gate(const Var& x, const Var& gate) {
  const Shape sx = x->value.shape, sg = gate->value.shape;
  if (sg.c != 1 || sg.n != sx.n || sg.h != sx.h || sg.w != sx.w) {
    throw_dimension("mul_channel_gate: gate " + sg.str() + " does not broadcast over " + sx.str());
  }
  Tensor out(sx);
  for (int n = 0; n < sx.n; ++n) {
    for (int c = 0; c < sx.c; ++c) {
      for (int y = 0; y < sx.h; ++y) {
        for (int w = 0; w < sx.w; ++w) {
          out.at(n, c, y, w) = x->value.at(n, c, y, w) * gate->value.at(n, 0, y, w);
        }
      }
    }
  }
  return make_node(std::move(out), {x, gate}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    const Shape os = self.value.shape;
    for (int n = 0; n < os.n; ++n) {
      for (int y = 0; y < os.h; ++y) {
        for (int w = 0; w < os.w; ++w) {
          const real_t g = pg.value.at(n, 0, y, w);
          real_t acc = 0.0;
          for (int c = 0; c < os.c; ++c) {
            const real_t dy = self.grad.at(n, c, y, w);
            if (px.requires_grad) px.grad.at(n, c, y, w) += dy * g;
            acc += dy * px.value.at(n, c, y, w);
          }
          if (pg.requires_grad) pg.grad.at(n, 0, y, w) += acc;
        }
      }
    }
  });
}

Var zero_pad2d(const Var& x, int top, int bottom, int left, int right) {
  const Shape s = x->value.shape;
  Tensor out(Shape{s.n, s.c, s.h + top + bottom, s.w + left + right});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int w = 0; w < s.w; ++w) {
          out.at(n, c, y + top, w + left) = x->value.at(n, c, y, w);
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [top, left](Node& self) {
    Node& px = *self.parents[0];
    const Shape is = px.value.shape;
    for (int n = 0; n < is.n; ++n) {
      for (int c = 0; c < is.c; ++c) {
        for (int y = 0; y < is.h; ++y) {
          for (int w = 0; w < is.w; ++w) {
            px.grad.at(n, c, y, w) += self.grad.at(n, c, y + top, w + left);
          }
        }
      }
    }
  });
}

Var crop2d(const Var& x, int top, int left, int out_h, int out_w) {
  const Shape s = x->value.shape;
  if (top < 0 || left < 0 || top + out_h > s.h || left + out_w > s.w) {
    throw_dimension("crop2d: window exceeds input " + s.str());
  }
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < out_h; ++y) {
        for (int w = 0; w < out_w; ++w) {
          out.at(n, c, y, w) = x->value.at(n, c, y + top, w + left);
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [top, left](Node& self) {
    Node& px = *self.parents[0];
    const Shape os = self.value.shape;
    for (int n = 0; n < os.n; ++n) {
      for (int c = 0; c < os.c; ++c) {
        for (int y = 0; y < os.h; ++y) {
          for (int w = 0; w < os.w; ++w) {
            px.grad.at(n, c, y + top, w + left) += self.grad.at(n, c, y, w);
          }
        }
      }
    }
  });
}

}  // namespace spcg::nn
