#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spcg/errors.hpp"

namespace spcg {

using real_t = double;

/// Dense NCHW shape. Scalars are (1,1,1,1); per-channel vectors (1,C,1,1).
/// Default-constructed shapes are empty so shape and storage always agree.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::int64_t numel() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Owning dense double tensor in NCHW layout. Value semantics throughout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(static_cast<std::size_t>(s.numel()), 0.0) {}
  Tensor(Shape s, real_t fill_value)
      : shape(s), v(static_cast<std::size_t>(s.numel()), fill_value) {}

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, real_t value) { return Tensor(s, value); }
  static Tensor scalar(real_t value) { return Tensor(Shape{1, 1, 1, 1}, value); }

  std::int64_t numel() const { return shape.numel(); }
  bool empty() const { return v.empty(); }

  real_t& at(int n_, int c_, int h_, int w_) {
    return v[static_cast<std::size_t>(((static_cast<std::int64_t>(n_) * shape.c + c_) * shape.h + h_) * shape.w + w_)];
  }
  real_t at(int n_, int c_, int h_, int w_) const {
    return v[static_cast<std::size_t>(((static_cast<std::int64_t>(n_) * shape.c + c_) * shape.h + h_) * shape.w + w_)];
  }

  real_t* data() { return v.data(); }
  const real_t* data() const { return v.data(); }

  real_t item() const {
    if (numel() != 1) throw_dimension("item() on tensor of shape " + shape.str());
    return v[0];
  }

  void fill(real_t value) { std::fill(v.begin(), v.end(), value); }
  bool all_finite() const;

  /// Slice one sample out of the batch dimension, shape (1,C,H,W).
  Tensor sample(int index) const;

  Shape shape;
  std::vector<real_t> v;
};

/// Integer class-index maps, NHW layout. The label side of a segmentation pair.
struct LabelMap {
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<std::int32_t> v;

  LabelMap() = default;
  LabelMap(int n_, int h_, int w_)
      : n(n_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * h_ * w_, 0) {}

  std::int64_t numel() const { return static_cast<std::int64_t>(n) * h * w; }
  std::int32_t& at(int n_, int h_, int w_) {
    return v[static_cast<std::size_t>((static_cast<std::int64_t>(n_) * h + h_) * w + w_)];
  }
  std::int32_t at(int n_, int h_, int w_) const {
    return v[static_cast<std::size_t>((static_cast<std::int64_t>(n_) * h + h_) * w + w_)];
  }
  LabelMap sample(int index) const;
  bool operator==(const LabelMap&) const = default;
};

void check_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace spcg
