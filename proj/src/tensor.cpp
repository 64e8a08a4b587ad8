#include "spcg/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace spcg {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

bool Tensor::all_finite() const {
  for (real_t x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Tensor Tensor::sample(int index) const {
  if (index < 0 || index >= shape.n) {
    throw_validation("sample index " + std::to_string(index) + " out of range for batch " +
                     std::to_string(shape.n));
  }
  Tensor out(Shape{1, shape.c, shape.h, shape.w});
  const std::size_t stride = static_cast<std::size_t>(shape.c) * shape.h * shape.w;
  std::memcpy(out.data(), data() + static_cast<std::size_t>(index) * stride,
              stride * sizeof(real_t));
  return out;
}

LabelMap LabelMap::sample(int index) const {
  if (index < 0 || index >= n) {
    throw_validation("sample index " + std::to_string(index) + " out of range for batch " +
                     std::to_string(n));
  }
  LabelMap out(1, h, w);
  const std::size_t stride = static_cast<std::size_t>(h) * w;
  std::memcpy(out.v.data(), v.data() + static_cast<std::size_t>(index) * stride,
              stride * sizeof(std::int32_t));
  return out;
}

void check_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw_dimension(std::string(what) + ": shapes disagree, " + a.str() + " vs " + b.str());
  }
}

}  // namespace spcg
