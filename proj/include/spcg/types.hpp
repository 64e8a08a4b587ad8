#pragma once

#include "spcg/tensor.hpp"

namespace spcg {

enum class Domain { source, target };

/// Normalized multi-channel image tensor with a domain tag. Values live in [-1, 1].
struct ImageBatch {
  Tensor data;  // (batch, channels, height, width)
  Domain domain = Domain::source;
};

/// Integer class-index ground-truth masks. Class 0 is background.
struct MaskBatch {
  LabelMap labels;  // (batch, height, width)
  int num_classes = 2;

  void validate() const;
};

/// Per-pixel class-probability output of a segmenter.
/// Binary segmenters emit one foreground channel; multi-class emits one
/// channel per class with per-pixel values summing to 1.
struct ProbMap {
  Tensor values;  // (batch, classes, height, width)

  int classes() const { return values.shape.c; }
  void validate() const;
};

}  // namespace spcg
