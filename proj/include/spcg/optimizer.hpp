#pragma once

#include <vector>

#include "spcg/layers.hpp"

namespace spcg::nn {

/// Adaptive moment estimation over a fixed parameter group. The learning
/// rate is mutable so schedules can anneal it between epochs.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Var> params, real_t lr, real_t beta1, real_t beta2,
                real_t eps = 1e-8);

  void set_learning_rate(real_t lr) { lr_ = lr; }
  real_t learning_rate() const { return lr_; }

  void zero_grad();
  void step();

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  std::vector<Var> params_;
  std::vector<Moments> moments_;
  real_t lr_;
  real_t beta1_;
  real_t beta2_;
  real_t eps_;
  std::int64_t t_ = 0;
};

std::vector<Var> params_of(const std::vector<NamedParam>& named);

}  // namespace spcg::nn
