#include "spcg/optimizer.hpp"

#include <cmath>

namespace spcg::nn {

AdamOptimizer::AdamOptimizer(std::vector<Var> params, real_t lr, real_t beta1, real_t beta2,
                             real_t eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  moments_.reserve(params_.size());
  for (const Var& p : params_) {
    moments_.push_back({Tensor::zeros(p->value.shape), Tensor::zeros(p->value.shape)});
  }
}

void AdamOptimizer::zero_grad() {
  for (const Var& p : params_) {
    p->ensure_grad();
    p->zero_grad();
  }
}

void AdamOptimizer::step() {
  ++t_;
  const real_t bc1 = 1.0 - std::pow(beta1_, static_cast<real_t>(t_));
  const real_t bc2 = 1.0 - std::pow(beta2_, static_cast<real_t>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i];
    if (p.grad.v.size() != p.value.v.size()) continue;  // never touched by backward
    Moments& mom = moments_[i];
    const std::size_t count = p.value.v.size();
    for (std::size_t k = 0; k < count; ++k) {
      const real_t g = p.grad.v[k];
      mom.m.v[k] = beta1_ * mom.m.v[k] + (1.0 - beta1_) * g;
      mom.v.v[k] = beta2_ * mom.v.v[k] + (1.0 - beta2_) * g * g;
      const real_t m_hat = mom.m.v[k] / bc1;
      const real_t v_hat = mom.v.v[k] / bc2;
      p.value.v[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

std::vector<Var> params_of(const std::vector<NamedParam>& named) {
  std::vector<Var> out;
  out.reserve(named.size());
  for (const NamedParam& np : named) out.push_back(np.param);
  return out;
}

}  // namespace spcg::nn
