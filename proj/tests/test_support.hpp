#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "spcg/autodiff.hpp"
#include "spcg/types.hpp"

namespace spcg_test {

using spcg::LabelMap;
using spcg::real_t;
using spcg::Shape;
using spcg::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, real_t lo = -1.0,
                            real_t hi = 1.0) {
  std::uniform_real_distribution<real_t> dist(lo, hi);
  Tensor t(shape);
  for (real_t& v : t.v) v = dist(rng);
  return t;
}

inline LabelMap random_labels(int n, int h, int w, int num_classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(0, num_classes - 1);
  LabelMap l(n, h, w);
  for (auto& v : l.v) v = dist(rng);
  return l;
}

/// Central finite-difference check of reverse-mode gradients. `build` must
/// construct a scalar graph from leaf inputs (rebuilt per evaluation).
/// Returns the worst relative error over all input coordinates.
inline real_t gradient_check(
    const std::function<spcg::nn::Var(const std::vector<spcg::nn::Var>&)>& build,
    std::vector<Tensor> inputs, real_t step = 1e-5) {
  namespace nn = spcg::nn;

  std::vector<nn::Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(nn::leaf(t, true));
  nn::Var root = build(leaves);
  nn::backward(root);

  const auto value_at = [&](const std::vector<Tensor>& xs) {
    std::vector<nn::Var> ls;
    ls.reserve(xs.size());
    for (const Tensor& t : xs) ls.push_back(nn::constant(t));
    return build(ls)->value.item();
  };

  real_t worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].v.size(); ++k) {
      std::vector<Tensor> probe = inputs;
      probe[i].v[k] += step;
      const real_t up = value_at(probe);
      probe[i].v[k] -= 2.0 * step;
      const real_t down = value_at(probe);
      const real_t numeric = (up - down) / (2.0 * step);
      const real_t analytic = leaves[i]->grad.v[k];
      const real_t scale = std::max({std::abs(numeric), std::abs(analytic), real_t(1e-8)});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

/// Unique per-process temp dir under the build tree.
inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("spcg_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace spcg_test
