#pragma once

#include <map>
#include <string>
#include <vector>

#include "spcg/autodiff.hpp"
#include "spcg/types.hpp"

namespace spcg {

/// Every loss hyperparameter in one place. alpha/beta trade false negatives
/// against false positives in the Tversky index, gamma is the focal exponent
/// parameter (the loss raises to 1/gamma), epsilon smooths empty classes,
/// zeta weighs the structure term and lambda_cyc the cycle terms of the
/// generator objective.
struct LossConfig {
  real_t alpha = 0.7;
  real_t beta = 0.3;
  real_t gamma = 4.0 / 3.0;
  real_t epsilon = 1e-6;
  real_t zeta = 0.0;
  real_t lambda_cyc = 10.0;

  void validate() const;
};

/// Batch-pooled Tversky similarity index, one value per non-background class.
/// Sums run over every pixel of the batch before the ratio is formed.
std::vector<real_t> tversky_index(const ProbMap& pred, const MaskBatch& target,
                                  const LossConfig& cfg);

/// Sum over non-background classes of (1 - TI_c)^(1/gamma).
real_t focal_tversky_loss(const ProbMap& pred, const MaskBatch& target, const LossConfig& cfg);

/// Overlap of hard label maps: 2|y ∩ y~| / (|y| + |y~|) for one class.
/// Both indicator maps empty -> 1.0; exactly one empty -> 0.0.
real_t dice_score(const MaskBatch& pred_labels, const MaskBatch& target, int class_id);

/// Least-squares adversarial loss: mean squared distance of discriminator
/// scores from 1 (real) or 0 (fake).
real_t lsgan_loss(const Tensor& disc_out, bool target_is_real);

/// Mean absolute difference between original and recovered images.
real_t cycle_loss(const ImageBatch& original, const ImageBatch& recovered);
real_t cycle_loss(const Tensor& original, const Tensor& recovered);

/// Focal-Tversky loss between the segmenter's prediction on the recovered
/// source image and the source ground-truth mask. Identical contract to
/// focal_tversky_loss; only source-domain labels ever participate.
real_t structure_loss(const ProbMap& segmenter_out, const MaskBatch& source_label,
                      const LossConfig& cfg);

struct GeneratorLossParts {
  real_t adv_g = 0.0;
  real_t adv_f = 0.0;
  real_t cyc_x = 0.0;
  real_t cyc_y = 0.0;
  real_t structure = 0.0;
};

/// adv_G + adv_F + lambda_cyc*(cyc_X + cyc_Y) + zeta*struct.
real_t sp_generator_objective(const GeneratorLossParts& parts, const LossConfig& cfg);
/// Map form; requires exactly the parts adv_G, adv_F, cyc_X, cyc_Y, struct.
real_t sp_generator_objective(const std::map<std::string, real_t>& parts, const LossConfig& cfg);

}  // namespace spcg

namespace spcg::nn {

/// Differentiable counterparts used by the training graph. The pure
/// functions above evaluate these same graphs, so there is a single
/// implementation of each formula.
std::vector<Var> tversky_index_nodes(const Var& pred, const MaskBatch& target,
                                     const LossConfig& cfg);
Var focal_tversky_loss_node(const Var& pred, const MaskBatch& target, const LossConfig& cfg);
Var lsgan_loss_node(const Var& disc_out, bool target_is_real);
Var cycle_loss_node(const Var& original, const Var& recovered);

}  // namespace spcg::nn
