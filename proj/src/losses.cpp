#include "spcg/losses.hpp"

#include <cmath>

#include "spcg/nn_ops.hpp"

namespace spcg {

void LossConfig::validate() const {
  if (alpha < 0.0) throw_validation("LossConfig: alpha must be >= 0");
  if (beta < 0.0) throw_validation("LossConfig: beta must be >= 0");
  if (gamma <= 0.0) throw_validation("LossConfig: gamma must be > 0");
  if (epsilon < 0.0) throw_validation("LossConfig: epsilon must be >= 0");
  if (zeta < 0.0) throw_validation("LossConfig: zeta must be >= 0");
  if (lambda_cyc < 0.0) throw_validation("LossConfig: lambda_cyc must be >= 0");
}

void MaskBatch::validate() const {
  if (num_classes < 2) throw_validation("MaskBatch: num_classes must include background");
  for (std::int32_t label : labels.v) {
    if (label < 0 || label >= num_classes) {
      throw_validation("MaskBatch: label " + std::to_string(label) + " out of range [0, " +
                       std::to_string(num_classes - 1) + "]");
    }
  }
}

void ProbMap::validate() const {
  const Shape s = values.shape;
  for (real_t p : values.v) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw_validation("ProbMap: value outside [0, 1]");
    }
  }
  if (s.c >= 2) {
    for (int n = 0; n < s.n; ++n) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          real_t total = 0.0;
          for (int c = 0; c < s.c; ++c) total += values.at(n, c, y, x);
          if (std::abs(total - 1.0) > 1e-5) {
            throw_validation("ProbMap: per-pixel class probabilities do not sum to 1");
          }
        }
      }
    }
  }
}

namespace {

// pred has either one foreground channel (binary) or one channel per class.
void check_pred_target(const Shape& ps, const MaskBatch& target) {
  const LabelMap& lm = target.labels;
  if (ps.n != lm.n || ps.h != lm.h || ps.w != lm.w) {
    throw_dimension("pred " + ps.str() + " vs target (" + std::to_string(lm.n) + "," +
                    std::to_string(lm.h) + "," + std::to_string(lm.w) + ")");
  }
  if (ps.c == 1) {
    if (target.num_classes != 2) {
      throw_validation("binary prediction requires num_classes == 2, got " +
                       std::to_string(target.num_classes));
    }
  } else if (ps.c != target.num_classes) {
    throw_dimension("prediction has " + std::to_string(ps.c) + " channels but target declares " +
                    std::to_string(target.num_classes) + " classes");
  }
  target.validate();
}

Tensor class_indicator(const MaskBatch& target, int class_id) {
  const LabelMap& lm = target.labels;
  Tensor g(Shape{lm.n, 1, lm.h, lm.w});
  for (std::int64_t i = 0; i < lm.numel(); ++i) {
    g.v[static_cast<std::size_t>(i)] = lm.v[static_cast<std::size_t>(i)] == class_id ? 1.0 : 0.0;
  }
  return g;
}

}  // namespace

std::vector<real_t> tversky_index(const ProbMap& pred, const MaskBatch& target,
                                  const LossConfig& cfg) {
  nn::Var leaf_pred = nn::constant(pred.values);
  const std::vector<nn::Var> nodes = nn::tversky_index_nodes(leaf_pred, target, cfg);
  std::vector<real_t> out;
  out.reserve(nodes.size());
  for (const nn::Var& n : nodes) out.push_back(n->value.item());
  return out;
}

real_t focal_tversky_loss(const ProbMap& pred, const MaskBatch& target, const LossConfig& cfg) {
  nn::Var leaf_pred = nn::constant(pred.values);
  return nn::focal_tversky_loss_node(leaf_pred, target, cfg)->value.item();
}

real_t dice_score(const MaskBatch& pred_labels, const MaskBatch& target, int class_id) {
  const LabelMap& a = pred_labels.labels;
  const LabelMap& b = target.labels;
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw_dimension("dice_score: label maps (" + std::to_string(a.n) + "," + std::to_string(a.h) +
                    "," + std::to_string(a.w) + ") vs (" + std::to_string(b.n) + "," +
                    std::to_string(b.h) + "," + std::to_string(b.w) + ")");
  }
  if (class_id < 0) throw_validation("dice_score: negative class id");

  std::int64_t inter = 0, count_a = 0, count_b = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const bool ia = a.v[static_cast<std::size_t>(i)] == class_id;
    const bool ib = b.v[static_cast<std::size_t>(i)] == class_id;
    inter += (ia && ib) ? 1 : 0;
    count_a += ia ? 1 : 0;
    count_b += ib ? 1 : 0;
  }
  if (count_a == 0 && count_b == 0) return 1.0;
  if (count_a == 0 || count_b == 0) return 0.0;
  return 2.0 * static_cast<real_t>(inter) / static_cast<real_t>(count_a + count_b);
}

real_t lsgan_loss(const Tensor& disc_out, bool target_is_real) {
  return nn::lsgan_loss_node(nn::constant(disc_out), target_is_real)->value.item();
}

real_t cycle_loss(const Tensor& original, const Tensor& recovered) {
  return nn::cycle_loss_node(nn::constant(original), nn::constant(recovered))->value.item();
}

real_t cycle_loss(const ImageBatch& original, const ImageBatch& recovered) {
  return cycle_loss(original.data, recovered.data);
}

real_t structure_loss(const ProbMap& segmenter_out, const MaskBatch& source_label,
                      const LossConfig& cfg) {
  return focal_tversky_loss(segmenter_out, source_label, cfg);
}

real_t sp_generator_objective(const GeneratorLossParts& parts, const LossConfig& cfg) {
  return parts.adv_g + parts.adv_f + cfg.lambda_cyc * (parts.cyc_x + parts.cyc_y) +
         cfg.zeta * parts.structure;
}

real_t sp_generator_objective(const std::map<std::string, real_t>& parts, const LossConfig& cfg) {
  static const char* const kRequired[] = {"adv_G", "adv_F", "cyc_X", "cyc_Y", "struct"};
  for (const char* key : kRequired) {
    if (!parts.count(key)) {
      throw_validation(std::string("sp_generator_objective: missing part '") + key + "'");
    }
  }
  for (const auto& [key, value] : parts) {
    (void)value;
    bool known = false;
    for (const char* k : kRequired) known |= key == k;
    if (!known) throw_validation("sp_generator_objective: unknown part '" + key + "'");
  }
  GeneratorLossParts p;
  p.adv_g = parts.at("adv_G");
  p.adv_f = parts.at("adv_F");
  p.cyc_x = parts.at("cyc_X");
  p.cyc_y = parts.at("cyc_Y");
  p.structure = parts.at("struct");
  return sp_generator_objective(p, cfg);
}

}  // namespace spcg

namespace spcg::nn {

std::vector<Var> tversky_index_nodes(const Var& pred, const MaskBatch& target,
                                     const LossConfig& cfg) {
  cfg.validate();
  const Shape ps = pred->value.shape;
  check_pred_target(ps, target);

  std::vector<Var> out;
  for (int class_id = 1; class_id < target.num_classes; ++class_id) {
    // Binary predictions carry the foreground class in their single channel.
    const Var pc = ps.c == 1 ? pred : slice_channels(pred, class_id, 1);
    const Tensor g = class_indicator(target, class_id);
    real_t target_mass = 0.0;
    for (real_t v : g.v) target_mass += v;

    const Var tp = sum(mul_mask(pc, g));
    const Var fn = rsub_const(target_mass, tp);   // sum((1-p)*g) = |g| - tp
    const Var fp = sub(sum(pc), tp);              // sum(p*(1-g)) = sum(p) - tp
    const Var den = add_const(
        add(tp, add(mul_const(fn, cfg.alpha), mul_const(fp, cfg.beta))), cfg.epsilon);
    const Var num = add_const(tp, cfg.epsilon);
    out.push_back(divide(num, den));
  }
  return out;
}

Var focal_tversky_loss_node(const Var& pred, const MaskBatch& target, const LossConfig& cfg) {
  const std::vector<Var> indices = tversky_index_nodes(pred, target, cfg);
  const real_t exponent = 1.0 / cfg.gamma;
  Var total;
  for (const Var& ti : indices) {
    // clamp guards pow against a microscopically negative 1 - TI from rounding
    const Var term = pow_const(clamp_min(rsub_const(1.0, ti), 0.0), exponent);
    total = total ? add(total, term) : term;
  }
  return total ? total : constant_scalar(0.0);
}

Var lsgan_loss_node(const Var& disc_out, bool target_is_real) {
  if (disc_out->value.numel() == 0) throw_validation("lsgan_loss: empty discriminator output");
  const real_t target = target_is_real ? 1.0 : 0.0;
  return mean(square(add_const(disc_out, -target)));
}

Var cycle_loss_node(const Var& original, const Var& recovered) {
  check_same_shape(original->value.shape, recovered->value.shape, "cycle_loss");
  return mean(abs_op(sub(recovered, original)));
}

}  // namespace spcg::nn
