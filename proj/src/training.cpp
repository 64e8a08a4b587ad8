#include "spcg/training.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spcg/checkpoint.hpp"
#include "spcg/rng.hpp"

namespace spcg::train {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (total_epochs < 1) throw_validation("TrainConfig: total_epochs must be >= 1");
  if (anneal_start_epoch < 1 || anneal_start_epoch > total_epochs) {
    throw_validation("TrainConfig: anneal_start_epoch must lie in (0, total_epochs]");
  }
  if (lr_gan <= 0.0) throw_validation("TrainConfig: lr_gan must be > 0");
  if (lr_seg <= 0.0) throw_validation("TrainConfig: lr_seg must be > 0");
  if (batch_size < 1) throw_validation("TrainConfig: batch_size must be >= 1");
  if (buffer_capacity < 1) throw_validation("TrainConfig: buffer_capacity must be >= 1");
  if (checkpoint_every < 1) throw_validation("TrainConfig: checkpoint_every must be >= 1");
  loss.validate();
}

real_t lr_at_epoch(const TrainConfig& cfg, real_t base_lr, int epoch) {
  if (epoch < 0 || epoch >= cfg.total_epochs) {
    throw_validation("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " +
                     std::to_string(cfg.total_epochs) + ")");
  }
  if (epoch < cfg.anneal_start_epoch) return base_lr;
  const int span = cfg.total_epochs - cfg.anneal_start_epoch;
  return base_lr * static_cast<real_t>(cfg.total_epochs - epoch) / static_cast<real_t>(span);
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw_validation("ReplayBuffer: capacity must be >= 1");
  stored_.reserve(static_cast<std::size_t>(capacity));
}

Tensor ReplayBuffer::sample(const Tensor& fresh, std::mt19937_64& rng) {
  if (static_cast<int>(stored_.size()) < capacity_) {
    stored_.push_back(fresh);
    return fresh;
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < 0.5) return fresh;
  std::uniform_int_distribution<int> pick(0, capacity_ - 1);
  const int idx = pick(rng);
  Tensor old = std::move(stored_[static_cast<std::size_t>(idx)]);
  stored_[static_cast<std::size_t>(idx)] = fresh;
  return old;
}

namespace {

std::vector<nn::Var> generator_params(const ModelBundle& bundle) {
  std::vector<nn::NamedParam> named;
  bundle.g->collect("G", named);
  bundle.f->collect("F", named);
  return nn::params_of(named);
}

std::vector<nn::Var> network_params(const nn::PatchDiscriminator& d, const char* prefix) {
  std::vector<nn::NamedParam> named;
  d.collect(prefix, named);
  return nn::params_of(named);
}

std::vector<nn::Var> segmenter_params(const nn::Segmenter& u) {
  std::vector<nn::NamedParam> named;
  u.collect("U", named);
  return nn::params_of(named);
}

void check_finite(real_t value, const char* component, int epoch, int step) {
  if (!std::isfinite(value)) {
    throw_training(std::string("non-finite ") + component + " at epoch " +
                   std::to_string(epoch) + " step " + std::to_string(step));
  }
}

// Route each generated image through the pool individually.
Tensor pool_batch(ReplayBuffer& pool, const Tensor& fresh_batch, std::mt19937_64& rng) {
  Tensor out(fresh_batch.shape);
  const std::size_t stride =
      static_cast<std::size_t>(fresh_batch.shape.c) * fresh_batch.shape.h * fresh_batch.shape.w;
  for (int i = 0; i < fresh_batch.shape.n; ++i) {
    const Tensor picked = pool.sample(fresh_batch.sample(i), rng);
    std::copy(picked.v.begin(), picked.v.end(),
              out.v.begin() + static_cast<std::ptrdiff_t>(stride * static_cast<std::size_t>(i)));
  }
  return out;
}

ordered_json record_to_json(const IterationRecord& r) {
  ordered_json j;
  j["type"] = "iteration";
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["adv_G"] = r.adv_g;
  j["adv_F"] = r.adv_f;
  j["d_X"] = r.d_x;
  j["d_Y"] = r.d_y;
  j["cyc_X"] = r.cyc_x;
  j["cyc_Y"] = r.cyc_y;
  j["struct"] = r.structure;
  j["total"] = r.total;
  j["lr_gan"] = r.lr_gan;
  j["lr_seg"] = r.lr_seg;
  return j;
}

class NdjsonLogger {
 public:
  explicit NdjsonLogger(const fs::path& path) {
    if (path.empty()) return;
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw_io("cannot open metrics log " + path.string());
  }
  void write(const ordered_json& j) {
    if (out_.is_open()) out_ << j.dump() << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace

TrainContext::TrainContext(ModelBundle& bundle, const TrainConfig& cfg)
    : opt_gf(generator_params(bundle), cfg.lr_gan, 0.5, 0.999),
      opt_dx(network_params(*bundle.d_x, "D_X"), cfg.lr_gan, 0.5, 0.999),
      opt_dy(network_params(*bundle.d_y, "D_Y"), cfg.lr_gan, 0.5, 0.999),
      pool_x(cfg.buffer_capacity),
      pool_y(cfg.buffer_capacity),
      rng(make_rng(mix64(cfg.seed, "replay-pool"))) {
  if (bundle.u) opt_u.emplace(segmenter_params(*bundle.u), cfg.lr_seg, 0.9, 0.999);
}

void TrainContext::set_epoch_learning_rates(const TrainConfig& cfg, int epoch) {
  const real_t gan_lr = lr_at_epoch(cfg, cfg.lr_gan, epoch);
  opt_gf.set_learning_rate(gan_lr);
  opt_dx.set_learning_rate(gan_lr);
  opt_dy.set_learning_rate(gan_lr);
  if (opt_u) opt_u->set_learning_rate(lr_at_epoch(cfg, cfg.lr_seg, epoch));
}

IterationRecord train_step(ModelBundle& bundle, const data::Batch& batch_src,
                           const data::Batch& batch_tgt, const TrainConfig& cfg,
                           TrainContext& ctx, int epoch, int step) {
  if (bundle.u && !batch_src.masks) {
    throw_validation("train_step: source batch must be labelled when a segmenter is co-trained");
  }

  const nn::Var x = nn::constant(batch_src.images.data);
  const nn::Var y = nn::constant(batch_tgt.images.data);

  // forward: y' = G(x), x'' = F(y'), x' = F(y), y'' = G(x'), s = U(x'')
  const nn::Var y_trans = bundle.g->forward(x);
  const nn::Var x_rec = bundle.f->forward(y_trans);
  const nn::Var x_trans = bundle.f->forward(y);
  const nn::Var y_rec = bundle.g->forward(x_trans);

  const nn::Var adv_g = nn::lsgan_loss_node(bundle.d_y->forward(y_trans), true);
  const nn::Var adv_f = nn::lsgan_loss_node(bundle.d_x->forward(x_trans), true);
  const nn::Var cyc_x = nn::cycle_loss_node(x, x_rec);
  const nn::Var cyc_y = nn::cycle_loss_node(y, y_rec);

  nn::Var objective = nn::add(nn::add(adv_g, adv_f),
                              nn::mul_const(nn::add(cyc_x, cyc_y), cfg.loss.lambda_cyc));
  nn::Var structure;
  real_t structure_value = 0.0;
  if (bundle.u && batch_src.masks) {
    const nn::Var segmented = bundle.u->forward(x_rec);
    structure = nn::focal_tversky_loss_node(segmented, *batch_src.masks, cfg.loss);
    structure_value = structure->value.item();
    // zeta = 0 keeps the term out of the graph entirely; it is still logged
    if (cfg.loss.zeta > 0.0) {
      objective = nn::add(objective, nn::mul_const(structure, cfg.loss.zeta));
    }
  }

  IterationRecord record;
  record.epoch = epoch;
  record.step = step;
  record.adv_g = adv_g->value.item();
  record.adv_f = adv_f->value.item();
  record.cyc_x = cyc_x->value.item();
  record.cyc_y = cyc_y->value.item();
  record.structure = structure_value;
  check_finite(record.adv_g, "adv_G", epoch, step);
  check_finite(record.adv_f, "adv_F", epoch, step);
  check_finite(record.cyc_x, "cyc_X", epoch, step);
  check_finite(record.cyc_y, "cyc_Y", epoch, step);
  check_finite(record.structure, "struct", epoch, step);

  // joint generator(+segmenter) phase; discriminators receive adjoints but
  // their optimizer never reads them
  ctx.opt_gf.zero_grad();
  nn::backward(objective);
  ctx.opt_gf.step();

  if (ctx.opt_u && structure) {
    // unweighted structure gradients into U, regardless of zeta
    ctx.opt_u->zero_grad();
    nn::backward(structure);
    ctx.opt_u->step();
  }

  // discriminator phase: generators frozen via detached pooled fakes
  const Tensor fake_y = pool_batch(ctx.pool_y, y_trans->value, ctx.rng);
  const Tensor fake_x = pool_batch(ctx.pool_x, x_trans->value, ctx.rng);

  const auto update_discriminator = [&](nn::PatchDiscriminator& d, nn::AdamOptimizer& opt,
                                        const Tensor& real_images, const Tensor& fake_images,
                                        const char* component) {
    const nn::Var loss = nn::mul_const(
        nn::add(nn::lsgan_loss_node(d.forward(nn::constant(real_images)), true),
                nn::lsgan_loss_node(d.forward(nn::constant(fake_images)), false)),
        0.5);
    const real_t value = loss->value.item();
    check_finite(value, component, epoch, step);
    opt.zero_grad();
    nn::backward(loss);
    opt.step();
    return value;
  };
  record.d_y = update_discriminator(*bundle.d_y, ctx.opt_dy, batch_tgt.images.data, fake_y, "d_Y");
  record.d_x = update_discriminator(*bundle.d_x, ctx.opt_dx, batch_src.images.data, fake_x, "d_X");

  GeneratorLossParts parts;
  parts.adv_g = record.adv_g;
  parts.adv_f = record.adv_f;
  parts.cyc_x = record.cyc_x;
  parts.cyc_y = record.cyc_y;
  parts.structure = record.structure;
  record.total = sp_generator_objective(parts, cfg.loss);
  record.lr_gan = ctx.opt_gf.learning_rate();
  record.lr_seg = ctx.opt_u ? ctx.opt_u->learning_rate() : 0.0;
  return record;
}

namespace {

std::vector<data::PairedSample> crop_for_training(const data::Dataset& dataset,
                                                  const std::vector<int>& indices,
                                                  const std::optional<data::CropSpec>& crop,
                                                  std::uint64_t seed_base, int epoch,
                                                  int position_base) {
  std::vector<data::PairedSample> out;
  out.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const data::PairedSample& s = dataset.samples[static_cast<std::size_t>(indices[k])];
    if (!crop) {
      out.push_back(s);
      continue;
    }
    const std::uint64_t crop_seed =
        mix64(seed_base, (static_cast<std::uint64_t>(epoch) << 32) ^
                             static_cast<std::uint64_t>(position_base + static_cast<int>(k)));
    std::vector<data::PairedSample> patches = data::apply_crop(s, *crop, crop_seed);
    if (patches.size() != 1) {
      throw_validation("training crops must yield one patch per sample; use quadrant_tile only "
                       "for translation or evaluation");
    }
    out.push_back(std::move(patches[0]));
  }
  return out;
}

}  // namespace

ModelBundle train_sp_cyclegan(const data::Dataset& source, const data::Dataset& target,
                              const ModelConfig& model_cfg, const TrainConfig& cfg,
                              const GanTrainOptions& options) {
  model_cfg.validate();
  cfg.validate();
  if (source.samples.empty()) throw_validation("train_sp_cyclegan: empty source dataset");
  if (target.samples.empty()) throw_validation("train_sp_cyclegan: empty target dataset");

  const bool with_segmenter = cfg.loss.zeta > 0.0;
  if (with_segmenter && !source.fully_labelled()) {
    throw_validation("train_sp_cyclegan: structure loss requires a fully labelled source domain");
  }

  ModelBundle bundle = build_model_bundle(model_cfg, with_segmenter);
  init_weights(bundle, model_cfg.init_seed);
  TrainContext ctx(bundle, cfg);
  NdjsonLogger log(options.log_path);

  const int pair_count = static_cast<int>(std::min(source.size(), target.size()));
  const int steps_per_epoch = (pair_count + cfg.batch_size - 1) / cfg.batch_size;

  std::vector<int> src_order(source.size());
  std::vector<int> tgt_order(target.size());
  for (std::size_t i = 0; i < src_order.size(); ++i) src_order[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < tgt_order.size(); ++i) tgt_order[i] = static_cast<int>(i);

  const std::uint64_t crop_seed_src = mix64(cfg.seed, "crop-src");
  const std::uint64_t crop_seed_tgt = mix64(cfg.seed, "crop-tgt");

  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    ctx.set_epoch_learning_rates(cfg, epoch);
    {
      std::mt19937_64 r1 = make_rng(mix64(mix64(cfg.seed, "shuffle-src"), epoch));
      std::shuffle(src_order.begin(), src_order.end(), r1);
      std::mt19937_64 r2 = make_rng(mix64(mix64(cfg.seed, "shuffle-tgt"), epoch));
      std::shuffle(tgt_order.begin(), tgt_order.end(), r2);
    }

    real_t epoch_total = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const int begin = step * cfg.batch_size;
      const int end = std::min(pair_count, begin + cfg.batch_size);
      const std::vector<int> src_idx(src_order.begin() + begin, src_order.begin() + end);
      const std::vector<int> tgt_idx(tgt_order.begin() + begin, tgt_order.begin() + end);

      const auto src_samples =
          crop_for_training(source, src_idx, options.crop, crop_seed_src, epoch, begin);
      const auto tgt_samples =
          crop_for_training(target, tgt_idx, options.crop, crop_seed_tgt, epoch, begin);

      const data::Batch batch_src = data::make_batch(src_samples, source.num_classes,
                                                     Domain::source, with_segmenter);
      const data::Batch batch_tgt =
          data::make_batch(tgt_samples, target.num_classes, Domain::target, false);

      const IterationRecord record = train_step(bundle, batch_src, batch_tgt, cfg, ctx, epoch, step);
      epoch_total += record.total;
      log.write(record_to_json(record));
    }

    ordered_json summary;
    summary["type"] = "epoch";
    summary["epoch"] = epoch;
    summary["mean_total"] = epoch_total / static_cast<real_t>(steps_per_epoch);
    summary["lr_gan"] = ctx.opt_gf.learning_rate();
    log.write(summary);

    if (!options.checkpoint_dir.empty() && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.total_epochs) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_epoch_%04d.spck", epoch + 1);
      save_checkpoint(options.checkpoint_dir / name, bundle.named_params(), model_cfg, epoch + 1,
                      "bundle");
    }
  }

  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir / "final.spck", bundle.named_params(), model_cfg,
                    cfg.total_epochs, "bundle");
  }
  return bundle;
}

data::Dataset translate_dataset(const nn::ResnetGenerator* generator,
                                const data::Dataset& source,
                                const std::optional<data::CropSpec>& crop,
                                const fs::path& out_dir) {
  if (!source.fully_labelled()) {
    throw_validation("translate_dataset: every source sample must be labelled");
  }
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "labels");

  for (std::size_t i = 0; i < source.samples.size(); ++i) {
    const data::PairedSample& sample = source.samples[i];
    std::vector<data::PairedSample> patches;
    if (crop) {
      patches = data::apply_crop(sample, *crop, mix64(0x7261746cULL, i));
    } else {
      patches.push_back(sample);
    }
    for (data::PairedSample& patch : patches) {
      const Tensor image = generator ? generator->translate(patch.image) : patch.image;
      data::save_image(out_dir / "images" / (patch.stem + ".png"), image);
      data::save_mask(out_dir / "labels" / (patch.stem + ".png"), *patch.label);
    }
  }
  return data::load_directory_dataset(out_dir, source.channels, source.num_classes);
}

SegTrainResult train_segmenter(const data::Dataset& labelled, const ModelConfig& model_cfg,
                               const TrainConfig& cfg, const SegTrainOptions& options) {
  model_cfg.validate();
  cfg.validate();
  if (labelled.samples.empty()) throw_validation("train_segmenter: empty dataset");
  if (!labelled.fully_labelled()) {
    throw_validation("train_segmenter: encountered an unlabelled sample");
  }

  SegTrainResult result;
  result.segmenter = build_segmenter(model_cfg);
  std::vector<nn::NamedParam> named;
  result.segmenter->collect("U", named);
  init_network_weights(named, model_cfg.init_seed);
  nn::AdamOptimizer opt(nn::params_of(named), cfg.lr_seg, 0.9, 0.999);
  NdjsonLogger log(options.log_path);

  data::BatchIterator iterator(labelled, cfg.batch_size, mix64(cfg.seed, "seg-shuffle"),
                               Domain::source, true);

  std::vector<Tensor> best_params;
  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    opt.set_learning_rate(lr_at_epoch(cfg, cfg.lr_seg, epoch));
    iterator.start_epoch(epoch);
    real_t epoch_loss = 0.0;
    int batches = 0;
    while (auto batch = iterator.next()) {
      const nn::Var pred = result.segmenter->forward(nn::constant(batch->images.data));
      const nn::Var loss = nn::focal_tversky_loss_node(pred, *batch->masks, cfg.loss);
      const real_t value = loss->value.item();
      check_finite(value, "segmenter FTL", epoch, batches);
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
      epoch_loss += value;
      ++batches;
    }
    epoch_loss /= static_cast<real_t>(batches);

    ordered_json summary;
    summary["type"] = "seg_epoch";
    summary["epoch"] = epoch;
    summary["mean_ftl"] = epoch_loss;
    summary["lr"] = opt.learning_rate();
    log.write(summary);

    if (result.best_epoch < 0 || epoch_loss < result.best_loss) {
      result.best_loss = epoch_loss;
      result.best_epoch = epoch;
      best_params.clear();
      for (const nn::NamedParam& np : named) best_params.push_back(np.param->value);
    }
  }

  // restore the best epoch by mean training loss
  for (std::size_t i = 0; i < named.size(); ++i) named[i].param->value = best_params[i];

  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir / "best.spck", named, model_cfg, result.best_epoch,
                    "segmenter");
  }
  return result;
}

}  // namespace spcg::train
