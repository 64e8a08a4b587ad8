#pragma once

#include <filesystem>
#include <optional>
#include <random>

#include "spcg/data.hpp"
#include "spcg/losses.hpp"
#include "spcg/models.hpp"
#include "spcg/optimizer.hpp"

namespace spcg::train {

struct TrainConfig {
  int total_epochs = 200;
  int anneal_start_epoch = 150;
  real_t lr_gan = 2e-4;
  real_t lr_seg = 1e-3;
  int batch_size = 2;
  int buffer_capacity = 50;
  LossConfig loss;
  std::uint64_t seed = 1;
  int checkpoint_every = 50;

  void validate() const;
};

/// Constant at base_lr until anneal_start_epoch, then linear to zero, which
/// is reached only at epoch == total_epochs.
real_t lr_at_epoch(const TrainConfig& cfg, real_t base_lr, int epoch);

/// Image pool for discriminator updates. Below capacity it stores and
/// returns the fresh image; at capacity it returns the fresh image with
/// probability 1/2, otherwise swaps it against a uniformly random stored one.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  Tensor sample(const Tensor& fresh, std::mt19937_64& rng);
  int size() const { return static_cast<int>(stored_.size()); }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::vector<Tensor> stored_;
};

struct IterationRecord {
  int epoch = 0;
  int step = 0;
  real_t adv_g = 0, adv_f = 0;
  real_t d_x = 0, d_y = 0;
  real_t cyc_x = 0, cyc_y = 0;
  real_t structure = 0;
  real_t total = 0;
  real_t lr_gan = 0, lr_seg = 0;
};

/// Optimizer and pool state that persists across train_step calls.
struct TrainContext {
  TrainContext(ModelBundle& bundle, const TrainConfig& cfg);

  nn::AdamOptimizer opt_gf;
  nn::AdamOptimizer opt_dx;
  nn::AdamOptimizer opt_dy;
  std::optional<nn::AdamOptimizer> opt_u;
  ReplayBuffer pool_x;
  ReplayBuffer pool_y;
  std::mt19937_64 rng;

  void set_epoch_learning_rates(const TrainConfig& cfg, int epoch);
};

/// One SP Cycle-GAN iteration: joint generator(+segmenter) update under the
/// composite objective, then both discriminator updates against pooled fakes.
IterationRecord train_step(ModelBundle& bundle, const data::Batch& batch_src,
                           const data::Batch& batch_tgt, const TrainConfig& cfg,
                           TrainContext& ctx, int epoch, int step);

struct GanTrainOptions {
  std::optional<data::CropSpec> crop;       // per-iteration image processing
  std::filesystem::path checkpoint_dir;     // empty: no checkpoints
  std::filesystem::path log_path;           // empty: no metrics log
};

ModelBundle train_sp_cyclegan(const data::Dataset& source, const data::Dataset& target,
                              const ModelConfig& model_cfg, const TrainConfig& cfg,
                              const GanTrainOptions& options = {});

/// Crops every labelled sample, runs it through the generator (nullptr means
/// identity, used by the no-DA arm), and writes a directory dataset. Labels
/// never pass through the generator.
data::Dataset translate_dataset(const nn::ResnetGenerator* generator,
                                const data::Dataset& source,
                                const std::optional<data::CropSpec>& crop,
                                const std::filesystem::path& out_dir);

struct SegTrainOptions {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path log_path;
};

struct SegTrainResult {
  std::unique_ptr<nn::Segmenter> segmenter;  // best epoch by mean training loss
  int best_epoch = -1;
  real_t best_loss = 0.0;
};

SegTrainResult train_segmenter(const data::Dataset& labelled, const ModelConfig& model_cfg,
                               const TrainConfig& cfg, const SegTrainOptions& options = {});

}  // namespace spcg::train
