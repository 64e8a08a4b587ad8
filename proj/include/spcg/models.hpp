#pragma once

#include <cstdint>
#include <memory>

#include "spcg/layers.hpp"
#include "spcg/types.hpp"

namespace spcg {

enum class SegmenterKind { attention_unet, nested_unet };

const char* segmenter_kind_name(SegmenterKind kind);
SegmenterKind segmenter_kind_from_name(const std::string& name);

struct ModelConfig {
  int image_channels = 3;
  int num_classes = 1;  // foreground classes of the ProbMap (1 = binary)
  SegmenterKind segmenter_kind = SegmenterKind::attention_unet;
  int base_width = 64;
  int generator_blocks = 9;
  std::uint64_t init_seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

}  // namespace spcg

namespace spcg::nn {

/// Residual encoder-decoder generator: 7x7 stem, two stride-2 downsampling
/// stages, N residual blocks, two fractionally-strided upsampling stages and
/// a tanh-bounded 7x7 head. Input spatial dims must be divisible by 4.
class ResnetGenerator {
 public:
  ResnetGenerator(int image_channels, int base_width, int blocks);

  Var forward(const Var& x) const;
  /// Inference convenience; no gradient graph survives the call.
  Tensor translate(const Tensor& images) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

 private:
  struct ResidualBlock {
    Conv2dLayer conv1, conv2;
    InstanceNormLayer norm1, norm2;
  };

  Conv2dLayer stem_;
  InstanceNormLayer stem_norm_;
  Conv2dLayer down1_, down2_;
  InstanceNormLayer down1_norm_, down2_norm_;
  std::vector<ResidualBlock> blocks_;
  ConvTranspose2dLayer up1_, up2_;
  InstanceNormLayer up1_norm_, up2_norm_;
  Conv2dLayer head_;
  int image_channels_;
};

/// Strided patch classifier emitting an unbounded spatial score grid
/// (roughly 70 px receptive field at this depth).
class PatchDiscriminator {
 public:
  PatchDiscriminator(int image_channels, int base_width);

  Var forward(const Var& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;

 private:
  Conv2dLayer c1_, c2_, c3_, c4_, c5_;
  InstanceNormLayer n2_, n3_, n4_;
};

/// Common segmenter surface: images in, ProbMap out (sigmoid for one class,
/// per-pixel normalized channels otherwise).
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual Var forward(const Var& x) const = 0;
  virtual void collect(const std::string& prefix, std::vector<NamedParam>& out) const = 0;
  virtual int num_classes() const = 0;

  ProbMap predict(const Tensor& images) const;
};

class AttentionUNet final : public Segmenter {
 public:
  AttentionUNet(int image_channels, int num_classes, int base_width);
  Var forward(const Var& x) const override;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const override;
  int num_classes() const override { return num_classes_; }

 private:
  struct DecoderStage {
    Conv2dLayer up_conv;
    InstanceNormLayer up_norm;
    AttentionGate gate;
    DoubleConvBlock fuse;
  };

  std::vector<DoubleConvBlock> encoder_;
  DoubleConvBlock bottleneck_;
  std::vector<DecoderStage> decoder_;
  Conv2dLayer head_;
  int num_classes_;
};

class NestedUNet final : public Segmenter {
 public:
  NestedUNet(int image_channels, int num_classes, int base_width);
  Var forward(const Var& x) const override;
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const override;
  int num_classes() const override { return num_classes_; }

 private:
  // node_[i][j] is the block at depth i, nesting column j
  std::vector<std::vector<DoubleConvBlock>> node_;
  Conv2dLayer head_;
  int num_classes_;
};

}  // namespace spcg::nn

namespace spcg {

/// The five trainable networks of the SP Cycle-GAN training graph.
struct ModelBundle {
  ModelConfig config;
  std::unique_ptr<nn::ResnetGenerator> g;    // source -> target
  std::unique_ptr<nn::ResnetGenerator> f;    // target -> source
  std::unique_ptr<nn::PatchDiscriminator> d_x;
  std::unique_ptr<nn::PatchDiscriminator> d_y;
  std::unique_ptr<nn::Segmenter> u;          // absent for the plain Cycle-GAN arm

  std::vector<nn::NamedParam> named_params() const;
};

std::unique_ptr<nn::ResnetGenerator> build_generator(const ModelConfig& cfg);
std::unique_ptr<nn::PatchDiscriminator> build_discriminator(const ModelConfig& cfg);
std::unique_ptr<nn::Segmenter> build_segmenter(const ModelConfig& cfg);
ModelBundle build_model_bundle(const ModelConfig& cfg, bool with_segmenter);

/// Draw every convolution weight from N(0, 0.02^2), zero the biases, reset
/// normalization affines. Deterministic in the seed and parameter order.
void init_network_weights(const std::vector<nn::NamedParam>& params, std::uint64_t seed);
void init_weights(ModelBundle& bundle, std::uint64_t seed);

std::int64_t parameter_count(const std::vector<nn::NamedParam>& params);

}  // namespace spcg
