#include "spcg/models.hpp"

#include <random>

#include "spcg/rng.hpp"

namespace spcg {

const char* segmenter_kind_name(SegmenterKind kind) {
  switch (kind) {
    case SegmenterKind::attention_unet: return "attention_unet";
    case SegmenterKind::nested_unet: return "nested_unet";
  }
  throw_validation("unknown segmenter kind");
}

SegmenterKind segmenter_kind_from_name(const std::string& name) {
  if (name == "attention_unet") return SegmenterKind::attention_unet;
  if (name == "nested_unet") return SegmenterKind::nested_unet;
  throw_validation("unknown segmenter kind '" + name + "'");
}

void ModelConfig::validate() const {
  if (image_channels < 1) throw_validation("ModelConfig: image_channels must be >= 1");
  if (num_classes < 1) throw_validation("ModelConfig: num_classes must be >= 1");
  if (base_width < 4) throw_validation("ModelConfig: base_width must be >= 4");
  if (generator_blocks < 1) throw_validation("ModelConfig: generator_blocks must be >= 1");
}

}  // namespace spcg

namespace spcg::nn {

namespace {

// Zero-pad spatial dims up to a multiple; segmenters crop logits back, so
// callers never see the padding.
Var pad_to_multiple(const Var& x, int multiple, int* orig_h, int* orig_w) {
  const Shape s = x->value.shape;
  *orig_h = s.h;
  *orig_w = s.w;
  const int ph = (multiple - s.h % multiple) % multiple;
  const int pw = (multiple - s.w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  return zero_pad2d(x, 0, ph, 0, pw);
}

void check_channels(const Shape& s, int expected, const char* what) {
  if (s.c != expected) {
    throw_dimension(std::string(what) + ": expected " + std::to_string(expected) +
                    " input channels, got " + s.str());
  }
}

}  // namespace

// --- ResnetGenerator ---

ResnetGenerator::ResnetGenerator(int image_channels, int base_width, int blocks)
    : image_channels_(image_channels) {
  const int w = base_width;
  stem_ = Conv2dLayer::make(image_channels, w, 7, 1, 3);
  stem_norm_ = InstanceNormLayer::make(w);
  down1_ = Conv2dLayer::make(w, 2 * w, 3, 2, 1);
  down1_norm_ = InstanceNormLayer::make(2 * w);
  down2_ = Conv2dLayer::make(2 * w, 4 * w, 3, 2, 1);
  down2_norm_ = InstanceNormLayer::make(4 * w);
  blocks_.reserve(static_cast<std::size_t>(blocks));
  for (int i = 0; i < blocks; ++i) {
    ResidualBlock b;
    b.conv1 = Conv2dLayer::make(4 * w, 4 * w, 3, 1, 1);
    b.norm1 = InstanceNormLayer::make(4 * w);
    b.conv2 = Conv2dLayer::make(4 * w, 4 * w, 3, 1, 1);
    b.norm2 = InstanceNormLayer::make(4 * w);
    blocks_.push_back(std::move(b));
  }
  up1_ = ConvTranspose2dLayer::make(4 * w, 2 * w, 3, 2, 1, 1);
  up1_norm_ = InstanceNormLayer::make(2 * w);
  up2_ = ConvTranspose2dLayer::make(2 * w, w, 3, 2, 1, 1);
  up2_norm_ = InstanceNormLayer::make(w);
  head_ = Conv2dLayer::make(w, image_channels, 7, 1, 3);
}

Var ResnetGenerator::forward(const Var& x) const {
  const Shape s = x->value.shape;
  check_channels(s, image_channels_, "generator");
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw_dimension("generator: spatial dims must be divisible by 4, got " + s.str());
  }
  Var h = relu(stem_norm_(stem_(x)));
  h = relu(down1_norm_(down1_(h)));
  h = relu(down2_norm_(down2_(h)));
  for (const ResidualBlock& b : blocks_) {
    Var r = relu(b.norm1(b.conv1(h)));
    r = b.norm2(b.conv2(r));
    h = add(h, r);
  }
  h = relu(up1_norm_(up1_(h)));
  h = relu(up2_norm_(up2_(h)));
  return tanh_op(head_(h));
}

Tensor ResnetGenerator::translate(const Tensor& images) const {
  return forward(constant(images))->value;
}

void ResnetGenerator::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  stem_.collect(prefix + ".stem", out);
  stem_norm_.collect(prefix + ".stem_norm", out);
  down1_.collect(prefix + ".down1", out);
  down1_norm_.collect(prefix + ".down1_norm", out);
  down2_.collect(prefix + ".down2", out);
  down2_norm_.collect(prefix + ".down2_norm", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string base = prefix + ".block" + std::to_string(i);
    blocks_[i].conv1.collect(base + ".conv1", out);
    blocks_[i].norm1.collect(base + ".norm1", out);
    blocks_[i].conv2.collect(base + ".conv2", out);
    blocks_[i].norm2.collect(base + ".norm2", out);
  }
  up1_.collect(prefix + ".up1", out);
  up1_norm_.collect(prefix + ".up1_norm", out);
  up2_.collect(prefix + ".up2", out);
  up2_norm_.collect(prefix + ".up2_norm", out);
  head_.collect(prefix + ".head", out);
}

// --- PatchDiscriminator ---

PatchDiscriminator::PatchDiscriminator(int image_channels, int base_width) {
  const int w = base_width;
  c1_ = Conv2dLayer::make(image_channels, w, 4, 2, 1);
  c2_ = Conv2dLayer::make(w, 2 * w, 4, 2, 1);
  n2_ = InstanceNormLayer::make(2 * w);
  c3_ = Conv2dLayer::make(2 * w, 4 * w, 4, 2, 1);
  n3_ = InstanceNormLayer::make(4 * w);
  c4_ = Conv2dLayer::make(4 * w, 8 * w, 4, 1, 1);
  n4_ = InstanceNormLayer::make(8 * w);
  c5_ = Conv2dLayer::make(8 * w, 1, 4, 1, 1);
}

Var PatchDiscriminator::forward(const Var& x) const {
  constexpr real_t kSlope = 0.2;
  Var h = leaky_relu(c1_(x), kSlope);
  h = leaky_relu(n2_(c2_(h)), kSlope);
  h = leaky_relu(n3_(c3_(h)), kSlope);
  h = leaky_relu(n4_(c4_(h)), kSlope);
  return c5_(h);  // raw scores, squashed by nothing before the MSE objective
}

void PatchDiscriminator::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  c1_.collect(prefix + ".c1", out);
  c2_.collect(prefix + ".c2", out);
  n2_.collect(prefix + ".n2", out);
  c3_.collect(prefix + ".c3", out);
  n3_.collect(prefix + ".n3", out);
  c4_.collect(prefix + ".c4", out);
  n4_.collect(prefix + ".n4", out);
  c5_.collect(prefix + ".c5", out);
}

// --- Segmenter ---

ProbMap Segmenter::predict(const Tensor& images) const {
  return ProbMap{forward(constant(images))->value};
}

namespace {

Var activation_head(const Var& logits, int classes) {
  return classes == 1 ? sigmoid(logits) : softmax_channels(logits);
}

}  // namespace

// --- AttentionUNet ---

AttentionUNet::AttentionUNet(int image_channels, int num_classes, int base_width)
    : num_classes_(num_classes) {
  const int w = base_width;
  const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
  int in_ch = image_channels;
  for (int level = 0; level < 4; ++level) {
    encoder_.push_back(DoubleConvBlock::make(in_ch, widths[level]));
    in_ch = widths[level];
  }
  bottleneck_ = DoubleConvBlock::make(widths[3], 16 * w);
  int deep_ch = 16 * w;
  for (int level = 3; level >= 0; --level) {
    DecoderStage stage;
    stage.up_conv = Conv2dLayer::make(deep_ch, widths[level], 3, 1, 1);
    stage.up_norm = InstanceNormLayer::make(widths[level]);
    stage.gate = AttentionGate::make(widths[level]);
    stage.fuse = DoubleConvBlock::make(2 * widths[level], widths[level]);
    decoder_.push_back(std::move(stage));
    deep_ch = widths[level];
  }
  head_ = Conv2dLayer::make(w, num_classes, 1, 1, 0);
}

Var AttentionUNet::forward(const Var& x) const {
  int orig_h = 0, orig_w = 0;
  Var input = pad_to_multiple(x, 16, &orig_h, &orig_w);

  std::vector<Var> skips;
  Var h = input;
  for (const DoubleConvBlock& block : encoder_) {
    h = block(h);
    skips.push_back(h);
    h = max_pool2x2(h);
  }
  h = bottleneck_(h);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const DecoderStage& stage = decoder_[i];
    const Var& skip = skips[skips.size() - 1 - i];
    Var up = relu(stage.up_norm(stage.up_conv(upsample_nearest2x(h))));
    Var gated = stage.gate(up, skip);
    h = stage.fuse(concat_channels(gated, up));
  }
  Var logits = head_(h);
  if (logits->value.shape.h != orig_h || logits->value.shape.w != orig_w) {
    logits = crop2d(logits, 0, 0, orig_h, orig_w);
  }
  return activation_head(logits, num_classes_);
}

void AttentionUNet::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    encoder_[i].collect(prefix + ".enc" + std::to_string(i), out);
  }
  bottleneck_.collect(prefix + ".bottleneck", out);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string base = prefix + ".dec" + std::to_string(i);
    decoder_[i].up_conv.collect(base + ".up_conv", out);
    decoder_[i].up_norm.collect(base + ".up_norm", out);
    decoder_[i].gate.collect(base + ".gate", out);
    decoder_[i].fuse.collect(base + ".fuse", out);
  }
  head_.collect(prefix + ".head", out);
}

// --- NestedUNet ---

NestedUNet::NestedUNet(int image_channels, int num_classes, int base_width)
    : num_classes_(num_classes) {
  const int w = base_width;
  const int widths[4] = {w, 2 * w, 4 * w, 8 * w};
  node_.resize(4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j + i < 4; ++j) {
      int in_ch;
      if (j == 0) {
        in_ch = i == 0 ? image_channels : widths[i - 1];
      } else {
        // j earlier nodes at this depth plus the upsampled deeper node
        in_ch = j * widths[i] + widths[i + 1];
      }
      node_[static_cast<std::size_t>(i)].push_back(DoubleConvBlock::make(in_ch, widths[i]));
    }
  }
  head_ = Conv2dLayer::make(w, num_classes, 1, 1, 0);
}

Var NestedUNet::forward(const Var& x) const {
  int orig_h = 0, orig_w = 0;
  Var input = pad_to_multiple(x, 8, &orig_h, &orig_w);

  // grid[i][j] follows the dense skip pathway recurrence
  std::vector<std::vector<Var>> grid(4);
  grid[0].push_back(node_[0][0](input));
  for (int i = 1; i < 4; ++i) {
    grid[static_cast<std::size_t>(i)].push_back(
        node_[static_cast<std::size_t>(i)][0](max_pool2x2(grid[static_cast<std::size_t>(i - 1)][0])));
  }
  for (int j = 1; j < 4; ++j) {
    for (int i = 0; i + j < 4; ++i) {
      Var cat = grid[static_cast<std::size_t>(i)][0];
      for (int k = 1; k < j; ++k) {
        cat = concat_channels(cat, grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
      }
      cat = concat_channels(
          cat, upsample_nearest2x(grid[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j - 1)]));
      grid[static_cast<std::size_t>(i)].push_back(
          node_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](cat));
    }
  }
  Var logits = head_(grid[0][3]);
  if (logits->value.shape.h != orig_h || logits->value.shape.w != orig_w) {
    logits = crop2d(logits, 0, 0, orig_h, orig_w);
  }
  return activation_head(logits, num_classes_);
}

void NestedUNet::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  for (std::size_t i = 0; i < node_.size(); ++i) {
    for (std::size_t j = 0; j < node_[i].size(); ++j) {
      node_[i][j].collect(prefix + ".x" + std::to_string(i) + std::to_string(j), out);
    }
  }
  head_.collect(prefix + ".head", out);
}

}  // namespace spcg::nn

namespace spcg {

std::vector<nn::NamedParam> ModelBundle::named_params() const {
  std::vector<nn::NamedParam> out;
  if (g) g->collect("G", out);
  if (f) f->collect("F", out);
  if (d_x) d_x->collect("D_X", out);
  if (d_y) d_y->collect("D_Y", out);
  if (u) u->collect("U", out);
  return out;
}

std::unique_ptr<nn::ResnetGenerator> build_generator(const ModelConfig& cfg) {
  cfg.validate();
  return std::make_unique<nn::ResnetGenerator>(cfg.image_channels, cfg.base_width,
                                               cfg.generator_blocks);
}

std::unique_ptr<nn::PatchDiscriminator> build_discriminator(const ModelConfig& cfg) {
  cfg.validate();
  return std::make_unique<nn::PatchDiscriminator>(cfg.image_channels, cfg.base_width);
}

std::unique_ptr<nn::Segmenter> build_segmenter(const ModelConfig& cfg) {
  cfg.validate();
  switch (cfg.segmenter_kind) {
    case SegmenterKind::attention_unet:
      return std::make_unique<nn::AttentionUNet>(cfg.image_channels, cfg.num_classes,
                                                 cfg.base_width);
    case SegmenterKind::nested_unet:
      return std::make_unique<nn::NestedUNet>(cfg.image_channels, cfg.num_classes,
                                              cfg.base_width);
  }
  throw_validation("build_segmenter: unknown kind");
}

ModelBundle build_model_bundle(const ModelConfig& cfg, bool with_segmenter) {
  ModelBundle bundle;
  bundle.config = cfg;
  bundle.g = build_generator(cfg);
  bundle.f = build_generator(cfg);
  bundle.d_x = build_discriminator(cfg);
  bundle.d_y = build_discriminator(cfg);
  if (with_segmenter) bundle.u = build_segmenter(cfg);
  return bundle;
}

void init_network_weights(const std::vector<nn::NamedParam>& params, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(mix64(seed, "weight-init"));
  std::normal_distribution<real_t> gauss(0.0, 0.02);
  for (const nn::NamedParam& np : params) {
    Tensor& t = np.param->value;
    if (np.name.ends_with(".w")) {
      for (real_t& x : t.v) x = gauss(rng);
    } else if (np.name.ends_with(".gamma")) {
      t.fill(1.0);
    } else {
      t.fill(0.0);  // biases and norm shifts
    }
  }
}

void init_weights(ModelBundle& bundle, std::uint64_t seed) {
  init_network_weights(bundle.named_params(), seed);
}

std::int64_t parameter_count(const std::vector<nn::NamedParam>& params) {
  std::int64_t total = 0;
  for (const nn::NamedParam& np : params) total += np.param->value.numel();
  return total;
}

}  // namespace spcg
