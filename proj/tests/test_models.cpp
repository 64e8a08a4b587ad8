#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spcg/checkpoint.hpp"
#include "spcg/models.hpp"
#include "test_support.hpp"

using namespace spcg;
using spcg_test::fresh_temp_dir;
using spcg_test::random_tensor;

namespace {

ModelConfig tiny_config(int channels = 1, int classes = 1,
                        SegmenterKind kind = SegmenterKind::attention_unet) {
  ModelConfig cfg;
  cfg.image_channels = channels;
  cfg.num_classes = classes;
  cfg.segmenter_kind = kind;
  cfg.base_width = 8;
  cfg.generator_blocks = 2;
  cfg.init_seed = 17;
  return cfg;
}

double fraction_nonzero_param_grads(const std::vector<nn::NamedParam>& params) {
  std::int64_t nonzero = 0, total = 0;
  for (const nn::NamedParam& np : params) {
    total += np.param->value.numel();
    if (np.param->grad.v.size() != np.param->value.v.size()) continue;
    for (double g : np.param->grad.v) nonzero += g != 0.0 ? 1 : 0;
  }
  return double(nonzero) / double(total);
}

std::mt19937_64 rng(0x3D0DE15);

}  // namespace

TEST_CASE("generator preserves shape and bounds its output") {
  const ModelConfig cfg = tiny_config(3);
  auto g = build_generator(cfg);
  std::vector<nn::NamedParam> params;
  g->collect("G", params);
  init_network_weights(params, 3);

  for (const Shape s : {Shape{2, 3, 192, 192}, Shape{1, 3, 64, 64}, Shape{1, 3, 20, 28}}) {
    const Tensor x = random_tensor(s, rng);
    const Tensor y = g->translate(x);
    CHECK(y.shape == s);
    bool bounded = true;
    for (double v : y.v) bounded &= v >= -1.0 && v <= 1.0;
    CHECK(bounded);
    CHECK(y.all_finite());
  }

  CHECK_THROWS_AS(g->translate(Tensor(Shape{1, 3, 30, 32})), Error);  // 30 % 4 != 0
  CHECK_THROWS_AS(g->translate(Tensor(Shape{1, 1, 32, 32})), Error);  // wrong channels
}

TEST_CASE("shape round-trip through both generators") {
  const ModelConfig cfg = tiny_config(1);
  ModelBundle bundle = build_model_bundle(cfg, false);
  init_weights(bundle, 5);
  const Tensor x = random_tensor(Shape{2, 1, 24, 36}, rng);
  const Tensor there = bundle.g->translate(x);
  const Tensor back = bundle.f->translate(there);
  CHECK(back.shape == x.shape);
}

TEST_CASE("discriminator emits a spatial score grid") {
  const ModelConfig cfg = tiny_config(3);
  auto d = build_discriminator(cfg);
  std::vector<nn::NamedParam> params;
  d->collect("D", params);
  init_network_weights(params, 11);

  const nn::Var one = d->forward(nn::constant(random_tensor(Shape{2, 3, 192, 192}, rng)));
  CHECK(one->value.shape.c == 1);
  CHECK(one->value.shape.h > 1);
  CHECK(one->value.shape.w > 1);

  // doubling the batch doubles the leading dim only
  const nn::Var two = d->forward(nn::constant(random_tensor(Shape{4, 3, 192, 192}, rng)));
  CHECK(two->value.shape.n == 4);
  CHECK(two->value.shape.h == one->value.shape.h);
  CHECK(two->value.shape.w == one->value.shape.w);

  CHECK_THROWS_AS(d->forward(nn::constant(Tensor(Shape{1, 3, 8, 8}))), Error);
}

TEST_CASE("attention unet: shape contract incl. non-multiple-of-16 input") {
  ModelConfig cfg = tiny_config(3, 1, SegmenterKind::attention_unet);
  cfg.base_width = 4;
  auto u = build_segmenter(cfg);
  std::vector<nn::NamedParam> params;
  u->collect("U", params);
  init_network_weights(params, 23);

  const ProbMap out = u->predict(random_tensor(Shape{2, 3, 364, 364}, rng));
  CHECK(out.values.shape == Shape{2, 1, 364, 364});
  bool bounded = true;
  for (double v : out.values.v) bounded &= v >= 0.0 && v <= 1.0;
  CHECK(bounded);
}

TEST_CASE("nested unet: multi-class probabilities sum to one per pixel") {
  ModelConfig cfg = tiny_config(1, 3, SegmenterKind::nested_unet);
  cfg.base_width = 4;
  auto u = build_segmenter(cfg);
  std::vector<nn::NamedParam> params;
  u->collect("U", params);
  init_network_weights(params, 29);

  const ProbMap out = u->predict(random_tensor(Shape{8, 1, 192, 192}, rng));
  CHECK(out.values.shape == Shape{8, 3, 192, 192});
  out.validate();  // checks [0,1] and per-pixel normalization
}

TEST_CASE("unknown segmenter kind is rejected") {
  CHECK_THROWS_AS(segmenter_kind_from_name("transformer"), Error);
  CHECK(segmenter_kind_from_name("nested_unet") == SegmenterKind::nested_unet);
}

TEST_CASE("init_weights is deterministic in the seed") {
  const ModelConfig cfg = tiny_config();
  ModelBundle a = build_model_bundle(cfg, true);
  ModelBundle b = build_model_bundle(cfg, true);
  init_weights(a, 123);
  init_weights(b, 123);
  const auto pa = a.named_params();
  const auto pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].param->value.v == pb[i].param->value.v);
  }

  init_weights(b, 124);
  bool any_differ = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    any_differ |= pa[i].param->value.v != pb[i].param->value.v;
  }
  CHECK(any_differ);
}

TEST_CASE("deterministic forward passes for identical (cfg, seed, input)") {
  const ModelConfig cfg = tiny_config();
  ModelBundle a = build_model_bundle(cfg, false);
  ModelBundle b = build_model_bundle(cfg, false);
  init_weights(a, 7);
  init_weights(b, 7);
  std::mt19937_64 local(55);
  const Tensor x = random_tensor(Shape{2, 1, 32, 32}, local);
  CHECK(a.g->translate(x).v == b.g->translate(x).v);
}

TEST_CASE("post-init forward is finite and nearly every parameter gets gradient") {
  const ModelConfig cfg = tiny_config(1, 1);
  ModelBundle bundle = build_model_bundle(cfg, true);
  init_weights(bundle, 31);
  std::mt19937_64 local(66);
  const Tensor x = random_tensor(Shape{2, 1, 32, 32}, local);

  const auto check_network = [&](const nn::Var& out, const std::vector<nn::NamedParam>& params) {
    CHECK(out->value.all_finite());
    const Tensor w = random_tensor(out->value.shape, local);
    nn::backward(nn::sum(nn::mul_mask(out, w)));
    CHECK(fraction_nonzero_param_grads(params) >= 0.99);
  };

  {
    std::vector<nn::NamedParam> p;
    bundle.g->collect("G", p);
    check_network(bundle.g->forward(nn::constant(x)), p);
  }
  {
    std::vector<nn::NamedParam> p;
    bundle.d_x->collect("D_X", p);
    check_network(bundle.d_x->forward(nn::constant(x)), p);
  }
  {
    std::vector<nn::NamedParam> p;
    bundle.u->collect("U", p);
    check_network(bundle.u->forward(nn::constant(x)), p);
  }
}

TEST_CASE("parameter count is monotone in capacity knobs") {
  ModelConfig small = tiny_config();
  ModelConfig wider = small;
  wider.base_width = 16;
  ModelConfig deeper = small;
  deeper.generator_blocks = 4;

  const auto count = [](const ModelConfig& c) {
    ModelBundle b = build_model_bundle(c, true);
    return parameter_count(b.named_params());
  };
  CHECK(count(wider) > count(small));
  CHECK(count(deeper) > count(small));
}

TEST_CASE("checkpoint round trip, meta, and config mismatch") {
  const auto dir = fresh_temp_dir("ckpt");
  const ModelConfig cfg = tiny_config();
  ModelBundle a = build_model_bundle(cfg, true);
  init_weights(a, 41);
  save_checkpoint(dir / "bundle.spck", a.named_params(), cfg, 12, "bundle");

  const CheckpointMeta meta = read_checkpoint_meta(dir / "bundle.spck");
  CHECK(meta.epoch == 12);
  CHECK(meta.role == "bundle");
  CHECK(meta.model == cfg);

  ModelBundle b = build_model_bundle(cfg, true);
  init_weights(b, 999);
  load_checkpoint(dir / "bundle.spck", b.named_params(), cfg);
  const auto pa = a.named_params();
  const auto pb = b.named_params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].param->value.v == pb[i].param->value.v);
  }

  ModelConfig other = cfg;
  other.base_width = 16;
  ModelBundle c = build_model_bundle(other, true);
  CHECK_THROWS_AS(load_checkpoint(dir / "bundle.spck", c.named_params(), other), Error);
}

TEST_CASE("model config validation") {
  ModelConfig cfg = tiny_config();
  cfg.base_width = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.num_classes = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.generator_blocks = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
