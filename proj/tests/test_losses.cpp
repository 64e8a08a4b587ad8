#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "spcg/losses.hpp"
#include "test_support.hpp"

using namespace spcg;
using spcg_test::random_labels;
using spcg_test::random_tensor;

namespace {

// --- independent brute-force oracles (pixel counting, no shared code) ---

std::vector<double> oracle_tversky(const Tensor& pred, const LabelMap& labels, int num_classes,
                                   double alpha, double beta, double eps) {
  std::vector<double> out;
  for (int c = 1; c < num_classes; ++c) {
    double tp = 0, fn = 0, fp = 0;
    for (int n = 0; n < labels.n; ++n) {
      for (int y = 0; y < labels.h; ++y) {
        for (int x = 0; x < labels.w; ++x) {
          const double p = pred.shape.c == 1 ? pred.at(n, 0, y, x) : pred.at(n, c, y, x);
          const bool g = labels.at(n, y, x) == c;
          if (g) {
            tp += p;
            fn += 1.0 - p;
          } else {
            fp += p;
          }
        }
      }
    }
    out.push_back((tp + eps) / (tp + alpha * fn + beta * fp + eps));
  }
  return out;
}

double oracle_ftl(const Tensor& pred, const LabelMap& labels, int num_classes, double alpha,
                  double beta, double gamma, double eps) {
  double total = 0.0;
  for (double ti : oracle_tversky(pred, labels, num_classes, alpha, beta, eps)) {
    total += std::pow(1.0 - ti, 1.0 / gamma);
  }
  return total;
}

double oracle_dice(const LabelMap& a, const LabelMap& b, int class_id) {
  long inter = 0, ca = 0, cb = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const bool ia = a.v[i] == class_id;
    const bool ib = b.v[i] == class_id;
    inter += (ia && ib) ? 1 : 0;
    ca += ia ? 1 : 0;
    cb += ib ? 1 : 0;
  }
  if (ca == 0 && cb == 0) return 1.0;
  if (ca == 0 || cb == 0) return 0.0;
  return 2.0 * double(inter) / double(ca + cb);
}

ProbMap random_probmap(int n, int channels, int h, int w, std::mt19937_64& rng) {
  Tensor t(Shape{n, channels, h, w});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (channels == 1) {
    for (auto& v : t.v) v = unit(rng);
  } else {
    for (int b = 0; b < n; ++b) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double total = 0.0;
          for (int c = 0; c < channels; ++c) {
            const double v = unit(rng) + 1e-3;
            t.at(b, c, y, x) = v;
            total += v;
          }
          for (int c = 0; c < channels; ++c) t.at(b, c, y, x) /= total;
        }
      }
    }
  }
  return ProbMap{t};
}

std::mt19937_64 rng(0x10552);

}  // namespace

TEST_CASE("tversky index and FTL match the pixel-counting oracle on random tensors") {
  std::uniform_real_distribution<double> param(0.1, 0.9);
  for (int trial = 0; trial < 300; ++trial) {
    const int num_classes = 2 + static_cast<int>(rng() % 2);  // 2 or 3
    const int channels = num_classes == 2 ? 1 : num_classes;
    const int h = 2 + static_cast<int>(rng() % 7);
    const int w = 2 + static_cast<int>(rng() % 7);
    const int n = 1 + static_cast<int>(rng() % 2);

    const ProbMap pred = random_probmap(n, channels, h, w, rng);
    MaskBatch target{random_labels(n, h, w, num_classes, rng), num_classes};

    LossConfig cfg;
    cfg.alpha = param(rng);
    cfg.beta = param(rng);
    cfg.gamma = 0.5 + param(rng);
    cfg.epsilon = 1e-6;

    const auto expected =
        oracle_tversky(pred.values, target.labels, num_classes, cfg.alpha, cfg.beta, cfg.epsilon);
    const auto actual = tversky_index(pred, target, cfg);
    REQUIRE(actual.size() == expected.size());
    for (std::size_t c = 0; c < actual.size(); ++c) {
      CHECK(actual[c] == doctest::Approx(expected[c]).epsilon(1e-6));
    }
    const double expected_ftl = oracle_ftl(pred.values, target.labels, num_classes, cfg.alpha,
                                           cfg.beta, cfg.gamma, cfg.epsilon);
    CHECK(focal_tversky_loss(pred, target, cfg) ==
          doctest::Approx(expected_ftl).epsilon(1e-6));
  }
}

TEST_CASE("worked 2x2 example: TI = 2/2.6 with alpha=0.7 beta=0.3") {
  // target foreground at (0,0) and (0,1); prediction certain-foreground everywhere
  MaskBatch target{LabelMap(1, 2, 2), 2};
  target.labels.at(0, 0, 0) = 1;
  target.labels.at(0, 0, 1) = 1;
  ProbMap pred{Tensor::full(Shape{1, 1, 2, 2}, 1.0)};

  LossConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 0.3;
  cfg.epsilon = 0.0;

  const auto oracle = oracle_tversky(pred.values, target.labels, 2, 0.7, 0.3, 0.0);
  REQUIRE(oracle.size() == 1);
  CHECK(oracle[0] == doctest::Approx(2.0 / 2.6).epsilon(1e-12));

  const auto ti = tversky_index(pred, target, cfg);
  REQUIRE(ti.size() == 1);
  CHECK(ti[0] == doctest::Approx(oracle[0]).epsilon(1e-12));
  CHECK(ti[0] == doctest::Approx(0.76923).epsilon(1e-4));

  // focal term with gamma = 4/3: exponent 3/4 on (1 - TI)
  cfg.gamma = 4.0 / 3.0;
  const double ftl = focal_tversky_loss(pred, target, cfg);
  const double frozen = std::pow(1.0 - 2.0 / 2.6, 0.75);  // scalar arithmetic oracle
  CHECK(frozen == doctest::Approx(0.3329533790702403).epsilon(1e-12));
  CHECK(ftl == doctest::Approx(frozen).epsilon(1e-10));
}

TEST_CASE("perfect prediction gives TI = 1 and FTL = 0") {
  std::mt19937_64 local(42);
  const LabelMap labels = random_labels(2, 5, 5, 3, local);
  MaskBatch target{labels, 3};
  Tensor onehot(Shape{2, 3, 5, 5});
  for (int n = 0; n < 2; ++n) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) onehot.at(n, labels.at(n, y, x), y, x) = 1.0;
    }
  }
  LossConfig cfg;
  for (double ti : tversky_index(ProbMap{onehot}, target, cfg)) {
    CHECK(ti == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(focal_tversky_loss(ProbMap{onehot}, target, cfg) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("dice score worked examples and empty-class policy") {
  // 4-pixel maps: pred class-1 at {0,1}, target class-1 at {0,2} -> 0.5
  MaskBatch pred{LabelMap(1, 2, 2), 2};
  MaskBatch target{LabelMap(1, 2, 2), 2};
  pred.labels.v = {1, 1, 0, 0};
  target.labels.v = {1, 0, 1, 0};
  CHECK(dice_score(pred, target, 1) == doctest::Approx(0.5));
  CHECK(oracle_dice(pred.labels, target.labels, 1) == doctest::Approx(0.5));

  CHECK(dice_score(target, target, 1) == doctest::Approx(1.0));

  MaskBatch blank{LabelMap(1, 2, 2), 2};
  CHECK(dice_score(blank, blank, 1) == 1.0);  // both empty
  CHECK(dice_score(pred, blank, 1) == 0.0);   // one empty

  MaskBatch wrong_shape{LabelMap(1, 2, 3), 2};
  CHECK_THROWS_AS(dice_score(pred, wrong_shape, 1), Error);
  CHECK_THROWS_AS(dice_score(pred, target, -1), Error);
}

TEST_CASE("dice score is symmetric and matches the oracle on random maps") {
  std::mt19937_64 local(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 2 + static_cast<int>(local() % 7);
    const int w = 2 + static_cast<int>(local() % 7);
    const int classes = 2 + static_cast<int>(local() % 2);
    MaskBatch a{random_labels(1, h, w, classes, local), classes};
    MaskBatch b{random_labels(1, h, w, classes, local), classes};
    for (int c = 0; c < classes; ++c) {
      const double ab = dice_score(a, b, c);
      CHECK(ab == doctest::Approx(oracle_dice(a.labels, b.labels, c)).epsilon(1e-12));
      CHECK(ab == dice_score(b, a, c));
    }
  }
}

TEST_CASE("lsgan loss examples") {
  CHECK(lsgan_loss(Tensor::full(Shape{1, 1, 2, 2}, 1.0), true) == doctest::Approx(0.0));
  CHECK(lsgan_loss(Tensor::full(Shape{1, 1, 2, 2}, 0.5), false) == doctest::Approx(0.25));
  Tensor two(Shape{1, 1, 1, 2});
  two.v = {0.0, 1.0};
  CHECK(lsgan_loss(two, true) == doctest::Approx(0.5));
  CHECK_THROWS_AS(lsgan_loss(Tensor(), true), Error);
}

TEST_CASE("cycle loss examples") {
  const Shape s{1, 1, 3, 3};
  ImageBatch a{Tensor::full(s, 0.2), Domain::source};
  ImageBatch b{Tensor::full(s, -0.3), Domain::source};
  CHECK(cycle_loss(a, a) == doctest::Approx(0.0));
  CHECK(cycle_loss(a, b) == doctest::Approx(0.5));
  ImageBatch c{Tensor::full(Shape{1, 1, 3, 4}, 0.0), Domain::source};
  CHECK_THROWS_AS(cycle_loss(a, c), Error);
}

TEST_CASE("structure loss is definitionally the focal tversky loss") {
  std::mt19937_64 local(99);
  const ProbMap pred = random_probmap(2, 1, 6, 6, local);
  MaskBatch target{random_labels(2, 6, 6, 2, local), 2};
  LossConfig cfg;
  const double a = structure_loss(pred, target, cfg);
  const double b = focal_tversky_loss(pred, target, cfg);
  CHECK(a == b);  // bit-for-bit
}

TEST_CASE("sp generator objective") {
  LossConfig cfg;
  cfg.lambda_cyc = 10.0;
  cfg.zeta = 4.0;

  GeneratorLossParts zero;
  CHECK(sp_generator_objective(zero, cfg) == 0.0);

  GeneratorLossParts parts;
  parts.cyc_x = 0.1;
  parts.cyc_y = 0.1;
  parts.structure = 0.2;
  CHECK(sp_generator_objective(parts, cfg) == doctest::Approx(2.8));

  std::map<std::string, real_t> map_parts{{"adv_G", 0.0}, {"adv_F", 0.0}, {"cyc_X", 0.1},
                                          {"cyc_Y", 0.1}, {"struct", 0.2}};
  CHECK(sp_generator_objective(map_parts, cfg) == doctest::Approx(2.8));

  map_parts.erase("cyc_Y");
  CHECK_THROWS_AS(sp_generator_objective(map_parts, cfg), Error);
  map_parts["cyc_Y"] = 0.1;
  map_parts["extra"] = 1.0;
  CHECK_THROWS_AS(sp_generator_objective(map_parts, cfg), Error);
}

TEST_CASE("reduction: alpha=beta=0.5, gamma=1, eps=0 is the soft dice loss") {
  std::mt19937_64 local(11);
  LossConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.5;
  cfg.gamma = 1.0;
  cfg.epsilon = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const LabelMap labels = random_labels(1, 6, 6, 2, local);
    MaskBatch target{labels, 2};
    const ProbMap pred = random_probmap(1, 1, 6, 6, local);
    const auto ti = tversky_index(pred, target, cfg);

    double pg = 0, p_sum = 0, g_sum = 0;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        const double p = pred.values.at(0, 0, y, x);
        const double g = labels.at(0, y, x) == 1 ? 1.0 : 0.0;
        pg += p * g;
        p_sum += p;
        g_sum += g;
      }
    }
    const double soft_dice_loss = 1.0 - 2.0 * pg / (p_sum + g_sum);
    CHECK(1.0 - ti[0] == doctest::Approx(soft_dice_loss).epsilon(1e-6));
  }
}

TEST_CASE("monotonicity: extra false-positive mass strictly lowers TI when beta > 0") {
  LossConfig cfg;  // alpha 0.7 beta 0.3
  MaskBatch target{LabelMap(1, 4, 4), 2};
  target.labels.at(0, 0, 0) = 1;
  target.labels.at(0, 1, 1) = 1;

  double previous = 2.0;
  for (double fp_prob : {0.0, 0.2, 0.4, 0.6, 0.8}) {
    Tensor pred(Shape{1, 1, 4, 4}, fp_prob);
    pred.at(0, 0, 0, 0) = 1.0;  // true positives fixed
    pred.at(0, 0, 1, 1) = 1.0;
    const double ti = tversky_index(ProbMap{pred}, target, cfg)[0];
    CHECK(ti < previous);
    previous = ti;
  }
}

TEST_CASE("minimizer: FTL is minimal exactly at the one-hot target") {
  std::mt19937_64 local(123);
  const LabelMap labels = random_labels(1, 4, 4, 2, local);
  MaskBatch target{labels, 2};
  Tensor onehot(Shape{1, 1, 4, 4});
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) onehot.at(0, 0, y, x) = labels.at(0, y, x) == 1 ? 1.0 : 0.0;
  }
  LossConfig cfg;
  const double at_target = focal_tversky_loss(ProbMap{onehot}, target, cfg);
  CHECK(at_target <= 1e-5);
  std::uniform_real_distribution<double> unit(0.02, 0.3);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor perturbed = onehot;
    for (auto& v : perturbed.v) {
      const double delta = unit(local);
      v = std::clamp(v > 0.5 ? v - delta : v + delta, 0.0, 1.0);
    }
    CHECK(focal_tversky_loss(ProbMap{perturbed}, target, cfg) > at_target);
  }
}

TEST_CASE("gradients of the loss graphs match finite differences") {
  std::mt19937_64 local(2024);
  LossConfig cfg;

  // binary 4x4 prediction kept away from saturation
  const LabelMap labels = random_labels(1, 4, 4, 2, local);
  MaskBatch target{labels, 2};
  const Tensor pred = random_tensor(Shape{1, 1, 4, 4}, local, 0.1, 0.9);
  CHECK(spcg_test::gradient_check(
            [&](const std::vector<nn::Var>& in) {
              return nn::focal_tversky_loss_node(in[0], target, cfg);
            },
            {pred}, 1e-5) < 1e-6);

  const Tensor a = random_tensor(Shape{1, 2, 4, 4}, local);
  const Tensor b = random_tensor(Shape{1, 2, 4, 4}, local);
  CHECK(spcg_test::gradient_check(
            [](const std::vector<nn::Var>& in) { return nn::cycle_loss_node(in[0], in[1]); },
            {a, b}) < 1e-6);
  CHECK(spcg_test::gradient_check(
            [](const std::vector<nn::Var>& in) { return nn::lsgan_loss_node(in[0], true); },
            {a}) < 1e-6);
  CHECK(spcg_test::gradient_check(
            [](const std::vector<nn::Var>& in) { return nn::lsgan_loss_node(in[0], false); },
            {a}) < 1e-6);
}

TEST_CASE("validation errors: bad labels, bad shapes, bad config") {
  LossConfig cfg;
  MaskBatch target{LabelMap(1, 2, 2), 2};
  target.labels.at(0, 0, 0) = 5;  // out of range for 2 classes
  ProbMap pred{Tensor::full(Shape{1, 1, 2, 2}, 0.5)};
  CHECK_THROWS_AS(tversky_index(pred, target, cfg), Error);

  MaskBatch mismatched{LabelMap(1, 3, 2), 2};
  CHECK_THROWS_AS(tversky_index(pred, mismatched, cfg), Error);

  LossConfig bad = cfg;
  bad.gamma = 0.0;
  MaskBatch small{LabelMap(1, 2, 2), 2};
  CHECK_THROWS_AS(focal_tversky_loss(pred, small, bad), Error);

  // multi-class channel count must match declared classes
  ProbMap three{Tensor::full(Shape{1, 3, 2, 2}, 1.0 / 3.0)};
  MaskBatch two{LabelMap(1, 2, 2), 2};
  CHECK_THROWS_AS(tversky_index(three, two, cfg), Error);
}

TEST_CASE("probmap and maskbatch invariants") {
  ProbMap bad{Tensor::full(Shape{1, 1, 2, 2}, 1.5)};
  CHECK_THROWS_AS(bad.validate(), Error);
  ProbMap unnormalized{Tensor::full(Shape{1, 3, 2, 2}, 0.5)};
  CHECK_THROWS_AS(unnormalized.validate(), Error);
  ProbMap fine{Tensor::full(Shape{1, 3, 2, 2}, 1.0 / 3.0)};
  fine.validate();
  MaskBatch mask{LabelMap(1, 2, 2), 1};
  CHECK_THROWS_AS(mask.validate(), Error);
}
