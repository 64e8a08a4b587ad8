#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "spcg/data.hpp"
#include "spcg/synthetic.hpp"
#include "test_support.hpp"

using namespace spcg;
using namespace spcg::data;
using spcg_test::fresh_temp_dir;

namespace {

// writes a small checkered 8-bit png via the library's own writer
void write_test_image(const std::filesystem::path& path, int h, int w, int channels,
                      unsigned char base) {
  Tensor t(Shape{1, channels, h, w});
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int v = (base + 31 * c + 7 * y + 13 * x) % 256;
        t.at(0, c, y, x) = v / 127.5 - 1.0;
      }
    }
  }
  save_image(path, t);
}

void write_test_mask(const std::filesystem::path& path, int h, int w, int value) {
  LabelMap m(1, h, w);
  for (int y = 0; y < h / 2; ++y) {
    for (int x = 0; x < w / 2; ++x) m.at(0, y, x) = value;
  }
  save_mask(path, m);
}

std::filesystem::path make_dataset_dir(int images, int labelled, int h = 16, int w = 16,
                                       int channels = 1) {
  const auto root = fresh_temp_dir("ds");
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "labels");
  for (int i = 0; i < images; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d.png", i);
    write_test_image(root / "images" / name, h, w, channels,
                     static_cast<unsigned char>(10 * i));
    if (i < labelled) write_test_mask(root / "labels" / name, h, w, 1);
  }
  return root;
}

}  // namespace

TEST_CASE("directory loading: order, pairing, normalization") {
  const auto root = make_dataset_dir(5, 3);
  const Dataset ds = load_directory_dataset(root, 1, 2);
  REQUIRE(ds.size() == 5);
  CHECK(ds.samples[0].stem == "img_000");
  CHECK(ds.samples[4].stem == "img_004");
  CHECK(ds.samples[0].label.has_value());
  CHECK(ds.samples[2].label.has_value());
  CHECK(!ds.samples[3].label.has_value());
  CHECK(!ds.fully_labelled());

  for (const PairedSample& s : ds.samples) {
    for (double v : s.image.v) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("an all-zero raster maps to the constant -1 image") {
  const auto root = fresh_temp_dir("zero");
  std::filesystem::create_directories(root / "images");
  save_image(root / "images" / "black.png", Tensor::full(Shape{1, 1, 8, 8}, -1.0));
  const Dataset ds = load_directory_dataset(root, 1, 2);
  for (double v : ds.samples[0].image.v) CHECK(v == -1.0);
}

TEST_CASE("ingestion errors are named") {
  const auto root = fresh_temp_dir("bad");
  std::filesystem::create_directories(root / "images");
  {
    std::ofstream f(root / "images" / "junk.png");
    f << "not a png";
  }
  CHECK_THROWS_WITH_AS(load_directory_dataset(root, 1, 2),
                       doctest::Contains("junk.png"), Error);

  // mask with out-of-range class value
  const auto root2 = make_dataset_dir(1, 0, 8, 8);
  write_test_mask(root2 / "labels" / "img_000.png", 8, 8, 7);
  CHECK_THROWS_AS(load_directory_dataset(root2, 1, 2), Error);

  CHECK_THROWS_AS(load_directory_dataset(fresh_temp_dir("missing") / "nope", 1, 2), Error);
}

TEST_CASE("center crop of matching size is the identity") {
  const auto root = make_dataset_dir(1, 1, 12, 12);
  const Dataset ds = load_directory_dataset(root, 1, 2);
  CropSpec spec;
  spec.kind = CropKind::center;
  spec.crop_h = 12;
  spec.crop_w = 12;
  const auto out = apply_crop(ds.samples[0], spec, 0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].image.v == ds.samples[0].image.v);
  CHECK(out[0].label->v == ds.samples[0].label->v);
}

TEST_CASE("quadrant tiling emits 4 corner patches; 20 images give 80 patches") {
  const auto root = make_dataset_dir(20, 20, 32, 32);
  const Dataset ds = load_directory_dataset(root, 1, 2);
  CropSpec spec;
  spec.kind = CropKind::quadrant_tile;
  spec.crop_h = 20;
  spec.crop_w = 20;

  int patches = 0;
  for (const PairedSample& s : ds.samples) {
    const auto out = apply_crop(s, spec, 0);
    CHECK(out.size() == 4);
    patches += static_cast<int>(out.size());
    // patches overlap in the middle; together they cover the image corners
    CHECK(out[0].image.at(0, 0, 0, 0) == s.image.at(0, 0, 0, 0));
    CHECK(out[3].image.at(0, 0, 19, 19) == s.image.at(0, 0, 31, 31));
    for (const PairedSample& p : out) CHECK(p.label.has_value());
  }
  CHECK(patches == 80);
}

TEST_CASE("random crops are deterministic in the seed and labels follow geometry") {
  const auto root = make_dataset_dir(1, 1, 24, 24);
  const Dataset ds = load_directory_dataset(root, 1, 2);
  CropSpec spec;
  spec.kind = CropKind::random;
  spec.crop_h = 10;
  spec.crop_w = 10;

  const auto a = apply_crop(ds.samples[0], spec, 42);
  const auto b = apply_crop(ds.samples[0], spec, 42);
  const auto c = apply_crop(ds.samples[0], spec, 43);
  CHECK(a[0].image.v == b[0].image.v);
  CHECK(a[0].label->v == b[0].label->v);
  CHECK(a[0].image.v != c[0].image.v);  // different seed, different window
}

TEST_CASE("resize keeps label integrality and geometric consistency") {
  const auto root = fresh_temp_dir("geo");
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "labels");
  // a centered 8x8 square of class 1 in a 32x32 field
  Tensor img(Shape{1, 1, 32, 32}, -0.5);
  LabelMap mask(1, 32, 32);
  for (int y = 12; y < 20; ++y) {
    for (int x = 12; x < 20; ++x) {
      img.at(0, 0, y, x) = 0.8;
      mask.at(0, y, x) = 1;
    }
  }
  save_image(root / "images" / "sq.png", img);
  save_mask(root / "labels" / "sq.png", mask);
  const Dataset ds = load_directory_dataset(root, 1, 2);

  CropSpec spec;
  spec.resize_to = {{64, 64}};
  spec.kind = CropKind::center;
  spec.crop_h = 48;
  spec.crop_w = 48;
  const auto out = apply_crop(ds.samples[0], spec, 0);
  REQUIRE(out.size() == 1);
  std::set<std::int32_t> values(out[0].label->v.begin(), out[0].label->v.end());
  for (std::int32_t v : values) CHECK((v == 0 || v == 1));

  // 2x upscale of an 8x8 square fully inside the crop: 256 foreground pixels
  std::int64_t fg = 0;
  for (std::int32_t v : out[0].label->v) fg += v;
  CHECK(fg == 256);
}

TEST_CASE("crop larger than image fails with a dimension error") {
  const auto root = make_dataset_dir(1, 1, 8, 8);
  const Dataset ds = load_directory_dataset(root, 1, 2);
  CropSpec spec;
  spec.kind = CropKind::center;
  spec.crop_h = 16;
  spec.crop_w = 16;
  CHECK_THROWS_AS(apply_crop(ds.samples[0], spec, 0), Error);
}

TEST_CASE("batch iterator: counts, partial batch, determinism, labels") {
  const auto root = make_dataset_dir(5, 5, 8, 8);
  const Dataset ds = load_directory_dataset(root, 1, 2);

  BatchIterator it(ds, 2, 99, Domain::source, true);
  CHECK(it.batches_per_epoch() == 3);
  it.start_epoch(0);
  std::vector<int> sizes;
  std::vector<int> seen_order;
  while (auto batch = it.next()) {
    sizes.push_back(batch->images.data.shape.n);
    CHECK(batch->masks.has_value());
    CHECK(batch->images.domain == Domain::source);
  }
  CHECK(sizes == std::vector<int>{2, 2, 1});

  // identical (seed, epoch) -> identical order
  BatchIterator it2(ds, 2, 99, Domain::target, false);
  it.start_epoch(3);
  it2.start_epoch(3);
  while (true) {
    auto a = it.next_indices();
    auto b = it2.next_indices();
    CHECK(a.has_value() == b.has_value());
    if (!a) break;
    CHECK(*a == *b);
  }

  // unlabelled iteration never materializes masks
  it2.start_epoch(0);
  while (auto batch = it2.next()) CHECK(!batch->masks.has_value());

  Dataset empty;
  empty.channels = 1;
  empty.num_classes = 2;
  CHECK_THROWS_AS(BatchIterator(empty, 2, 0, Domain::source, false), Error);
}

TEST_CASE("make_batch requires labels when asked for them") {
  const auto root = make_dataset_dir(2, 1, 8, 8);
  const Dataset ds = load_directory_dataset(root, 1, 2);
  const std::vector<int> idx{0, 1};
  CHECK_THROWS_AS(make_batch(ds, idx, Domain::source, true), Error);
  const Batch b = make_batch(ds, idx, Domain::source, false);
  CHECK(b.images.data.shape.n == 2);
}

TEST_CASE("synthetic generation: determinism, shared masks, split counts") {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.count_a = 4;
  spec.count_b = 6;
  spec.seed = 77;

  const auto out1 = fresh_temp_dir("synth1");
  const auto out2 = fresh_temp_dir("synth2");
  generate_synthetic_domains(spec, out1);
  generate_synthetic_domains(spec, out2);

  // same seed -> byte-identical datasets and manifests
  for (const std::string rel :
       {"domain_a/images/sample_0000.png", "domain_b/images/sample_0005.png",
        "domain_b/labels/sample_0003.png", "manifest.json"}) {
    std::ifstream f1(out1 / rel, std::ios::binary);
    std::ifstream f2(out2 / rel, std::ios::binary);
    REQUIRE(f1.good());
    REQUIRE(f2.good());
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
  }

  const Dataset a = load_directory_dataset(out1 / "domain_a", 1, 2);
  const Dataset b = load_directory_dataset(out1 / "domain_b", 1, 2);
  CHECK(a.size() == 4);
  CHECK(b.size() == 6);
  CHECK(a.fully_labelled());
  CHECK(b.fully_labelled());

  // sample k shares its mask across domains
  for (int k = 0; k < 4; ++k) {
    CHECK(a.samples[static_cast<std::size_t>(k)].label->v ==
          b.samples[static_cast<std::size_t>(k)].label->v);
  }

  // masks are non-trivial
  std::int64_t fg = 0;
  for (auto v : a.samples[0].label->v) fg += v;
  CHECK(fg > 0);
}

TEST_CASE("synthetic two-class mode emits disk inside ring with values {0,1,2}") {
  SynthSpec spec;
  spec.height = 48;
  spec.width = 48;
  spec.fg_classes = 2;
  spec.count_a = 2;
  spec.count_b = 2;
  spec.seed = 5;
  const auto out = fresh_temp_dir("synth3");
  generate_synthetic_domains(spec, out);
  const Dataset a = load_directory_dataset(out / "domain_a", 1, 3);
  std::set<std::int32_t> values;
  for (auto v : a.samples[0].label->v) values.insert(v);
  CHECK(values == std::set<std::int32_t>{0, 1, 2});

  // the disk (class 1) sits strictly inside the ring (class 2): every class-1
  // pixel's row has class-2 pixels on both sides
  const LabelMap& m = *a.samples[0].label;
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (m.at(0, y, x) != 1) continue;
      bool left = false, right = false;
      for (int i = 0; i < x; ++i) left |= m.at(0, y, i) == 2;
      for (int i = x + 1; i < m.w; ++i) right |= m.at(0, y, i) == 2;
      CHECK(left);
      CHECK(right);
    }
  }
}

TEST_CASE("synthetic appearance shift inverts within 2/255") {
  SynthSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.count_a = 3;
  spec.count_b = 3;
  spec.seed = 13;
  const auto out = fresh_temp_dir("synth4");
  generate_synthetic_domains(spec, out);
  const Dataset a = load_directory_dataset(out / "domain_a", 1, 2);
  const Dataset b = load_directory_dataset(out / "domain_b", 1, 2);

  for (int k = 0; k < 3; ++k) {
    const Tensor recovered =
        invert_appearance_shift(b.samples[static_cast<std::size_t>(k)].image, spec, k);
    const Tensor& original = a.samples[static_cast<std::size_t>(k)].image;
    double worst = 0.0;
    for (std::size_t i = 0; i < original.v.size(); ++i) {
      worst = std::max(worst, std::abs(recovered.v[i] - original.v[i]) * 127.5);
    }
    CHECK(worst <= 2.0);
  }
}
