#include "spcg/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

#include "spcg/rng.hpp"

namespace spcg::data {

namespace fs = std::filesystem;

namespace {

const char* const kImageExtensions[] = {".png", ".ppm", ".pgm", ".tif",
                                        ".tiff", ".bmp", ".jpg", ".jpeg"};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const char* known : kImageExtensions) {
    if (ext == known) return true;
  }
  return false;
}

Tensor mat8_to_tensor(const cv::Mat& m) {
  Tensor t(Shape{1, m.channels(), m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < m.cols; ++x) {
      for (int c = 0; c < m.channels(); ++c) {
        t.at(0, c, y, x) = static_cast<real_t>(row[x * m.channels() + c]) / 127.5 - 1.0;
      }
    }
  }
  return t;
}

cv::Mat tensor_to_mat8(const Tensor& t) {
  const Shape s = t.shape;
  cv::Mat m(s.h, s.w, CV_8UC(s.c));
  for (int y = 0; y < s.h; ++y) {
    unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < s.c; ++c) {
        const real_t v = std::round((t.at(0, c, y, x) + 1.0) * 127.5);
        row[x * s.c + c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return m;
}

cv::Mat tensor_to_mat64(const Tensor& t) {
  const Shape s = t.shape;
  cv::Mat m(s.h, s.w, CV_64FC(s.c));
  for (int y = 0; y < s.h; ++y) {
    double* row = m.ptr<double>(y);
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < s.c; ++c) row[x * s.c + c] = t.at(0, c, y, x);
    }
  }
  return m;
}

Tensor mat64_to_tensor(const cv::Mat& m) {
  Tensor t(Shape{1, m.channels(), m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const double* row = m.ptr<double>(y);
    for (int x = 0; x < m.cols; ++x) {
      for (int c = 0; c < m.channels(); ++c) t.at(0, c, y, x) = row[x * m.channels() + c];
    }
  }
  return t;
}

Tensor crop_image(const Tensor& t, int top, int left, int ch, int cw) {
  Tensor out(Shape{1, t.shape.c, ch, cw});
  for (int c = 0; c < t.shape.c; ++c) {
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) out.at(0, c, y, x) = t.at(0, c, top + y, left + x);
    }
  }
  return out;
}

LabelMap crop_label(const LabelMap& l, int top, int left, int ch, int cw) {
  LabelMap out(1, ch, cw);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) out.at(0, y, x) = l.at(0, top + y, left + x);
  }
  return out;
}

Tensor resize_image(const Tensor& t, int h, int w) {
  cv::Mat src = tensor_to_mat64(t);
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
  return mat64_to_tensor(dst);
}

LabelMap resize_label(const LabelMap& l, int h, int w) {
  cv::Mat src(l.h, l.w, CV_32SC1);
  for (int y = 0; y < l.h; ++y) {
    for (int x = 0; x < l.w; ++x) src.at<std::int32_t>(y, x) = l.at(0, y, x);
  }
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_NEAREST);
  LabelMap out(1, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(0, y, x) = dst.at<std::int32_t>(y, x);
  }
  return out;
}

}  // namespace

bool Dataset::fully_labelled() const {
  for (const PairedSample& s : samples) {
    if (!s.label) return false;
  }
  return !samples.empty();
}

Tensor load_image(const fs::path& path, int channels) {
  cv::Mat m = cv::imread(path.string(),
                         channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (m.empty()) throw_data("cannot decode image file " + path.string());
  if (m.channels() != channels) {
    throw_data("image " + path.string() + " decoded with " + std::to_string(m.channels()) +
               " channels, expected " + std::to_string(channels));
  }
  return mat8_to_tensor(m);
}

LabelMap load_mask(const fs::path& path, int num_classes) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw_data("cannot decode mask file " + path.string());
  LabelMap out(1, m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < m.cols; ++x) {
      const int v = row[x];
      if (v >= num_classes) {
        throw_validation("mask " + path.string() + " holds class value " + std::to_string(v) +
                         " but only " + std::to_string(num_classes) + " classes are declared");
      }
      out.at(0, y, x) = v;
    }
  }
  return out;
}

void save_image(const fs::path& path, const Tensor& image) {
  if (!cv::imwrite(path.string(), tensor_to_mat8(image))) {
    throw_io("cannot write image " + path.string());
  }
}

void save_mask(const fs::path& path, const LabelMap& mask) {
  cv::Mat m(mask.h, mask.w, CV_8UC1);
  for (int y = 0; y < mask.h; ++y) {
    unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < mask.w; ++x) {
      row[x] = static_cast<unsigned char>(std::clamp(mask.at(0, y, x), 0, 255));
    }
  }
  if (!cv::imwrite(path.string(), m)) throw_io("cannot write mask " + path.string());
}

Dataset load_directory_dataset(const fs::path& root, int channels, int num_classes) {
  const fs::path image_dir = root / "images";
  if (!fs::is_directory(image_dir)) {
    throw_data("dataset root " + root.string() + " has no images/ directory");
  }
  const fs::path label_dir = root / "labels";

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Dataset out;
  out.channels = channels;
  out.num_classes = num_classes;
  for (const fs::path& file : files) {
    PairedSample sample;
    sample.stem = file.stem().string();
    sample.image = load_image(file, channels);
    const fs::path mask_path = label_dir / (sample.stem + ".png");
    if (fs::exists(mask_path)) {
      LabelMap mask = load_mask(mask_path, num_classes);
      if (mask.h != sample.image.shape.h || mask.w != sample.image.shape.w) {
        throw_dimension("mask " + mask_path.string() + " is " + std::to_string(mask.h) + "x" +
                        std::to_string(mask.w) + " but image is " +
                        std::to_string(sample.image.shape.h) + "x" +
                        std::to_string(sample.image.shape.w));
      }
      sample.label = std::move(mask);
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

CropKind crop_kind_from_name(const std::string& name) {
  if (name == "random") return CropKind::random;
  if (name == "center") return CropKind::center;
  if (name == "quadrant_tile") return CropKind::quadrant_tile;
  throw_validation("unknown crop kind '" + name + "'");
}

const char* crop_kind_name(CropKind kind) {
  switch (kind) {
    case CropKind::random: return "random";
    case CropKind::center: return "center";
    case CropKind::quadrant_tile: return "quadrant_tile";
  }
  throw_validation("unknown crop kind");
}

void CropSpec::validate() const {
  if (crop_h < 1 || crop_w < 1) throw_validation("CropSpec: crop size must be positive");
  if (resize_to) {
    if (resize_to->first < 1 || resize_to->second < 1) {
      throw_validation("CropSpec: resize target must be positive");
    }
    if (crop_h > resize_to->first || crop_w > resize_to->second) {
      throw_validation("CropSpec: crop exceeds resize target");
    }
  }
}

std::vector<PairedSample> apply_crop(const PairedSample& sample, const CropSpec& spec,
                                     std::uint64_t rng_seed) {
  spec.validate();
  PairedSample base = sample;
  if (spec.resize_to) {
    base.image = resize_image(sample.image, spec.resize_to->first, spec.resize_to->second);
    if (sample.label) base.label = resize_label(*sample.label, spec.resize_to->first,
                                                spec.resize_to->second);
  }
  const int h = base.image.shape.h;
  const int w = base.image.shape.w;
  if (spec.crop_h > h || spec.crop_w > w) {
    throw_dimension("crop " + std::to_string(spec.crop_h) + "x" + std::to_string(spec.crop_w) +
                    " larger than image " + std::to_string(h) + "x" + std::to_string(w));
  }

  auto cut = [&](int top, int left, const std::string& stem) {
    PairedSample out;
    out.stem = stem;
    out.image = crop_image(base.image, top, left, spec.crop_h, spec.crop_w);
    if (base.label) out.label = crop_label(*base.label, top, left, spec.crop_h, spec.crop_w);
    return out;
  };

  std::vector<PairedSample> out;
  switch (spec.kind) {
    case CropKind::random: {
      std::mt19937_64 rng = make_rng(rng_seed);
      std::uniform_int_distribution<int> dy(0, h - spec.crop_h);
      std::uniform_int_distribution<int> dx(0, w - spec.crop_w);
      const int top = dy(rng);
      const int left = dx(rng);
      out.push_back(cut(top, left, base.stem));
      break;
    }
    case CropKind::center:
      out.push_back(cut((h - spec.crop_h) / 2, (w - spec.crop_w) / 2, base.stem));
      break;
    case CropKind::quadrant_tile: {
      const int bottom = h - spec.crop_h;
      const int right = w - spec.crop_w;
      const int tops[4] = {0, 0, bottom, bottom};
      const int lefts[4] = {0, right, 0, right};
      for (int q = 0; q < 4; ++q) {
        out.push_back(cut(tops[q], lefts[q], base.stem + "_q" + std::to_string(q)));
      }
      break;
    }
  }
  return out;
}

Batch make_batch(const std::vector<PairedSample>& samples, int num_classes, Domain domain,
                 bool with_labels) {
  if (samples.empty()) throw_validation("make_batch: no samples");
  const Shape first = samples[0].image.shape;
  Batch batch;
  batch.images.domain = domain;
  batch.images.data = Tensor(Shape{static_cast<int>(samples.size()), first.c, first.h, first.w});
  if (with_labels) {
    batch.masks = MaskBatch{LabelMap(static_cast<int>(samples.size()), first.h, first.w),
                            num_classes};
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const PairedSample& s = samples[i];
    check_same_shape(s.image.shape, first, "make_batch");
    const std::size_t stride = static_cast<std::size_t>(first.c) * first.h * first.w;
    std::copy(s.image.v.begin(), s.image.v.end(),
              batch.images.data.v.begin() + static_cast<std::ptrdiff_t>(i * stride));
    if (with_labels) {
      if (!s.label) throw_validation("make_batch: sample '" + s.stem + "' has no label");
      const std::size_t lstride = static_cast<std::size_t>(first.h) * first.w;
      std::copy(s.label->v.begin(), s.label->v.end(),
                batch.masks->labels.v.begin() + static_cast<std::ptrdiff_t>(i * lstride));
    }
  }
  return batch;
}

Batch make_batch(const Dataset& dataset, std::span<const int> indices, Domain domain,
                 bool with_labels) {
  std::vector<PairedSample> picks;
  picks.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= dataset.samples.size()) {
      throw_validation("make_batch: index out of range");
    }
    picks.push_back(dataset.samples[static_cast<std::size_t>(i)]);
  }
  return make_batch(picks, dataset.num_classes, domain, with_labels);
}

BatchIterator::BatchIterator(const Dataset& dataset, int batch_size, std::uint64_t shuffle_seed,
                             Domain domain, bool with_labels)
    : dataset_(&dataset),
      batch_size_(batch_size),
      seed_(shuffle_seed),
      domain_(domain),
      with_labels_(with_labels) {
  if (dataset.samples.empty()) throw_validation("BatchIterator: empty dataset");
  if (batch_size < 1) throw_validation("BatchIterator: batch_size must be >= 1");
  order_.resize(dataset.samples.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  start_epoch(0);
}

void BatchIterator::start_epoch(int epoch) {
  std::mt19937_64 rng =
      make_rng(mix64(seed_, static_cast<std::uint64_t>(epoch) + 0x5f5e100ULL));
  std::shuffle(order_.begin(), order_.end(), rng);
  cursor_ = 0;
}

std::optional<std::vector<int>> BatchIterator::next_indices() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
  std::vector<int> indices(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                           order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return indices;
}

std::optional<Batch> BatchIterator::next() {
  auto indices = next_indices();
  if (!indices) return std::nullopt;
  return make_batch(*dataset_, *indices, domain_, with_labels_);
}

int BatchIterator::batches_per_epoch() const {
  return static_cast<int>((order_.size() + static_cast<std::size_t>(batch_size_) - 1) /
                          static_cast<std::size_t>(batch_size_));
}

}  // namespace spcg::data
