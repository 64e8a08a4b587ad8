#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spcg/types.hpp"

namespace spcg::data {

struct PairedSample {
  Tensor image;                   // (1, C, H, W), normalized to [-1, 1]
  std::optional<LabelMap> label;  // (1, H, W) class indices
  std::string stem;
};

struct Dataset {
  std::vector<PairedSample> samples;
  int channels = 1;
  int num_classes = 2;

  std::size_t size() const { return samples.size(); }
  bool fully_labelled() const;
};

/// Reads root/images/* (8-bit rasters, lexicographic order) and pairs each
/// with root/labels/<stem>.png when present. Mask pixel values are class
/// indices and must stay below num_classes.
Dataset load_directory_dataset(const std::filesystem::path& root, int channels, int num_classes);

enum class CropKind { random, center, quadrant_tile };

CropKind crop_kind_from_name(const std::string& name);
const char* crop_kind_name(CropKind kind);

struct CropSpec {
  std::optional<std::pair<int, int>> resize_to;  // (h, w) before cropping
  CropKind kind = CropKind::center;
  int crop_h = 0;
  int crop_w = 0;

  void validate() const;
};

/// Identical geometry for image and label (nearest-neighbor for labels).
/// Random offsets are deterministic in rng_seed; quadrant_tile emits the four
/// corner-anchored patches.
std::vector<PairedSample> apply_crop(const PairedSample& sample, const CropSpec& spec,
                                     std::uint64_t rng_seed);

// --- raster IO ---
Tensor load_image(const std::filesystem::path& path, int channels);
LabelMap load_mask(const std::filesystem::path& path, int num_classes);
void save_image(const std::filesystem::path& path, const Tensor& image);
void save_mask(const std::filesystem::path& path, const LabelMap& mask);

struct Batch {
  ImageBatch images;
  std::optional<MaskBatch> masks;
};

Batch make_batch(const Dataset& dataset, std::span<const int> indices, Domain domain,
                 bool with_labels);
Batch make_batch(const std::vector<PairedSample>& samples, int num_classes, Domain domain,
                 bool with_labels);

/// ceil(N/batch_size) batches per epoch, shuffle deterministic per
/// (seed, epoch), final partial batch kept.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, int batch_size, std::uint64_t shuffle_seed, Domain domain,
                bool with_labels);

  void start_epoch(int epoch);
  std::optional<Batch> next();
  std::optional<std::vector<int>> next_indices();
  int batches_per_epoch() const;

 private:
  const Dataset* dataset_;
  int batch_size_;
  std::uint64_t seed_;
  Domain domain_;
  bool with_labels_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
};

}  // namespace spcg::data
