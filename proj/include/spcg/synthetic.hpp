#pragma once

#include "spcg/data.hpp"

namespace spcg::data {

/// Fixed, invertible appearance shift between the two synthetic domains:
/// an affine intensity remap plus a smooth additive texture field. The blur
/// acts on the texture, so the shift stays invertible to quantization.
struct AppearanceShift {
  real_t remap_gain = -0.8;      // 8-bit units: B = offset + gain * A + texture
  real_t remap_offset = 235.0;
  real_t texture_amplitude = 12.0;
  real_t texture_blur_sigma = 2.5;
};

struct SynthSpec {
  int height = 64;
  int width = 64;
  int channels = 1;
  int fg_classes = 1;  // 1: vessel-like curves; 2: concentric disk + ring
  int count_a = 40;
  int count_b = 80;
  AppearanceShift shift;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthOutput {
  std::filesystem::path domain_a;
  std::filesystem::path domain_b;
  std::filesystem::path manifest;
};

/// Writes <out_root>/domain_a and <out_root>/domain_b directory datasets
/// (images/ + labels/) plus a manifest recording spec and seed. Sample k of
/// both domains shares geometry (and therefore its mask); domain B holds
/// extra samples beyond count_a with fresh geometry.
SynthOutput generate_synthetic_domains(const SynthSpec& spec,
                                       const std::filesystem::path& out_root);

/// The exact 8-bit texture field added to domain-B sample `index`.
Tensor synthetic_texture_field(const SynthSpec& spec, int index);

/// Undo the appearance shift of domain-B sample `index`; input and output are
/// normalized [-1, 1] images. Recovers domain A within quantization error.
Tensor invert_appearance_shift(const Tensor& b_image, const SynthSpec& spec, int index);

}  // namespace spcg::data
