#include "spcg/synthetic.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spcg/rng.hpp"

namespace spcg::data {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct RenderedSample {
  cv::Mat structure;  // 8UC1 grayscale structure image
  cv::Mat mask;       // 8UC1 class indices
};

// Geometry depends only on (seed, index), so sample k carries the same mask
// in both domains.
RenderedSample render_geometry(const SynthSpec& spec, int index) {
  std::mt19937_64 rng = make_rng(mix64(mix64(spec.seed, "geometry"), static_cast<std::uint64_t>(index)));
  const int h = spec.height, w = spec.width;
  RenderedSample out;
  out.structure = cv::Mat(h, w, CV_8UC1, cv::Scalar(40));
  out.mask = cv::Mat::zeros(h, w, CV_8UC1);

  if (spec.fg_classes == 1) {
    // vessel-like curves: momentum random walks with varying thickness
    std::uniform_int_distribution<int> curve_count(2, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> turn(0.0, 0.35);
    const int curves = curve_count(rng);
    for (int k = 0; k < curves; ++k) {
      constexpr double kTau = 6.283185307179586;
      double x = unit(rng) * (w - 1);
      double y = unit(rng) * (h - 1);
      double angle = unit(rng) * kTau;
      const int thickness = 2 + static_cast<int>(unit(rng) * 3.0);  // 2..4
      const int intensity = 190 + static_cast<int>(unit(rng) * 40.0);
      const int steps = 25 + static_cast<int>(unit(rng) * 20.0);
      for (int s = 0; s < steps; ++s) {
        const double nx = x + 3.0 * std::cos(angle);
        const double ny = y + 3.0 * std::sin(angle);
        const cv::Point p0(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
        const cv::Point p1(static_cast<int>(std::lround(nx)), static_cast<int>(std::lround(ny)));
        cv::line(out.structure, p0, p1, cv::Scalar(intensity), thickness, cv::LINE_8);
        cv::line(out.mask, p0, p1, cv::Scalar(1), thickness, cv::LINE_8);
        x = std::clamp(nx, -8.0, w + 8.0);
        y = std::clamp(ny, -8.0, h + 8.0);
        angle += turn(rng);
      }
    }
  } else {
    // concentric disk (class 1) inside ring (class 2), an LV/Myo analogue
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int cx = w / 2 + static_cast<int>((unit(rng) - 0.5) * w / 5.0);
    const int cy = h / 2 + static_cast<int>((unit(rng) - 0.5) * h / 5.0);
    const int r_inner = h / 8 + static_cast<int>(unit(rng) * h / 10.0);
    const int ring = 3 + static_cast<int>(unit(rng) * std::max(h / 12, 2));
    const cv::Point center(cx, cy);
    cv::circle(out.structure, center, r_inner + ring, cv::Scalar(120), cv::FILLED);
    cv::circle(out.mask, center, r_inner + ring, cv::Scalar(2), cv::FILLED);
    cv::circle(out.structure, center, r_inner, cv::Scalar(180), cv::FILLED);
    cv::circle(out.mask, center, r_inner, cv::Scalar(1), cv::FILLED);
  }

  // pixel noise is part of the stored domain-A appearance
  std::normal_distribution<double> noise(0.0, 3.0);
  for (int y = 0; y < h; ++y) {
    unsigned char* row = out.structure.ptr<unsigned char>(y);
    for (int x = 0; x < w; ++x) {
      row[x] = static_cast<unsigned char>(
          std::clamp(std::lround(row[x] + noise(rng)), 0L, 255L));
    }
  }
  return out;
}

cv::Mat to_channels(const cv::Mat& gray, int channels) {
  if (channels == 1) return gray;
  if (channels != 3) throw_validation("synthetic generator supports 1 or 3 channels");
  // fixed per-channel response, green-dominant like a retinal scan
  cv::Mat out(gray.rows, gray.cols, CV_8UC3);
  for (int y = 0; y < gray.rows; ++y) {
    const unsigned char* src = gray.ptr<unsigned char>(y);
    unsigned char* dst = out.ptr<unsigned char>(y);
    for (int x = 0; x < gray.cols; ++x) {
      const double v = src[x];
      dst[3 * x + 0] = static_cast<unsigned char>(std::clamp(0.55 * v + 12.0, 0.0, 255.0));
      dst[3 * x + 1] = static_cast<unsigned char>(std::clamp(0.95 * v + 4.0, 0.0, 255.0));
      dst[3 * x + 2] = static_cast<unsigned char>(std::clamp(0.75 * v + 8.0, 0.0, 255.0));
    }
  }
  return out;
}

cv::Mat texture_field_mat(const SynthSpec& spec, int index) {
  std::mt19937_64 rng = make_rng(mix64(mix64(spec.seed, "texture"), static_cast<std::uint64_t>(index)));
  const int coarse_h = std::max(spec.height / 8, 2);
  const int coarse_w = std::max(spec.width / 8, 2);
  cv::Mat coarse(coarse_h, coarse_w, CV_64FC1);
  std::uniform_real_distribution<double> amp(-spec.shift.texture_amplitude,
                                             spec.shift.texture_amplitude);
  for (int y = 0; y < coarse_h; ++y) {
    double* row = coarse.ptr<double>(y);
    for (int x = 0; x < coarse_w; ++x) row[x] = amp(rng);
  }
  cv::Mat field;
  cv::resize(coarse, field, cv::Size(spec.width, spec.height), 0, 0, cv::INTER_LINEAR);
  if (spec.shift.texture_blur_sigma > 0.0) {
    cv::GaussianBlur(field, field, cv::Size(0, 0), spec.shift.texture_blur_sigma,
                     spec.shift.texture_blur_sigma, cv::BORDER_REPLICATE);
  }
  return field;
}

cv::Mat apply_shift(const cv::Mat& a_img, const cv::Mat& texture, const AppearanceShift& shift) {
  cv::Mat out(a_img.rows, a_img.cols, a_img.type());
  const int channels = a_img.channels();
  for (int y = 0; y < a_img.rows; ++y) {
    const unsigned char* src = a_img.ptr<unsigned char>(y);
    const double* tex = texture.ptr<double>(y);
    unsigned char* dst = out.ptr<unsigned char>(y);
    for (int x = 0; x < a_img.cols; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = shift.remap_offset + shift.remap_gain * src[x * channels + c] + tex[x];
        dst[x * channels + c] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

void write_sample(const fs::path& root, int index, const cv::Mat& image, const cv::Mat& mask) {
  char name[32];
  std::snprintf(name, sizeof(name), "sample_%04d.png", index);
  if (!cv::imwrite((root / "images" / name).string(), image)) {
    throw_io("cannot write synthetic image " + (root / "images" / name).string());
  }
  if (!cv::imwrite((root / "labels" / name).string(), mask)) {
    throw_io("cannot write synthetic mask " + (root / "labels" / name).string());
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (height < 16 || width < 16) throw_validation("SynthSpec: image size must be at least 16");
  if (channels != 1 && channels != 3) throw_validation("SynthSpec: channels must be 1 or 3");
  if (fg_classes != 1 && fg_classes != 2) throw_validation("SynthSpec: fg_classes must be 1 or 2");
  if (count_a < 1 || count_b < 1) throw_validation("SynthSpec: sample counts must be positive");
  if (shift.remap_gain == 0.0) throw_validation("SynthSpec: remap gain must be nonzero");
  if (shift.texture_amplitude < 0.0) throw_validation("SynthSpec: texture amplitude must be >= 0");
}

SynthOutput generate_synthetic_domains(const SynthSpec& spec, const fs::path& out_root) {
  spec.validate();
  SynthOutput out;
  out.domain_a = out_root / "domain_a";
  out.domain_b = out_root / "domain_b";
  out.manifest = out_root / "manifest.json";
  for (const fs::path& d : {out.domain_a, out.domain_b}) {
    fs::create_directories(d / "images");
    fs::create_directories(d / "labels");
  }

  for (int k = 0; k < std::max(spec.count_a, spec.count_b); ++k) {
    const RenderedSample rendered = render_geometry(spec, k);
    const cv::Mat a_img = to_channels(rendered.structure, spec.channels);
    if (k < spec.count_a) write_sample(out.domain_a, k, a_img, rendered.mask);
    if (k < spec.count_b) {
      const cv::Mat b_img = apply_shift(a_img, texture_field_mat(spec, k), spec.shift);
      write_sample(out.domain_b, k, b_img, rendered.mask);
    }
  }

  ordered_json manifest;
  manifest["seed"] = spec.seed;
  manifest["height"] = spec.height;
  manifest["width"] = spec.width;
  manifest["channels"] = spec.channels;
  manifest["fg_classes"] = spec.fg_classes;
  manifest["count_a"] = spec.count_a;
  manifest["count_b"] = spec.count_b;
  manifest["shift"] = {{"remap_gain", spec.shift.remap_gain},
                       {"remap_offset", spec.shift.remap_offset},
                       {"texture_amplitude", spec.shift.texture_amplitude},
                       {"texture_blur_sigma", spec.shift.texture_blur_sigma}};
  std::ofstream f(out.manifest);
  if (!f) throw_io("cannot write manifest " + out.manifest.string());
  f << manifest.dump(2) << "\n";
  return out;
}

Tensor synthetic_texture_field(const SynthSpec& spec, int index) {
  const cv::Mat field = texture_field_mat(spec, index);
  Tensor out(Shape{1, 1, spec.height, spec.width});
  for (int y = 0; y < spec.height; ++y) {
    const double* row = field.ptr<double>(y);
    for (int x = 0; x < spec.width; ++x) out.at(0, 0, y, x) = row[x];
  }
  return out;
}

Tensor invert_appearance_shift(const Tensor& b_image, const SynthSpec& spec, int index) {
  const cv::Mat field = texture_field_mat(spec, index);
  const Shape s = b_image.shape;
  if (s.h != spec.height || s.w != spec.width) {
    throw_dimension("invert_appearance_shift: image " + s.str() + " does not match spec size");
  }
  Tensor out(s);
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      const double* tex = field.ptr<double>(y);
      for (int x = 0; x < s.w; ++x) {
        const double b8 = (b_image.at(0, c, y, x) + 1.0) * 127.5;
        const double a8 = (b8 - tex[x] - spec.shift.remap_offset) / spec.shift.remap_gain;
        out.at(0, c, y, x) = std::clamp(a8, 0.0, 255.0) / 127.5 - 1.0;
      }
    }
  }
  return out;
}

}  // namespace spcg::data
