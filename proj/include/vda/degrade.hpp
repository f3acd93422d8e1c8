#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vda/image.hpp"
#include "vda/rng.hpp"

namespace vda::degrade {

struct MotionBlur {
  int length = 1;          // pixels
  double angle_deg = 0.0;  // counter-clockwise from +x, y pointing up
  friend bool operator==(const MotionBlur&, const MotionBlur&) = default;
};

struct ScaleChange {
  double factor = 1.0;  // (0, 1]
  friend bool operator==(const ScaleChange&, const ScaleChange&) = default;
};

struct Compression {
  int quality = 75;  // [1, 100]
  friend bool operator==(const Compression&, const Compression&) = default;
};

/// One realisation of the synthetic degradation operator. Absent members are
/// skipped; a spec with nothing set is the identity.
struct DegradationSpec {
  std::optional<MotionBlur> blur;
  std::optional<ScaleChange> scale;
  std::optional<Compression> compression;

  bool is_identity() const { return !blur && !scale && !compression; }
  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

/// Square kernel with odd side, nonnegative weights summing to one.
struct Kernel2D {
  int size = 1;
  std::vector<double> weights{1.0};

  double at(int row, int col) const { return weights[static_cast<std::size_t>(row * size + col)]; }
  double sum() const;
};

/// Which transforms a sampler may produce ("M", "S", "C").
struct TransformSet {
  bool blur = true;
  bool scale = true;
  bool compression = true;

  bool any() const { return blur || scale || compression; }
  /// Parses strings such as "MSC", "M/S" or "" (no transforms).
  static TransformSet parse(std::string_view letters);
  std::string letters() const;
};

struct SamplingRanges {
  int length_min = 5;
  int length_max = 15;
  double angle_min = 10.0;
  double angle_max = 30.0;
  double factor_min = 1.0 / 6.0;
  double factor_max = 1.0;  // exclusive
  int quality_min = 30;
  int quality_max = 75;
  double presence = 0.5;
  TransformSet enabled;

  /// Same ranges with blur angles covering every orientation, [0, 180).
  static SamplingRanges wide_angle();
};

/// Anti-aliased linear motion blur: `length` unit-spaced taps along the
/// direction, bilinearly splatted onto the grid and normalised.
Kernel2D motion_blur_kernel(int length, double angle_deg);

/// Each enabled transform present independently with probability
/// `ranges.presence`; parameters uniform in the configured ranges.
DegradationSpec sample_spec(Rng& rng, const SamplingRanges& ranges = {});

/// Convolution with reflective (mirror) boundary handling.
Image convolve_reflect(const Image& img, const Kernel2D& kernel);

/// Bilinear downscale to `factor` of the original size, then bilinear upscale
/// back, so the output keeps the input dimensions.
Image rescale_round_trip(const Image& img, double factor);

/// 8x8 block DCT quantisation round trip with the standard luminance table
/// under the JFIF quality mapping. Only AC coefficients are quantised, so
/// block means are kept. A block whose round trip would leave [0,1] has its
/// AC coefficients scaled down (steps of 0.01) before rounding until it fits.
/// Partial edge blocks use symmetric extension. For image sides that are
/// multiples of 8 a second pass at the same quality is a no-op.
Image compress(const Image& img, int quality);

/// Applies blur, then scale, then compression; output clamped to [0,1].
Image apply(const DegradationSpec& spec, const Image& img);

std::string spec_to_json(const DegradationSpec& spec);
DegradationSpec spec_from_json(std::string_view json);

}  // namespace vda::degrade
