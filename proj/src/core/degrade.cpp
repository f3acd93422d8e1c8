#include "vda/degrade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>
#include <numbers>

#include "vda/error.hpp"

namespace vda::degrade {
namespace {

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

/// Mirror index with edge repetition: -1 -> 0, n -> n-1.
std::size_t symmetric_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - 1 - i;
  return static_cast<std::size_t>(i);
}

/// Mirror index without edge repetition: -1 -> 1, n -> n-2.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

std::array<double, 64> dct_matrix() {
  std::array<double, 64> m{};
  for (int u = 0; u < 8; ++u) {
    const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int x = 0; x < 8; ++x) m[u * 8 + x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
  }
  return m;
}

std::array<double, 64> quant_table(int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> q{};
  for (std::size_t i = 0; i < 64; ++i) {
    q[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  }
  return q;
}

Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
  Image out(out_w, out_h);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_h);
  const double max_x = static_cast<double>(img.width() - 1);
  const double max_y = static_cast<double>(img.height() - 1);
  for (std::size_t r = 0; r < out_h; ++r) {
    const double fy = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t c = 0; c < out_w; ++c) {
      const double fx = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      out.at(r, c) = (1 - wy) * ((1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
                     wy * ((1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
    }
  }
  return out;
}

}  // namespace

double Kernel2D::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

TransformSet TransformSet::parse(std::string_view letters) {
  TransformSet t{false, false, false};
  for (char ch : letters) {
    switch (ch) {
      case 'M': case 'm': t.blur = true; break;
      case 'S': case 's': t.scale = true; break;
      case 'C': case 'c': t.compression = true; break;
      case '/': case ' ': case '-': break;
      default: throw ConfigError(std::string("unknown transform letter '") + ch + "'");
    }
  }
  return t;
}

std::string TransformSet::letters() const {
  std::string s;
  if (blur) s += 'M';
  if (scale) s += 'S';
  if (compression) s += 'C';
  return s;
}

SamplingRanges SamplingRanges::wide_angle() {
  SamplingRanges r;
  r.angle_min = 0.0;
  r.angle_max = 180.0;
  return r;
}

Kernel2D motion_blur_kernel(int length, double angle_deg) {
  if (length < 1) throw ConfigError("motion_blur_kernel: length must be >= 1");
  const int half = static_cast<int>(std::ceil((length - 1) / 2.0));
  Kernel2D k;
  k.size = 2 * half + 1;
  k.weights.assign(static_cast<std::size_t>(k.size * k.size), 0.0);
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(theta), sy = std::sin(theta);
  const double tap = 1.0 / length;
  for (int j = 0; j < length; ++j) {
    const double t = j - (length - 1) / 2.0;
    const double col = half + t * cx;
    const double row = half - t * sy;
    const int r0 = static_cast<int>(std::floor(row));
    const int c0 = static_cast<int>(std::floor(col));
    const double fr = row - r0, fc = col - c0;
    const double w[2][2] = {{(1 - fr) * (1 - fc), (1 - fr) * fc}, {fr * (1 - fc), fr * fc}};
    for (int dr = 0; dr < 2; ++dr)
      for (int dc = 0; dc < 2; ++dc) {
        if (w[dr][dc] == 0.0) continue;
        const int rr = std::clamp(r0 + dr, 0, k.size - 1);
        const int cc = std::clamp(c0 + dc, 0, k.size - 1);
        k.weights[static_cast<std::size_t>(rr * k.size + cc)] += tap * w[dr][dc];
      }
  }
  const double s = k.sum();
  for (double& w : k.weights) w /= s;
  return k;
}

DegradationSpec sample_spec(Rng& rng, const SamplingRanges& ranges) {
  DegradationSpec spec;
  const bool blur = rng.bernoulli(ranges.presence) && ranges.enabled.blur;
  const bool scale = rng.bernoulli(ranges.presence) && ranges.enabled.scale;
  const bool comp = rng.bernoulli(ranges.presence) && ranges.enabled.compression;
  if (blur) {
    MotionBlur b;
    b.length = static_cast<int>(rng.uniform_int(ranges.length_min, ranges.length_max));
    b.angle_deg = rng.uniform(ranges.angle_min, ranges.angle_max);
    spec.blur = b;
  }
  if (scale) spec.scale = ScaleChange{rng.uniform(ranges.factor_min, ranges.factor_max)};
  if (comp) {
    spec.compression = Compression{static_cast<int>(rng.uniform_int(ranges.quality_min, ranges.quality_max))};
  }
  return spec;
}

Image convolve_reflect(const Image& img, const Kernel2D& kernel) {
  const int half = kernel.size / 2;
  Image out(img.width(), img.height());
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t c = 0; c < img.width(); ++c) {
      double s = 0.0;
      for (int i = 0; i < kernel.size; ++i) {
        const std::size_t rr = reflect_index(static_cast<std::ptrdiff_t>(r) + i - half, img.height());
        for (int j = 0; j < kernel.size; ++j) {
          const double w = kernel.at(i, j);
          if (w == 0.0) continue;
          const std::size_t cc = reflect_index(static_cast<std::ptrdiff_t>(c) + j - half, img.width());
          s += w * img.at(rr, cc);
        }
      }
      out.at(r, c) = s;
    }
  return out;
}

Image rescale_round_trip(const Image& img, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) throw ConfigError("rescale: factor must be in (0, 1]");
  const auto small_w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.width() * factor)));
  const auto small_h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.height() * factor)));
  if (small_w == img.width() && small_h == img.height()) return img;
  return resize_bilinear(resize_bilinear(img, small_w, small_h), img.width(), img.height());
}

Image compress(const Image& img, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("compress: quality must be in [1, 100]");
  static const std::array<double, 64> D = dct_matrix();
  const std::array<double, 64> Q = quant_table(quality);
  const std::size_t W = img.width(), H = img.height();
  Image out(W, H);
  std::array<double, 64> block{}, tmp{}, raw{}, coef{}, recon{};

  // Dequantized reconstruction with AC coefficients scaled by `alpha` before rounding.
  auto reconstruct = [&](double alpha) {
    for (int k = 0; k < 64; ++k) coef[k] = k == 0 ? raw[0] : std::round(alpha * raw[k] / Q[k]) * Q[k];
    for (int y = 0; y < 8; ++y)
      for (int v = 0; v < 8; ++v) {
        double s = 0.0;
        for (int u = 0; u < 8; ++u) s += D[u * 8 + y] * coef[u * 8 + v];
        tmp[y * 8 + v] = s;
      }
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        double s = 0.0;
        for (int v = 0; v < 8; ++v) s += tmp[y * 8 + v] * D[v * 8 + x];
        recon[y * 8 + x] = (s + 128.0) / 255.0;
      }
  };

  for (std::size_t by = 0; by < H; by += 8)
    for (std::size_t bx = 0; bx < W; bx += 8) {
      const std::size_t rows = std::min<std::size_t>(8, H - by), cols = std::min<std::size_t>(8, W - bx);
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
          const std::size_t r = symmetric_index(static_cast<std::ptrdiff_t>(by + y), H);
          const std::size_t c = symmetric_index(static_cast<std::ptrdiff_t>(bx + x), W);
          block[y * 8 + x] = img.at(r, c) * 255.0 - 128.0;
        }
      // raw = D * block * D^T
      for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y) s += D[u * 8 + y] * block[y * 8 + x];
          tmp[u * 8 + x] = s;
        }
      for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += tmp[u * 8 + x] * D[v * 8 + x];
          raw[u * 8 + v] = s;
        }
      auto in_range = [&] {
        for (std::size_t y = 0; y < rows; ++y)
          for (std::size_t x = 0; x < cols; ++x)
            if (recon[y * 8 + x] < -1e-9 || recon[y * 8 + x] > 1.0 + 1e-9) return false;
        return true;
      };
      // Largest AC scale, in steps of 0.01, whose reconstruction stays in [0,1].
      // Scale 0 leaves the unquantized DC alone, i.e. the block mean.
      for (int step = 0; step <= 100; ++step) {
        reconstruct(1.0 - 0.01 * step);
        if (in_range()) break;
      }
      for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = 0; x < cols; ++x) out.at(by + y, bx + x) = std::clamp(recon[y * 8 + x], 0.0, 1.0);
    }
  return out;
}

Image apply(const DegradationSpec& spec, const Image& img) {
  if (spec.is_identity()) return img;
  Image cur = img;
  if (spec.blur) cur = convolve_reflect(cur, motion_blur_kernel(spec.blur->length, spec.blur->angle_deg));
  if (spec.scale) cur = rescale_round_trip(cur, spec.scale->factor);
  if (spec.compression) cur = compress(cur, spec.compression->quality);
  cur.clamp_unit();
  return cur;
}

std::string spec_to_json(const DegradationSpec& spec) {
  nlohmann::json j = nlohmann::json::object();
  if (spec.blur) j["blur"] = {{"length", spec.blur->length}, {"angle", spec.blur->angle_deg}};
  if (spec.scale) j["scale"] = {{"factor", spec.scale->factor}};
  if (spec.compression) j["compression"] = {{"quality", spec.compression->quality}};
  return j.dump();
}

DegradationSpec spec_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("degradation spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("degradation spec must be a JSON object");
  DegradationSpec spec;
  try {
    if (j.contains("blur") && !j["blur"].is_null()) {
      spec.blur = MotionBlur{j["blur"].at("length").get<int>(), j["blur"].value("angle", 0.0)};
      if (spec.blur->length < 1) throw ConfigError("degradation spec: blur length must be >= 1");
    }
    if (j.contains("scale") && !j["scale"].is_null()) {
      spec.scale = ScaleChange{j["scale"].at("factor").get<double>()};
      if (!(spec.scale->factor > 0.0 && spec.scale->factor <= 1.0)) {
        throw ConfigError("degradation spec: scale factor must be in (0, 1]");
      }
    }
    if (j.contains("compression") && !j["compression"].is_null()) {
      spec.compression = Compression{j["compression"].at("quality").get<int>()};
      if (spec.compression->quality < 1 || spec.compression->quality > 100) {
        throw ConfigError("degradation spec: quality must be in [1, 100]");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("degradation spec: ") + e.what());
  }
  return spec;
}

}  // namespace vda::degrade
