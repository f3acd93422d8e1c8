#include <doctest.h>

#include <cmath>
#include <numbers>

#include "vda/degrade.hpp"
#include "vda/error.hpp"
#include "vda/image.hpp"
#include "vda/rng.hpp"

using namespace vda;
using namespace vda::degrade;

namespace {

Image textured(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Image img(n, n);
  for (double& p : img.pixels()) p = rng.uniform(lo, hi);
  return img;
}

Image smooth(std::size_t n) {
  Image img(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      img.at(r, c) = 0.5 + 0.3 * std::sin(0.4 * r) * std::cos(0.3 * c);
  return img;
}

double mse(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.pixels()[i] - b.pixels()[i]) * (a.pixels()[i] - b.pixels()[i]);
  return s / static_cast<double>(a.size());
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  return m;
}

// Directional second moment of the kernel about its centre, y axis up.
double moment_along(const Kernel2D& k, double angle_deg) {
  const double t = angle_deg * std::numbers::pi / 180.0;
  const int c = k.size / 2;
  double m = 0;
  for (int r = 0; r < k.size; ++r)
    for (int col = 0; col < k.size; ++col) {
      const double dx = col - c, dy = c - r;
      const double proj = dx * std::cos(t) + dy * std::sin(t);
      m += k.at(r, col) * proj * proj;
    }
  return m;
}

}  // namespace

TEST_CASE("motion blur kernel examples") {
  const Kernel2D one = motion_blur_kernel(1, 73.0);
  CHECK(one.size == 1);
  CHECK(one.weights == std::vector<double>{1.0});

  const Kernel2D h = motion_blur_kernel(5, 0.0);
  const int c = h.size / 2;
  int nonzero = 0;
  for (int r = 0; r < h.size; ++r)
    for (int col = 0; col < h.size; ++col)
      if (h.at(r, col) != 0.0) {
        ++nonzero;
        CHECK(r == c);
        CHECK(h.at(r, col) == doctest::Approx(0.2).epsilon(1e-12));
      }
  CHECK(nonzero == 5);

  const Kernel2D k = motion_blur_kernel(7, 20.0);
  CHECK(std::abs(k.sum() - 1.0) < 1e-12);
  double best = -1, best_angle = 0;
  for (int i = 0; i < 1800; ++i) {
    const double a = i * 0.1;
    const double m = moment_along(k, a);
    if (m > best) best = m, best_angle = a;
  }
  CHECK(std::abs(best_angle - 20.0) <= 1.0);

  CHECK_THROWS_AS(motion_blur_kernel(0, 10.0), ConfigError);
}

TEST_CASE("every kernel is nonnegative and unit-sum") {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const Kernel2D k = motion_blur_kernel(static_cast<int>(rng.uniform_int(1, 15)), rng.uniform(0, 360));
    CHECK(k.size % 2 == 1);
    for (double w : k.weights) CHECK(w >= 0.0);
    CHECK(std::abs(k.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("sample_spec presence and ranges") {
  Rng rng(0);
  SamplingRanges none;
  none.presence = 0.0;
  CHECK(sample_spec(rng, none).is_identity());

  SamplingRanges all;
  all.presence = 1.0;
  for (int i = 0; i < 2000; ++i) {
    const DegradationSpec s = sample_spec(rng, all);
    REQUIRE(s.blur);
    REQUIRE(s.scale);
    REQUIRE(s.compression);
    CHECK(s.blur->length >= 5);
    CHECK(s.blur->length <= 15);
    CHECK(s.blur->angle_deg >= 10.0);
    CHECK(s.blur->angle_deg <= 30.0);
    CHECK(s.scale->factor >= 1.0 / 6.0);
    CHECK(s.scale->factor < 1.0);
    CHECK(s.compression->quality >= 30);
    CHECK(s.compression->quality <= 75);
  }

  const SamplingRanges wide = SamplingRanges::wide_angle();
  double max_angle = 0;
  for (int i = 0; i < 2000; ++i) {
    const DegradationSpec s = sample_spec(rng, wide);
    if (s.blur) {
      CHECK(s.blur->angle_deg >= 0.0);
      CHECK(s.blur->angle_deg < 180.0);
      max_angle = std::max(max_angle, s.blur->angle_deg);
    }
  }
  CHECK(max_angle > 90.0);

  SamplingRanges only_c;
  only_c.enabled = TransformSet::parse("C");
  only_c.presence = 1.0;
  const DegradationSpec c = sample_spec(rng, only_c);
  CHECK_FALSE(c.blur);
  CHECK_FALSE(c.scale);
  CHECK(c.compression);
}

TEST_CASE("presence frequency over 10,000 draws") {
  Rng rng(1234);
  int blur = 0, scale = 0, comp = 0;
  for (int i = 0; i < 10000; ++i) {
    const DegradationSpec s = sample_spec(rng);
    blur += s.blur ? 1 : 0;
    scale += s.scale ? 1 : 0;
    comp += s.compression ? 1 : 0;
  }
  for (int n : {blur, scale, comp}) {
    CHECK(n >= 4800);
    CHECK(n <= 5200);
  }
}

TEST_CASE("apply examples") {
  const Image img = textured(32, 7);
  CHECK(apply(DegradationSpec{}, img) == img);

  DegradationSpec blur;
  blur.blur = MotionBlur{9, 25.0};
  const Image flat(32, 32, 0.37);
  CHECK(max_abs_diff(apply(blur, flat), flat) < 1e-12);

  Image checker(32, 32);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c) checker.at(r, c) = (r + c) % 2 ? 1.0 : 0.0;
  DegradationSpec down;
  down.scale = ScaleChange{0.25};
  const Image out = apply(down, checker);
  CHECK(out.width() == 32);
  CHECK(out.height() == 32);
  CHECK(laplacian_energy(out) < laplacian_energy(checker));
}

TEST_CASE("apply preserves size and range and is deterministic") {
  Rng rng(9);
  const Image img = textured(32, 3);
  for (int i = 0; i < 200; ++i) {
    const DegradationSpec s = sample_spec(rng, SamplingRanges::wide_angle());
    const Image a = apply(s, img);
    CHECK(a.width() == img.width());
    CHECK(a.height() == img.height());
    for (double p : a.pixels()) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    CHECK(apply(s, img) == a);
  }
  // Non-square inputs keep their shape too.
  DegradationSpec all{MotionBlur{7, 15.0}, ScaleChange{0.3}, Compression{40}};
  const Image wide(20, 12, 0.5);
  const Image w = apply(all, wide);
  CHECK(w.width() == 20);
  CHECK(w.height() == 12);
}

TEST_CASE("compression examples") {
  const Image flat(32, 32, 0.61);
  for (int q : {1, 30, 75, 100}) CHECK(max_abs_diff(compress(flat, q), flat) < 1e-9);

  for (std::uint64_t seed : {1, 2, 3}) {
    const Image img = textured(32, seed);
    CHECK(max_abs_diff(compress(img, 100), img) < 0.02);
    CHECK(mse(compress(img, 30), img) > mse(compress(img, 75), img));
  }
  const Image s = smooth(32);
  CHECK(mse(compress(s, 30), s) > mse(compress(s, 75), s));

  CHECK_THROWS_AS(compress(flat, 0), ConfigError);
  CHECK_THROWS_AS(compress(flat, 101), ConfigError);
}

TEST_CASE("compression is idempotent") {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const int q = static_cast<int>(rng.uniform_int(1, 100));
    for (const Image& img : {textured(32, 100 + i, 0.3, 0.7), textured(32, 200 + i, 0.0, 1.0), textured(40, 300 + i, 0.0, 1.0)}) {
      const Image once = compress(img, q);
      CHECK(max_abs_diff(compress(once, q), once) < 1e-6);
    }
  }
  // Saturated binary noise overshoots on a plain round trip.
  for (int q : {1, 30, 75, 100}) {
    Image noise(32, 32);
    for (double& v : noise.pixels()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const Image once = compress(noise, q);
    CHECK(max_abs_diff(compress(once, q), once) < 1e-6);
    for (double v : once.pixels()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("spec JSON round trip") {
  DegradationSpec s{MotionBlur{11, 17.5}, std::nullopt, Compression{44}};
  CHECK(spec_from_json(spec_to_json(s)) == s);
  CHECK(spec_from_json("{}").is_identity());
  CHECK_THROWS_AS(spec_from_json("{\"blur\": {\"length\": 0, \"angle\": 3}}"), ConfigError);
  CHECK_THROWS_AS(spec_from_json("not json"), ConfigError);
}

TEST_CASE("transform set letters") {
  CHECK(TransformSet::parse("M/S/C").letters() == "MSC");
  CHECK(TransformSet::parse("MS").compression == false);
  CHECK_FALSE(TransformSet::parse("").any());
  CHECK_THROWS_AS(TransformSet::parse("MX"), ConfigError);
}
