#include <doctest.h>

#include <cmath>
#include <vector>

#include "testing.hpp"
#include "vda/error.hpp"
#include "vda/fusion.hpp"
#include "vda/models.hpp"

using namespace vda;
using namespace vda::fusion;

namespace {

Image test_image(std::uint64_t seed) {
  Rng rng(seed);
  Image img(32, 32);
  for (double& v : img.pixels()) v = rng.uniform();
  return img;
}

std::vector<double> normalized(std::vector<double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  for (double& x : v) x /= s;
  return v;
}

VideoFeatureSet make_set(const std::vector<std::vector<double>>& rows, std::vector<double> weights) {
  VideoFeatureSet s;
  s.video_id = "v";
  s.features = stack_rows(rows);
  s.weights = std::move(weights);
  return s;
}

}  // namespace

TEST_CASE("frame_feature") {
  const EmbeddingNet net = EmbeddingNet::initialize(NetworkConfig::toy(), 0);

  Image sym = test_image(1);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 16; ++c) sym.at(r, 31 - c) = sym.at(r, c);
  const auto fs = frame_feature(net, sym);
  const auto direct = normalized(net.embed(sym));
  for (std::size_t k = 0; k < fs.size(); ++k) CHECK(std::abs(fs[k] - direct[k]) < 1e-12);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const Image img = test_image(100 + s);
    const auto f = frame_feature(net, img);
    double n = 0;
    for (double x : f) n += x * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-8);

    const auto a = normalized(net.embed(img));
    const auto b = normalized(net.embed(img.flipped_horizontally()));
    std::vector<double> avg(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) avg[k] = 0.5 * (a[k] + b[k]);
    const auto oracle = normalized(avg);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(std::abs(f[k] - oracle[k]) < 1e-10);
  }

  std::vector<Image> frames{test_image(5), test_image(6)};
  const Tensor batch = frame_features(net, frames);
  CHECK(batch.row(1) == frame_feature(net, frames[1]));
  CHECK_THROWS_AS(frame_feature(net, Image(8, 8)), ShapeError);
}

TEST_CASE("fuse_uniform") {
  const std::vector<double> f{0.6, 0.8};
  CHECK(fuse_uniform(stack_rows({f})) == f);
  const auto zero = fuse_uniform(stack_rows({{1, 0}, {-1, 0}}));
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
  const auto same = fuse_uniform(stack_rows({f, f, f, f, f}));
  CHECK(std::abs(same[0] - 0.6) < 1e-15);
  CHECK(std::abs(same[1] - 0.8) < 1e-15);
  CHECK_THROWS(fuse_uniform(Tensor({0, 2})));
}

TEST_CASE("fuse_weighted") {
  const auto hand = fuse_weighted(make_set({{1, 0}, {0, 1}}, {0.75, 0.25}));
  CHECK(hand[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(hand[1] == doctest::Approx(0.25).epsilon(1e-15));

  const auto first = fuse_weighted(make_set({{1, 0}, {0, 1}}, {1.0, 0.0}));
  CHECK(first == std::vector<double>{1.0, 0.0});

  CHECK_THROWS(fuse_weighted(make_set({{1, 0}, {0, 1}}, {0.0, 0.0})));

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> rows;
    std::vector<double> w;
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 9));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> r(6);
      for (double& x : r) x = rng.normal();
      rows.push_back(normalized(r));
      w.push_back(rng.uniform(0.01, 1.0));
    }
    const VideoFeatureSet s = make_set(rows, w);
    const auto fused = fuse_weighted(s);
    for (std::size_t k = 0; k < 6; ++k) {
      double lo = 1e9, hi = -1e9;
      for (const auto& r : rows) lo = std::min(lo, r[k]), hi = std::max(hi, r[k]);
      CHECK(fused[k] >= lo - 1e-12);
      CHECK(fused[k] <= hi + 1e-12);
    }
    CHECK(similarity(fused, fused) >= 0.0);

    const double c = rng.uniform(0.1, 1.0);
    const auto flat = fuse_weighted(make_set(rows, std::vector<double>(n, c)));
    const auto uni = fuse_uniform(s.features);
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(flat[k] - uni[k]) < 1e-14);
    CHECK(fuse(s, FusionMode::uniform) == uni);
    CHECK(fuse(s, FusionMode::weighted) == fused);
  }
}

TEST_CASE("similarity") {
  const std::vector<double> a{0.6, 0.8}, b{0.8, 0.6}, o{-0.8, 0.6};
  CHECK(similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(similarity(a, o) == doctest::Approx(0.0));
  CHECK(similarity(a, b) == doctest::Approx(0.96).epsilon(1e-15));
  CHECK_THROWS(similarity(a, std::vector<double>{1.0}));
}

TEST_CASE("rank_frames") {
  const auto r = rank_frames(make_set({{1, 0}, {1, 0}, {1, 0}}, {0.2, 0.9, 0.5}));
  REQUIRE(r.size() == 3);
  CHECK(r[0].frame + 1 == 2);
  CHECK(r[1].frame + 1 == 3);
  CHECK(r[2].frame + 1 == 1);
  CHECK(r[0].weight == 0.9);

  const auto tied = rank_frames(make_set({{1, 0}, {1, 0}, {1, 0}, {1, 0}}, {0.4, 0.4, 0.4, 0.4}));
  for (std::size_t i = 0; i < tied.size(); ++i) CHECK(tied[i].frame == i);
}

TEST_CASE("feature sets and discriminator weights") {
  VideoFeatureSet bad = make_set({{1, 0}, {0.5, 0}}, {1, 1});
  CHECK_THROWS(bad.validate());
  VideoFeatureSet neg = make_set({{1, 0}, {0, 1}}, {1, -1});
  CHECK_THROWS(neg.validate());
  const VideoFeatureSet ok = make_set({{1, 0}, {0, 1}, {0.6, 0.8}}, {0.1, 0.2, 0.3});
  ok.validate();
  const VideoFeatureSet sub = ok.subset({2, 0});
  CHECK(sub.weights == std::vector<double>{0.3, 0.1});
  CHECK(sub.features.row(0) == std::vector<double>{0.6, 0.8});

  const EmbeddingNet net = EmbeddingNet::initialize(NetworkConfig::toy(), 1);
  const Discriminator disc = build_discriminator({3, 16, 32}, 2);
  UnlabeledVideo v{"clip", {test_image(1), test_image(2), test_image(3)}};
  const VideoFeatureSet plain = extract_video(net, nullptr, v);
  CHECK(plain.weights == std::vector<double>{1, 1, 1});
  const VideoFeatureSet weighted = extract_video(net, &disc, v);
  weighted.validate();
  const Tensor probs = disc.probabilities(net.embed_batch(v.frames));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(weighted.weights[i] == probs.at(i, 0));
    CHECK(weighted.weights[i] > 0.0);
    CHECK(weighted.weights[i] < 1.0);
  }
  CHECK(parse_fusion(fusion_name(FusionMode::weighted)) == FusionMode::weighted);
  CHECK_THROWS_AS(parse_fusion("max"), ConfigError);
}
