#include "vda/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "vda/error.hpp"

namespace vda::fusion {
namespace {

void normalize_row(double* row, std::size_t k) {
  double n = 0.0;
  for (std::size_t c = 0; c < k; ++c) n += row[c] * row[c];
  n = std::sqrt(n);
  if (n == 0.0) return;
  for (std::size_t c = 0; c < k; ++c) row[c] /= n;
}

}  // namespace

FusionMode parse_fusion(std::string_view name) {
  if (name == "uniform") return FusionMode::uniform;
  if (name == "weighted") return FusionMode::weighted;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "' (expected uniform or weighted)");
}

std::string fusion_name(FusionMode mode) { return mode == FusionMode::uniform ? "uniform" : "weighted"; }

Tensor frame_features(const EmbeddingNet& net, std::span<const Image> frames) {
  if (frames.empty()) return Tensor(Shape{0, net.config().feature_dim});
  std::vector<Image> flipped;
  flipped.reserve(frames.size());
  for (const Image& f : frames) flipped.push_back(f.flipped_horizontally());
  Tensor a = net.embed_batch(frames);
  const Tensor b = net.embed_batch(flipped);
  const std::size_t k = a.dim(1);
  Tensor bn = b;
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    normalize_row(a.raw() + i * k, k);
    normalize_row(bn.raw() + i * k, k);
    for (std::size_t c = 0; c < k; ++c) a.at(i, c) += bn.at(i, c);
    normalize_row(a.raw() + i * k, k);
  }
  return a;
}

std::vector<double> frame_feature(const EmbeddingNet& net, const Image& frame) {
  return frame_features(net, std::span<const Image>(&frame, 1)).row(0);
}

std::vector<double> discriminator_weights(const Discriminator& disc, const Tensor& raw_features) {
  if (raw_features.dim(0) == 0) return {};
  const Tensor p = disc.probabilities(raw_features);
  std::vector<double> w(p.dim(0));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = p.at(i, 0);
  return w;
}

void VideoFeatureSet::validate() const {
  if (features.rank() != 2 || features.dim(0) != weights.size()) {
    throw ShapeError("video '" + video_id + "': feature rows and weights differ in count");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i]) || weights[i] <= 0.0) {
      throw NumericError("video '" + video_id + "': frame " + std::to_string(i) + " has a non-positive weight");
    }
    double n = 0.0;
    for (std::size_t c = 0; c < features.dim(1); ++c) n += features.at(i, c) * features.at(i, c);
    if (std::abs(std::sqrt(n) - 1.0) > 1e-8) {
      throw NumericError("video '" + video_id + "': frame " + std::to_string(i) + " feature is not unit norm");
    }
  }
}

VideoFeatureSet VideoFeatureSet::subset(const std::vector<std::size_t>& frames) const {
  VideoFeatureSet out{video_id, Tensor(Shape{frames.size(), features.dim(1)}), {}};
  const std::size_t k = features.dim(1);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i] >= size()) throw ShapeError("video '" + video_id + "': frame index out of range");
    std::copy(features.raw() + frames[i] * k, features.raw() + (frames[i] + 1) * k, out.features.raw() + i * k);
    out.weights.push_back(weights[frames[i]]);
  }
  return out;
}

VideoFeatureSet extract_video(const EmbeddingNet& net, const Discriminator* disc, const UnlabeledVideo& video) {
  VideoFeatureSet set{video.video_id, frame_features(net, video.frames), {}};
  if (disc) {
    set.weights = discriminator_weights(*disc, net.embed_batch(video.frames));
  } else {
    set.weights.assign(video.frames.size(), 1.0);
  }
  return set;
}

std::vector<double> fuse_uniform(const Tensor& features) {
  if (features.rank() != 2 || features.dim(0) == 0) throw ShapeError("fuse_uniform: no frames");
  const std::size_t n = features.dim(0), k = features.dim(1);
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) out[c] += features.at(i, c);
  for (double& v : out) v /= static_cast<double>(n);
  return out;
}

std::vector<double> fuse_weighted(const VideoFeatureSet& set) {
  if (set.size() == 0 || set.features.dim(0) != set.size()) throw ShapeError("fuse_weighted: no frames");
  double total = 0.0;
  for (double w : set.weights) total += w;
  if (!(total > 0.0)) throw NumericError("fuse_weighted: weights sum to zero");
  const std::size_t k = set.features.dim(1);
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t c = 0; c < k; ++c) out[c] += set.weights[i] * set.features.at(i, c);
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> fuse(const VideoFeatureSet& set, FusionMode mode) {
  return mode == FusionMode::uniform ? fuse_uniform(set.features) : fuse_weighted(set);
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("similarity: dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<RankedFrame> rank_frames(const VideoFeatureSet& set) {
  std::vector<RankedFrame> out;
  for (std::size_t i = 0; i < set.weights.size(); ++i) out.push_back({i, set.weights[i]});
  std::stable_sort(out.begin(), out.end(), [](const RankedFrame& a, const RankedFrame& b) { return a.weight > b.weight; });
  return out;
}

}  // namespace vda::fusion
