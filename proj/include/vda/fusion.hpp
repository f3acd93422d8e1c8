#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vda/data_io.hpp"
#include "vda/models.hpp"

namespace vda::fusion {

enum class FusionMode { uniform, weighted };
FusionMode parse_fusion(std::string_view name);
std::string fusion_name(FusionMode mode);

/// normalize(normalize(phi(x)) + normalize(phi(flip(x))))
std::vector<double> frame_feature(const EmbeddingNet& net, const Image& frame);
/// Row-wise frame_feature for a batch of frames, [n,K].
Tensor frame_features(const EmbeddingNet& net, std::span<const Image> frames);

/// D(y=1 | phi(v)) for every row of raw (unnormalized) frame embeddings.
std::vector<double> discriminator_weights(const Discriminator& disc, const Tensor& raw_features);

struct VideoFeatureSet {
  std::string video_id;
  Tensor features;              // [n,K], unit rows
  std::vector<double> weights;  // one per frame

  std::size_t size() const { return weights.size(); }
  /// Unit-norm rows, finite positive weights, matching lengths.
  void validate() const;
  /// Keeps the listed frames, in the given order.
  VideoFeatureSet subset(const std::vector<std::size_t>& frames) const;
};

/// Features for every frame of a video. Without a discriminator all weights are 1.
VideoFeatureSet extract_video(const EmbeddingNet& net, const Discriminator* disc, const UnlabeledVideo& video);

std::vector<double> fuse_uniform(const Tensor& features);
std::vector<double> fuse_weighted(const VideoFeatureSet& set);
std::vector<double> fuse(const VideoFeatureSet& set, FusionMode mode);

double similarity(std::span<const double> a, std::span<const double> b);

struct RankedFrame {
  std::size_t frame = 0;  // zero-based index into the video
  double weight = 0.0;
};

/// Descending by weight; equal weights keep frame order.
std::vector<RankedFrame> rank_frames(const VideoFeatureSet& set);

}  // namespace vda::fusion
