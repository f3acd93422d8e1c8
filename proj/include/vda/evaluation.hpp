#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vda/baselines.hpp"
#include "vda/data_io.hpp"
#include "vda/fusion.hpp"

namespace vda::eval {

/// Frames-per-video setting; 0 means every frame.
using FrameCount = std::size_t;
inline constexpr FrameCount kAllFrames = 0;
FrameCount parse_frames(std::string_view text);
std::string frames_name(FrameCount n);

struct FrameSubset {
  std::vector<std::size_t> frames;  // ascending
  bool clamped = false;             // more frames were requested than exist
};

/// Uniform subset without replacement, fixed by (seed, video_id).
FrameSubset subsample_frames(std::size_t frame_count, FrameCount n, std::uint64_t seed, std::string_view video_id);

struct ScoredPair {
  double score = 0.0;
  bool same = false;
  int fold = 0;
};

struct FoldAccuracy {
  int fold = 0;
  double threshold = 0.0;
  double accuracy = 0.0;
  std::size_t pairs = 0;
};

struct VerificationResult {
  std::vector<FoldAccuracy> folds;
  double mean = 0.0;
  double std_error = 0.0;  // sample std (n-1) over folds, divided by sqrt(folds)
};

/// Accuracy of the rule "accept iff score >= t" on `pairs`.
double accuracy_at(std::span<const ScoredPair> pairs, double threshold);

/// Threshold maximising accuracy on `pairs`; candidates are the scores
/// themselves plus +infinity, ties resolved towards the lowest threshold.
double best_threshold(std::span<const ScoredPair> pairs);

/// Leave-one-fold-out: each fold is scored with the threshold fitted on the
/// remaining folds. Requires at least two folds.
VerificationResult verification_accuracy(std::span<const ScoredPair> pairs);

/// TAR at the smallest candidate threshold whose impostor acceptance
/// fraction (score >= t) is at most `far`.
double tar_at_far(std::span<const double> genuine, std::span<const double> impostor, double far);

/// Rank-k identification rate. Ties in similarity are broken by gallery index.
double cmc_rank_k(const std::vector<std::vector<double>>& probes, const std::vector<int>& probe_ids,
                  const std::vector<std::vector<double>>& gallery, const std::vector<int>& gallery_ids,
                  std::size_t k);

/// Spearman rank correlation with average ranks for ties; 0 when either side
/// is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Verification on still images: every same-identity pair plus as many
/// random different-identity pairs; folds are assigned by identity.
VerificationResult image_verification(const EmbeddingNet& net, const LabeledImages& images, std::size_t n_folds = 10,
                                      std::uint64_t seed = 0);

// --- video-level scoring -----------------------------------------------------

using FeatureBank = std::map<std::string, fusion::VideoFeatureSet>;

/// Flip-averaged unit features (and D weights when `disc` is given) for every video.
FeatureBank extract_bank(const EmbeddingNet& net, const Discriminator* disc, const std::vector<UnlabeledVideo>& videos);

/// Applies an affine feature transform to every frame and renormalises the rows.
FeatureBank transform_bank(const FeatureBank& bank, const baselines::AffineTransform& t);

struct EvalOptions {
  FrameCount frames = kAllFrames;
  fusion::FusionMode fusion = fusion::FusionMode::uniform;
  std::uint64_t seed = 0;
  bool renormalize = false;  // unit-normalise the fused vector before scoring
};

/// Fused representation of one video under the options.
std::vector<double> video_vector(const fusion::VideoFeatureSet& set, const EvalOptions& opt, bool* clamped = nullptr);

struct EvalReport {
  std::string protocol = "verification";
  EvalOptions options;
  VerificationResult verification;
  std::map<double, double> tar;            // far -> tar
  std::map<std::size_t, double> rank_acc;  // k -> accuracy (set protocol)
  std::size_t pairs = 0;
  std::size_t clamped_videos = 0;

  std::string to_json() const;
};

/// Scores every pair with the fused-vector inner product.
std::vector<ScoredPair> score_pairs(const FeatureBank& bank, const std::vector<VideoPair>& pairs,
                                    const EvalOptions& opt, std::size_t* clamped_videos = nullptr);

/// Fold verification accuracy plus TAR at FAR {0.001, 0.01, 0.1}.
EvalReport evaluate_verification(const FeatureBank& bank, const std::vector<VideoPair>& pairs, const EvalOptions& opt);

/// Set-to-set protocol: 1:1 TAR@FAR over the pairs, and 1:N rank-{1,5,10}
/// with the first video of every identity as gallery and the rest as probes.
EvalReport evaluate_set(const FeatureBank& bank, const std::vector<VideoPair>& pairs,
                        const std::vector<VideoTruth>& truth, const EvalOptions& opt);

}  // namespace vda::eval
