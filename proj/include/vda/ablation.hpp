#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vda/evaluation.hpp"
#include "vda/trainer.hpp"

namespace vda::eval {

/// One model of a comparison table. Without a config the row is the
/// unadapted reference network.
struct AblationModel {
  std::string name;
  std::optional<TrainConfig> config;
  bool weighted_subrow = false;
};

/// Everything the models share. The pointers must outlive the call.
struct AblationData {
  const EmbeddingNet* rfnet = nullptr;
  const LabeledImages* images = nullptr;
  const std::vector<UnlabeledVideo>* train_videos = nullptr;
  const std::vector<UnlabeledVideo>* eval_videos = nullptr;
  const std::vector<VideoPair>* pairs = nullptr;
};

struct AblationCell {
  FrameCount frames = kAllFrames;
  std::optional<double> mean;  // empty where the setting does not apply
  std::optional<double> std_error;
  std::size_t clamped_videos = 0;
};

struct AblationRow {
  std::string model;
  bool ic = false;
  bool fm = false;
  std::string fr;   // transform letters such as "M/S/C", empty when off
  std::string adv;  // discriminator mode, empty when off
  fusion::FusionMode fusion = fusion::FusionMode::uniform;
  std::vector<AblationCell> cells;
};

struct AblationTable {
  std::uint64_t seed = 0;
  std::vector<FrameCount> frames;
  std::vector<AblationRow> rows;

  const AblationRow* find(const std::string& model, fusion::FusionMode fusion) const;
  std::string to_json() const;
};

/// Baseline plus models A-F. The baseline, E and F get weighted sub-rows.
std::vector<AblationModel> table1_models(std::uint64_t seed, std::optional<std::size_t> iterations = std::nullopt);

inline const std::vector<FrameCount>& default_frame_columns() {
  static const std::vector<FrameCount> cols{1, 5, 20, 50, kAllFrames};
  return cols;
}

/// Trains every configured model on the shared data, then scores the pairs
/// for each frames-per-video column. With `fusion` set to weighted, models
/// flagged for it get an extra weighted-fusion row; the baseline borrows the
/// discriminator of the last adversarial model. Weighted cells at one frame
/// per video are left empty.
AblationTable run_ablation(const std::vector<AblationModel>& models, const AblationData& data,
                           fusion::FusionMode fusion, std::uint64_t seed,
                           const std::vector<FrameCount>& frames = default_frame_columns(),
                           const std::function<void(const std::string&)>& log = {});

}  // namespace vda::eval
