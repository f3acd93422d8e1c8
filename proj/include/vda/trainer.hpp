#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vda/data_io.hpp"
#include "vda/degrade.hpp"
#include "vda/losses.hpp"
#include "vda/models.hpp"
#include "vda/optim.hpp"

namespace vda {

struct LossToggles {
  bool fm = true;
  bool fr = true;
  bool ic = true;
  bool adv = true;
};

struct TrainConfig {
  std::string name = "custom";
  DiscriminatorMode mode = DiscriminatorMode::threeway;
  LossToggles losses;
  degrade::TransformSet fr_transforms;  // which transforms B may draw
  bool wide_blur_angle = false;         // blur angles over [0,180) instead of the default range
  LossWeights weights;
  double lr = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::size_t iterations = 500;
  std::size_t batch_total = 64;
  std::size_t image_half = 32;  // 2N clean images arranged as N pairs
  std::size_t video_half = 32;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n_unlabeled_videos;
  std::size_t disc_hidden = 16;

  /// Whether a discriminator takes part (Adv toggled on with a mode set).
  bool adversarial() const { return losses.adv && mode != DiscriminatorMode::none; }
  /// Whether video frames enter the objective.
  bool uses_video() const { return adversarial() && weights.gamma > 0.0; }

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(std::string_view json);

  /// Ablation rows A-F: loss toggles, FR transforms and discriminator mode.
  static TrainConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();
};

struct PretrainConfig {
  std::size_t iterations = 600;
  std::size_t pairs_per_batch = 16;
  double lr = 1e-3;
  double embedding_l2 = 0.002;  // penalty on mean squared embedding norm
  std::uint64_t seed = 0;
  NetworkConfig network = NetworkConfig::toy();

  void validate() const;
  std::string to_json() const;
  static PretrainConfig from_json(std::string_view json);
};

/// Trains the reference network on labeled stills with the N-pair loss.
/// Returns the network with every layer frozen.
EmbeddingNet pretrain_rfnet(const LabeledImages& images, const PretrainConfig& cfg);

struct IterationRecord {
  std::size_t iteration = 0;
  LossParts parts;
  double total = 0.0;
  std::optional<double> d_loss;
  std::optional<double> d_accuracy;

  std::string to_json() const;
};

struct TrainHistory {
  std::vector<IterationRecord> records;
  std::string to_jsonl() const;
};

/// One VDNet adaptation run. Batches for iteration i depend only on
/// (seed, i); video frames use their own random streams, so runs without an
/// adversarial term never touch video data.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const EmbeddingNet& rfnet, const LabeledImages& images,
          const std::vector<UnlabeledVideo>& videos);

  /// Assembles the batches for the next iteration and runs train_step.
  IterationRecord step();

  /// One discriminator update on the batch, then one VDNet update.
  IterationRecord train_step(const NPairBatch& batch, std::span<const Image> video_frames);

  NPairBatch sample_image_batch(std::size_t iteration) const;
  std::vector<Image> sample_video_batch(std::size_t iteration) const;

  const TrainConfig& config() const { return cfg_; }
  const EmbeddingNet& rfnet() const { return rfnet_; }
  const EmbeddingNet& vdnet() const { return vdnet_; }
  EmbeddingNet& vdnet() { return vdnet_; }
  const std::optional<Discriminator>& discriminator() const { return disc_; }
  std::size_t iteration() const { return iteration_; }
  /// Indices of the videos the trainer may draw from.
  const std::vector<std::size_t>& video_pool() const { return video_pool_; }

 private:
  TrainConfig cfg_;
  EmbeddingNet rfnet_;
  EmbeddingNet vdnet_;
  std::optional<Discriminator> disc_;
  Adam opt_g_;
  Adam opt_d_;
  const LabeledImages& images_;
  const std::vector<UnlabeledVideo>& videos_;
  std::vector<std::size_t> video_pool_;
  std::vector<std::vector<std::size_t>> by_identity_;  // identities with at least two images
  Tensor psi_;                                         // RFNet features of every labeled image
  std::size_t iteration_ = 0;
};

struct TrainResult {
  EmbeddingNet vdnet;
  std::optional<Discriminator> disc;
  TrainHistory history;
  double wall_seconds = 0.0;
};

TrainResult train(const TrainConfig& cfg, const EmbeddingNet& rfnet, const LabeledImages& images,
                  const std::vector<UnlabeledVideo>& videos);

}  // namespace vda
