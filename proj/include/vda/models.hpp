#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vda/checkpoint.hpp"
#include "vda/graph.hpp"
#include "vda/image.hpp"

namespace vda {

enum class LayerKind { conv, vmax_pool, avg_pool };
enum class Activation { none, relu, maxout };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::size_t out_channels = 0;  // conv only, before any maxout halving
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Activation activation = Activation::none;
};

/// Output size of one layer, channels x height x width.
struct LayerShape {
  std::string name;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

struct NetworkConfig {
  std::string scale = "toy";
  std::size_t input_size = 32;
  std::size_t feature_dim = 32;
  std::vector<LayerSpec> layers;
  std::vector<std::string> frozen_layers;

  /// 32x32 input, two (conv + strided conv/maxout) stages, K = 32.
  static NetworkConfig toy();
  /// Ten 3x3 convolutions with Vmax pooling, 100x100 input, K = 320.
  static NetworkConfig paper();

  /// Checks the invariants (K matches the final layer, frozen layers exist)
  /// and returns the per-layer output shapes.
  std::vector<LayerShape> layer_shapes() const;
  void validate() const { (void)layer_shapes(); }

  std::string to_json() const;
  static NetworkConfig from_json(std::string_view json);
};

struct DiscriminatorConfig {
  int ways = 3;
  std::size_t hidden = 16;
  std::size_t input_dim = 32;

  static DiscriminatorConfig paper() { return {3, 160, 320}; }
  void validate() const;
};

/// [B,1,H,W] tensor from equally sized images.
Tensor images_to_tensor(std::span<const Image> images);

/// Convolutional embedding network (RFNet or VDNet role).
class EmbeddingNet {
 public:
  EmbeddingNet(NetworkConfig cfg, std::vector<Parameter> params);

  /// He-uniform convolution weights, zero biases.
  static EmbeddingNet initialize(const NetworkConfig& cfg, std::uint64_t seed);

  /// images: [B,1,H,W] -> features [B,K]
  Var forward(Graph& g, Var images, bool track = true);
  Var forward(Graph& g, Var images) const;

  Tensor embed_batch(std::span<const Image> images) const;
  std::vector<double> embed(const Image& img) const;

  const NetworkConfig& config() const { return cfg_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t trainable_parameter_count() const;

  void set_layer_trainable(const std::string& layer, bool trainable);
  bool layer_trainable(const std::string& layer) const;

 private:
  template <class Self>
  static Var forward_impl(Self& self, Graph& g, Var images, bool track);

  NetworkConfig cfg_;
  std::vector<Parameter> params_;
};

/// Two fully connected layers: K -> hidden -> ReLU -> ways, softmax head.
class Discriminator {
 public:
  Discriminator(DiscriminatorConfig cfg, std::vector<Parameter> params);
  static Discriminator initialize(const DiscriminatorConfig& cfg, std::uint64_t seed);

  /// features [B,K] -> logits [B,ways]
  Var logits(Graph& g, Var features, bool track = true);
  Var logits(Graph& g, Var features) const;

  /// Softmax class probabilities, [B,ways].
  Tensor probabilities(const Tensor& features) const;

  const DiscriminatorConfig& config() const { return cfg_; }
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<Parameter> params_;
};

/// Reference network: parameters from a checkpoint, every layer frozen.
EmbeddingNet build_rfnet(const NetworkConfig& cfg, const std::vector<NamedTensor>& checkpoint);

/// Adapted network: a copy of `rfnet` with every layer trainable except the
/// configured frozen layers (by default the last two convolutions).
EmbeddingNet build_vdnet(const EmbeddingNet& rfnet);

Discriminator build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);
Discriminator load_discriminator(const DiscriminatorConfig& cfg, const std::vector<NamedTensor>& checkpoint);

/// Name of the layer owning a parameter ("conv1_1.weight" -> "conv1_1").
std::string layer_of(const std::string& param_name);

}  // namespace vda
