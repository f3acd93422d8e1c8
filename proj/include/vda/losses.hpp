#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "vda/degrade.hpp"
#include "vda/graph.hpp"
#include "vda/image.hpp"
#include "vda/tensor.hpp"

namespace vda {

enum class DiscriminatorMode { none, plain2, merged2, threeway };

DiscriminatorMode parse_mode(std::string_view name);
std::string mode_name(DiscriminatorMode mode);
/// Number of discriminator classes; 0 for `none`.
int mode_ways(DiscriminatorMode mode);

struct LossWeights {
  double alpha = 1.0;  // FR
  double beta = 1.0;   // IC
  double gamma = 1.0;  // Adv
  void validate() const;
};

struct LossParts {
  double fm = 0.0;
  double fr = 0.0;
  double ic = 0.0;
  double adv = 0.0;
};

/// N pairs of clean images from N distinct classes plus one degradation draw
/// per pair.
struct NPairBatch {
  std::vector<Image> anchors;    // x_i
  std::vector<Image> positives;  // x_i+
  std::vector<int> classes;
  std::vector<degrade::DegradationSpec> specs;
  // Optional positions of the images in the labeled set, used to look up
  // cached reference features.
  std::vector<std::size_t> anchor_index;
  std::vector<std::size_t> positive_index;

  std::size_t size() const { return anchors.size(); }
  void validate() const;
};

/// Row layout of a discriminator batch: clean images, then synthesized
/// images, then video frames.
struct DomainCounts {
  std::size_t images = 0;
  std::size_t synth = 0;
  std::size_t video = 0;
  std::size_t total() const { return images + synth + video; }
};

/// Zero-based class index of every row under `mode` (class 0 is the image
/// domain).
std::vector<std::size_t> domain_labels(DiscriminatorMode mode, const DomainCounts& counts);

namespace losses {

// Plain tensor versions. Discriminator inputs are probabilities [B,ways].

double fm_loss(const Tensor& phi, const Tensor& psi);
double fr_loss(const Tensor& phi_degraded, const Tensor& psi_clean);
double npair_loss(const Tensor& anchors, const Tensor& refs);
double discriminator_loss(DiscriminatorMode mode, const Tensor& probs, const DomainCounts& counts);
double adversarial_loss(DiscriminatorMode mode, const Tensor& probs, const DomainCounts& counts);
double total_loss(const LossParts& parts, const LossWeights& w);

// Differentiable versions. Discriminator inputs are log-probabilities, as
// produced by Graph::log_softmax.

Var fm_loss(Graph& g, Var phi, Var psi);
Var fr_loss(Graph& g, Var phi_degraded, Var psi_clean);
Var npair_loss(Graph& g, Var anchors, Var refs);
Var discriminator_loss(Graph& g, DiscriminatorMode mode, Var log_probs, const DomainCounts& counts);
Var adversarial_loss(Graph& g, DiscriminatorMode mode, Var log_probs, const DomainCounts& counts);

}  // namespace losses
}  // namespace vda
