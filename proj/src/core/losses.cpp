#include "vda/losses.hpp"

#include <cmath>
#include <set>

#include "vda/error.hpp"

namespace vda {
namespace {

void check_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": expected matching [B,K] inputs, got " + shape_string(a.shape()) +
                     " and " + shape_string(b.shape()));
  }
}

void check_probs(DiscriminatorMode mode, const Shape& shape, const DomainCounts& counts, const char* what) {
  const int ways = mode_ways(mode);
  if (ways == 0) throw ConfigError(std::string(what) + ": no discriminator mode");
  if (shape.size() != 2 || shape[0] != counts.total() || shape[1] != static_cast<std::size_t>(ways)) {
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(counts.total()) + "," +
                     std::to_string(ways) + "] discriminator output, got " + shape_string(shape));
  }
}

/// First row and row count of the samples the generator pushes towards class 0.
std::pair<std::size_t, std::size_t> adversarial_rows(DiscriminatorMode mode, const DomainCounts& counts) {
  if (mode == DiscriminatorMode::plain2) return {counts.images + counts.synth, counts.video};
  return {counts.images, counts.synth + counts.video};
}

}  // namespace

DiscriminatorMode parse_mode(std::string_view name) {
  if (name == "none") return DiscriminatorMode::none;
  if (name == "plain2") return DiscriminatorMode::plain2;
  if (name == "merged2") return DiscriminatorMode::merged2;
  if (name == "threeway") return DiscriminatorMode::threeway;
  throw ConfigError("unknown discriminator mode '" + std::string(name) + "'");
}

std::string mode_name(DiscriminatorMode mode) {
  switch (mode) {
    case DiscriminatorMode::none: return "none";
    case DiscriminatorMode::plain2: return "plain2";
    case DiscriminatorMode::merged2: return "merged2";
    case DiscriminatorMode::threeway: return "threeway";
  }
  return "none";
}

int mode_ways(DiscriminatorMode mode) {
  switch (mode) {
    case DiscriminatorMode::none: return 0;
    case DiscriminatorMode::plain2:
    case DiscriminatorMode::merged2: return 2;
    case DiscriminatorMode::threeway: return 3;
  }
  return 0;
}

void LossWeights::validate() const {
  if (!(alpha >= 0 && beta >= 0 && gamma >= 0)) throw ConfigError("loss weights must be nonnegative");
}

void NPairBatch::validate() const {
  const std::size_t n = anchors.size();
  if (n == 0) throw ConfigError("n-pair batch is empty");
  if (positives.size() != n || classes.size() != n || specs.size() != n) {
    throw ShapeError("n-pair batch: anchors, positives, classes and specs differ in length");
  }
  if (std::set<int>(classes.begin(), classes.end()).size() != n) {
    throw ConfigError("n-pair batch: class ids must be pairwise distinct");
  }
}

std::vector<std::size_t> domain_labels(DiscriminatorMode mode, const DomainCounts& counts) {
  if (mode == DiscriminatorMode::none) throw ConfigError("domain labels need a discriminator mode");
  if (mode == DiscriminatorMode::plain2 && counts.synth > 0) {
    throw ConfigError("plain2 discriminator does not accept synthesized samples");
  }
  std::vector<std::size_t> labels;
  labels.reserve(counts.total());
  labels.insert(labels.end(), counts.images, 0);
  labels.insert(labels.end(), counts.synth, 1);
  labels.insert(labels.end(), counts.video, mode == DiscriminatorMode::threeway ? 2 : 1);
  return labels;
}

namespace losses {

double fm_loss(const Tensor& phi, const Tensor& psi) {
  check_pair(phi, psi, "fm_loss");
  if (phi.dim(0) == 0) throw ShapeError("fm_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double d = phi[i] - psi[i];
    total += d * d;
  }
  return total / static_cast<double>(phi.dim(0));
}

double fr_loss(const Tensor& phi_degraded, const Tensor& psi_clean) { return fm_loss(phi_degraded, psi_clean); }

double npair_loss(const Tensor& anchors, const Tensor& refs) {
  check_pair(anchors, refs, "npair_loss");
  const std::size_t n = anchors.dim(0), k = anchors.dim(1);
  if (n == 0) throw ShapeError("npair_loss: N must be at least 1");
  double total = 0.0;
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += anchors.at(i, c) * refs.at(j, c);
      logits[j] = s;
      mx = std::max(mx, s);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += mx + std::log(z) - logits[i];
  }
  return total / static_cast<double>(n);
}

double discriminator_loss(DiscriminatorMode mode, const Tensor& probs, const DomainCounts& counts) {
  check_probs(mode, probs.shape(), counts, "discriminator_loss");
  const auto labels = domain_labels(mode, counts);
  if (labels.empty()) throw ShapeError("discriminator_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total -= std::log(probs.at(i, labels[i]));
  return total / static_cast<double>(labels.size());
}

double adversarial_loss(DiscriminatorMode mode, const Tensor& probs, const DomainCounts& counts) {
  check_probs(mode, probs.shape(), counts, "adversarial_loss");
  if (mode == DiscriminatorMode::plain2 && counts.synth > 0) {
    throw ConfigError("plain2 discriminator does not accept synthesized samples");
  }
  const auto [first, count] = adversarial_rows(mode, counts);
  if (count == 0) throw ShapeError("adversarial_loss: no video or synthesized samples");
  double total = 0.0;
  for (std::size_t i = first; i < first + count; ++i) total -= std::log(probs.at(i, 0));
  return total / static_cast<double>(count);
}

double total_loss(const LossParts& parts, const LossWeights& w) {
  return parts.fm + w.alpha * parts.fr + w.beta * parts.ic + w.gamma * parts.adv;
}

Var fm_loss(Graph& g, Var phi, Var psi) {
  check_pair(g.value(phi), g.value(psi), "fm_loss");
  Var d = g.sub(phi, psi, "fm.diff");
  return g.mean(g.sum_rows(g.mul(d, d, "fm.sq"), "fm.rows"), "fm_loss");
}

Var fr_loss(Graph& g, Var phi_degraded, Var psi_clean) {
  check_pair(g.value(phi_degraded), g.value(psi_clean), "fr_loss");
  Var d = g.sub(phi_degraded, psi_clean, "fr.diff");
  return g.mean(g.sum_rows(g.mul(d, d, "fr.sq"), "fr.rows"), "fr_loss");
}

Var npair_loss(Graph& g, Var anchors, Var refs) {
  check_pair(g.value(anchors), g.value(refs), "npair_loss");
  const std::size_t n = g.value(anchors).dim(0);
  if (n == 0) throw ShapeError("npair_loss: N must be at least 1");
  Var logits = g.matmul(anchors, g.transpose(refs, "npair.refs_t"), "npair.logits");
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = i;
  Var ll = g.pick(g.log_softmax(logits, "npair.log_softmax"), diag, "npair.target");
  return g.scale(g.mean(ll), -1.0, "npair_loss");
}

Var discriminator_loss(Graph& g, DiscriminatorMode mode, Var log_probs, const DomainCounts& counts) {
  check_probs(mode, g.value(log_probs).shape(), counts, "discriminator_loss");
  auto labels = domain_labels(mode, counts);
  if (labels.empty()) throw ShapeError("discriminator_loss: empty batch");
  Var ll = g.pick(log_probs, std::move(labels), "disc.target");
  return g.scale(g.mean(ll), -1.0, "discriminator_loss");
}

Var adversarial_loss(Graph& g, DiscriminatorMode mode, Var log_probs, const DomainCounts& counts) {
  check_probs(mode, g.value(log_probs).shape(), counts, "adversarial_loss");
  if (mode == DiscriminatorMode::plain2 && counts.synth > 0) {
    throw ConfigError("plain2 discriminator does not accept synthesized samples");
  }
  const auto [first, count] = adversarial_rows(mode, counts);
  if (count == 0) throw ShapeError("adversarial_loss: no video or synthesized samples");
  Var rows = g.slice_rows(log_probs, first, first + count, "adv.rows");
  Var ll = g.pick(rows, std::vector<std::size_t>(count, 0), "adv.image_class");
  return g.scale(g.mean(ll), -1.0, "adversarial_loss");
}

}  // namespace losses
}  // namespace vda
