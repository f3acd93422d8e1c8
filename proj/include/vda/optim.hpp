#pragma once

#include <map>
#include <span>
#include <string>

#include "vda/graph.hpp"

namespace vda {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. State is keyed by parameter name, so one
/// instance should serve exactly one network.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Updates every trainable parameter in `params` that has a gradient entry.
  /// Frozen parameters and parameters without gradients are left untouched.
  void step(std::span<Parameter> params, const Gradients& grads);

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace vda
