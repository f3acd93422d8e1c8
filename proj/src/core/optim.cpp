#include "vda/optim.hpp"

#include <cmath>

namespace vda {

void Adam::step(std::span<Parameter> params, const Gradients& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter& p : params) {
    if (!p.trainable) continue;
    const Tensor* g = grads.find(p);
    if (!g) continue;
    Moments& s = state_[p.name];
    if (s.m.size() != p.value.size()) {
      s.m = Tensor(p.value.shape(), 0.0);
      s.v = Tensor(p.value.shape(), 0.0);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = (*g)[i];
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * gi;
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace vda
