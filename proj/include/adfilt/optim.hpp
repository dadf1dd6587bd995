#pragma once

#include <vector>

#include "adfilt/tensor.hpp"

namespace adfilt::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2, added to the gradient
};

/// Gradient descent with adaptive first/second moments. State is kept per
/// parameter slot; slot shapes are fixed by the first step() call.
class Adam {
public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Updates params in place. params[i] and grads[i] must be shape-aligned
  /// across calls. Throws NumericError if an update produces NaN/Inf.
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  void reset();
  const AdamConfig& config() const { return cfg_; }
  long steps_taken() const { return t_; }

private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

}  // namespace adfilt::ad
