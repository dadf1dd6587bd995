#include "adfilt/optim.hpp"

#include <cmath>

namespace adfilt::ad {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw ContractError("Adam::step got " + std::to_string(params.size()) + " params and " +
                        std::to_string(grads.size()) + " grads");
  }
  if (cfg_.lr <= 0.0) throw ContractError("Adam learning rate must be positive");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) {
    throw ContractError("Adam::step parameter count changed between calls");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g)) {
      throw ShapeError("Adam::step param/grad shape mismatch at slot " + std::to_string(i) +
                       ": " + p.shape_str() + " vs " + g.shape_str());
    }
    if (!p.same_shape(m_[i])) {
      throw ShapeError("Adam::step param shape changed at slot " + std::to_string(i));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double grad = g[j] + cfg_.weight_decay * p[j];
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * grad;
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * grad * grad;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    if (!p.all_finite()) {
      throw NumericError("Adam::step produced non-finite parameter at slot " + std::to_string(i) +
                         " (step " + std::to_string(t_) + ")");
    }
  }
}

void Adam::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

}  // namespace adfilt::ad
