#include "ced/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ced::nn {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  state.step += 1;
  const AdamConfig& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    if (!p->grad.all_finite())
      throw std::runtime_error("adam_step: non-finite gradient for parameter '" + p->name + "'");
    auto it = state.moments.find(p->name);
    if (it == state.moments.end()) {
      it = state.moments
               .emplace(p->name, std::make_pair(Tensor::zeros(p->value.shape()),
                                                Tensor::zeros(p->value.shape())))
               .first;
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    if (!m.same_shape(p->value))
      throw std::runtime_error("adam_step: moment shape mismatch for parameter '" + p->name + "'");
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p->value[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    if (!p->value.all_finite())
      throw std::runtime_error("adam_step: non-finite update for parameter '" + p->name + "'");
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->grad.numel(); ++i) sq += p->grad[i] * p->grad[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      if (!p->trainable) continue;
      for (std::size_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= s;
    }
  }
  return norm;
}

}  // namespace ced::nn
