#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>

#include "ced/tape.hpp"

namespace ced::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moment estimates plus the shared step counter.
struct AdamState {
  AdamConfig cfg;
  std::uint64_t step = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments;  // name -> (m, v)
};

// Standard Adam update with bias correction. Skips non-trainable parameters.
// Throws if a gradient or an updated value is non-finite, naming the
// offending parameter.
void adam_step(std::span<Parameter* const> params, AdamState& state);

// Scales all trainable gradients so their global L2 norm is at most
// max_norm; returns the pre-clip norm.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

}  // namespace ced::nn
