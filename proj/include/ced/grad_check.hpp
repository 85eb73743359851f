#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "ced/tape.hpp"

namespace ced::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t entries_checked = 0;
};

// Compares analytic gradients against central finite differences.
//
// `loss(true)` must zero the parameter gradients, run forward+backward and
// return the loss value, leaving analytic gradients in Parameter::grad.
// `loss(false)` must return the loss value for the current parameter values
// without touching gradients.
//
// Checks every entry when the total count is at most max_entries, otherwise
// a seeded uniform sample of max_entries entries. Per-entry relative error
// is |a - n| / max(1e-8, |a| + |n|).
//
// Finite differences are unreliable within ~10*epsilon of a hinge/relu kink;
// callers are expected to evaluate at inputs away from kinks.
GradCheckReport grad_check(const std::function<double(bool)>& loss,
                           std::span<Parameter* const> params, double epsilon,
                           std::size_t max_entries, std::uint64_t seed);

}  // namespace ced::nn
