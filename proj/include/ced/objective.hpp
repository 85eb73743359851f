#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ced/tape.hpp"

namespace ced::objective {

// Per-step rumor probability p_i = sigmoid(h_i . s), clamped into the open
// unit interval so downstream logs stay finite.
struct ProbCurve {
  std::vector<double> p;
  std::size_t steps() const { return p.size(); }
};

double clamp_prob(double p);
double prob_from_score(double score);  // sigmoid with clamping

// First step whose probability clears the threshold on either side.
// n_f is 1-based; beta = n_f/steps, or 1 when the threshold is never reached.
struct CrediblePoint {
  std::optional<std::size_t> n_f;
  double beta = 1.0;
};

enum class Variant {
  kCed,                  // pred + lambda0*diff + lambda1*time
  kO1NoTime,             // pred + lambda0*diff
  kO2NoDiff,             // pred + lambda1*time
  kFullSequenceBaseline  // pred evaluated at the final step only
};

struct ObjectiveConfig {
  double alpha = 0.975;  // in [0.5, 1)
  double lambda0 = 0.01;
  double lambda1 = 0.2;
  Variant variant = Variant::kCed;
};

CrediblePoint find_credible_point(const ProbCurve& curve, double alpha);

// The post-point window is {n_f..steps} inclusive; averages use the actual
// term count. With no credible point the window degenerates to the final
// step. Values are reported under maximization: o_pred, o_diff <= 0 and
// o_time >= 0.
double o_pred(const ProbCurve& curve, int label, const CrediblePoint& point,
              Variant variant = Variant::kCed);
double o_time(const CrediblePoint& point);
double o_diff(const ProbCurve& curve, int label, const CrediblePoint& point, double alpha);

// Negated combined objective (a loss for the minimizer); beta is recomputed
// from the given curve on every call.
double o_ced(const ProbCurve& curve, int label, const ObjectiveConfig& cfg,
             CrediblePoint* point_out = nullptr);

// Tape counterpart used in training. `scores` are the per-step pre-sigmoid
// values h_i . s; the credible point is found on the numeric curve and held
// fixed for the backward pass (the index search carries no gradient).
nn::Var build_loss(nn::Tape& tape, std::span<const nn::Var> scores, int label,
                   const ObjectiveConfig& cfg, CrediblePoint* point_out = nullptr,
                   ProbCurve* curve_out = nullptr);

}  // namespace ced::objective
