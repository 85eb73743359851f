#include "ced/objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ced::objective {

double clamp_prob(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  if (p < lo) return lo;
  if (p > hi) return hi;
  return p;
}

double prob_from_score(double score) { return clamp_prob(1.0 / (1.0 + std::exp(-score))); }

namespace {

void check_alpha(double alpha) {
  if (alpha < 0.5 || alpha >= 1.0)
    throw std::invalid_argument("objective: alpha must be in [0.5, 1)");
}

void check_curve(const ProbCurve& curve) {
  if (curve.p.empty()) throw std::invalid_argument("objective: empty probability curve");
  for (double p : curve.p)
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("objective: probabilities must lie in (0,1)");
}

// 1-based window start; the final step when the threshold was never reached
std::size_t window_start(const CrediblePoint& point, std::size_t steps) {
  return point.n_f.value_or(steps);
}

}  // namespace

CrediblePoint find_credible_point(const ProbCurve& curve, double alpha) {
  check_alpha(alpha);
  check_curve(curve);
  CrediblePoint point;
  for (std::size_t i = 0; i < curve.p.size(); ++i) {
    if (curve.p[i] >= alpha || 1.0 - curve.p[i] >= alpha) {
      point.n_f = i + 1;
      point.beta = static_cast<double>(i + 1) / static_cast<double>(curve.p.size());
      return point;
    }
  }
  point.beta = 1.0;  // threshold never reached
  return point;
}

double o_pred(const ProbCurve& curve, int label, const CrediblePoint& point, Variant variant) {
  check_curve(curve);
  const std::size_t steps = curve.p.size();
  auto log_py = [&](std::size_t i) {
    const double p = curve.p[i];
    return std::log(label == 1 ? p : 1.0 - p);
  };
  if (variant == Variant::kFullSequenceBaseline) return log_py(steps - 1);
  const std::size_t start = window_start(point, steps);
  double acc = 0.0;
  for (std::size_t i = start; i <= steps; ++i) acc += log_py(i - 1);
  return acc / static_cast<double>(steps - start + 1);
}

double o_time(const CrediblePoint& point) { return -std::log(point.beta); }

double o_diff(const ProbCurve& curve, int label, const CrediblePoint& point, double alpha) {
  check_alpha(alpha);
  check_curve(curve);
  const std::size_t steps = curve.p.size();
  const std::size_t start = window_start(point, steps);
  const double log_alpha = std::log(alpha);
  const double log_one_minus_alpha = std::log(1.0 - alpha);
  double acc = 0.0;
  for (std::size_t i = start; i <= steps; ++i) {
    const double log_p1 = std::log(curve.p[i - 1]);
    // y=1: confidence dipping under the upper threshold; y=0: p(1|h)
    // rising over the lower threshold
    const double violation = label == 1 ? std::max(0.0, log_alpha - log_p1)
                                        : std::max(0.0, log_p1 - log_one_minus_alpha);
    acc += violation;
  }
  return -acc / static_cast<double>(steps - start + 1);
}

double o_ced(const ProbCurve& curve, int label, const ObjectiveConfig& cfg,
             CrediblePoint* point_out) {
  const CrediblePoint point = find_credible_point(curve, cfg.alpha);
  if (point_out) *point_out = point;
  double objective = o_pred(curve, label, point, cfg.variant);
  if (cfg.variant != Variant::kO2NoDiff)
    objective += cfg.lambda0 * o_diff(curve, label, point, cfg.alpha);
  if (cfg.variant != Variant::kO1NoTime) objective += cfg.lambda1 * o_time(point);
  return -objective;
}

nn::Var build_loss(nn::Tape& tape, std::span<const nn::Var> scores, int label,
                   const ObjectiveConfig& cfg, CrediblePoint* point_out, ProbCurve* curve_out) {
  if (scores.empty()) throw std::invalid_argument("build_loss: empty score sequence");
  check_alpha(cfg.alpha);
  const std::size_t steps = scores.size();

  ProbCurve curve;
  curve.p.reserve(steps);
  for (const nn::Var& s : scores) curve.p.push_back(prob_from_score(s.value()[0]));
  if (curve_out) *curve_out = curve;

  const CrediblePoint point = find_credible_point(curve, cfg.alpha);
  if (point_out) *point_out = point;
  const std::size_t start = window_start(point, steps);
  const std::size_t pred_start =
      cfg.variant == Variant::kFullSequenceBaseline ? steps : start;

  // log p(y|h_i) over the window, evaluated stably from the raw scores
  std::vector<nn::Var> log_py;
  log_py.reserve(steps - pred_start + 1);
  for (std::size_t i = pred_start; i <= steps; ++i) {
    const nn::Var s = scores[i - 1];
    log_py.push_back(label == 1 ? tape.log_sigmoid(s) : tape.log_sigmoid(tape.neg(s)));
  }
  nn::Var objective = cfg.variant == Variant::kFullSequenceBaseline
                          ? log_py.back()
                          : tape.mean(tape.concat(log_py));

  if (cfg.variant != Variant::kO2NoDiff) {
    std::vector<nn::Var> violations;
    violations.reserve(steps - start + 1);
    const nn::Var log_alpha = tape.scalar(std::log(cfg.alpha));
    const nn::Var log_one_minus_alpha = tape.scalar(std::log(1.0 - cfg.alpha));
    for (std::size_t i = start; i <= steps; ++i) {
      const nn::Var log_p1 = tape.log_sigmoid(scores[i - 1]);
      const nn::Var arg = label == 1 ? tape.sub(log_alpha, log_p1)
                                     : tape.sub(log_p1, log_one_minus_alpha);
      violations.push_back(tape.hinge(arg));
    }
    const nn::Var diff = tape.neg(tape.mean(tape.concat(violations)));
    objective = tape.add(objective, tape.scale(diff, cfg.lambda0));
  }

  if (cfg.variant != Variant::kO1NoTime) {
    // beta is held fixed for the backward pass, so the time term enters the
    // loss value as a constant
    objective = tape.add(objective, tape.scale(tape.scalar(o_time(point)), cfg.lambda1));
  }
  return tape.neg(objective);
}

}  // namespace ced::objective
