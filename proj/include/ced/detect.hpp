#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ced/model.hpp"

namespace ced::detect {

struct DetectionOutcome {
  std::string stream_id;
  int verdict = 0;  // 1 = rumor
  bool decided_early = false;
  std::size_t t = 0;            // 1-based decision step
  std::size_t total_steps = 0;  // intervals visible to the detector
  std::vector<double> prob_prefix;  // probabilities actually computed
};

// Threshold rule per step: rumor when p >= alpha, non-rumor when
// p <= 1 - alpha (closed boundaries on both sides), keep reading otherwise.
// If no step decides, a forced fallback at the last visible step uses
// p >= 0.5. Full-sequence models always decide at the last step.
// `max_fraction` restricts the visible prefix to ceil(fraction * |F|)
// intervals (at least one).
DetectionOutcome detect_stream(const model::Model& m, const model::PreparedStream& ps,
                               double alpha, std::optional<double> max_fraction = {});

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsBundle {
  double accuracy = 0.0;
  Prf rumor;  // rumor as positive class
  Prf macro;  // averaged over both classes
  double early_rate = 0.0;
  std::array<std::size_t, 10> er_histogram{};  // t/|F| in (0,.1], (.1,.2], ..., (.9,1]
  std::size_t count = 0;

  nlohmann::json to_json() const;
};

// `gold` holds the true labels aligned with `outcomes`. Forced decisions
// count t = |F| toward the early rate.
MetricsBundle compute_metrics(std::span<const DetectionOutcome> outcomes,
                              std::span<const int> gold);

// Detects every stream and reduces; streams enter the metrics in order.
MetricsBundle evaluate(const model::Model& m, std::span<const model::PreparedStream> streams,
                       double alpha, std::optional<double> max_fraction = {});

// Aligned text table with Acc. / Precision / Recall / F1 / ER columns
// (rumor-class precision/recall/F1).
std::string metrics_table(const std::vector<std::pair<std::string, MetricsBundle>>& rows);

}  // namespace ced::detect
