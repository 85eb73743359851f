#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ced/corpus.hpp"
#include "ced/encoder.hpp"
#include "ced/objective.hpp"
#include "ced/tape.hpp"
#include "ced/textfeat.hpp"

namespace ced::model {

// Variant names as exposed on the command line:
//   ced       tf-idf intervals -> 2-layer GRU (hidden 200), CED objective
//   ced-om    tf-idf intervals -> GRU (hidden 100) + original-message CNN
//   ced-cnn   CNN intervals   -> GRU (hidden 100) + original-message CNN
//   o1        ced-cnn architecture, objective without the time term
//   o2        ced-cnn architecture, objective without the difference term
//   gru2      tf-idf intervals -> GRU, final-state prediction only
//   tfidf-lin merged-bag tf-idf vector -> linear logistic classifier
struct ModelConfig {
  std::string variant = "ced";
  std::size_t interval_size = 10;  // N reposts per interval
  double alpha = 0.975;
  double lambda0 = 0.01;
  double lambda1 = 0.2;
  std::size_t hidden_dim = 0;  // 0 = variant default (200, or 100 with an OM feature)
  std::size_t embed_dim = 50;
  std::vector<std::size_t> filter_widths = {4, 5};
  std::size_t filters_per_width = 50;
  std::size_t tfidf_dim = 1000;
  std::size_t om_vocab_size = 3000;
  std::size_t collection_vocab_size = 20000;
  std::size_t pad_len = 64;       // tokens per interval (and per original message)
  std::size_t max_intervals = 64;  // CNN-path cap on |F|; longer streams truncated
  bool gru_bias = true;

  bool uses_tfidf_intervals() const;
  bool uses_cnn_intervals() const;
  bool uses_om() const;
  bool is_linear() const;
  bool full_sequence() const;  // decides only at the final step (ER = 1)
  objective::Variant objective_variant() const;
  std::size_t resolved_hidden() const;
  std::size_t conv_feature_dim() const { return filter_widths.size() * filters_per_width; }

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Featurized view of a stream against a fitted model; everything the forward
// passes need, precomputed once.
struct PreparedStream {
  std::string id;
  int label = 0;
  std::size_t n_intervals = 0;  // model-visible interval count

  std::vector<nn::Tensor> tfidf_cols;          // tf-idf interval path
  std::vector<std::vector<int>> interval_ids;  // CNN interval path
  std::vector<int> om_ids;                     // original-message path
  std::vector<std::vector<std::string>> interval_tokens;  // linear baseline
};

class Model {
 public:
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // Fresh model: featurizers are fitted on the given training streams only.
  static Model init(const ModelConfig& cfg,
                    std::span<const corpus::RepostStream* const> train_streams,
                    std::uint64_t seed);
  static Model load(const std::string& checkpoint_path, nlohmann::json* meta_out = nullptr);
  // extra_meta is merged into the header (step counter, config hash, ...).
  void save(const std::string& path, const nlohmann::json& extra_meta) const;

  PreparedStream prepare(const corpus::RepostStream& stream) const;
  std::vector<PreparedStream> prepare_all(const std::vector<corpus::RepostStream>& streams) const;

  struct StreamForward {
    nn::Var loss;
    objective::CrediblePoint point;
    objective::ProbCurve curve;
  };
  StreamForward stream_loss(nn::Tape& tape, const PreparedStream& ps) const;
  // Mean per-stream loss; streams enter in the given order.
  nn::Var batch_loss(nn::Tape& tape, std::span<const PreparedStream* const> batch) const;
  double stream_loss_value(const PreparedStream& ps) const;  // gradient-free

  // Offline probability curve over the first `max_steps` intervals.
  objective::ProbCurve prob_curve(const PreparedStream& ps,
                                  std::size_t max_steps = static_cast<std::size_t>(-1)) const;

  // Streaming inference: one interval per step() call.
  struct StepState {
    encoder::EncoderState enc;
    nn::Tensor om_feature;
    bool has_om = false;
    std::size_t next = 0;
  };
  StepState begin(const PreparedStream& ps) const;
  double step(StepState& state, const PreparedStream& ps) const;

  // Final-step probability over a visible prefix (full-sequence baselines).
  double final_prob(const PreparedStream& ps, std::size_t visible_steps) const;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  nlohmann::json meta_json() const;  // config + fitted featurizers

 private:
  Model() = default;
  void bind_wiring();  // attach featurizer/encoder pointers into params_
  nn::Tensor linear_input(const PreparedStream& ps, std::size_t visible_steps) const;

  ModelConfig cfg_;
  nn::ParamStore params_;
  text::TfidfModel tfidf_;
  text::Vocabulary rep_vocab_;
  text::Vocabulary om_vocab_;
  text::ConvFeaturizer rep_conv_;
  text::ConvFeaturizer om_conv_;
  encoder::GruStack gru_;
  nn::Parameter* score_ = nullptr;  // the weight vector s
  nn::Parameter* lin_w_ = nullptr;
  nn::Parameter* lin_b_ = nullptr;
};

}  // namespace ced::model
