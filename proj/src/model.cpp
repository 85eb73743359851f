#include "ced/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ced/checkpoint.hpp"
#include "ced/rng.hpp"

namespace ced::model {

namespace {

const std::set<std::string> kVariants = {"ced", "ced-om", "ced-cnn", "o1",
                                         "o2",  "gru2",   "tfidf-lin"};

std::vector<std::string> merged_tokens(const corpus::Interval& interval) {
  std::vector<std::string> tokens;
  for (const corpus::Repost& r : interval) {
    std::vector<std::string> t = text::tokenize(r.text);
    tokens.insert(tokens.end(), std::make_move_iterator(t.begin()),
                  std::make_move_iterator(t.end()));
  }
  return tokens;
}

}  // namespace

bool ModelConfig::uses_tfidf_intervals() const {
  return variant == "ced" || variant == "ced-om" || variant == "gru2";
}

bool ModelConfig::uses_cnn_intervals() const {
  return variant == "ced-cnn" || variant == "o1" || variant == "o2";
}

bool ModelConfig::uses_om() const {
  return variant == "ced-om" || uses_cnn_intervals();
}

bool ModelConfig::is_linear() const { return variant == "tfidf-lin"; }

bool ModelConfig::full_sequence() const { return variant == "gru2" || variant == "tfidf-lin"; }

objective::Variant ModelConfig::objective_variant() const {
  if (variant == "o1") return objective::Variant::kO1NoTime;
  if (variant == "o2") return objective::Variant::kO2NoDiff;
  if (variant == "gru2") return objective::Variant::kFullSequenceBaseline;
  return objective::Variant::kCed;
}

std::size_t ModelConfig::resolved_hidden() const {
  if (hidden_dim != 0) return hidden_dim;
  return uses_om() ? 100 : 200;
}

void ModelConfig::validate() const {
  if (!kVariants.count(variant))
    throw std::invalid_argument("ModelConfig: unknown variant '" + variant + "'");
  if (interval_size < 1) throw std::invalid_argument("ModelConfig: interval_size must be >= 1");
  if (alpha < 0.5 || alpha >= 1.0)
    throw std::invalid_argument("ModelConfig: alpha must be in [0.5, 1)");
  if (lambda0 < 0.0 || lambda1 < 0.0)
    throw std::invalid_argument("ModelConfig: lambda weights must be nonnegative");
  if (filter_widths.empty()) throw std::invalid_argument("ModelConfig: no filter widths");
  for (std::size_t w : filter_widths)
    if (w < 1) throw std::invalid_argument("ModelConfig: filter widths must be >= 1");
  if ((uses_cnn_intervals() || uses_om()) &&
      pad_len < *std::max_element(filter_widths.begin(), filter_widths.end()))
    throw std::invalid_argument("ModelConfig: pad_len below the widest filter");
  if (tfidf_dim < 3 || om_vocab_size < 3 || collection_vocab_size < 3)
    throw std::invalid_argument("ModelConfig: vocabulary sizes must be >= 3");
  if (max_intervals < 1) throw std::invalid_argument("ModelConfig: max_intervals must be >= 1");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["interval_size"] = interval_size;
  j["alpha"] = alpha;
  j["lambda0"] = lambda0;
  j["lambda1"] = lambda1;
  j["hidden_dim"] = hidden_dim;
  j["embed_dim"] = embed_dim;
  j["filter_widths"] = filter_widths;
  j["filters_per_width"] = filters_per_width;
  j["tfidf_dim"] = tfidf_dim;
  j["om_vocab_size"] = om_vocab_size;
  j["collection_vocab_size"] = collection_vocab_size;
  j["pad_len"] = pad_len;
  j["max_intervals"] = max_intervals;
  j["gru_bias"] = gru_bias;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = j.at("variant").get<std::string>();
  c.interval_size = j.at("interval_size").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.lambda0 = j.at("lambda0").get<double>();
  c.lambda1 = j.at("lambda1").get<double>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.filter_widths = j.at("filter_widths").get<std::vector<std::size_t>>();
  c.filters_per_width = j.at("filters_per_width").get<std::size_t>();
  c.tfidf_dim = j.at("tfidf_dim").get<std::size_t>();
  c.om_vocab_size = j.at("om_vocab_size").get<std::size_t>();
  c.collection_vocab_size = j.at("collection_vocab_size").get<std::size_t>();
  c.pad_len = j.at("pad_len").get<std::size_t>();
  c.max_intervals = j.at("max_intervals").get<std::size_t>();
  c.gru_bias = j.at("gru_bias").get<bool>();
  c.validate();
  return c;
}

Model Model::init(const ModelConfig& cfg,
                  std::span<const corpus::RepostStream* const> train_streams,
                  std::uint64_t seed) {
  cfg.validate();
  if (train_streams.empty()) throw std::invalid_argument("Model::init: no training streams");

  Model m;
  m.cfg_ = cfg;

  // featurizer fitting happens against the training split only
  if (cfg.uses_tfidf_intervals() || cfg.is_linear()) {
    std::vector<std::vector<std::string>> docs;
    for (const corpus::RepostStream* s : train_streams) {
      const corpus::IntervalSequence seq = corpus::partition(*s, cfg.interval_size);
      for (const corpus::Interval& iv : seq.intervals) docs.push_back(merged_tokens(iv));
    }
    m.tfidf_ = text::fit_tfidf(docs, cfg.tfidf_dim);
  }
  if (cfg.uses_cnn_intervals()) {
    std::vector<std::vector<std::string>> docs;
    for (const corpus::RepostStream* s : train_streams) {
      docs.push_back(text::tokenize(s->original_text));
      for (const corpus::Repost& r : s->reposts) docs.push_back(text::tokenize(r.text));
    }
    m.rep_vocab_ = text::build_vocabulary(docs, cfg.collection_vocab_size);
  }
  if (cfg.uses_om()) {
    std::vector<std::vector<std::string>> docs;
    for (const corpus::RepostStream* s : train_streams)
      docs.push_back(text::tokenize(s->original_text));
    m.om_vocab_ = text::build_vocabulary(docs, cfg.om_vocab_size);
  }

  rng::Rng rng(seed);
  if (cfg.is_linear()) {
    const std::size_t v = m.tfidf_.vocab.size();
    const double limit = 1.0 / std::sqrt(static_cast<double>(v));
    nn::Tensor w({v});
    for (std::size_t i = 0; i < v; ++i) w[i] = rng.uniform(-limit, limit);
    m.lin_w_ = &m.params_.create("linear.w", std::move(w));
    m.lin_b_ = &m.params_.create("linear.b", nn::Tensor({1}));
    return m;
  }

  if (cfg.uses_om())
    m.om_conv_ = text::make_conv_featurizer(m.params_, "cnn.om", m.om_vocab_.size(),
                                            cfg.embed_dim, cfg.filter_widths,
                                            cfg.filters_per_width, cfg.pad_len, rng);
  if (cfg.uses_cnn_intervals())
    m.rep_conv_ = text::make_conv_featurizer(m.params_, "cnn.rep", m.rep_vocab_.size(),
                                             cfg.embed_dim, cfg.filter_widths,
                                             cfg.filters_per_width, cfg.pad_len, rng);

  const std::size_t in_dim =
      cfg.uses_cnn_intervals() ? cfg.conv_feature_dim() : m.tfidf_.vocab.size();
  const std::size_t hidden = cfg.resolved_hidden();
  m.gru_ = encoder::make_gru_stack(m.params_, in_dim, hidden, cfg.gru_bias, rng);

  const std::size_t score_dim = hidden + (cfg.uses_om() ? cfg.conv_feature_dim() : 0);
  const double limit = 1.0 / std::sqrt(static_cast<double>(score_dim));
  nn::Tensor s({score_dim});
  for (std::size_t i = 0; i < score_dim; ++i) s[i] = rng.uniform(-limit, limit);
  m.score_ = &m.params_.create("s", std::move(s));
  return m;
}

void Model::bind_wiring() {
  if (cfg_.is_linear()) {
    lin_w_ = &params_.get("linear.w");
    lin_b_ = &params_.get("linear.b");
    return;
  }
  if (cfg_.uses_om())
    om_conv_ = text::bind_conv_featurizer(params_, "cnn.om", cfg_.embed_dim, cfg_.filter_widths,
                                          cfg_.filters_per_width, cfg_.pad_len);
  if (cfg_.uses_cnn_intervals())
    rep_conv_ = text::bind_conv_featurizer(params_, "cnn.rep", cfg_.embed_dim,
                                           cfg_.filter_widths, cfg_.filters_per_width,
                                           cfg_.pad_len);
  const std::size_t in_dim =
      cfg_.uses_cnn_intervals() ? cfg_.conv_feature_dim() : tfidf_.vocab.size();
  gru_ = encoder::bind_gru_stack(params_, in_dim, cfg_.resolved_hidden(), cfg_.gru_bias);
  score_ = &params_.get("s");
}

nlohmann::json Model::meta_json() const {
  nlohmann::json fit = nlohmann::json::object();
  if (cfg_.uses_tfidf_intervals() || cfg_.is_linear()) fit["tfidf"] = tfidf_.to_json();
  if (cfg_.uses_cnn_intervals()) fit["rep_vocab"] = rep_vocab_.to_json();
  if (cfg_.uses_om()) fit["om_vocab"] = om_vocab_.to_json();
  nlohmann::json meta;
  meta["config"] = cfg_.to_json();
  meta["fit"] = std::move(fit);
  return meta;
}

void Model::save(const std::string& path, const nlohmann::json& extra_meta) const {
  nlohmann::json meta = meta_json();
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) meta[it.key()] = it.value();
  nn::save_checkpoint(path, params_, meta);
}

Model Model::load(const std::string& checkpoint_path, nlohmann::json* meta_out) {
  Model m;
  const nlohmann::json meta = nn::load_checkpoint(checkpoint_path, m.params_);
  m.cfg_ = ModelConfig::from_json(meta.at("config"));
  const nlohmann::json& fit = meta.at("fit");
  if (fit.contains("tfidf")) m.tfidf_ = text::TfidfModel::from_json(fit.at("tfidf"));
  if (fit.contains("rep_vocab")) m.rep_vocab_ = text::Vocabulary::from_json(fit.at("rep_vocab"));
  if (fit.contains("om_vocab")) m.om_vocab_ = text::Vocabulary::from_json(fit.at("om_vocab"));
  m.bind_wiring();
  if (meta_out) *meta_out = meta;
  return m;
}

PreparedStream Model::prepare(const corpus::RepostStream& stream) const {
  PreparedStream ps;
  ps.id = stream.id;
  ps.label = stream.label;
  corpus::IntervalSequence seq = corpus::partition(stream, cfg_.interval_size);
  if (cfg_.uses_cnn_intervals() && seq.intervals.size() > cfg_.max_intervals)
    seq.intervals.resize(cfg_.max_intervals);
  ps.n_intervals = seq.intervals.size();

  if (cfg_.uses_tfidf_intervals()) {
    ps.tfidf_cols.reserve(seq.intervals.size());
    for (const corpus::Interval& iv : seq.intervals)
      ps.tfidf_cols.push_back(text::tfidf_vector(merged_tokens(iv), tfidf_));
  }
  if (cfg_.uses_cnn_intervals()) {
    ps.interval_ids.reserve(seq.intervals.size());
    for (const corpus::Interval& iv : seq.intervals)
      ps.interval_ids.push_back(text::ids_for_tokens(merged_tokens(iv), rep_vocab_, cfg_.pad_len));
  }
  if (cfg_.uses_om())
    ps.om_ids = text::ids_for_tokens(text::tokenize(stream.original_text), om_vocab_, cfg_.pad_len);
  if (cfg_.is_linear()) {
    ps.interval_tokens.reserve(seq.intervals.size());
    for (const corpus::Interval& iv : seq.intervals)
      ps.interval_tokens.push_back(merged_tokens(iv));
  }
  return ps;
}

std::vector<PreparedStream> Model::prepare_all(
    const std::vector<corpus::RepostStream>& streams) const {
  std::vector<PreparedStream> out;
  out.reserve(streams.size());
  for (const corpus::RepostStream& s : streams) out.push_back(prepare(s));
  return out;
}

Model::StreamForward Model::stream_loss(nn::Tape& tape, const PreparedStream& ps) const {
  StreamForward fwd;
  if (cfg_.is_linear()) {
    const nn::Var x = tape.leaf(linear_input(ps, ps.n_intervals));
    const nn::Var w = tape.param(*lin_w_);
    const nn::Var b = tape.param(*lin_b_);
    const nn::Var score = tape.add(tape.dot(w, x), b);
    fwd.loss = tape.neg(ps.label == 1 ? tape.log_sigmoid(score)
                                      : tape.log_sigmoid(tape.neg(score)));
    fwd.curve.p = {objective::prob_from_score(score.value()[0])};
    fwd.point.beta = 1.0;
    return fwd;
  }

  std::vector<nn::Var> xs;
  xs.reserve(ps.n_intervals);
  nn::Var rep_emb;
  if (cfg_.uses_cnn_intervals()) rep_emb = tape.param(*rep_conv_.embedding);
  for (std::size_t i = 0; i < ps.n_intervals; ++i) {
    if (cfg_.uses_cnn_intervals())
      xs.push_back(rep_conv_.apply(tape, rep_emb, ps.interval_ids[i]));
    else
      xs.push_back(tape.leaf(ps.tfidf_cols[i]));
  }

  std::optional<nn::Var> om;
  if (cfg_.uses_om()) {
    const nn::Var om_emb = tape.param(*om_conv_.embedding);
    om = om_conv_.apply(tape, om_emb, ps.om_ids);
  }

  const std::vector<nn::Var> states = encoder::encode(tape, xs, gru_, om);
  const nn::Var s = tape.param(*score_);
  std::vector<nn::Var> scores;
  scores.reserve(states.size());
  for (const nn::Var& h : states) scores.push_back(tape.dot(h, s));

  objective::ObjectiveConfig ocfg;
  ocfg.alpha = cfg_.alpha;
  ocfg.lambda0 = cfg_.lambda0;
  ocfg.lambda1 = cfg_.lambda1;
  ocfg.variant = cfg_.objective_variant();
  fwd.loss = objective::build_loss(tape, scores, ps.label, ocfg, &fwd.point, &fwd.curve);
  return fwd;
}

nn::Var Model::batch_loss(nn::Tape& tape, std::span<const PreparedStream* const> batch) const {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  std::vector<nn::Var> losses;
  losses.reserve(batch.size());
  for (const PreparedStream* ps : batch) losses.push_back(stream_loss(tape, *ps).loss);
  return tape.mean(tape.concat(losses));
}

double Model::stream_loss_value(const PreparedStream& ps) const {
  if (cfg_.is_linear()) {
    const double p = final_prob(ps, ps.n_intervals);
    return -std::log(ps.label == 1 ? p : 1.0 - p);
  }
  objective::ObjectiveConfig ocfg;
  ocfg.alpha = cfg_.alpha;
  ocfg.lambda0 = cfg_.lambda0;
  ocfg.lambda1 = cfg_.lambda1;
  ocfg.variant = cfg_.objective_variant();
  return objective::o_ced(prob_curve(ps), ps.label, ocfg);
}

nn::Tensor Model::linear_input(const PreparedStream& ps, std::size_t visible_steps) const {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < visible_steps && i < ps.interval_tokens.size(); ++i)
    tokens.insert(tokens.end(), ps.interval_tokens[i].begin(), ps.interval_tokens[i].end());
  return text::tfidf_vector(tokens, tfidf_);
}

Model::StepState Model::begin(const PreparedStream& ps) const {
  StepState st;
  if (cfg_.is_linear())
    throw std::logic_error("Model::begin: the linear baseline has no streaming path");
  st.enc = encoder::initial_state(gru_);
  if (cfg_.uses_om()) {
    st.om_feature = om_conv_.apply_numeric(ps.om_ids);
    st.has_om = true;
  }
  return st;
}

double Model::step(StepState& state, const PreparedStream& ps) const {
  if (state.next >= ps.n_intervals) throw std::out_of_range("Model::step: stream exhausted");
  const std::size_t i = state.next++;
  const nn::Tensor x = cfg_.uses_cnn_intervals() ? rep_conv_.apply_numeric(ps.interval_ids[i])
                                                 : ps.tfidf_cols[i];
  const nn::Tensor h =
      encoder::encode_step(state.enc, x, gru_, state.has_om ? &state.om_feature : nullptr);
  const nn::Tensor& s = score_->value;
  double acc = 0.0;
  for (std::size_t j = 0; j < s.numel(); ++j) acc += h[j] * s[j];
  return objective::prob_from_score(acc);
}

objective::ProbCurve Model::prob_curve(const PreparedStream& ps, std::size_t max_steps) const {
  if (cfg_.is_linear()) {
    objective::ProbCurve c;
    c.p = {final_prob(ps, std::min(max_steps, ps.n_intervals))};
    return c;
  }
  StepState st = begin(ps);
  const std::size_t steps = std::min(max_steps, ps.n_intervals);
  objective::ProbCurve curve;
  curve.p.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) curve.p.push_back(step(st, ps));
  return curve;
}

double Model::final_prob(const PreparedStream& ps, std::size_t visible_steps) const {
  if (cfg_.is_linear()) {
    const nn::Tensor x = linear_input(ps, visible_steps);
    const nn::Tensor& w = lin_w_->value;
    double acc = lin_b_->value[0];
    for (std::size_t i = 0; i < w.numel(); ++i) acc += w[i] * x[i];
    return objective::prob_from_score(acc);
  }
  const objective::ProbCurve curve = prob_curve(ps, visible_steps);
  return curve.p.back();
}

}  // namespace ced::model
