#include "ced/textfeat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace ced::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    const bool token_char =
        (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
        ch >= 0x80;
    if (token_char) {
      cur += (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : raw;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json idx = nlohmann::json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) idx[tokens_[i]] = i;
  j["index"] = std::move(idx);
  j["doc_freq"] = doc_freq_;
  return j;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  const auto& idx = j.at("index");
  v.tokens_.resize(idx.size());
  for (auto it = idx.begin(); it != idx.end(); ++it) {
    const auto i = it.value().get<std::size_t>();
    if (i >= v.tokens_.size()) throw std::runtime_error("Vocabulary: non-dense index map");
    v.tokens_[i] = it.key();
    v.index_[it.key()] = static_cast<int>(i);
  }
  v.doc_freq_ = j.at("doc_freq").get<std::vector<std::size_t>>();
  if (v.doc_freq_.size() != v.tokens_.size())
    throw std::runtime_error("Vocabulary: doc_freq length mismatch");
  return v;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus, std::size_t v) {
  if (v < 3) throw std::invalid_argument("build_vocabulary: vocabulary size must be >= 3");
  if (corpus.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");

  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::set<std::string> uniq(doc.begin(), doc.end());
    for (const auto& tok : uniq) ++df[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > v - 2) ranked.resize(v - 2);

  Vocabulary vocab;
  vocab.tokens_ = {"<pad>", "<unk>"};
  vocab.doc_freq_ = {0, 0};
  for (const auto& [tok, freq] : ranked) {
    vocab.index_[tok] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(tok);
    vocab.doc_freq_.push_back(freq);
  }
  return vocab;
}

nlohmann::json TfidfModel::to_json() const {
  nlohmann::json j;
  j["vocab"] = vocab.to_json();
  j["idf"] = idf;
  return j;
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  TfidfModel m;
  m.vocab = Vocabulary::from_json(j.at("vocab"));
  m.idf = j.at("idf").get<std::vector<double>>();
  if (m.idf.size() != m.vocab.size()) throw std::runtime_error("TfidfModel: idf length mismatch");
  return m;
}

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& training_documents,
                     std::size_t v) {
  TfidfModel model;
  model.vocab = build_vocabulary(training_documents, v);
  const double d_count = static_cast<double>(training_documents.size());
  model.idf.assign(model.vocab.size(), 0.0);
  // df is recounted against the final vocabulary; documents = intervals
  std::vector<std::size_t> df(model.vocab.size(), 0);
  for (const auto& doc : training_documents) {
    std::set<int> present;
    for (const auto& tok : doc) {
      const int idx = model.vocab.lookup(tok);
      if (idx >= 2) present.insert(idx);
    }
    for (int idx : present) ++df[static_cast<std::size_t>(idx)];
  }
  for (std::size_t i = 2; i < model.vocab.size(); ++i)
    model.idf[i] = std::log((1.0 + d_count) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  return model;
}

nn::Tensor tfidf_vector(const std::vector<std::string>& tokens, const TfidfModel& model) {
  nn::Tensor out({model.vocab.size()});
  for (const auto& tok : tokens) {
    const int idx = model.vocab.lookup(tok);
    if (idx >= 2) out[static_cast<std::size_t>(idx)] += 1.0;  // raw tf
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] *= model.idf[i];
    sq += out[i] * out[i];
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= inv;
  }
  return out;
}

std::vector<int> ids_for_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                std::size_t pad_len) {
  std::vector<int> ids(pad_len, Vocabulary::kPad);
  const std::size_t n = std::min(tokens.size(), pad_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.lookup(tokens[i]);
  return ids;
}

std::size_t ConvFeaturizer::max_width() const {
  std::size_t w = 0;
  for (const Filter& f : filters) w = std::max(w, f.width);
  return w;
}

nn::Var ConvFeaturizer::apply(nn::Tape& tape, nn::Var embedding_var,
                              std::span<const int> ids) const {
  if (ids.size() != pad_len)
    throw std::invalid_argument("ConvFeaturizer: expected " + std::to_string(pad_len) +
                                " token ids, got " + std::to_string(ids.size()));
  if (pad_len < max_width())
    throw std::invalid_argument("ConvFeaturizer: pad length below widest filter");
  const nn::Var m = tape.embed(embedding_var, ids);
  std::vector<nn::Var> feats;
  feats.reserve(filters.size());
  for (const Filter& f : filters) {
    const nn::Var g = tape.param(*f.g);
    const nn::Var b = tape.param(*f.b);
    feats.push_back(tape.conv_relu_max(m, g, b));
  }
  return tape.concat(feats);
}

nn::Tensor ConvFeaturizer::apply_numeric(std::span<const int> ids) const {
  if (ids.size() != pad_len)
    throw std::invalid_argument("ConvFeaturizer: expected " + std::to_string(pad_len) +
                                " token ids, got " + std::to_string(ids.size()));
  if (pad_len < max_width())
    throw std::invalid_argument("ConvFeaturizer: pad length below widest filter");
  const nn::Tensor& table = embedding->value;
  const std::size_t d = embed_dim, len = ids.size();
  nn::Tensor m({d, len});
  for (std::size_t j = 0; j < len; ++j) {
    const auto id = static_cast<std::size_t>(ids[j]);
    for (std::size_t r = 0; r < d; ++r) m.at2(r, j) = table.at2(id, r);
  }
  nn::Tensor out({filters.size()});
  for (std::size_t fi = 0; fi < filters.size(); ++fi) {
    const Filter& f = filters[fi];
    const std::size_t h = f.width;
    double best = 0.0;
    for (std::size_t i = 0; i + h <= len; ++i) {
      double acc = f.b->value[0];
      for (std::size_t r = 0; r < d; ++r) {
        const double* mrow = m.data() + r * len + i;
        const double* grow = f.g->value.data() + r * h;
        for (std::size_t c = 0; c < h; ++c) acc += grow[c] * mrow[c];
      }
      if (i == 0 || acc > best) best = acc;
    }
    out[fi] = best > 0.0 ? best : 0.0;
  }
  return out;
}

namespace {

std::string filter_name(const std::string& prefix, std::size_t width, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), ".conv%zu.%02zu", width, k);
  return prefix + buf;
}

}  // namespace

ConvFeaturizer make_conv_featurizer(nn::ParamStore& store, const std::string& prefix,
                                    std::size_t vocab_size, std::size_t embed_dim,
                                    std::span<const std::size_t> widths,
                                    std::size_t filters_per_width, std::size_t pad_len,
                                    rng::Rng& rng) {
  ConvFeaturizer fz;
  fz.embed_dim = embed_dim;
  fz.pad_len = pad_len;

  nn::Tensor emb({vocab_size, embed_dim});
  for (std::size_t i = 0; i < emb.numel(); ++i) emb[i] = rng.uniform(-0.1, 0.1);
  fz.embedding = &store.create(prefix + ".embedding", std::move(emb));

  for (std::size_t width : widths) {
    const double limit = std::sqrt(6.0 / (static_cast<double>(embed_dim * width) + 1.0));
    for (std::size_t k = 0; k < filters_per_width; ++k) {
      nn::Tensor g({embed_dim, width});
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] = rng.uniform(-limit, limit);
      const std::string base = filter_name(prefix, width, k);
      ConvFeaturizer::Filter f;
      f.g = &store.create(base + ".G", std::move(g));
      f.b = &store.create(base + ".b", nn::Tensor({1}));
      f.width = width;
      fz.filters.push_back(f);
    }
  }
  if (pad_len < fz.max_width())
    throw std::invalid_argument("make_conv_featurizer: pad length below widest filter");
  return fz;
}

ConvFeaturizer bind_conv_featurizer(nn::ParamStore& store, const std::string& prefix,
                                    std::size_t embed_dim, std::span<const std::size_t> widths,
                                    std::size_t filters_per_width, std::size_t pad_len) {
  ConvFeaturizer fz;
  fz.embed_dim = embed_dim;
  fz.pad_len = pad_len;
  fz.embedding = &store.get(prefix + ".embedding");
  for (std::size_t width : widths)
    for (std::size_t k = 0; k < filters_per_width; ++k) {
      const std::string base = filter_name(prefix, width, k);
      ConvFeaturizer::Filter f;
      f.g = &store.get(base + ".G");
      f.b = &store.get(base + ".b");
      f.width = width;
      fz.filters.push_back(f);
    }
  return fz;
}

}  // namespace ced::text
