#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ced/corpus.hpp"
#include "ced/rng.hpp"
#include "ced/tape.hpp"

namespace ced::text {

// Lowercased, whitespace/punctuation-separated tokens. ASCII letters are
// folded to lowercase; multi-byte UTF-8 sequences pass through opaque.
std::vector<std::string> tokenize(std::string_view text);

// Token -> dense index map with reserved PAD (0) and UNK (1) slots.
// Selection is by document frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary() = default;

  std::size_t size() const { return tokens_.size(); }
  int lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }
  const std::string& token(std::size_t idx) const { return tokens_.at(idx); }
  std::size_t doc_freq(std::size_t idx) const { return doc_freq_.at(idx); }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                                     std::size_t v);

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;     // idx -> token; [0]="<pad>", [1]="<unk>"
  std::vector<std::size_t> doc_freq_;   // aligned with tokens_; 0 for pad/unk
};

// Keeps the top (v-2) tokens of the corpus by document frequency; one entry
// of `corpus` is one document.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus, std::size_t v);

// Vocabulary plus smoothed idf weights fitted on training documents
// (documents are intervals here): idf = ln((1+D)/(1+df)) + 1.
struct TfidfModel {
  Vocabulary vocab;
  std::vector<double> idf;  // length vocab.size(); 0 for pad/unk

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);
};

TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& training_documents,
                     std::size_t v);

// Raw term counts weighted by idf, then L2-normalized; an interval with no
// in-vocabulary tokens stays the zero vector.
nn::Tensor tfidf_vector(const std::vector<std::string>& tokens, const TfidfModel& model);

// Maps tokens to ids (UNK for out-of-vocabulary) padded/truncated to
// exactly pad_len entries.
std::vector<int> ids_for_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                std::size_t pad_len);

// Convolutional text featurizer: per-filter width-h convolution over the
// embedded token matrix, relu, then max over positions. Output length is the
// filter count. Parameters live in a ParamStore; this struct only wires them.
struct ConvFeaturizer {
  struct Filter {
    nn::Parameter* g = nullptr;  // [d, h]
    nn::Parameter* b = nullptr;  // [1]
    std::size_t width = 0;
  };

  nn::Parameter* embedding = nullptr;  // [V, d]
  std::vector<Filter> filters;
  std::size_t embed_dim = 0;
  std::size_t pad_len = 0;

  std::size_t feature_dim() const { return filters.size(); }
  std::size_t max_width() const;

  // ids.size() must equal pad_len and be >= the widest filter.
  nn::Var apply(nn::Tape& tape, nn::Var embedding_var, std::span<const int> ids) const;
  nn::Tensor apply_numeric(std::span<const int> ids) const;
};

// Creates and initializes conv featurizer parameters under `prefix` (e.g.
// "cnn.om"): embeddings uniform(-0.1, 0.1), filter weights Glorot-style
// scaled uniform, biases zero.
ConvFeaturizer make_conv_featurizer(nn::ParamStore& store, const std::string& prefix,
                                    std::size_t vocab_size, std::size_t embed_dim,
                                    std::span<const std::size_t> widths,
                                    std::size_t filters_per_width, std::size_t pad_len,
                                    rng::Rng& rng);

// Rebinds an already-loaded ParamStore (e.g. from a checkpoint) to a
// featurizer wiring with the same layout.
ConvFeaturizer bind_conv_featurizer(nn::ParamStore& store, const std::string& prefix,
                                    std::size_t embed_dim, std::span<const std::size_t> widths,
                                    std::size_t filters_per_width, std::size_t pad_len);

}  // namespace ced::text
