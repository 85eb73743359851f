#include "ced/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ced/rng.hpp"

namespace ced::corpus {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(const std::string& source, std::size_t line, const std::string& msg) {
  throw std::runtime_error(source + ": " + msg + " at line " + std::to_string(line));
}

}  // namespace

IngestResult ingest_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_jsonl: cannot open '" + path + "'");
  return ingest_jsonl(in, path);
}

IngestResult ingest_jsonl(std::istream& in, const std::string& source_name) {
  IngestResult result;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      line_error(source_name, lineno, std::string("malformed JSON (") + e.what() + ")");
    }
    if (!obj.is_object()) line_error(source_name, lineno, "expected a JSON object");
    if (!obj.contains("id") || !obj["id"].is_string())
      line_error(source_name, lineno, "missing or non-string 'id'");
    if (!obj.contains("label") || !obj["label"].is_number_integer())
      line_error(source_name, lineno, "invalid label");
    if (!obj.contains("text") || !obj["text"].is_string())
      line_error(source_name, lineno, "missing or non-string 'text'");
    if (!obj.contains("reposts") || !obj["reposts"].is_array())
      line_error(source_name, lineno, "missing or non-array 'reposts'");

    RepostStream stream;
    stream.id = obj["id"].get<std::string>();
    const auto label = obj["label"].get<std::int64_t>();
    if (label != 0 && label != 1) line_error(source_name, lineno, "invalid label");
    stream.label = static_cast<int>(label);
    stream.original_text = obj["text"].get<std::string>();
    if (!seen_ids.insert(stream.id).second)
      line_error(source_name, lineno, "duplicate stream id '" + stream.id + "'");

    for (const auto& r : obj["reposts"]) {
      if (!r.is_object() || !r.contains("t") || !r["t"].is_number_integer() ||
          !r.contains("text") || !r["text"].is_string())
        line_error(source_name, lineno, "bad repost entry (need {t: int, text: string})");
      Repost rp;
      rp.t = r["t"].get<std::int64_t>();
      if (rp.t < 0) line_error(source_name, lineno, "negative repost timestamp");
      rp.text = r["text"].get<std::string>();
      stream.reposts.push_back(std::move(rp));
    }
    if (stream.reposts.empty()) {
      ++result.skipped_no_reposts;
      continue;
    }
    std::stable_sort(stream.reposts.begin(), stream.reposts.end(),
                     [](const Repost& a, const Repost& b) { return a.t < b.t; });
    result.streams.push_back(std::move(stream));
  }
  return result;
}

void write_jsonl(const std::string& path, const std::vector<RepostStream>& streams) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_jsonl: cannot open '" + path + "' for writing");
  for (const RepostStream& s : streams) {
    json obj;
    obj["id"] = s.id;
    obj["label"] = s.label;
    obj["text"] = s.original_text;
    json reposts = json::array();
    for (const Repost& r : s.reposts) {
      json rj;
      rj["t"] = r.t;
      rj["text"] = r.text;
      reposts.push_back(std::move(rj));
    }
    obj["reposts"] = std::move(reposts);
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write_jsonl: write failed for '" + path + "'");
}

IntervalSequence partition(const RepostStream& stream, std::size_t n) {
  if (n < 1) throw std::invalid_argument("partition: interval size must be >= 1");
  if (stream.reposts.empty())
    throw std::invalid_argument("partition: stream '" + stream.id + "' has no reposts");
  IntervalSequence seq;
  seq.stream_id = stream.id;
  seq.label = stream.label;
  seq.interval_size = n;
  const std::size_t total = stream.reposts.size();
  seq.intervals.reserve((total + n - 1) / n);
  for (std::size_t start = 0; start < total; start += n) {
    const std::size_t end = std::min(start + n, total);
    seq.intervals.emplace_back(stream.reposts.begin() + static_cast<std::ptrdiff_t>(start),
                               stream.reposts.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return seq;
}

DatasetSplit split_dataset(const std::vector<RepostStream>& streams, std::uint64_t seed,
                           double val_frac, double train_test_ratio) {
  if (val_frac <= 0.0 || val_frac >= 1.0)
    throw std::invalid_argument("split_dataset: val_frac must be in (0,1)");
  if (train_test_ratio <= 0.0)
    throw std::invalid_argument("split_dataset: train_test_ratio must be positive");
  const std::size_t n = streams.size();
  if (n < 4) throw std::invalid_argument("split_dataset: need at least 4 streams");

  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  const std::size_t rest = n - n_val;
  const auto n_test =
      static_cast<std::size_t>(std::floor(static_cast<double>(rest) / (1.0 + train_test_ratio)));
  const std::size_t n_train = rest - n_test;
  if (n_val < 1 || n_test < 1 || n_train < 1)
    throw std::invalid_argument("split_dataset: too few streams to give each split >= 1 item");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Rng r(seed);
  r.shuffle(order);

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = streams[order[i]].id;
    if (i < n_val)
      split.validation.push_back(id);
    else if (i < n_val + n_train)
      split.train.push_back(id);
    else
      split.test.push_back(id);
  }
  return split;
}

namespace {

void check_probs(const StanceProbs& p, const char* what) {
  if (p.support < 0.0 || p.doubt < 0.0 || p.neutral < 0.0)
    throw std::invalid_argument(std::string("generate_synthetic: negative probability in ") +
                                what);
  const double sum = p.support + p.doubt + p.neutral;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument(std::string("generate_synthetic: probabilities in ") + what +
                                " sum to " + std::to_string(sum) + ", expected 1");
}

std::string stance_token(rng::Rng& r, const GeneratorParams& p, const StanceProbs& probs) {
  const double u = r.next_unit();
  if (u < probs.support) return "support" + std::to_string(r.below(p.support_words));
  if (u < probs.support + probs.doubt) return "doubt" + std::to_string(r.below(p.doubt_words));
  return "neutral" + std::to_string(r.below(p.neutral_words));
}

}  // namespace

std::vector<RepostStream> generate_synthetic(std::size_t n_streams, std::uint64_t seed,
                                             const GeneratorParams& params, SynthStats* stats) {
  if (n_streams < 2) throw std::invalid_argument("generate_synthetic: need at least 2 streams");
  if (params.tau < 0.0 || params.tau > 1.0)
    throw std::invalid_argument("generate_synthetic: tau must be in [0,1]");
  if (params.support_words == 0 || params.doubt_words == 0 || params.neutral_words == 0 ||
      params.claim_words == 0)
    throw std::invalid_argument("generate_synthetic: all vocabulary sizes must be positive");
  check_probs(params.pre, "pre");
  check_probs(params.post_rumor, "post_rumor");
  check_probs(params.post_nonrumor, "post_nonrumor");

  rng::Rng r(seed);
  std::vector<RepostStream> streams;
  streams.reserve(n_streams);
  double cp_frac_sum = 0.0;
  std::size_t repost_sum = 0;
  std::size_t rumors = 0;

  for (std::size_t k = 0; k < n_streams; ++k) {
    RepostStream s;
    {
      std::ostringstream id;
      id << "syn" << std::setw(6) << std::setfill('0') << k;
      s.id = id.str();
    }
    s.label = r.bernoulli(0.5) ? 1 : 0;
    rumors += static_cast<std::size_t>(s.label);

    for (std::size_t i = 0; i < params.claim_tokens; ++i) {
      if (i) s.original_text += ' ';
      s.original_text += "claim" + std::to_string(r.below(params.claim_words));
    }

    const std::size_t len = std::max(params.min_reposts, r.poisson(params.mean_reposts));
    const auto changepoint = static_cast<std::size_t>(
        std::llround(params.tau * static_cast<double>(len)));
    cp_frac_sum += static_cast<double>(changepoint) / static_cast<double>(len);
    repost_sum += len;

    std::int64_t t = static_cast<std::int64_t>(r.below(1000));
    for (std::size_t i = 0; i < len; ++i) {
      t += 1 + static_cast<std::int64_t>(r.below(120));
      Repost rp;
      rp.t = t;
      if (!r.bernoulli(params.empty_repost_prob)) {
        const StanceProbs& probs =
            i < changepoint ? params.pre
                            : (s.label == 1 ? params.post_rumor : params.post_nonrumor);
        const std::size_t ntok = 1 + r.poisson(std::max(0.0, params.mean_tokens_per_repost - 1));
        for (std::size_t j = 0; j < ntok; ++j) {
          if (j) rp.text += ' ';
          rp.text += stance_token(r, params, probs);
        }
      }
      s.reposts.push_back(std::move(rp));
    }
    streams.push_back(std::move(s));
  }

  if (stats) {
    stats->mean_changepoint_fraction = cp_frac_sum / static_cast<double>(n_streams);
    stats->mean_reposts = static_cast<double>(repost_sum) / static_cast<double>(n_streams);
    stats->rumor_count = rumors;
  }
  return streams;
}

}  // namespace ced::corpus
