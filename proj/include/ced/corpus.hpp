#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ced::corpus {

struct Repost {
  std::string text;  // may be empty; many reposts carry no comment
  std::int64_t t = 0;
};

// One original message, its label (1 = rumor) and its time-ordered reposts.
struct RepostStream {
  std::string id;
  std::string original_text;
  int label = 0;
  std::vector<Repost> reposts;  // sorted by t, ties keep input order
};

using Interval = std::vector<Repost>;

// The repost list cut into consecutive groups of at most `interval_size`
// reposts; every interval except possibly the last is full.
struct IntervalSequence {
  std::string stream_id;
  int label = 0;
  std::size_t interval_size = 0;
  std::vector<Interval> intervals;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct IngestResult {
  std::vector<RepostStream> streams;   // file order
  std::size_t skipped_no_reposts = 0;  // streams dropped for having zero reposts
};

// One JSON object per line: {"id": str, "label": 0|1, "text": str,
// "reposts": [{"t": int, "text": str}, ...]}. Reposts are sorted by t
// (stable); malformed lines, bad labels and duplicate ids raise with the
// line number.
IngestResult ingest_jsonl(const std::string& path);
IngestResult ingest_jsonl(std::istream& in, const std::string& source_name);

void write_jsonl(const std::string& path, const std::vector<RepostStream>& streams);

IntervalSequence partition(const RepostStream& stream, std::size_t n);

// Shuffles ids with the seed, takes round(val_frac*n) for validation, then
// splits the rest train:test by `train_test_ratio` (test gets the floor).
DatasetSplit split_dataset(const std::vector<RepostStream>& streams, std::uint64_t seed,
                           double val_frac = 0.1, double train_test_ratio = 3.0);

struct StanceProbs {
  double support = 0.0;
  double doubt = 0.0;
  double neutral = 0.0;
};

// Synthetic stream generator. Labels are Bernoulli(0.5). Before a stream's
// changepoint (at fraction tau of its reposts) both classes emit stance
// tokens from the same `pre` mixture; after it, rumors draw from
// `post_rumor` and non-rumors from `post_nonrumor`, so the classes only
// become separable once the changepoint has passed. Original texts are
// label-independent claim tokens.
struct GeneratorParams {
  std::size_t support_words = 8;
  std::size_t doubt_words = 8;
  std::size_t neutral_words = 16;
  std::size_t claim_words = 12;
  double mean_reposts = 80.0;
  std::size_t min_reposts = 3;
  double tau = 0.3;  // changepoint fraction in [0,1]
  StanceProbs pre = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  StanceProbs post_rumor = {0.1, 0.7, 0.2};
  StanceProbs post_nonrumor = {0.7, 0.1, 0.2};
  double mean_tokens_per_repost = 4.0;
  double empty_repost_prob = 0.1;
  std::size_t claim_tokens = 6;
};

struct SynthStats {
  double mean_changepoint_fraction = 0.0;
  double mean_reposts = 0.0;
  std::size_t rumor_count = 0;
};

std::vector<RepostStream> generate_synthetic(std::size_t n_streams, std::uint64_t seed,
                                             const GeneratorParams& params,
                                             SynthStats* stats = nullptr);

}  // namespace ced::corpus
