#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasor/encoder.hpp"
#include "phasor/masking.hpp"
#include "phasor/numerics.hpp"

namespace phasor {

inline constexpr int kMaxIntensity = 5;

// --- synthetic corpus --------------------------------------------------------

struct GeneratorConfig {
  std::size_t n_reviews = 1200;
  std::size_t n_aspects = 6;
  std::size_t anchors_per_aspect = 2;
  std::size_t tokens_per_grade = 2;
  std::size_t n_fillers = 40;
  // Aspect segments per review; each review mentions an aspect at most once.
  std::size_t min_segments = 2;
  std::size_t max_segments = 4;
  // Probability that a segment continues with another sentence of the same
  // aspect, polarity and intensity.
  double continuation_prob = 0.3;
  double neutral_prob = 0.1;
  // Relative weights of intensities 1..5.
  std::array<double, kMaxIntensity> intensity_weights = {1, 1, 1, 1, 1};
  // Filler count per sentence ~ Binomial(max_fillers, filler_rate).
  std::size_t max_fillers = 12;
  double filler_rate = 0.5;
  std::vector<std::string> aspect_names;  // empty: built-in names

  void validate() const;
};

// Token vocabulary of the synthetic language. Layout: aspect anchors, then
// sentiment tokens by (polarity, grade), then fillers.
class Lexicon {
 public:
  explicit Lexicon(const GeneratorConfig& cfg);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t n_aspects() const { return aspect_names_.size(); }
  const std::string& aspect_name(int aspect) const;
  int aspect_id(std::string_view name) const;  // throws FormatError if unknown

  std::span<const int> anchors(int aspect) const { return anchors_.at(aspect); }
  std::span<const int> sentiment_tokens(Polarity p, int grade) const;
  std::span<const int> fillers() const { return fillers_; }

  // Aspect owning an anchor token, if any.
  std::optional<int> aspect_of(int token) const;
  bool is_sentiment(int token) const;
  bool is_filler(int token) const;
  // Rendered width in characters of a synthetic token.
  int token_chars(int token) const;
  int text_len(std::span<const int> toks) const;

 private:
  std::vector<std::string> aspect_names_;
  std::vector<std::vector<int>> anchors_;
  std::vector<std::vector<int>> sentiment_;  // index (polarity * 5 + grade - 1)
  std::vector<int> fillers_;
  std::map<int, int> anchor_aspect_;
  int sentiment_begin_ = 0;
  int filler_begin_ = 0;
  std::size_t vocab_size_ = 0;
};

struct SentenceTruth {
  SemanticLabel label;
  int intensity = 1;
  int filler_count = 0;

  bool operator==(const SentenceTruth&) const = default;
};

struct SyntheticReview {
  int id = 0;
  std::vector<TokenSequence> sentences;
  std::vector<SentenceTruth> truth;

  bool operator==(const SyntheticReview&) const = default;
};

std::vector<SyntheticReview> generate_corpus(const GeneratorConfig& cfg, const Lexicon& lex,
                                             const RngStream& rng);

void write_corpus_jsonl(std::span<const SyntheticReview> corpus, const Lexicon& lex,
                        std::ostream& out);
std::vector<SyntheticReview> read_corpus_jsonl(std::istream& in, const Lexicon& lex);

// --- TF-IDF --------------------------------------------------------------------

// Document = sentence. idf(t) = ln((1 + N) / (1 + df(t))) + 1, tf = raw count.
struct TfidfModel {
  std::size_t n_docs = 0;
  std::map<int, double> idf;
  std::map<int, double> keyword_score;  // max over documents of tf * idf

  double idf_of(int token) const;
  double score(int token, std::span<const int> doc) const;
  // Distinct tokens of doc ordered by score (desc), ties by token id.
  std::vector<int> top_k(std::span<const int> doc, std::size_t k) const;
};

TfidfModel tfidf_scores(std::span<const TokenSequence> docs);
std::vector<TokenSequence> all_sentences(std::span<const SyntheticReview> corpus);

// --- context extraction --------------------------------------------------------

struct ContextBlock {
  TokenSequence tokens;
  std::size_t anchor_position = 0;
  int window_sentences = 2;
  SemanticLabel label;
  int source_review = 0;
  int text_len = 0;
  int intensity = 0;  // intensity of the anchor sentence; 0 if unknown
  // Row of an external embedding table standing in for the tokens.
  std::optional<std::size_t> table_row;

  bool operator==(const ContextBlock&) const = default;
};

struct ExtractionConfig {
  std::size_t top_k = 5;
  std::size_t max_seq_len = kDefaultMaxSequenceLength;
};

// Window size from the anchor segment's token count: < 20 -> 4 sentences,
// 20..60 -> 3, > 60 -> 2.
int window_for_segment(std::size_t segment_tokens);

std::vector<ContextBlock> extract_context_blocks(const SyntheticReview& review, const Lexicon& lex,
                                                 const TfidfModel& tfidf,
                                                 const ExtractionConfig& cfg = {});

// --- triplets -------------------------------------------------------------------

enum class TripletStrategy : std::uint8_t { Standard = 0, MultiPositive = 1, HardMined = 2 };
std::string_view to_string(TripletStrategy s);
TripletStrategy parse_strategy(std::string_view s);

struct Triplet {
  ContextBlock query;
  ContextBlock positive;
  std::vector<ContextBlock> negatives;
  TripletStrategy strategy = TripletStrategy::Standard;

  bool operator==(const Triplet&) const = default;
};

struct TripletConfig {
  std::array<double, 3> mix = {0.70, 0.15, 0.15};  // Standard, MultiPositive, HardMined
  std::size_t n_negatives = 1;
  std::size_t max_seq_len = kDefaultMaxSequenceLength;

  void validate() const;
};

struct TripletWarning {
  std::size_t query = 0;
  TripletStrategy strategy = TripletStrategy::Standard;
  std::string reason;
};

struct TripletSet {
  std::vector<Triplet> triplets;
  std::vector<TripletWarning> warnings;
};

// Every block is used once as a query. Strategy counts follow the mix by
// largest-remainder apportionment; an infeasible strategy falls back to
// Standard with a warning, and a query with no opposite-polarity block in
// its aspect is skipped with a warning.
TripletSet generate_triplets(std::span<const ContextBlock> blocks, const TripletConfig& cfg,
                             const RngStream& rng);

double jaccard(std::span<const int> a, std::span<const int> b);

// Throws DataIntegrityError if the triplet breaks the same-aspect or
// polarity relations.
void validate_triplet(const Triplet& t);

// Apportion `n` items over `weights` by largest remainder.
std::vector<std::size_t> apportion(std::size_t n, std::span<const double> weights);

// Concatenates blocks sharing one label, truncated to max_len from the front.
ContextBlock fuse_blocks(std::span<const ContextBlock> parts, std::size_t max_len);

void write_blocks_jsonl(std::span<const ContextBlock> blocks, const Lexicon& lex, std::ostream& out);
std::vector<ContextBlock> read_blocks_jsonl(std::istream& in, const Lexicon& lex);
void write_triplets_jsonl(std::span<const Triplet> triplets, const Lexicon& lex, std::ostream& out);
std::vector<Triplet> read_triplets_jsonl(std::istream& in, const Lexicon& lex);

}  // namespace phasor
