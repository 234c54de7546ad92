#include "phasor/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "phasor/error.hpp"

namespace phasor {

using nlohmann::json;

namespace {

const std::vector<std::string> kBuiltinAspects = {"taste",    "service", "price",
                                                  "ambience", "parking", "location"};

int sample_weighted(RngStream& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (r < weights[i]) return static_cast<int>(i);
    r -= weights[i];
  }
  return static_cast<int>(weights.size() - 1);
}

template <typename T>
const T& pick(RngStream& rng, std::span<const T> v) {
  return v[static_cast<std::size_t>(rng.uniform_int(v.size()))];
}

}  // namespace

// --- config & lexicon ------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (n_aspects == 0) throw ValidationError("generator: n_aspects must be >= 1");
  if (anchors_per_aspect == 0 || tokens_per_grade == 0) {
    throw ValidationError("generator: anchors_per_aspect and tokens_per_grade must be >= 1");
  }
  if (min_segments == 0 || min_segments > max_segments) {
    throw ValidationError("generator: need 1 <= min_segments <= max_segments");
  }
  if (max_segments > n_aspects) {
    throw ValidationError("generator: max_segments cannot exceed n_aspects");
  }
  for (double p : {continuation_prob, neutral_prob, filler_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("generator: probabilities must be in [0, 1]");
  }
  if (filler_rate > 0.0 && n_fillers == 0) {
    throw ValidationError("generator: filler_rate > 0 requires n_fillers >= 1");
  }
  double total = 0.0;
  for (double w : intensity_weights) {
    if (!(w >= 0.0)) throw ValidationError("generator: intensity weights must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("generator: intensity weights sum to zero");
  if (!aspect_names.empty() && aspect_names.size() != n_aspects) {
    throw ValidationError("generator: aspect_names must list n_aspects names");
  }
}

Lexicon::Lexicon(const GeneratorConfig& cfg) {
  cfg.validate();
  for (std::size_t a = 0; a < cfg.n_aspects; ++a) {
    if (!cfg.aspect_names.empty()) {
      aspect_names_.push_back(cfg.aspect_names[a]);
    } else if (a < kBuiltinAspects.size()) {
      aspect_names_.push_back(kBuiltinAspects[a]);
    } else {
      aspect_names_.push_back("aspect_" + std::to_string(a));
    }
  }
  if (std::set<std::string>(aspect_names_.begin(), aspect_names_.end()).size() !=
      aspect_names_.size()) {
    throw ValidationError("generator: aspect names must be unique");
  }
  int next = 0;
  anchors_.resize(cfg.n_aspects);
  for (std::size_t a = 0; a < cfg.n_aspects; ++a) {
    for (std::size_t k = 0; k < cfg.anchors_per_aspect; ++k) {
      anchors_[a].push_back(next);
      anchor_aspect_[next] = static_cast<int>(a);
      ++next;
    }
  }
  sentiment_begin_ = next;
  sentiment_.resize(kNumPolarities * kMaxIntensity);
  for (auto& grade : sentiment_) {
    for (std::size_t k = 0; k < cfg.tokens_per_grade; ++k) grade.push_back(next++);
  }
  filler_begin_ = next;
  for (std::size_t k = 0; k < cfg.n_fillers; ++k) fillers_.push_back(next++);
  vocab_size_ = static_cast<std::size_t>(next);
}

const std::string& Lexicon::aspect_name(int aspect) const { return aspect_names_.at(aspect); }

int Lexicon::aspect_id(std::string_view name) const {
  for (std::size_t a = 0; a < aspect_names_.size(); ++a) {
    if (aspect_names_[a] == name) return static_cast<int>(a);
  }
  throw FormatError("unknown aspect '" + std::string(name) + "'");
}

std::span<const int> Lexicon::sentiment_tokens(Polarity p, int grade) const {
  if (grade < 1 || grade > kMaxIntensity) throw ValidationError("intensity grade out of range");
  return sentiment_.at(static_cast<std::size_t>(p) * kMaxIntensity + (grade - 1));
}

std::optional<int> Lexicon::aspect_of(int token) const {
  auto it = anchor_aspect_.find(token);
  if (it == anchor_aspect_.end()) return std::nullopt;
  return it->second;
}

bool Lexicon::is_sentiment(int token) const {
  return token >= sentiment_begin_ && token < filler_begin_;
}

bool Lexicon::is_filler(int token) const {
  return token >= filler_begin_ && static_cast<std::size_t>(token) < vocab_size_;
}

int Lexicon::token_chars(int token) const {
  if (is_filler(token)) return 1 + (token * 7) % 5;
  return 2;
}

int Lexicon::text_len(std::span<const int> toks) const {
  int n = 0;
  for (int t : toks) n += token_chars(t);
  return n;
}

// --- corpus ----------------------------------------------------------------------

std::vector<SyntheticReview> generate_corpus(const GeneratorConfig& cfg, const Lexicon& lex,
                                             const RngStream& rng) {
  cfg.validate();
  if (lex.n_aspects() != cfg.n_aspects) throw ValidationError("generator: lexicon/config mismatch");
  std::vector<SyntheticReview> corpus;
  corpus.reserve(cfg.n_reviews);
  const std::array<double, 3> polarity_weights = {(1.0 - cfg.neutral_prob) / 2.0,
                                                  (1.0 - cfg.neutral_prob) / 2.0, cfg.neutral_prob};
  for (std::size_t r = 0; r < cfg.n_reviews; ++r) {
    RngStream local = rng.split(r);
    SyntheticReview review;
    review.id = static_cast<int>(r);
    std::vector<int> aspects(cfg.n_aspects);
    std::iota(aspects.begin(), aspects.end(), 0);
    local.shuffle(aspects);
    const std::size_t n_segments =
        cfg.min_segments + local.uniform_int(cfg.max_segments - cfg.min_segments + 1);
    for (std::size_t s = 0; s < n_segments; ++s) {
      SentenceTruth truth;
      truth.label.aspect = aspects[s];
      truth.label.polarity = static_cast<Polarity>(sample_weighted(local, polarity_weights));
      truth.intensity = 1 + sample_weighted(local, cfg.intensity_weights);
      do {
        TokenSequence sentence;
        sentence.push_back(pick(local, lex.anchors(truth.label.aspect)));
        const auto senti = lex.sentiment_tokens(truth.label.polarity, truth.intensity);
        for (int k = 0; k < truth.intensity; ++k) sentence.push_back(pick(local, senti));
        int fillers = 0;
        for (std::size_t k = 0; k < cfg.max_fillers; ++k) fillers += local.bernoulli(cfg.filler_rate);
        for (int k = 0; k < fillers; ++k) sentence.push_back(pick(local, lex.fillers()));
        SentenceTruth t = truth;
        t.filler_count = fillers;
        review.sentences.push_back(std::move(sentence));
        review.truth.push_back(t);
      } while (local.bernoulli(cfg.continuation_prob));
    }
    corpus.push_back(std::move(review));
  }
  return corpus;
}

void write_corpus_jsonl(std::span<const SyntheticReview> corpus, const Lexicon& lex,
                        std::ostream& out) {
  for (const auto& r : corpus) {
    json labels = json::array();
    for (const auto& t : r.truth) {
      labels.push_back({{"aspect", lex.aspect_name(t.label.aspect)},
                        {"polarity", std::string(to_string(t.label.polarity))},
                        {"intensity", t.intensity}});
    }
    json j{{"id", r.id}, {"sentences", r.sentences}, {"labels", labels}};
    out << j.dump() << '\n';
  }
}

std::vector<SyntheticReview> read_corpus_jsonl(std::istream& in, const Lexicon& lex) {
  std::vector<SyntheticReview> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      SyntheticReview r;
      r.id = j.at("id").get<int>();
      r.sentences = j.at("sentences").get<std::vector<TokenSequence>>();
      for (const auto& l : j.at("labels")) {
        SentenceTruth t;
        t.label.aspect = lex.aspect_id(l.at("aspect").get<std::string>());
        t.label.polarity = parse_polarity(l.at("polarity").get<std::string>());
        t.intensity = l.at("intensity").get<int>();
        r.truth.push_back(t);
      }
      if (r.truth.size() != r.sentences.size()) {
        throw FormatError("review " + std::to_string(r.id) + ": labels and sentences differ in count");
      }
      for (std::size_t s = 0; s < r.sentences.size(); ++s) {
        for (int tok : r.sentences[s]) {
          if (tok < 0 || static_cast<std::size_t>(tok) >= lex.vocab_size()) {
            throw FormatError("token id " + std::to_string(tok) + " outside vocabulary");
          }
          r.truth[s].filler_count += lex.is_filler(tok);
        }
      }
      corpus.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

// --- TF-IDF ----------------------------------------------------------------------

double TfidfModel::idf_of(int token) const {
  auto it = idf.find(token);
  if (it != idf.end()) return it->second;
  // Unseen token: df = 0.
  return std::log((1.0 + static_cast<double>(n_docs)) / 1.0) + 1.0;
}

double TfidfModel::score(int token, std::span<const int> doc) const {
  const auto tf = std::count(doc.begin(), doc.end(), token);
  return static_cast<double>(tf) * idf_of(token);
}

std::vector<int> TfidfModel::top_k(std::span<const int> doc, std::size_t k) const {
  std::vector<int> distinct(doc.begin(), doc.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::pair<double, int>> scored;
  for (int t : distinct) scored.emplace_back(score(t, doc), t);
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
  return out;
}

TfidfModel tfidf_scores(std::span<const TokenSequence> docs) {
  TfidfModel m;
  m.n_docs = docs.size();
  std::map<int, std::size_t> df;
  for (const auto& d : docs) {
    std::set<int> seen(d.begin(), d.end());
    for (int t : seen) ++df[t];
  }
  const double n = static_cast<double>(m.n_docs);
  for (const auto& [t, count] : df) {
    m.idf[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
  }
  for (const auto& d : docs) {
    std::map<int, int> tf;
    for (int t : d) ++tf[t];
    for (const auto& [t, c] : tf) {
      const double s = c * m.idf[t];
      auto [it, inserted] = m.keyword_score.try_emplace(t, s);
      if (!inserted) it->second = std::max(it->second, s);
    }
  }
  return m;
}

std::vector<TokenSequence> all_sentences(std::span<const SyntheticReview> corpus) {
  std::vector<TokenSequence> out;
  for (const auto& r : corpus) out.insert(out.end(), r.sentences.begin(), r.sentences.end());
  return out;
}

// --- extraction ------------------------------------------------------------------

int window_for_segment(std::size_t segment_tokens) {
  if (segment_tokens < 20) return 4;
  if (segment_tokens <= 60) return 3;
  return 2;
}

namespace {

// Aspect anchor of one sentence. Lexicon hits take precedence; among
// several, hits that are also top-k TF-IDF keywords win, ties by highest
// score and then by position.
std::optional<std::size_t> find_anchor(const TokenSequence& s, const Lexicon& lex,
                                       const TfidfModel& tfidf, std::size_t k) {
  const auto keywords = tfidf.top_k(s, k);
  std::optional<std::size_t> best;
  std::pair<int, double> best_key{-1, 0.0};
  for (std::size_t pos = 0; pos < s.size(); ++pos) {
    if (!lex.aspect_of(s[pos])) continue;
    const bool keyword = std::find(keywords.begin(), keywords.end(), s[pos]) != keywords.end();
    const std::pair<int, double> key{keyword ? 1 : 0, tfidf.score(s[pos], s)};
    if (!best || key > best_key) {
      best = pos;
      best_key = key;
    }
  }
  return best;
}

bool has_foreign_anchor(const TokenSequence& s, const Lexicon& lex, int aspect) {
  return std::any_of(s.begin(), s.end(), [&](int t) {
    auto a = lex.aspect_of(t);
    return a && *a != aspect;
  });
}

}  // namespace

std::vector<ContextBlock> extract_context_blocks(const SyntheticReview& review, const Lexicon& lex,
                                                 const TfidfModel& tfidf,
                                                 const ExtractionConfig& cfg) {
  if (lex.n_aspects() == 0) throw ValidationError("extract: empty lexicon");
  std::vector<ContextBlock> blocks;
  const std::size_t n = review.sentences.size();
  for (std::size_t s = 0; s < n; ++s) {
    const auto anchor = find_anchor(review.sentences[s], lex, tfidf, cfg.top_k);
    if (!anchor) continue;
    const int aspect = *lex.aspect_of(review.sentences[s][*anchor]);
    const int window = window_for_segment(review.sentences[s].size());
    const std::size_t before = static_cast<std::size_t>(window - 1) / 2;
    const std::size_t after = static_cast<std::size_t>(window - 1) - before;

    std::size_t first = s;
    while (first > 0 && s - first < before &&
           !has_foreign_anchor(review.sentences[first - 1], lex, aspect)) {
      --first;
    }
    std::size_t last = s;
    while (last + 1 < n && last - s < after &&
           !has_foreign_anchor(review.sentences[last + 1], lex, aspect)) {
      ++last;
    }

    ContextBlock b;
    b.window_sentences = window;
    b.source_review = review.id;
    b.label = {aspect, review.truth.at(s).label.polarity};
    b.intensity = review.truth.at(s).intensity;
    for (std::size_t k = first; k <= last; ++k) {
      if (k == s) b.anchor_position = b.tokens.size() + *anchor;
      for (int t : review.sentences[k]) {
        // The anchor sentence itself may carry a stray foreign anchor.
        auto a = lex.aspect_of(t);
        if (a && *a != aspect) continue;
        b.tokens.push_back(t);
      }
    }
    if (b.tokens.size() > cfg.max_seq_len) b.tokens.resize(cfg.max_seq_len);
    b.anchor_position = std::min(b.anchor_position, b.tokens.size() - 1);
    b.text_len = lex.text_len(b.tokens);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// --- triplets ----------------------------------------------------------------------

std::string_view to_string(TripletStrategy s) {
  switch (s) {
    case TripletStrategy::Standard:
      return "standard";
    case TripletStrategy::MultiPositive:
      return "multi_positive";
    case TripletStrategy::HardMined:
      return "hard_mined";
  }
  return "?";
}

TripletStrategy parse_strategy(std::string_view s) {
  if (s == "standard") return TripletStrategy::Standard;
  if (s == "multi_positive") return TripletStrategy::MultiPositive;
  if (s == "hard_mined") return TripletStrategy::HardMined;
  throw FormatError("unknown triplet strategy '" + std::string(s) + "'");
}

void TripletConfig::validate() const {
  double total = 0.0;
  for (double w : mix) {
    if (!(w >= 0.0)) throw ValidationError("triplets: strategy mix must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("triplets: strategy mix sums to zero");
  if (n_negatives == 0) throw ValidationError("triplets: n_negatives must be >= 1");
  if (max_seq_len == 0) throw ValidationError("triplets: max_seq_len must be >= 1");
}

double jaccard(std::span<const int> a, std::span<const int> b) {
  const std::set<int> sa(a.begin(), a.end());
  const std::set<int> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (int t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

void validate_triplet(const Triplet& t) {
  const SemanticLabel& q = t.query.label;
  if (t.positive.label != q) {
    throw DataIntegrityError("triplet positive does not share the query's aspect and polarity");
  }
  if (t.negatives.empty()) throw DataIntegrityError("triplet has no negative");
  for (const auto& n : t.negatives) {
    if (n.label.aspect != q.aspect) throw DataIntegrityError("triplet negative has a foreign aspect");
    if (n.label.polarity == q.polarity) throw DataIntegrityError("triplet negative shares polarity");
  }
  auto check_window = [](const ContextBlock& b) {
    if (b.window_sentences < 2 || b.window_sentences > 4) {
      throw DataIntegrityError("block window outside {2,3,4}");
    }
  };
  check_window(t.query);
  check_window(t.positive);
  for (const auto& n : t.negatives) check_window(n);
}

std::vector<std::size_t> apportion(std::size_t n, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(n) * weights[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[rem[k % rem.size()].second];
  return counts;
}

ContextBlock fuse_blocks(std::span<const ContextBlock> parts, std::size_t max_len) {
  if (parts.empty()) throw ValidationError("fuse_blocks: nothing to fuse");
  ContextBlock f = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].label != f.label) throw DataIntegrityError("fuse_blocks: mixed labels");
    f.tokens.insert(f.tokens.end(), parts[i].tokens.begin(), parts[i].tokens.end());
    f.window_sentences = std::max(f.window_sentences, parts[i].window_sentences);
    f.text_len += parts[i].text_len;
  }
  if (f.tokens.size() > max_len) f.tokens.resize(max_len);
  return f;
}

TripletSet generate_triplets(std::span<const ContextBlock> blocks, const TripletConfig& cfg,
                             const RngStream& rng) {
  cfg.validate();
  RngStream local = rng.split(0x7472);
  // Index blocks by label.
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    by_label[{blocks[i].label.aspect, static_cast<int>(blocks[i].label.polarity)}].push_back(i);
  }
  auto same_label_others = [&](std::size_t q) {
    std::vector<std::size_t> out;
    for (std::size_t j : by_label[{blocks[q].label.aspect, static_cast<int>(blocks[q].label.polarity)}]) {
      if (j != q) out.push_back(j);
    }
    return out;
  };
  auto opposite = [&](std::size_t q) {
    std::vector<std::size_t> out;
    for (int p = 0; p < static_cast<int>(kNumPolarities); ++p) {
      if (p == static_cast<int>(blocks[q].label.polarity)) continue;
      auto it = by_label.find({blocks[q].label.aspect, p});
      if (it != by_label.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto sample_distinct = [&](std::vector<std::size_t> pool, std::size_t k) {
    local.shuffle(pool);
    pool.resize(std::min(k, pool.size()));
    return pool;
  };

  const auto counts = apportion(blocks.size(), cfg.mix);
  std::vector<TripletStrategy> plan;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    plan.insert(plan.end(), counts[s], static_cast<TripletStrategy>(s));
  }
  local.shuffle(plan);

  TripletSet out;
  for (std::size_t q = 0; q < blocks.size(); ++q) {
    const auto negs_pool = opposite(q);
    if (negs_pool.empty()) {
      out.warnings.push_back({q, plan[q], "no opposite-polarity block in aspect; query skipped"});
      continue;
    }
    const auto others = same_label_others(q);
    TripletStrategy strategy = plan[q];
    if (strategy == TripletStrategy::MultiPositive && others.size() < 2) {
      out.warnings.push_back({q, strategy, "fewer than two same-label blocks; using standard"});
      strategy = TripletStrategy::Standard;
    }
    if (strategy == TripletStrategy::HardMined && others.empty()) {
      out.warnings.push_back({q, strategy, "no same-label candidate; using standard"});
      strategy = TripletStrategy::Standard;
    }

    Triplet t;
    t.query = blocks[q];
    t.strategy = strategy;
    switch (strategy) {
      case TripletStrategy::Standard: {
        t.positive = others.empty() ? blocks[q] : blocks[pick(local, std::span<const std::size_t>(others))];
        for (std::size_t j : sample_distinct(negs_pool, cfg.n_negatives)) t.negatives.push_back(blocks[j]);
        break;
      }
      case TripletStrategy::HardMined: {
        std::size_t best = others[0];
        double best_j = 2.0;
        for (std::size_t j : others) {
          const double s = jaccard(blocks[q].tokens, blocks[j].tokens);
          if (s < best_j) {
            best_j = s;
            best = j;
          }
        }
        t.positive = blocks[best];
        for (std::size_t j : sample_distinct(negs_pool, cfg.n_negatives)) t.negatives.push_back(blocks[j]);
        break;
      }
      case TripletStrategy::MultiPositive: {
        const std::size_t k = 2 + local.uniform_int(2);
        std::vector<ContextBlock> parts;
        for (std::size_t j : sample_distinct(others, k)) parts.push_back(blocks[j]);
        t.positive = fuse_blocks(parts, cfg.max_seq_len);
        // Symmetric fused negative drawn from a single opposite polarity.
        const Polarity np = blocks[pick(local, std::span<const std::size_t>(negs_pool))].label.polarity;
        std::vector<std::size_t> same_np;
        for (std::size_t j : negs_pool) {
          if (blocks[j].label.polarity == np) same_np.push_back(j);
        }
        std::vector<ContextBlock> nparts;
        for (std::size_t j : sample_distinct(same_np, k)) nparts.push_back(blocks[j]);
        t.negatives.push_back(fuse_blocks(nparts, cfg.max_seq_len));
        break;
      }
    }
    validate_triplet(t);
    out.triplets.push_back(std::move(t));
  }
  return out;
}

// --- JSONL ------------------------------------------------------------------------

namespace {

json block_to_json(const ContextBlock& b, const Lexicon& lex, bool with_extras) {
  json j{{"tokens", b.tokens},
         {"aspect", lex.aspect_name(b.label.aspect)},
         {"polarity", std::string(to_string(b.label.polarity))},
         {"window", b.window_sentences},
         {"text_len", b.text_len}};
  if (with_extras) {
    j["intensity"] = b.intensity;
    j["review"] = b.source_review;
    j["anchor"] = b.anchor_position;
  }
  return j;
}

ContextBlock block_from_json(const json& j, const Lexicon& lex) {
  ContextBlock b;
  b.tokens = j.at("tokens").get<TokenSequence>();
  b.label.aspect = lex.aspect_id(j.at("aspect").get<std::string>());
  b.label.polarity = parse_polarity(j.at("polarity").get<std::string>());
  b.window_sentences = j.at("window").get<int>();
  b.text_len = j.at("text_len").get<int>();
  b.intensity = j.value("intensity", 0);
  b.source_review = j.value("review", 0);
  b.anchor_position = j.value("anchor", std::size_t{0});
  for (int t : b.tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= lex.vocab_size()) {
      throw FormatError("block token id " + std::to_string(t) + " outside vocabulary");
    }
  }
  if (b.tokens.empty()) throw FormatError("block has no tokens");
  return b;
}

template <typename F>
void for_each_json_line(std::istream& in, const char* what, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void write_blocks_jsonl(std::span<const ContextBlock> blocks, const Lexicon& lex, std::ostream& out) {
  for (const auto& b : blocks) out << block_to_json(b, lex, true).dump() << '\n';
}

std::vector<ContextBlock> read_blocks_jsonl(std::istream& in, const Lexicon& lex) {
  std::vector<ContextBlock> blocks;
  for_each_json_line(in, "blocks", [&](const json& j) { blocks.push_back(block_from_json(j, lex)); });
  return blocks;
}

void write_triplets_jsonl(std::span<const Triplet> triplets, const Lexicon& lex, std::ostream& out) {
  for (const auto& t : triplets) {
    json negs = json::array();
    for (const auto& n : t.negatives) negs.push_back(block_to_json(n, lex, false));
    json j{{"query", block_to_json(t.query, lex, false)},
           {"positive", block_to_json(t.positive, lex, false)},
           {"negatives", negs},
           {"strategy", std::string(to_string(t.strategy))}};
    out << j.dump() << '\n';
  }
}

std::vector<Triplet> read_triplets_jsonl(std::istream& in, const Lexicon& lex) {
  std::vector<Triplet> triplets;
  for_each_json_line(in, "triplets", [&](const json& j) {
    Triplet t;
    t.query = block_from_json(j.at("query"), lex);
    t.positive = block_from_json(j.at("positive"), lex);
    for (const auto& n : j.at("negatives")) t.negatives.push_back(block_from_json(n, lex));
    t.strategy = parse_strategy(j.at("strategy").get<std::string>());
    validate_triplet(t);
    triplets.push_back(std::move(t));
  });
  return triplets;
}

}  // namespace phasor
