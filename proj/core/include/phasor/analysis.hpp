#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "phasor/complex_space.hpp"
#include "phasor/masking.hpp"
#include "phasor/numerics.hpp"

namespace phasor {

// --- classification metrics ----------------------------------------------------

struct LabeledEmbedding {
  DenseVector v;
  SemanticLabel label;
};

enum class Classifier : std::uint8_t { NearestCentroid, Knn };
std::string_view to_string(Classifier c);  // "centroid" | "knn"
Classifier parse_classifier(std::string_view s);

struct EvalOptions {
  Classifier classifier = Classifier::NearestCentroid;
  std::size_t k = 5;
};

struct AspectScore {
  int aspect = 0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

struct AspectMetrics {
  std::vector<AspectScore> per_aspect;  // ascending aspect id
  double macro_f1 = 0.0;
  double macro_accuracy = 0.0;
  // (aspect, true polarity, predicted polarity) -> count
  std::map<std::tuple<int, Polarity, Polarity>, std::size_t> confusion;
};

// Predicts each test item's polarity within its own aspect from the
// reference split. F1 is averaged over the polarities occurring in the
// aspect's truth or predictions, then over aspects.
AspectMetrics evaluate(std::span<const LabeledEmbedding> reference,
                       std::span<const LabeledEmbedding> test, const EvalOptions& opts = {});

// `aspect,f1,acc` rows then a MACRO row. Aspect ids are rendered through
// `aspect_names` when it covers them.
std::string metrics_csv(const AspectMetrics& m, std::span<const std::string> aspect_names = {});

// --- similarity matrix -------------------------------------------------------------

struct SimDeltas {
  // Percentage change of each group mean relative to the comparison report.
  double pos_pos_pct = 0.0;
  double neg_neg_pct = 0.0;
  double pos_neg_pct = 0.0;
};

struct SimReport {
  Matrix sim;
  std::vector<Polarity> polarity;
  double pos_pos = 0.0;
  double neg_neg = 0.0;
  double pos_neg = 0.0;
  std::optional<SimDeltas> deltas;

  // min(pos_pos, neg_neg) - pos_neg
  double margin() const;
};

// Cosine similarity matrix of one aspect's items. Within-group means are
// taken over distinct pairs; a single-member group uses its diagonal.
SimReport similarity_report(std::span<const DenseVector> embs, std::span<const SemanticLabel> labels,
                            const SimReport* comparison = nullptr);

std::string similarity_csv(const SimReport& r);
std::string similarity_svg(const SimReport& r);

// --- gradient landscape ---------------------------------------------------------------

struct LandscapeRow {
  double theta = 0.0;
  double cosine_grad = 0.0;
  double angle_grad = 0.0;
};

// n evenly spaced points over [0, pi].
std::vector<double> landscape_grid(std::size_t n);
std::vector<LandscapeRow> gradient_landscape(std::span<const double> thetas, double tau);
std::string landscape_csv(std::span<const LandscapeRow> rows);
std::string landscape_svg(std::span<const LandscapeRow> rows);

// --- amplitude geometry ------------------------------------------------------------------

inline constexpr std::size_t kDefaultHistogramBins = 30;

struct AmpItem {
  std::size_t id = 0;
  SemanticLabel label;
  double amplitude = 0.0;
  int text_len = 0;
  std::optional<double> intensity;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
};

struct AmpExtreme {
  std::size_t item_id = 0;
  double amplitude = 0.0;
  std::optional<double> z;
};

struct AmpReport {
  std::vector<AmpItem> items;
  std::map<int, StatSummary> per_aspect;
  StatSummary overall;
  Histogram histogram;
  std::optional<double> pearson_text_len;
  std::optional<double> pearson_intensity;
  AmpExtreme min;
  AmpExtreme max;
  bool degenerate = false;  // zero amplitude variance; no z-scores
  std::vector<std::optional<double>> z;
};

AmpReport amplitude_report(std::span<const AmpItem> items, std::optional<int> aspect = std::nullopt,
                           std::size_t bins = kDefaultHistogramBins);

std::string amplitude_csv(const AmpReport& r, std::span<const std::string> aspect_names = {});
std::string amplitude_histogram_svg(const AmpReport& r);
std::string amplitude_scatter_svg(const AmpReport& r);

}  // namespace phasor
