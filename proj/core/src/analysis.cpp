#include "phasor/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "phasor/error.hpp"
#include "phasor/losses.hpp"

namespace phasor {

namespace {

constexpr Polarity kPolarityOrder[] = {Polarity::Positive, Polarity::Negative, Polarity::Neutral};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string aspect_label(int aspect, std::span<const std::string> names) {
  if (aspect >= 0 && static_cast<std::size_t>(aspect) < names.size()) return names[aspect];
  return std::to_string(aspect);
}

DenseVector unit(const DenseVector& v) {
  const double n = norm(v);
  return n > 0.0 ? scaled(v, 1.0 / n) : v;
}

double cosine(const DenseVector& a, const DenseVector& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

Polarity predict_centroid(const std::map<Polarity, DenseVector>& centroids, const DenseVector& x) {
  const DenseVector u = unit(x);
  Polarity best = Polarity::Positive;
  double best_s = -std::numeric_limits<double>::infinity();
  for (Polarity p : kPolarityOrder) {
    auto it = centroids.find(p);
    if (it == centroids.end()) continue;
    const double s = cosine(u, it->second);
    if (s > best_s) {
      best_s = s;
      best = p;
    }
  }
  return best;
}

Polarity predict_knn(std::span<const LabeledEmbedding> refs, const DenseVector& x, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> sims;
  sims.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) sims.emplace_back(-cosine(x, refs[i].v), i);
  const std::size_t kk = std::min(k, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(kk), sims.end());
  std::map<Polarity, std::size_t> votes;
  for (std::size_t i = 0; i < kk; ++i) ++votes[refs[sims[i].second].label.polarity];
  Polarity best = Polarity::Positive;
  std::size_t best_v = 0;
  for (Polarity p : kPolarityOrder) {
    if (votes[p] > best_v) {
      best_v = votes[p];
      best = p;
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(Classifier c) {
  return c == Classifier::NearestCentroid ? "centroid" : "knn";
}

Classifier parse_classifier(std::string_view s) {
  if (s == "centroid") return Classifier::NearestCentroid;
  if (s == "knn") return Classifier::Knn;
  throw ValidationError("unknown classifier '" + std::string(s) + "' (expected centroid|knn)");
}

AspectMetrics evaluate(std::span<const LabeledEmbedding> reference,
                       std::span<const LabeledEmbedding> test, const EvalOptions& opts) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  if (opts.classifier == Classifier::Knn && opts.k == 0) {
    throw ValidationError("evaluate: k must be >= 1");
  }
  std::map<int, std::vector<LabeledEmbedding>> refs_by_aspect;
  for (const auto& r : reference) refs_by_aspect[r.label.aspect].push_back(r);

  std::map<int, std::map<Polarity, DenseVector>> centroids;
  for (const auto& [aspect, refs] : refs_by_aspect) {
    std::map<Polarity, std::pair<DenseVector, std::size_t>> sums;
    for (const auto& r : refs) {
      auto& [sum, count] = sums[r.label.polarity];
      if (sum.empty()) sum.assign(r.v.size(), 0.0);
      axpy(1.0, unit(r.v), sum);
      ++count;
    }
    for (auto& [p, sc] : sums) centroids[aspect][p] = scaled(sc.first, 1.0 / static_cast<double>(sc.second));
  }

  std::set<std::pair<int, Polarity>> missing;
  for (const auto& t : test) {
    auto it = centroids.find(t.label.aspect);
    if (it == centroids.end() || !it->second.count(t.label.polarity)) {
      missing.insert({t.label.aspect, t.label.polarity});
    }
  }
  if (!missing.empty()) {
    std::string msg = "evaluate: reference split has no items for class(es)";
    for (const auto& [a, p] : missing) msg += " (" + std::to_string(a) + "," + std::string(to_string(p)) + ")";
    throw ValidationError(msg);
  }

  AspectMetrics out;
  std::map<int, std::vector<std::pair<Polarity, Polarity>>> outcomes;
  for (const auto& t : test) {
    const Polarity pred = opts.classifier == Classifier::NearestCentroid
                              ? predict_centroid(centroids.at(t.label.aspect), t.v)
                              : predict_knn(refs_by_aspect.at(t.label.aspect), t.v, opts.k);
    outcomes[t.label.aspect].emplace_back(t.label.polarity, pred);
    ++out.confusion[{t.label.aspect, t.label.polarity, pred}];
  }

  for (const auto& [aspect, pairs] : outcomes) {
    std::set<Polarity> classes;
    std::size_t correct = 0;
    for (const auto& [truth, pred] : pairs) {
      classes.insert(truth);
      classes.insert(pred);
      correct += truth == pred;
    }
    double f1_sum = 0.0;
    for (Polarity c : classes) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (const auto& [truth, pred] : pairs) {
        tp += truth == c && pred == c;
        fp += truth != c && pred == c;
        fn += truth == c && pred != c;
      }
      const double denom = static_cast<double>(2 * tp + fp + fn);
      f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    }
    AspectScore s;
    s.aspect = aspect;
    s.n = pairs.size();
    s.f1 = f1_sum / static_cast<double>(classes.size());
    s.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
    out.per_aspect.push_back(s);
  }
  for (const auto& s : out.per_aspect) {
    out.macro_f1 += s.f1;
    out.macro_accuracy += s.accuracy;
  }
  out.macro_f1 /= static_cast<double>(out.per_aspect.size());
  out.macro_accuracy /= static_cast<double>(out.per_aspect.size());
  return out;
}

std::string metrics_csv(const AspectMetrics& m, std::span<const std::string> aspect_names) {
  std::string out = "aspect,f1,acc\n";
  for (const auto& s : m.per_aspect) {
    out += aspect_label(s.aspect, aspect_names) + "," + num(s.f1) + "," + num(s.accuracy) + "\n";
  }
  out += "MACRO," + num(m.macro_f1) + "," + num(m.macro_accuracy) + "\n";
  return out;
}

// --- similarity ---------------------------------------------------------------------

double SimReport::margin() const { return std::min(pos_pos, neg_neg) - pos_neg; }

SimReport similarity_report(std::span<const DenseVector> embs, std::span<const SemanticLabel> labels,
                            const SimReport* comparison) {
  if (embs.size() != labels.size()) throw DimensionError("similarity_report: label count mismatch");
  if (embs.empty()) throw ValidationError("similarity_report: empty batch");
  for (const auto& l : labels) {
    if (l.aspect != labels[0].aspect) throw ValidationError("similarity_report: items span several aspects");
  }
  const std::size_t n = embs.size();
  SimReport r;
  r.sim = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    r.polarity.push_back(labels[i].polarity);
    for (std::size_t j = 0; j < n; ++j) r.sim(i, j) = cosine(embs[i], embs[j]);
  }
  auto group_mean = [&](Polarity a, Polarity b) {
    double sum = 0.0;
    std::size_t count = 0;
    double diag = 0.0;
    std::size_t members = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (r.polarity[i] == a) {
        ++members;
        diag = r.sim(i, i);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || r.polarity[i] != a || r.polarity[j] != b) continue;
        sum += r.sim(i, j);
        ++count;
      }
    }
    if (count == 0) return a == b && members == 1 ? diag : std::nan("");
    return sum / static_cast<double>(count);
  };
  const bool has_pos = std::count(r.polarity.begin(), r.polarity.end(), Polarity::Positive) > 0;
  const bool has_neg = std::count(r.polarity.begin(), r.polarity.end(), Polarity::Negative) > 0;
  if (!has_pos || !has_neg) {
    throw ValidationError("similarity_report: batch needs both positive and negative items");
  }
  r.pos_pos = group_mean(Polarity::Positive, Polarity::Positive);
  r.neg_neg = group_mean(Polarity::Negative, Polarity::Negative);
  r.pos_neg = group_mean(Polarity::Positive, Polarity::Negative);
  if (comparison) {
    auto pct = [](double now, double before) { return 100.0 * (now - before) / std::abs(before); };
    r.deltas = SimDeltas{pct(r.pos_pos, comparison->pos_pos), pct(r.neg_neg, comparison->neg_neg),
                         pct(r.pos_neg, comparison->pos_neg)};
  }
  return r;
}

std::string similarity_csv(const SimReport& r) {
  std::ostringstream out;
  const std::size_t n = r.polarity.size();
  out << "item";
  for (std::size_t j = 0; j < n; ++j) out << "," << j << ":" << to_string(r.polarity[j]);
  out << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ":" << to_string(r.polarity[i]);
    for (std::size_t j = 0; j < n; ++j) out << "," << num(r.sim(i, j));
    out << "\n";
  }
  out << "\ngroup,mean\n";
  out << "pos-pos," << num(r.pos_pos) << "\n";
  out << "neg-neg," << num(r.neg_neg) << "\n";
  out << "pos-neg," << num(r.pos_neg) << "\n";
  if (r.deltas) {
    out << "\ngroup,delta_pct\n";
    out << "pos-pos," << num(r.deltas->pos_pos_pct) << "\n";
    out << "neg-neg," << num(r.deltas->neg_neg_pct) << "\n";
    out << "pos-neg," << num(r.deltas->pos_neg_pct) << "\n";
  }
  return out.str();
}

std::string similarity_svg(const SimReport& r) {
  const std::size_t n = r.polarity.size();
  const int cell = 24, pad = 20;
  const int size = static_cast<int>(n) * cell + 2 * pad;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // Similarity -1 maps to black, +1 to white.
      const double t = std::clamp((r.sim(i, j) + 1.0) / 2.0, 0.0, 1.0);
      const int g = static_cast<int>(std::lround(255.0 * t));
      out << "<rect x=\"" << pad + static_cast<int>(j) * cell << "\" y=\""
          << pad + static_cast<int>(i) * cell << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(" << g << "," << g << "," << g << ")\"/>\n";
    }
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (r.polarity[k] == r.polarity[k - 1]) continue;
    const int at = pad + static_cast<int>(k) * cell;
    const int end = pad + static_cast<int>(n) * cell;
    out << "<line x1=\"" << at << "\" y1=\"" << pad << "\" x2=\"" << at << "\" y2=\"" << end
        << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << at << "\" x2=\"" << end << "\" y2=\"" << at
        << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

// --- gradient landscape ---------------------------------------------------------------

std::vector<double> landscape_grid(std::size_t n) {
  if (n < 2) throw ValidationError("landscape_grid: need at least 2 points");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

std::vector<LandscapeRow> gradient_landscape(std::span<const double> thetas, double tau) {
  std::vector<LandscapeRow> rows;
  rows.reserve(thetas.size());
  for (double t : thetas) {
    if (!(t >= 0.0 && t <= std::numbers::pi)) {
      throw ValidationError("gradient_landscape: theta " + num(t) + " outside [0, pi]");
    }
    rows.push_back({t, cosine_gradient_magnitude(t), angle_gradient_magnitude(t, tau)});
  }
  return rows;
}

std::string landscape_csv(std::span<const LandscapeRow> rows) {
  std::string out = "theta,cosine_grad,angle_grad\n";
  for (const auto& r : rows) out += num(r.theta) + "," + num(r.cosine_grad) + "," + num(r.angle_grad) + "\n";
  return out;
}

namespace {

struct Plot {
  double x0, x1, y0, y1;
  int w = 480, h = 320, pad = 40;

  double px(double x) const { return pad + (x - x0) / (x1 - x0) * (w - 2 * pad); }
  double py(double y) const { return h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad); }

  std::string open() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\""
        << h - pad << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << pad << "\" y=\"" << h - pad / 3 << "\" font-size=\"10\">" << num(x0)
        << "</text>\n";
    out << "<text x=\"" << w - pad << "\" y=\"" << h - pad / 3 << "\" font-size=\"10\">" << num(x1)
        << "</text>\n";
    out << "<text x=\"2\" y=\"" << h - pad << "\" font-size=\"10\">" << num(y0) << "</text>\n";
    out << "<text x=\"2\" y=\"" << pad << "\" font-size=\"10\">" << num(y1) << "</text>\n";
    return out.str();
  }
};

std::pair<double, double> padded_range(double lo, double hi) {
  if (lo == hi) return {lo - 1.0, hi + 1.0};
  return {lo, hi};
}

}  // namespace

std::string landscape_svg(std::span<const LandscapeRow> rows) {
  if (rows.empty()) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";
  double ymax = 1.0;
  for (const auto& r : rows) ymax = std::max({ymax, r.cosine_grad, r.angle_grad});
  Plot p{rows.front().theta, rows.back().theta, 0.0, ymax * 1.05};
  std::tie(p.x0, p.x1) = padded_range(p.x0, p.x1);
  std::ostringstream out;
  out << p.open();
  auto polyline = [&](auto value, const char* color) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& r : rows) out << num(p.px(r.theta)) << "," << num(p.py(value(r))) << " ";
    out << "\"/>\n";
  };
  polyline([](const LandscapeRow& r) { return r.cosine_grad; }, "steelblue");
  polyline([](const LandscapeRow& r) { return r.angle_grad; }, "darkorange");
  out << "<text x=\"" << p.w - 150 << "\" y=\"20\" font-size=\"11\" fill=\"steelblue\">cosine |sin(theta)|</text>\n";
  out << "<text x=\"" << p.w - 150 << "\" y=\"34\" font-size=\"11\" fill=\"darkorange\">angle (constant)</text>\n";
  out << "</svg>\n";
  return out.str();
}

// --- amplitude ----------------------------------------------------------------------------

AmpReport amplitude_report(std::span<const AmpItem> items, std::optional<int> aspect,
                           std::size_t bins) {
  if (bins == 0) throw ValidationError("amplitude_report: bins must be >= 1");
  AmpReport r;
  for (const auto& it : items) {
    if (!aspect || it.label.aspect == *aspect) r.items.push_back(it);
  }
  if (r.items.size() < 2) throw ValidationError("amplitude_report: need at least 2 items after filtering");

  std::vector<double> amps, lens;
  std::map<int, std::vector<double>> by_aspect;
  std::vector<double> int_amps, ints;
  for (const auto& it : r.items) {
    amps.push_back(it.amplitude);
    lens.push_back(static_cast<double>(it.text_len));
    by_aspect[it.label.aspect].push_back(it.amplitude);
    if (it.intensity) {
      int_amps.push_back(it.amplitude);
      ints.push_back(*it.intensity);
    }
  }
  for (const auto& [a, v] : by_aspect) r.per_aspect[a] = summarize(v);
  r.overall = summarize(amps);

  r.histogram.lo = r.overall.min;
  r.histogram.hi = r.overall.max;
  r.histogram.counts.assign(bins, 0);
  const double width = (r.histogram.hi - r.histogram.lo) / static_cast<double>(bins);
  for (double a : amps) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((a - r.histogram.lo) / width) : 0;
    ++r.histogram.counts[std::min(b, bins - 1)];
  }

  try {
    r.pearson_text_len = pearson(amps, lens);
  } catch (const UndefinedCorrelationError&) {
  }
  if (ints.size() >= 2) {
    try {
      r.pearson_intensity = pearson(int_amps, ints);
    } catch (const UndefinedCorrelationError&) {
    }
  }

  r.degenerate = !(r.overall.std > 0.0);
  const auto [lo, hi] = std::minmax_element(amps.begin(), amps.end());
  const std::size_t imin = static_cast<std::size_t>(lo - amps.begin());
  const std::size_t imax = static_cast<std::size_t>(hi - amps.begin());
  r.z.resize(amps.size());
  if (!r.degenerate) {
    for (std::size_t i = 0; i < amps.size(); ++i) r.z[i] = (amps[i] - r.overall.mean) / r.overall.std;
  }
  r.min = {r.items[imin].id, amps[imin], r.z[imin]};
  r.max = {r.items[imax].id, amps[imax], r.z[imax]};
  return r;
}

std::string amplitude_csv(const AmpReport& r, std::span<const std::string> aspect_names) {
  std::string out = "item_id,aspect,polarity,amplitude,text_len,intensity,z\n";
  for (std::size_t i = 0; i < r.items.size(); ++i) {
    const auto& it = r.items[i];
    out += std::to_string(it.id) + "," + aspect_label(it.label.aspect, aspect_names) + "," +
           std::string(to_string(it.label.polarity)) + "," + num(it.amplitude) + "," +
           std::to_string(it.text_len) + "," + (it.intensity ? num(*it.intensity) : "") + "," +
           (r.z[i] ? num(*r.z[i]) : "") + "\n";
  }
  return out;
}

std::string amplitude_histogram_svg(const AmpReport& r) {
  std::size_t peak = 1;
  for (std::size_t c : r.histogram.counts) peak = std::max(peak, c);
  const auto [x0, x1] = padded_range(r.histogram.lo, r.histogram.hi);
  Plot p{x0, x1, 0.0, static_cast<double>(peak)};
  std::ostringstream out;
  out << p.open();
  const double bw = (x1 - x0) / static_cast<double>(r.histogram.counts.size());
  for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
    const double left = p.px(x0 + bw * static_cast<double>(b));
    const double right = p.px(x0 + bw * static_cast<double>(b + 1));
    const double top = p.py(static_cast<double>(r.histogram.counts[b]));
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left)
        << "\" height=\"" << num(p.py(0.0) - top) << "\" fill=\"steelblue\" stroke=\"white\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string amplitude_scatter_svg(const AmpReport& r) {
  double lmin = r.items.front().text_len, lmax = lmin;
  for (const auto& it : r.items) {
    lmin = std::min(lmin, static_cast<double>(it.text_len));
    lmax = std::max(lmax, static_cast<double>(it.text_len));
  }
  const auto [x0, x1] = padded_range(lmin, lmax);
  const auto [y0, y1] = padded_range(r.overall.min, r.overall.max);
  Plot p{x0, x1, y0, y1};
  std::ostringstream out;
  out << p.open();
  for (const auto& it : r.items) {
    out << "<circle cx=\"" << num(p.px(it.text_len)) << "\" cy=\"" << num(p.py(it.amplitude))
        << "\" r=\"2\" fill=\"" << (it.label.polarity == Polarity::Positive   ? "seagreen"
                                    : it.label.polarity == Polarity::Negative ? "firebrick"
                                                                              : "gray")
        << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace phasor
