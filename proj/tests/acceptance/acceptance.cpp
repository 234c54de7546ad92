// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phasor/analysis.hpp"
#include "phasor/complex_space.hpp"
#include "phasor/embf.hpp"
#include "phasor/error.hpp"
#include "phasor/experiment.hpp"
#include "phasor/gradcheck.hpp"
#include "phasor/losses.hpp"
#include "phasor/masking.hpp"
#include "phasor/zrcp.hpp"

namespace fs = std::filesystem;
using namespace phasor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

nlohmann::json thresholds() {
  std::ifstream in(fs::path(PHASOR_FIXTURE_DIR) / "acceptance_thresholds.json");
  return nlohmann::json::parse(in);
}

DenseVector random_vector(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  DenseVector v(n);
  for (double& x : v) x = nd(gen);
  return v;
}

Outcome grad_certification(const nlohmann::json& th) {
  GradCheckConfig cfg;
  cfg.instances = 100;
  const auto t0 = Clock::now();
  const GradCheckReport r = run_grad_check(cfg);
  const double secs = seconds_since(t0);
  std::size_t checked = 0;
  for (const auto& c : r.components) checked += c.checked;
  const bool ok = r.passed() && cfg.eps == 1e-5 && r.tolerance == 1e-5 &&
                  secs < th.at("grad_check_seconds_max").get<double>();
  return {ok, "max_rel_error=" + fmt("%.3e", r.max_rel_error) + " components=" +
                  std::to_string(r.components.size()) + " checked=" + std::to_string(checked) +
                  " seconds=" + fmt("%.2f", secs)};
}

Outcome zrcp_identity() {
  std::mt19937_64 gen(11);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 2 * (1 + gen() % 32);
    const DenseVector h = random_vector(gen, d, 1.0 + static_cast<double>(i % 7));
    const ZrcpParams p = zrcp_init(d, i % 2 == 1);
    const ComplexEmbedding z = zrcp_forward(p, h);
    const ComplexEmbedding c = chunk_to_complex(h);
    if (z.re != c.re || z.im != c.im) ++mismatches;
  }
  return {mismatches == 0, "inputs=1000 mismatches=" + std::to_string(mismatches)};
}

Outcome angle_scale_invariance() {
  std::mt19937_64 gen(12);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t half = 2 + gen() % 7;
    std::vector<ComplexEmbedding> z(6);
    for (auto& c : z) {
      c.re = random_vector(gen, half);
      c.im = random_vector(gen, half);
    }
    const std::vector<PairIndex> pairs{{0, 1, {2}}, {3, 4, {5, 2}}};
    for (AngleMode mode : {AngleMode::ExactPhase, AngleMode::SurrogateSum}) {
      for (bool literal : {false, true}) {
        const AngleLossOptions opts{mode, literal, {}};
        const double base = angle_loss(z, pairs, 20.0, opts).value;
        for (double s : {0.1, 3.7, 100.0}) {
          std::vector<ComplexEmbedding> zs = z;
          for (auto& c : zs) {
            for (double& x : c.re) x *= s;
            for (double& x : c.im) x *= s;
          }
          worst = std::max(worst, std::abs(angle_loss(zs, pairs, 20.0, opts).value - base));
        }
      }
    }
  }
  return {worst < 1e-9, "max_abs_change=" + fmt("%.3e", worst)};
}

Outcome mask_efficacy(const Dataset& ds) {
  std::mt19937_64 gen(13);
  std::size_t batches = 0, bystanders = 0, nonzero = 0, not_higher = 0;
  const auto& triplets = ds.triplets.triplets;
  for (std::size_t start = 0; start + 8 <= triplets.size() && batches < 50; start += 8) {
    const TripletBatch batch = make_batch(std::span(triplets).subspan(start, 8));
    std::vector<SemanticLabel> labels;
    for (const auto& it : batch.items) labels.push_back(it.label);
    const MaskMatrix mask = build_anticollision_mask(labels);
    std::vector<DenseVector> h;
    for (std::size_t i = 0; i < labels.size(); ++i) h.push_back(random_vector(gen, 16));

    bool has_bystander = false;
    for (const auto& pair : batch.pairs) {
      const LossOutput one = ibn_loss(h, std::span(&pair, 1), mask, 20.0);
      for (std::size_t j = 0; j < labels.size(); ++j) {
        if (j == pair.anchor || j == pair.positive || !mask(pair.anchor, j)) continue;
        has_bystander = true;
        ++bystanders;
        const auto it = one.grads.find({InputId::Space::Real, j});
        if (it == one.grads.end()) continue;
        for (double g : it->second) {
          if (g != 0.0) {
            ++nonzero;
            break;
          }
        }
      }
    }
    if (!has_bystander) continue;
    ++batches;
    const double masked = ibn_loss(h, batch.pairs, mask, 20.0).value;
    const double unmasked = ibn_loss(h, batch.pairs, identity_mask(labels.size()), 20.0).value;
    if (!(unmasked > masked)) ++not_higher;
  }
  const bool ok = batches > 0 && bystanders > 0 && nonzero == 0 && not_higher == 0;
  return {ok, "batches=" + std::to_string(batches) + " bystanders=" + std::to_string(bystanders) +
                  " nonzero_grads=" + std::to_string(nonzero) +
                  " unmasked_not_higher=" + std::to_string(not_higher)};
}

Outcome landscape() {
  const std::vector<double> grid = landscape_grid(181);
  const auto rows = gradient_landscape(grid, 20.0);
  const double at0 = rows.front().cosine_grad;
  const double at_half = rows[90].cosine_grad;
  double spread = 0.0;
  for (const auto& r : rows) spread = std::max(spread, std::abs(r.angle_grad - rows.front().angle_grad));
  const bool ok = rows.front().theta == 0.0 && std::abs(rows[90].theta - std::numbers::pi / 2) < 1e-15 &&
                  at0 == 0.0 && std::abs(at_half - 1.0) < 1e-15 && spread < 1e-12;
  return {ok, "cos_grad(0)=" + fmt("%.3g", at0) + " cos_grad(pi/2)=" + fmt("%.17g", at_half) +
                  " angle_grad_spread=" + fmt("%.3g", spread)};
}

Outcome pipeline_integrity(const Dataset& ds) {
  std::size_t bad_triplets = 0, contaminated = 0, bad_windows = 0;
  for (const auto& t : ds.triplets.triplets) {
    try {
      validate_triplet(t);
    } catch (const Error&) {
      ++bad_triplets;
    }
  }
  for (const auto* blocks : {&ds.train_blocks, &ds.test_blocks}) {
    for (const auto& b : *blocks) {
      if (b.window_sentences < 2 || b.window_sentences > 4) ++bad_windows;
      for (int tok : b.tokens) {
        const auto a = ds.lexicon->aspect_of(tok);
        if (a && *a != b.label.aspect) {
          ++contaminated;
          break;
        }
      }
    }
  }
  const bool ok = !ds.triplets.triplets.empty() && bad_triplets == 0 && contaminated == 0 &&
                  bad_windows == 0;
  return {ok, "triplets=" + std::to_string(ds.triplets.triplets.size()) +
                  " invalid=" + std::to_string(bad_triplets) +
                  " contaminated_blocks=" + std::to_string(contaminated) +
                  " bad_windows=" + std::to_string(bad_windows)};
}

Outcome determinism_and_round_trips() {
  ExperimentConfig cfg;
  cfg.data.n_reviews = 200;
  cfg.train.epochs = 2;
  const Dataset ds = build_dataset(cfg);
  const Checkpoint a = train_experiment(cfg, ds);
  const Checkpoint b = train_experiment(cfg, ds);
  const bool same_history = metrics_to_jsonl(a.history) == metrics_to_jsonl(b.history);

  const fs::path dir = fs::temp_directory_path() / "phasor_acceptance_ckpt";
  fs::remove_all(dir);
  save_checkpoint(a, dir / "one");
  const Checkpoint loaded = load_checkpoint(dir / "one");
  const bool model_exact = loaded.model == round_to_storage(a.model) &&
                           metrics_to_jsonl(loaded.history) == metrics_to_jsonl(a.history);
  save_checkpoint(loaded, dir / "two");
  bool bytes_exact = true;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "one")) {
    ++files;
    std::ifstream f1(e.path(), std::ios::binary), f2(dir / "two" / e.path().filename(), std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    bytes_exact = bytes_exact && f2.good() && s1.str() == s2.str();
  }

  std::mt19937_64 gen(14);
  EmbfTensor t{7, 5, {}};
  std::normal_distribution<float> nd(0.0f, 3.0f);
  for (int i = 0; i < 35; ++i) t.data.push_back(nd(gen));
  t.data[3] = -0.0f;
  t.data[4] = std::numeric_limits<float>::denorm_min();
  write_embf(t, dir / "t.embf");
  const bool embf_exact = read_embf(dir / "t.embf") == t && decode_embf(encode_embf(t)) == t;
  fs::remove_all(dir);

  const bool ok = same_history && !a.history.empty() && model_exact && bytes_exact && files > 1 &&
                  embf_exact;
  return {ok, std::string("history_identical=") + (same_history ? "yes" : "no") +
                  " checkpoint_exact=" + (model_exact && bytes_exact ? "yes" : "no") +
                  " embf_exact=" + (embf_exact ? "yes" : "no")};
}

double std_of_aspects(const LegResult& r) { return r.mean_aspect_amp_std; }

}  // namespace

int main() {
  const nlohmann::json th = thresholds();
  std::vector<std::pair<std::string, Outcome>> results;
  auto record = [&](const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(name, o);
  };

  ExperimentConfig base;
  base.seed = 0;
  base.train.seed = 0;
  const Dataset ds = build_dataset(base);

  record("1 gradient certification", [&] { return grad_certification(th); });
  record("2 zrcp identity at zero init", zrcp_identity);
  record("3 angle loss scale invariance", angle_scale_invariance);
  record("4 mask efficacy", [&] { return mask_efficacy(ds); });
  record("5 gradient landscape", landscape);

  std::map<Leg, LegResult> legs;
  double disentangle_seconds = 0.0;
  for (Leg leg : kAllLegs) {
    const auto t0 = Clock::now();
    legs.emplace(leg, run_leg(base, ds, leg));
    if (leg == Leg::Full || leg == Leg::NoMask) disentangle_seconds += seconds_since(t0);
  }

  record("6 disentanglement vs no-mask", [&] {
    const SimSummary& full = legs.at(Leg::Full).similarity;
    const SimSummary& nm = legs.at(Leg::NoMask).similarity;
    const double ratio = nm.margin > 0.0 ? full.margin / nm.margin : 0.0;
    const bool ok = ds.aspect_names.size() == 6 &&
                    ds.triplets.triplets.size() >= th.at("min_triplets").get<std::size_t>() &&
                    full.pos_neg < nm.pos_neg && full.margin > 0.0 &&
                    full.margin >= th.at("margin_ratio_min").get<double>() * nm.margin &&
                    disentangle_seconds < th.at("disentangle_seconds_max").get<double>();
    return Outcome{ok, "aspects=" + std::to_string(ds.aspect_names.size()) +
                           " triplets=" + std::to_string(ds.triplets.triplets.size()) +
                           " pos_neg full=" + fmt("%.4f", full.pos_neg) + " no_mask=" +
                           fmt("%.4f", nm.pos_neg) + " margin full=" + fmt("%.4f", full.margin) +
                           " no_mask=" + fmt("%.4f", nm.margin) + " ratio=" + fmt("%.2f", ratio) +
                           " seconds=" + fmt("%.1f", disentangle_seconds)};
  });

  record("7 classification", [&] {
    const double f = legs.at(Leg::Full).metrics.macro_f1;
    bool ok = f >= th.at("macro_f1_min").get<double>();
    std::string detail = "full=" + fmt("%.4f", f);
    for (Leg leg : {Leg::HardChunk, Leg::NoMask, Leg::NoAngle}) {
      const double other = legs.at(leg).metrics.macro_f1;
      ok = ok && f >= other;
      detail += " " + std::string(to_string(leg)) + "=" + fmt("%.4f", other);
    }
    return Outcome{ok, detail};
  });

  record("8 amplitude geometry", [&] {
    const AmpReport rep = amplitude_report(amplitude_items(legs.at(Leg::Full).checkpoint.model, ds));
    const double r_int = rep.pearson_intensity.value_or(0.0);
    const double r_len = rep.pearson_text_len.value_or(1.0);
    const double s_full = std_of_aspects(legs.at(Leg::Full));
    const double s_amp = std_of_aspects(legs.at(Leg::AmpPenalty));
    const double shrink = s_full > 0.0 ? 1.0 - s_amp / s_full : 0.0;
    const bool ok = rep.pearson_intensity && rep.pearson_text_len &&
                    r_int > th.at("pearson_intensity_min").get<double>() &&
                    std::abs(r_len) < th.at("pearson_text_len_max_abs").get<double>() &&
                    shrink >= th.at("amp_std_shrink_min").get<double>();
    return Outcome{ok, "r_intensity=" + fmt("%.4f", r_int) + " r_text_len=" + fmt("%.4f", r_len) +
                           " aspect_amp_std full=" + fmt("%.4f", s_full) + " w_amp=1 " +
                           fmt("%.4f", s_amp) + " shrink=" + fmt("%.1f%%", 100.0 * shrink)};
  });

  record("9 pipeline integrity", [&] { return pipeline_integrity(ds); });
  record("10 determinism and round trips", determinism_and_round_trips);

  std::size_t failed = 0;
  for (const auto& [name, o] : results) failed += o.pass ? 0 : 1;
  std::printf("%zu/%zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
