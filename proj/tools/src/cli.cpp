#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phasor/analysis.hpp"
#include "phasor/error.hpp"
#include "phasor/experiment.hpp"
#include "phasor/gradcheck.hpp"

namespace phasor::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kSeedEnv = "PHASE_SEED";

struct Overrides {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out = "runs";
  std::optional<std::string> projection;
  std::optional<std::string> mask;
  std::optional<std::string> angle_mode;
  bool paper_literal_sign = false;
  std::optional<double> w_ibn, w_angle, w_cos, w_amp;
  std::optional<double> tau_ibn, tau_angle, tau_cos;
  std::optional<std::size_t> epochs;
  std::optional<fs::path> frozen;
};

struct Paths {
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> compare;
  std::optional<std::string> aspect;
  std::size_t points = 181;
  std::size_t instances = 100;
};

std::uint64_t parse_seed(const std::string& text, const char* source) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string(source) + ": not an unsigned integer seed: '" + text + "'");
  }
}

// Defaults, then config file, then environment seed, then flags.
ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config ? load_experiment_config(*o.config) : ExperimentConfig{};
  if (const char* env = std::getenv(kSeedEnv); env && *env) cfg.seed = parse_seed(env, kSeedEnv);
  if (o.seed) cfg.seed = *o.seed;
  TrainConfig& t = cfg.train;
  if (o.projection) t.projection = parse_projection(*o.projection);
  if (o.mask) t.mask_enabled = *o.mask == "on";
  if (o.angle_mode) t.angle_mode = parse_angle_mode(*o.angle_mode);
  if (o.paper_literal_sign) t.paper_literal_sign = true;
  if (o.w_ibn) t.weights.ibn = *o.w_ibn;
  if (o.w_angle) t.weights.angle = *o.w_angle;
  if (o.w_cos) t.weights.cos = *o.w_cos;
  if (o.w_amp) t.weights.amp = *o.w_amp;
  if (o.tau_ibn) t.temps.ibn = *o.tau_ibn;
  if (o.tau_angle) t.temps.angle = *o.tau_angle;
  if (o.tau_cos) t.temps.cos = *o.tau_cos;
  if (o.epochs) t.epochs = *o.epochs;
  if (o.frozen) cfg.frozen_embeddings = *o.frozen;
  t.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

template <typename F>
std::string render(F&& write) {
  std::ostringstream s;
  write(s);
  return s.str();
}

void require_lexicon(const Dataset& ds, const char* what) {
  if (!ds.lexicon) throw ValidationError(std::string(what) + " needs synthetic data, not --frozen-embeddings");
}

Checkpoint load_for(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw ValidationError("no checkpoint at " + dir.string() + " (run `phasor train` first)");
  }
  return load_checkpoint(dir);
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

void emit(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

// --- subcommands ------------------------------------------------------------------------

void cmd_gen_data(const ExperimentConfig& cfg, const fs::path& run, std::ostream& out) {
  const Dataset ds = build_dataset(cfg);
  require_lexicon(ds, "gen-data");
  RunLock lock(run);
  write_text(run / "config.json", json(cfg).dump(2) + "\n");
  write_text(run / "corpus.jsonl", render([&](std::ostream& s) { write_corpus_jsonl(ds.corpus, *ds.lexicon, s); }));
  emit(out, {{"command", "gen-data"}, {"run_dir", run.string()}, {"reviews", ds.corpus.size()}});
}

void cmd_extract(const ExperimentConfig& cfg, const fs::path& run, std::ostream& out) {
  const Dataset ds = build_dataset(cfg);
  require_lexicon(ds, "extract");
  RunLock lock(run);
  const Lexicon& lex = *ds.lexicon;
  write_text(run / "config.json", json(cfg).dump(2) + "\n");
  write_text(run / "blocks_train.jsonl", render([&](std::ostream& s) { write_blocks_jsonl(ds.train_blocks, lex, s); }));
  write_text(run / "blocks_test.jsonl", render([&](std::ostream& s) { write_blocks_jsonl(ds.test_blocks, lex, s); }));
  write_text(run / "triplets.jsonl",
             render([&](std::ostream& s) { write_triplets_jsonl(ds.triplets.triplets, lex, s); }));
  std::string warnings;
  for (const auto& w : ds.triplets.warnings) {
    warnings += json{{"query", w.query}, {"strategy", std::string(to_string(w.strategy))}, {"reason", w.reason}}.dump() + "\n";
  }
  write_text(run / "triplet_warnings.jsonl", warnings);
  emit(out, {{"command", "extract"},
             {"run_dir", run.string()},
             {"train_blocks", ds.train_blocks.size()},
             {"test_blocks", ds.test_blocks.size()},
             {"triplets", ds.triplets.triplets.size()},
             {"warnings", ds.triplets.warnings.size()}});
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& run, std::ostream& out) {
  const Dataset ds = build_dataset(cfg);
  RunLock lock(run);
  write_text(run / "config.json", json(cfg).dump(2) + "\n");
  const Checkpoint ckpt = train_experiment(cfg, ds);
  save_checkpoint(ckpt, run / "checkpoint");
  write_text(run / "metrics.jsonl", metrics_to_jsonl(ckpt.history));
  emit(out, {{"command", "train"},
             {"run_dir", run.string()},
             {"steps", ckpt.step},
             {"initial_loss", ckpt.history.front().l_total},
             {"final_loss", ckpt.history.back().l_total}});
}

void cmd_eval(const ExperimentConfig& cfg, const fs::path& run, const Paths& p, std::ostream& out) {
  const fs::path ckdir = p.checkpoint.value_or(run / "checkpoint");
  const Checkpoint ckpt = load_for(ckdir);
  const Dataset ds = build_dataset(cfg);
  RunLock lock(run);
  const AspectMetrics m = evaluate_model(ckpt.model, ds, cfg.eval);
  const std::string csv = metrics_csv(m, ds.aspect_names);
  write_text(run / "metrics.csv", csv);
  out << csv;
}

void cmd_analyze_sim(const ExperimentConfig& cfg, const fs::path& run, const Paths& p, std::ostream& out) {
  const Checkpoint ckpt = load_for(p.checkpoint.value_or(run / "checkpoint"));
  std::optional<Checkpoint> base;
  if (p.compare) base = load_for(*p.compare);
  const Dataset ds = build_dataset(cfg);
  RunLock lock(run);
  const auto reports = aspect_similarity(ckpt.model, ds, cfg.sim_group_size, base ? &base->model : nullptr);
  json summary = json::array();
  for (const auto& [aspect, r] : reports) {
    const std::string stem = "sim_" + file_safe(ds.aspect_names.at(aspect));
    write_text(run / (stem + ".csv"), similarity_csv(r));
    write_text(run / (stem + ".svg"), similarity_svg(r));
    json row = {{"aspect", ds.aspect_names.at(aspect)},
                {"pos_pos", r.pos_pos},
                {"neg_neg", r.neg_neg},
                {"pos_neg", r.pos_neg}};
    if (r.deltas) {
      row["delta_pct"] = {{"pos_pos", r.deltas->pos_pos_pct},
                          {"neg_neg", r.deltas->neg_neg_pct},
                          {"pos_neg", r.deltas->pos_neg_pct}};
    }
    summary.push_back(row);
  }
  emit(out, {{"command", "analyze sim"}, {"run_dir", run.string()}, {"aspects", summary}});
}

void cmd_analyze_amp(const ExperimentConfig& cfg, const fs::path& run, const Paths& p, std::ostream& out) {
  const Checkpoint ckpt = load_for(p.checkpoint.value_or(run / "checkpoint"));
  const Dataset ds = build_dataset(cfg);
  std::optional<int> aspect;
  if (p.aspect) {
    auto it = std::find(ds.aspect_names.begin(), ds.aspect_names.end(), *p.aspect);
    if (it == ds.aspect_names.end()) throw ValidationError("unknown aspect '" + *p.aspect + "'");
    aspect = static_cast<int>(it - ds.aspect_names.begin());
  }
  RunLock lock(run);
  const AmpReport r = amplitude_report(amplitude_items(ckpt.model, ds), aspect);
  write_text(run / "amplitude.csv", amplitude_csv(r, ds.aspect_names));
  write_text(run / "amplitude_hist.svg", amplitude_histogram_svg(r));
  write_text(run / "amplitude_scatter.svg", amplitude_scatter_svg(r));
  json per_aspect = json::object();
  for (const auto& [a, s] : r.per_aspect) {
    per_aspect[ds.aspect_names.at(a)] = {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"n", s.n}};
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const json summary = {{"command", "analyze amp"},
                        {"run_dir", run.string()},
                        {"per_aspect", per_aspect},
                        {"pearson_text_len", opt(r.pearson_text_len)},
                        {"pearson_intensity", opt(r.pearson_intensity)},
                        {"degenerate", r.degenerate},
                        {"min", {{"item_id", r.min.item_id}, {"amplitude", r.min.amplitude}, {"z", opt(r.min.z)}}},
                        {"max", {{"item_id", r.max.item_id}, {"amplitude", r.max.amplitude}, {"z", opt(r.max.z)}}}};
  write_text(run / "amplitude_summary.json", summary.dump(2) + "\n");
  emit(out, summary);
}

void cmd_analyze_grad(const ExperimentConfig& cfg, const fs::path& run, const Paths& p, std::ostream& out) {
  const auto rows = gradient_landscape(landscape_grid(p.points), cfg.train.temps.angle);
  RunLock lock(run);
  write_text(run / "landscape.csv", landscape_csv(rows));
  write_text(run / "landscape.svg", landscape_svg(rows));
  emit(out, {{"command", "analyze grad"}, {"run_dir", run.string()}, {"points", rows.size()}});
}

void cmd_grad_check(const ExperimentConfig& cfg, const fs::path& run, const Paths& p, std::ostream& out) {
  GradCheckConfig gc;
  gc.seed = cfg.seed;
  gc.instances = p.instances;
  gc.temps = cfg.train.temps;
  RunLock lock(run);
  const GradCheckReport r = run_grad_check(gc);
  const json j = r;
  write_text(run / "grad_check.json", j.dump(2) + "\n");
  emit(out, j);
  if (!r.passed()) {
    throw NumericError("gradient certification failed: max relative error " +
                       std::to_string(r.max_rel_error) + " >= " + std::to_string(r.tolerance));
  }
}

void cmd_ablate(const ExperimentConfig& cfg, const fs::path& run, std::ostream& out) {
  const Dataset ds = build_dataset(cfg);
  RunLock lock(run);
  write_text(run / "config.json", json(cfg).dump(2) + "\n");
  std::vector<LegResult> results;
  for (Leg leg : kAllLegs) {
    LegResult r = run_leg(cfg, ds, leg);
    const fs::path leg_dir = run / "ablate" / std::string(to_string(leg));
    save_checkpoint(r.checkpoint, leg_dir / "checkpoint");
    write_text(leg_dir / "metrics.jsonl", metrics_to_jsonl(r.checkpoint.history));
    write_text(leg_dir / "metrics.csv", metrics_csv(r.metrics, ds.aspect_names));
    results.push_back(std::move(r));
  }
  const std::string csv = ablation_csv(results);
  write_text(run / "ablation.csv", csv);
  out << csv;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Overrides o;
  Paths p;
  const ExperimentConfig defaults;
  const TrainConfig& td = defaults.train;

  CLI::App app{"Complex-valued phase/amplitude disentanglement toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  app.add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, std::string("Master seed; overrides ") + kSeedEnv + " and the config")
      ->default_str(std::to_string(defaults.seed));
  app.add_option("--out", o.out, "Output root; runs go to <out>/<config-hash>-s<seed>");
  app.add_option("--projection", o.projection, "Projection head")
      ->check(CLI::IsMember({"zrcp", "hard"}))
      ->default_str(std::string(to_string(td.projection)));
  app.add_option("--mask", o.mask, "Anti-collision mask in the IBN loss")
      ->check(CLI::IsMember({"on", "off"}))
      ->default_str(td.mask_enabled ? "on" : "off");
  app.add_option("--angle-mode", o.angle_mode, "Phase-delta definition")
      ->check(CLI::IsMember({"exact", "surrogate"}))
      ->default_str(std::string(to_string(td.angle_mode)));
  app.add_flag("--paper-literal-sign", o.paper_literal_sign,
               "Use the reversed angle-loss exponent tau*(dtheta_neg - dtheta_pos)");
  app.add_option("--w_ibn", o.w_ibn, "IBN loss weight")->default_str(std::to_string(td.weights.ibn));
  app.add_option("--w_angle", o.w_angle, "Angle loss weight")->default_str(std::to_string(td.weights.angle));
  app.add_option("--w_cos", o.w_cos, "Cosine loss weight")->default_str(std::to_string(td.weights.cos));
  app.add_option("--w_amp", o.w_amp, "Amplitude penalty weight")->default_str(std::to_string(td.weights.amp));
  app.add_option("--tau_ibn", o.tau_ibn, "IBN temperature")->default_str(std::to_string(td.temps.ibn));
  app.add_option("--tau_angle", o.tau_angle, "Angle loss temperature")->default_str(std::to_string(td.temps.angle));
  app.add_option("--tau_cos", o.tau_cos, "Cosine loss temperature")->default_str(std::to_string(td.temps.cos));
  app.add_option("--epochs", o.epochs, "Training epochs")->default_str(std::to_string(td.epochs));
  app.add_option("--frozen-embeddings", o.frozen, "EMBF table used instead of the toy encoder (labels from <path>.labels.jsonl)");

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus (corpus.jsonl)");
  auto* extract = app.add_subcommand("extract", "Extract context blocks and triplets (JSONL)");
  auto* train_cmd = app.add_subcommand("train", "Train and write checkpoint/ and metrics.jsonl");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (metrics.csv)");
  eval->add_option("--checkpoint", p.checkpoint, "Checkpoint directory (default <run>/checkpoint)");
  auto* analyze = app.add_subcommand("analyze", "Geometric analysis (CSV + SVG)");
  analyze->require_subcommand(1);
  auto* sim = analyze->add_subcommand("sim", "Similarity matrices of aspect-matched test batches");
  sim->add_option("--checkpoint", p.checkpoint, "Checkpoint directory (default <run>/checkpoint)");
  sim->add_option("--compare", p.compare, "Baseline checkpoint for percentage deltas");
  auto* amp = analyze->add_subcommand("amp", "Amplitude distribution and correlations");
  amp->add_option("--checkpoint", p.checkpoint, "Checkpoint directory (default <run>/checkpoint)");
  amp->add_option("--aspect", p.aspect, "Restrict to one aspect");
  auto* grad = analyze->add_subcommand("grad", "Cosine vs. angle gradient magnitude curves");
  grad->add_option("--points", p.points, "Grid points over [0, pi]")->check(CLI::Range(2, 100000));
  auto* gradcheck = app.add_subcommand("grad-check", "Finite-difference certification of all analytic gradients");
  gradcheck->add_option("--instances", p.instances, "Random instances")->check(CLI::Range(1, 1000000));
  auto* ablate = app.add_subcommand("ablate", "Run the ablation grid: full, hard_chunk, no_mask, no_angle, amp_penalty");
  auto* schema = app.add_subcommand("schema", "Print the config JSON Schema");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, 1, "usage", e.what());
  }

  try {
    if (schema->parsed()) {
      out << experiment_schema().dump(2) << '\n';
      return 0;
    }
    const ExperimentConfig cfg = resolve(o);
    const fs::path run = run_directory(o.out, cfg);
    if (gen->parsed()) cmd_gen_data(cfg, run, out);
    else if (extract->parsed()) cmd_extract(cfg, run, out);
    else if (train_cmd->parsed()) cmd_train(cfg, run, out);
    else if (eval->parsed()) cmd_eval(cfg, run, p, out);
    else if (sim->parsed()) cmd_analyze_sim(cfg, run, p, out);
    else if (amp->parsed()) cmd_analyze_amp(cfg, run, p, out);
    else if (grad->parsed()) cmd_analyze_grad(cfg, run, p, out);
    else if (gradcheck->parsed()) cmd_grad_check(cfg, run, p, out);
    else if (ablate->parsed()) cmd_ablate(cfg, run, out);
    return 0;
  } catch (const ValidationError& e) {
    return fail(err, 1, e.kind(), e.what());
  } catch (const Error& e) {
    return fail(err, 2, e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(err, 2, "runtime", e.what());
  }
}

}  // namespace phasor::cli
