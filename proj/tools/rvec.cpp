// rvec: command-line front end for the reasoning-vector toolkit.
//
// Exit codes: 0 ok, 2 usage error or missing input, 3 output exists without
// --force, 1 anything else. Errors are one JSON object on stderr.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rvec/confidence.hpp"
#include "rvec/data_model.hpp"
#include "rvec/diag.hpp"
#include "rvec/error.hpp"
#include "rvec/geometry.hpp"
#include "rvec/parallel.hpp"
#include "rvec/sae.hpp"
#include "rvec/segmenter.hpp"
#include "rvec/steering.hpp"
#include "rvec/synth_bench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rvec;

namespace {

struct CliError {
  int code;
  std::string kind;
  std::string message;
};

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  bool force = false;
};

json globals_json(const Globals& g) {
  return {{"seed", g.seed}, {"threads", g.threads}, {"out_dir", g.out_dir}};
}

fs::path resolve_out(const Globals& g, const std::string& out) {
  fs::path p(out);
  if (p.is_relative() && !g.out_dir.empty()) p = fs::path(g.out_dir) / p;
  return p;
}

void require_input(const std::string& path, bool directory, const char* flag) {
  const bool ok = directory ? fs::is_directory(path) : fs::is_regular_file(path);
  if (!ok) {
    throw CliError{2, "missing_input", std::string(flag) + ": " + (directory ? "directory" : "file") +
                                           " not found: " + path};
  }
}

// Refuses to touch an existing output unless --force; with --force the old
// output is removed first so no stale files survive.
void prepare_output(const fs::path& out, bool force, bool directory) {
  if (fs::exists(out)) {
    if (!force) throw CliError{3, "output_exists", "output exists (use --force): " + out.string()};
    fs::remove_all(out);
  }
  if (directory) {
    fs::create_directories(out);
  } else if (out.has_parent_path()) {
    fs::create_directories(out.parent_path());
  }
}

void write_json(const fs::path& file, const json& j) { io::write_text(file, j.dump(2) + "\n"); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

SaeModel load_sae_checked(const std::string& dir, const ActivationSet& acts) {
  SaeModel model = load_sae(dir);
  if (model.d != acts.dim()) {
    throw DimensionError("SAE input dim " + std::to_string(model.d) + " does not match activation dim " +
                         std::to_string(acts.dim()));
  }
  return model;
}

// segment ------------------------------------------------------------------

struct SegmentArgs {
  std::string input, keywords, out;
};

void run_segment(const Globals& g, const SegmentArgs& a) {
  require_input(a.input, false, "--input");
  if (!a.keywords.empty()) require_input(a.keywords, false, "--keywords");
  const segmenter::KeywordTable table =
      a.keywords.empty() ? segmenter::default_keywords() : segmenter::load_keywords(a.keywords);
  segmenter::validate(table);
  const fs::path out = resolve_out(g, a.out);
  prepare_output(out, g.force, false);

  std::istringstream in(io::read_text(a.input));
  std::string line, out_text;
  std::size_t line_no = 0, n_steps = 0;
  std::map<std::string, std::size_t> counts;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string sample_id, text;
    std::uint64_t length = 0;
    try {
      const json j = json::parse(line);
      sample_id = j.at("sample_id").get<std::string>();
      text = j.at("text").get<std::string>();
      if (j.contains("response_length_tokens")) length = j.at("response_length_tokens").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw FormatError(a.input + " line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto steps = segmenter::segment_response(text);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      StepRecord r{sample_id, i, steps[i], segmenter::annotate_step(steps[i], table), length};
      ++counts[std::string(to_string(r.label))];
      out_text += format_step_record(r) + "\n";
      ++n_steps;
    }
  }

  io::write_text(out, out_text);
  json config = {{"command", "segment"},
                 {"global", globals_json(g)},
                 {"input", a.input},
                 {"keywords", a.keywords.empty() ? json("default") : json(a.keywords)},
                 {"out", out.string()},
                 {"steps_written", n_steps},
                 {"label_counts", counts}};
  write_json(fs::path(out.string() + ".config.json"), config);
}

// train-sae ----------------------------------------------------------------

struct TrainArgs {
  std::string activations, out;
  sae::TrainConfig config;
  bool l0_ste = false;
};

json train_config_json(const sae::TrainConfig& c, std::uint64_t resolved_steps) {
  return {{"D", c.hidden_dim},
          {"lambda", c.lambda},
          {"lr", c.learning_rate},
          {"batch", c.batch_size},
          {"steps", resolved_steps},
          {"warmup_fraction", c.warmup_fraction},
          {"penalty", c.penalty == sae::SparsityPenalty::Kind::l1 ? "l1" : "l0_ste"},
          {"ste_bandwidth", c.ste_bandwidth},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
          {"standardize", c.standardize},
          {"unit_norm_decoder", c.unit_norm_decoder},
          {"tied_init", c.tied_init},
          {"seed", c.seed}};
}

void run_train_sae(const Globals& g, TrainArgs a) {
  require_input(a.activations, true, "--activations");
  const ActivationSet acts = read_activation_set(a.activations);
  a.config.seed = g.seed;
  if (a.l0_ste) a.config.penalty = sae::SparsityPenalty::Kind::l0_ste;
  sae::validate(a.config);
  const fs::path out = resolve_out(g, a.out);
  prepare_output(out, g.force, true);

  const auto result = sae::train(acts, a.config);
  save_sae(result.model, out);
  sae::write_loss_csv(out / "loss.csv", result.log);
  json config = {{"command", "train-sae"},
                 {"global", globals_json(g)},
                 {"activations", a.activations},
                 {"out", out.string()},
                 {"train", train_config_json(a.config, result.model.trained_steps)}};
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    config["final"] = {{"total", last.total}, {"mse", last.mse}, {"l1", last.l1}, {"l0", last.l0}};
  }
  write_json(out / "config.json", config);
}

// analyze ------------------------------------------------------------------

struct AnalyzeArgs {
  std::string sae, activations, out, behaviors = "reflection,backtracking", mode = "decoder";
  std::size_t topk = 32;
};

struct TopChannels {
  std::vector<std::string> present;
  std::vector<std::string> absent;
  std::map<std::string, std::vector<geometry::ChannelActivity>> by_behavior;
};

TopChannels collect_top_channels(const MatrixD& latents, const std::vector<std::string>& labels,
                                 const std::vector<std::string>& behaviors, std::size_t topk) {
  TopChannels t;
  for (const auto& b : behaviors) {
    if (std::find(labels.begin(), labels.end(), b) == labels.end()) {
      diag::warn("behavior_absent", "no steps labeled '" + b + "'; behavior skipped");
      t.absent.push_back(b);
      continue;
    }
    t.present.push_back(b);
    t.by_behavior[b] = geometry::top_active_channels(latents, labels, b, topk);
  }
  return t;
}

std::vector<std::string> parse_behaviors(const std::string& s) {
  auto behaviors = split_csv(s);
  if (behaviors.empty()) throw CliError{2, "usage", "--behaviors: empty behavior list"};
  for (const auto& b : behaviors) {
    if (b != "reflection" && b != "backtracking" && b != "others") {
      throw CliError{2, "usage", "--behaviors: unknown behavior '" + b + "'"};
    }
  }
  return behaviors;
}

json silhouette_json(const MatrixD& vectors, const std::vector<std::string>& labels) {
  std::vector<std::string> distinct(labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (vectors.rows() < 3 || distinct.size() < 2) {
    diag::warn("silhouette_skipped", "silhouette needs at least 3 points in 2 clusters");
    return {{"mean", nullptr}, {"n_points", vectors.rows()}, {"clusters", distinct}};
  }
  const auto s = geometry::silhouette_cosine(vectors, labels);
  return {{"mean", s.mean}, {"n_points", vectors.rows()}, {"clusters", distinct}};
}

void run_analyze(const Globals& g, const AnalyzeArgs& a) {
  const auto behaviors = parse_behaviors(a.behaviors);
  if (a.mode != "decoder" && a.mode != "latent") {
    throw CliError{2, "usage", "--silhouette-mode: expected decoder or latent"};
  }
  if (a.topk == 0) throw CliError{2, "usage", "--topk: must be positive"};
  require_input(a.sae, true, "--sae");
  require_input(a.activations, true, "--activations");
  const ActivationSet acts = read_activation_set(a.activations);
  const SaeModel model = load_sae_checked(a.sae, acts);
  const fs::path out = resolve_out(g, a.out);
  prepare_output(out, g.force, true);

  const MatrixD latents = sae::latent_features(model, acts);
  const auto labels = geometry::behavior_labels(acts.records);
  const TopChannels top = collect_top_channels(latents, labels, behaviors, a.topk);

  std::string csv = "behavior,rank,channel,activity\n";
  for (const auto& b : top.present) {
    const auto& list = top.by_behavior.at(b);
    for (std::size_t r = 0; r < list.size(); ++r) {
      csv += b + "," + std::to_string(r) + "," + std::to_string(list[r].channel_index) + "," +
             fmt(list[r].activity) + "\n";
    }
  }
  io::write_text(out / "activity.csv", csv);

  // Points for the silhouette and the 2-D export.
  std::vector<std::vector<double>> rows;
  std::vector<std::string> point_labels;
  std::vector<std::size_t> point_ids;
  if (a.mode == "decoder") {
    for (const auto& b : top.present) {
      for (const auto& c : top.by_behavior.at(b)) {
        const auto r = model.W_dec.row(c.channel_index);
        rows.emplace_back(r.begin(), r.end());
        point_labels.push_back(b);
        point_ids.push_back(c.channel_index);
      }
    }
  } else {
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < latents.rows(); ++i) {
      if (std::find(top.present.begin(), top.present.end(), labels[i]) == top.present.end()) continue;
      const auto r = latents.row(i);
      if (std::all_of(r.begin(), r.end(), [](double x) { return x == 0.0; })) {
        ++dropped;
        continue;
      }
      rows.emplace_back(r.begin(), r.end());
      point_labels.push_back(labels[i]);
      point_ids.push_back(i);
    }
    if (dropped) diag::warn("zero_latent_rows", std::to_string(dropped) + " all-zero latent rows excluded");
  }
  const std::size_t dim = a.mode == "decoder" ? model.d : model.D;
  MatrixD points(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), points.row(i).begin());

  json sil = silhouette_json(points, point_labels);
  sil["mode"] = a.mode;
  sil["behaviors"] = top.present;
  sil["skipped_behaviors"] = top.absent;
  write_json(out / "silhouette.json", sil);

  std::string coords = a.mode == "decoder" ? "index,channel,x,y,label\n" : "index,row,x,y,label\n";
  if (points.rows() >= 3) {
    const auto emb = geometry::embed_2d(points);
    for (std::size_t i = 0; i < points.rows(); ++i) {
      coords += std::to_string(i) + "," + std::to_string(point_ids[i]) + "," + fmt(emb.coords(i, 0)) + "," +
                fmt(emb.coords(i, 1)) + "," + point_labels[i] + "\n";
    }
  } else {
    diag::warn("embedding_skipped", "fewer than 3 points; coords.csv left empty");
  }
  io::write_text(out / "coords.csv", coords);

  json config = {{"command", "analyze"},
                 {"global", globals_json(g)},
                 {"sae", a.sae},
                 {"activations", a.activations},
                 {"behaviors", behaviors},
                 {"topk", a.topk},
                 {"silhouette_mode", a.mode},
                 {"out", out.string()}};
  write_json(out / "config.json", config);
}

// steer-vector -------------------------------------------------------------

struct SteerArgs {
  std::string sae, activations, out, behaviors = "reflection,backtracking";
  std::size_t topk = 32;
  double overlap_ratio = steering::kDefaultOverlapRatio;
  std::vector<double> alphas{-1.5, -1.0, 0.0, 1.0, 1.5};
};

void run_steer_vector(const Globals& g, const SteerArgs& a) {
  const auto behaviors = parse_behaviors(a.behaviors);
  if (behaviors.size() < 2) throw CliError{2, "usage", "--behaviors: need at least 2 behaviors"};
  if (a.topk == 0) throw CliError{2, "usage", "--topk: must be positive"};
  require_input(a.sae, true, "--sae");
  require_input(a.activations, true, "--activations");
  const ActivationSet acts = read_activation_set(a.activations);
  const SaeModel model = load_sae_checked(a.sae, acts);
  const fs::path out = resolve_out(g, a.out);
  prepare_output(out, g.force, true);

  const MatrixD latents = sae::latent_features(model, acts);
  const auto labels = geometry::behavior_labels(acts.records);
  const TopChannels top = collect_top_channels(latents, labels, behaviors, a.topk);
  if (top.present.size() < 2) {
    throw ValidationError("steer-vector: need at least 2 behaviors present in the data, found " +
                          std::to_string(top.present.size()));
  }
  const auto exclusive = steering::filter_exclusive_channels(top.by_behavior, a.overlap_ratio);

  json channels = json::object();
  json written = json::array();
  for (const auto& [behavior, kept] : exclusive) {
    std::vector<std::size_t> top_ids;
    for (const auto& c : top.by_behavior.at(behavior)) top_ids.push_back(c.channel_index);
    channels[behavior] = {{"top", top_ids}, {"exclusive", kept}};
    if (kept.empty()) {
      diag::warn("no_exclusive_channels", "no exclusive channels for '" + behavior + "'; vector not written");
      continue;
    }
    const auto v = steering::build_behavior_vector(model.W_dec, kept, behavior);
    steering::save_steering_vector(v, out / behavior);
    written.push_back(behavior);
  }
  write_json(out / "channels.json", channels);

  json config = {{"command", "steer-vector"},
                 {"global", globals_json(g)},
                 {"sae", a.sae},
                 {"activations", a.activations},
                 {"behaviors", behaviors},
                 {"skipped_behaviors", top.absent},
                 {"topk", a.topk},
                 {"overlap_ratio", a.overlap_ratio},
                 {"alphas", a.alphas},
                 {"vectors", written},
                 {"out", out.string()}};
  write_json(out / "config.json", config);
}

// discover-confidence ------------------------------------------------------

struct ConfidenceArgs {
  std::string head, sae, activations, out;
  confidence::OptimizeConfig config;
  std::size_t k = 3;
  bool fit = true;
};

void run_discover_confidence(const Globals& g, ConfidenceArgs a) {
  require_input(a.head, true, "--head");
  require_input(a.sae, true, "--sae");
  require_input(a.activations, true, "--activations");
  a.config.seed = g.seed;
  confidence::validate(a.config);
  const ActivationSet acts = read_activation_set(a.activations);
  const SaeModel model = load_sae_checked(a.sae, acts);
  const confidence::ReadoutHead head = confidence::load_head(a.head);
  if (a.k == 0 || a.k > model.D) {
    throw CliError{2, "usage", "--k: must lie in [1, D = " + std::to_string(model.D) + "]"};
  }
  const fs::path out = resolve_out(g, a.out);
  prepare_output(out, g.force, true);

  std::vector<double> trajectory;
  const auto scores = confidence::optimize_scores(head, model.W_dec, acts, a.config, &trajectory);
  confidence::save_scores(scores, out / "scores");
  std::string csv = "iter,entropy\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i) csv += std::to_string(i) + "," + fmt(trajectory[i]) + "\n";
  io::write_text(out / "trajectory.csv", csv);

  const auto top = confidence::top_scoring_columns(scores, a.k);
  std::vector<steering::SteeringVector> vectors;
  for (std::size_t r = 0; r < top.size(); ++r) {
    const std::size_t channel[] = {top[r]};
    vectors.push_back(steering::build_behavior_vector(model.W_dec, channel, "confidence"));
    steering::save_steering_vector(vectors.back(), out / ("confidence_" + std::to_string(r)));
  }

  const MatrixD data = matrix_cast<double>(acts.data);
  const MatrixD no_basis(0, head.d);
  const double initial = confidence::entropy_objective(head, no_basis, {}, data);
  json summary = {{"top_columns", top},
                  {"initial_entropy", initial},
                  {"final_entropy", scores.final_entropy},
                  {"top_scores", json::array()}};
  for (std::size_t c : top) summary["top_scores"].push_back(scores.S[c]);
  if (a.fit) {
    const auto coeffs = confidence::fit_coefficients(head, vectors, acts, a.config);
    MatrixD basis(vectors.size(), head.d);
    for (std::size_t j = 0; j < vectors.size(); ++j)
      for (std::size_t i = 0; i < head.d; ++i) basis(j, i) = vectors[j].direction[i];
    summary["coefficients"] = coeffs;
    summary["combined_entropy"] = confidence::entropy_objective(head, basis, coeffs, data);
  }
  write_json(out / "summary.json", summary);

  json config = {{"command", "discover-confidence"},
                 {"global", globals_json(g)},
                 {"head", a.head},
                 {"sae", a.sae},
                 {"activations", a.activations},
                 {"iters", a.config.iters},
                 {"lr", a.config.learning_rate},
                 {"batch", a.config.batch_size},
                 {"schedule", "cosine"},
                 {"k", a.k},
                 {"fit_coefficients", a.fit},
                 {"out", out.string()}};
  write_json(out / "config.json", config);
}

// synth-bench --------------------------------------------------------------

struct SynthArgs {
  std::string out;
  synth::SynthConfig config;
  bool unsigned_codes = false;
  bool l0_ste = false;
};

void run_synth_bench(const Globals& g, SynthArgs a) {
  a.config.seed = g.seed;
  a.config.signed_coefficients = !a.unsigned_codes;
  if (a.l0_ste) a.config.train.penalty = sae::SparsityPenalty::Kind::l0_ste;
  synth::validate(a.config);
  const fs::path out = resolve_out(g, a.out);
  prepare_output(out, g.force, true);

  const auto result = synth::run_recovery_experiment(a.config);
  const auto& r = result.report;
  write_json(out / "report.json", {{"mean_alignment", r.mean_alignment},
                                   {"fraction_above_0.9", r.fraction_above_0_9},
                                   {"mu_true", r.mu_true},
                                   {"mu_measured", r.mu_measured},
                                   {"mean_L0", r.mean_l0},
                                   {"recon_error", r.recon_error},
                                   {"dictionary_attempts", result.dictionary.attempts}});
  std::string csv = "atom,score\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i) csv += std::to_string(i) + "," + fmt(r.scores[i]) + "\n";
  io::write_text(out / "alignment.csv", csv);
  sae::write_loss_csv(out / "loss.csv", result.log);
  save_sae(result.model, out / "sae");

  const auto& c = a.config;
  json config = {{"command", "synth-bench"},
                 {"global", globals_json(g)},
                 {"d", c.d},
                 {"m", c.m},
                 {"k", c.k},
                 {"alpha_min", c.alpha_min},
                 {"alpha_max_ratio", c.alpha_max_ratio},
                 {"signed_coefficients", c.signed_coefficients},
                 {"noise_bound", c.noise_bound},
                 {"n_samples", c.n_samples},
                 {"target_mu", c.target_mu},
                 {"orthogonalize", c.orthogonalize},
                 {"D", c.hidden_dim ? c.hidden_dim : c.m},
                 {"train", train_config_json(c.train, result.model.trained_steps)},
                 {"out", out.string()}};
  write_json(out / "config.json", config);
}

void add_train_options(CLI::App* cmd, sae::TrainConfig& c, bool& l0_ste) {
  cmd->add_option("--lambda", c.lambda, "Sparsity penalty weight")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Peak learning rate")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "Batch size")->capture_default_str();
  cmd->add_option("--steps", c.total_steps, "Training steps (0: every sample seen 50 times)")->capture_default_str();
  cmd->add_option("--warmup-fraction", c.warmup_fraction, "Fraction of steps spent in linear warmup")
      ->capture_default_str();
  cmd->add_flag("--l0-ste", l0_ste, "Use the straight-through L0 penalty instead of L1");
  cmd->add_option("--ste-bandwidth", c.ste_bandwidth, "Pseudo-derivative width for --l0-ste")->capture_default_str();
  cmd->add_flag("--standardize", c.standardize, "Standardise inputs during training");
  cmd->add_flag("--unit-norm-decoder", c.unit_norm_decoder, "Keep decoder rows at unit norm");
  cmd->add_flag("--tied-init", c.tied_init, "Initialise W_enc as W_dec transposed");
}

int fail(const CliError& e) {
  std::cerr << json{{"error", e.kind}, {"message", e.message}, {"exit_code", e.code}}.dump() << "\n";
  return e.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reasoning-vector toolkit: segmentation, SAE training, analysis, steering, confidence search"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Thread cap (0: runtime default)")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Base directory for relative --out paths");
  app.add_flag("--force", g.force, "Overwrite existing outputs");

  SegmentArgs seg;
  auto* cmd_seg = app.add_subcommand("segment", "Split responses into steps and label them");
  cmd_seg->add_option("--input", seg.input, "responses.jsonl with {sample_id, text}")->required();
  cmd_seg->add_option("--keywords", seg.keywords, "Keyword table JSON (default: built-in table)");
  cmd_seg->add_option("--out", seg.out, "Output steps.jsonl")->required();

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train-sae", "Train a sparse autoencoder on an activation set");
  cmd_train->add_option("--activations", tr.activations, "Activation set directory")->required();
  cmd_train->add_option("--D", tr.config.hidden_dim, "Latent width")->capture_default_str();
  add_train_options(cmd_train, tr.config, tr.l0_ste);
  cmd_train->add_option("--out", tr.out, "Checkpoint directory")->required();

  AnalyzeArgs an;
  auto* cmd_an = app.add_subcommand("analyze", "Top-active channels, silhouettes and 2-D export");
  cmd_an->add_option("--sae", an.sae, "SAE checkpoint directory")->required();
  cmd_an->add_option("--activations", an.activations, "Activation set directory")->required();
  cmd_an->add_option("--behaviors", an.behaviors, "Comma-separated behaviors")->capture_default_str();
  cmd_an->add_option("--topk", an.topk, "Top-active channels per behavior")->capture_default_str();
  cmd_an->add_option("--silhouette-mode", an.mode, "decoder or latent")->capture_default_str();
  cmd_an->add_option("--out", an.out, "Report directory")->required();

  SteerArgs st;
  auto* cmd_st = app.add_subcommand("steer-vector", "Build behavior steering vectors");
  cmd_st->add_option("--sae", st.sae, "SAE checkpoint directory")->required();
  cmd_st->add_option("--activations", st.activations, "Activation set directory")->required();
  cmd_st->add_option("--behaviors", st.behaviors, "Comma-separated behaviors")->capture_default_str();
  cmd_st->add_option("--topk", st.topk, "Top-active channels per behavior")->capture_default_str();
  cmd_st->add_option("--overlap-ratio", st.overlap_ratio, "Exclusivity threshold")->capture_default_str();
  cmd_st->add_option("--alphas", st.alphas, "Intervention strengths recorded for the adapter")
      ->delimiter(',')
      ->capture_default_str();
  cmd_st->add_option("--out", st.out, "Output directory")->required();

  ConfidenceArgs cf;
  auto* cmd_cf = app.add_subcommand("discover-confidence", "Entropy-minimising search for confidence vectors");
  cmd_cf->add_option("--head", cf.head, "Readout head directory")->required();
  cmd_cf->add_option("--sae", cf.sae, "SAE checkpoint directory")->required();
  cmd_cf->add_option("--activations", cf.activations, "Activation set directory")->required();
  cmd_cf->add_option("--iters", cf.config.iters, "Iterations")->capture_default_str();
  cmd_cf->add_option("--lr", cf.config.learning_rate, "Peak learning rate")->capture_default_str();
  cmd_cf->add_option("--batch", cf.config.batch_size, "Batch size")->capture_default_str();
  cmd_cf->add_option("--k", cf.k, "Top-scoring columns to export")->capture_default_str();
  cmd_cf->add_flag("--fit-coefficients,!--no-fit-coefficients", cf.fit, "Fit combination coefficients")
      ->capture_default_str();
  cmd_cf->add_option("--out", cf.out, "Output directory")->required();

  SynthArgs sy;
  auto* cmd_sy = app.add_subcommand("synth-bench", "Dictionary-recovery benchmark on synthetic data");
  auto& sc = sy.config;
  cmd_sy->add_option("--d", sc.d, "Ambient dimension")->capture_default_str();
  cmd_sy->add_option("--m", sc.m, "Dictionary size")->capture_default_str();
  cmd_sy->add_option("--k", sc.k, "Nonzeros per code")->capture_default_str();
  cmd_sy->add_option("--alpha-min", sc.alpha_min, "Smallest coefficient magnitude")->capture_default_str();
  cmd_sy->add_option("--alpha-max-ratio", sc.alpha_max_ratio, "Largest / smallest magnitude")->capture_default_str();
  cmd_sy->add_flag("--unsigned", sy.unsigned_codes, "Draw only positive coefficients");
  cmd_sy->add_option("--noise", sc.noise_bound, "Noise ball radius")->capture_default_str();
  cmd_sy->add_option("--n", sc.n_samples, "Samples")->capture_default_str();
  cmd_sy->add_option("--target-mu", sc.target_mu, "Dictionary incoherence bound")->capture_default_str();
  cmd_sy->add_flag("--orthogonalize", sc.orthogonalize, "Orthonormalise atoms when m <= d");
  cmd_sy->add_option("--D", sc.hidden_dim, "SAE width (0: D = m)")->capture_default_str();
  add_train_options(cmd_sy, sc.train, sy.l0_ste);
  cmd_sy->add_option("--out", sy.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail({2, "usage", e.what()});
  }

  try {
    parallel::set_num_threads(g.threads);
    if (cmd_seg->parsed()) run_segment(g, seg);
    else if (cmd_train->parsed()) run_train_sae(g, tr);
    else if (cmd_an->parsed()) run_analyze(g, an);
    else if (cmd_st->parsed()) run_steer_vector(g, st);
    else if (cmd_cf->parsed()) run_discover_confidence(g, cf);
    else if (cmd_sy->parsed()) run_synth_bench(g, sy);
  } catch (const CliError& e) {
    return fail(e);
  } catch (const Error& e) {
    return fail({1, e.kind(), e.what()});
  } catch (const std::exception& e) {
    return fail({1, "internal", e.what()});
  }
  return 0;
}
