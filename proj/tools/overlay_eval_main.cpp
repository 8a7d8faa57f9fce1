#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "overlay/datamodel/evaluate.hpp"
#include "overlay/datamodel/io.hpp"
#include "overlay/datamodel/types.hpp"
#include "overlay/metrics/render.hpp"
#include "overlay/metrics/report.hpp"
#include "overlay/moe/forward.hpp"
#include "overlay/moe/params.hpp"
#include "overlay/moe/synth.hpp"
#include "overlay/numerics/grad_check.hpp"
#include "overlay/numerics/ops.hpp"
#include "overlay/numerics/rng.hpp"
#include "overlay/training/dataset.hpp"
#include "overlay/training/trainer.hpp"

namespace {

using namespace overlay;

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;   // validation or acceptance failure
constexpr int kExitUsage = 2;  // I/O or usage error

// Failures that already know their exit code; everything else that escapes a
// subcommand is treated as a data problem (exit 1).
struct CliFailure {
  int code;
  std::string message;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliFailure{kExitUsage, "cannot open " + path};
  return in;
}

void write_output(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw CliFailure{kExitUsage, "cannot write " + path};
}

// Shared model-geometry flags. Subcommands that load a checkpoint take its
// embedded config instead.
struct ConfigFlags {
  moe::ModelConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--d", cfg.d, "Feature width");
    cmd->add_option("--patches", cfg.n_patches, "Visual patches per clip");
    cmd->add_option("--k", cfg.k_select, "Patches kept by relevance selection");
    cmd->add_option("--depth", cfg.backbone_depth, "Backbone layer count");
    cmd->add_option("--insert-layer", cfg.insert_layer,
                    "Backbone layers before the expert block");
    cmd->add_option("--hidden", cfg.expert_hidden, "Expert hidden width");
    cmd->add_option("--query-tokens", cfg.n_query_tokens,
                    "Question token count");
  }

  moe::ModelConfig validated() const {
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw CliFailure{kExitUsage, e.what()};
    }
    return cfg;
  }
};

// ---------------------------------------------------------------- validate

int run_validate(const std::string& samples_path) {
  std::ifstream in = open_input(samples_path);
  std::vector<data::Issue> issues;
  const auto samples = data::parse_samples_lenient(in, issues);

  std::size_t violations = 0;
  for (const data::Issue& issue : issues) {
    if (issue.warning) {
      std::fprintf(stderr, "warning line %zu field %s: %s\n", issue.line,
                   issue.field.empty() ? "-" : issue.field.c_str(),
                   issue.message.c_str());
      continue;
    }
    ++violations;
    if (violations <= 20) {
      // Violation messages already carry their line and field.
      std::printf("%s\n", issue.message.c_str());
    }
  }
  if (violations > 0) {
    std::printf("%zu violations\n", violations);
    return kExitFail;
  }
  std::printf("%zu samples OK\n", samples.size());
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string samples_path;
  std::string out_path;
  std::string model_id = "sim";
  std::uint64_t seed = 42;
  double p_correct = 1.0;
  double p_halluc = 0.0;
  bool with_probs = true;
};

int run_simulate(const SimulateOpts& o) {
  std::ifstream in = open_input(o.samples_path);
  const auto samples = data::parse_samples(in);

  data::BehaviorProfile profile;
  profile.p_correct_free = o.p_correct;
  profile.p_correct_congruent = o.p_correct;
  profile.p_hallucinate = o.p_halluc;
  // Under contradictory text the planted option takes p_halluc first; the
  // truth keeps at most the remainder.
  profile.p_correct_contradictory = std::min(o.p_correct, 1.0 - o.p_halluc);

  auto records = data::synthesize_responses(samples, profile, o.model_id,
                                            o.seed);
  if (!o.with_probs) {
    for (auto& r : records) r.option_probs.reset();
  }
  write_output(o.out_path, data::serialize_records(records));
  std::printf("wrote %zu responses to %s\n", records.size(),
              o.out_path.c_str());
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
  std::string samples_path;
  std::string responses_path;
  std::string model_id = "sim";
  std::string format = "json";
  std::string out_path;  // empty: stdout
};

int run_eval(const EvalOpts& o) {
  std::ifstream samples_in = open_input(o.samples_path);
  std::ifstream responses_in = open_input(o.responses_path);
  const auto samples = data::parse_samples(samples_in);
  const auto records = data::parse_records(responses_in);

  const data::JoinResult joined = data::join(samples, records, o.model_id);
  if (joined.coverage.evaluated == 0) {
    std::fprintf(stderr,
                 "warning: no responses for model '%s'; metrics undefined\n",
                 o.model_id.c_str());
  } else if (joined.coverage.missing > 0) {
    std::fprintf(stderr, "warning: %zu of %zu samples have no response\n",
                 joined.coverage.missing, joined.coverage.total_samples);
  }

  const auto groups = data::group_conditions(joined.evaluated);
  const metrics::MetricReport report =
      metrics::full_report(joined.evaluated, groups);
  const std::string rendered = o.format == "table"
                                   ? metrics::to_table(report)
                                   : metrics::to_json(report);
  if (o.out_path.empty()) {
    std::fputs(rendered.c_str(), stdout);
  } else {
    write_output(o.out_path, rendered);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- moe-demo

struct DemoOpts {
  ConfigFlags config;
  std::string conflict = "none";
  double intensity = 1.0;
  std::uint64_t seed = 42;
  std::string checkpoint_path;
};

int run_moe_demo(const DemoOpts& o) {
  moe::ModelConfig cfg;
  moe::MoEParams params;
  if (o.checkpoint_path.empty()) {
    cfg = o.config.validated();
    cfg.seed = o.seed;
    params = moe::init_params(cfg);
  } else {
    if (!std::filesystem::exists(o.checkpoint_path)) {
      throw CliFailure{kExitUsage, "cannot open " + o.checkpoint_path};
    }
    const moe::Checkpoint ckpt = moe::load_checkpoint(o.checkpoint_path);
    cfg = ckpt.config;
    params = ckpt.params;
  }

  moe::ConflictSpec conflict;
  if (o.conflict != "none") {
    conflict.dimension = data::dimension_from_string(o.conflict);
    conflict.intensity = o.intensity;
  }
  const auto [f_vis, f_ocr] = moe::synth_features(cfg, o.seed, conflict);
  const num::Mat query = moe::synth_query_tokens(cfg, o.seed);
  const moe::ForwardResult r = moe::forward(cfg, params, f_vis, f_ocr, query);

  double c_min = 1.0;
  double c_sum = 0.0;
  for (const moe::TokenRouting& tok : r.trace.tokens) {
    c_min = std::min(c_min, tok.c);
    c_sum += tok.c;
  }
  const double n_tokens = static_cast<double>(r.trace.tokens.size());
  const num::Vec cls = num::softmax(r.pooled_video_logits);

  std::printf("conflict %s intensity %.3f tokens %zu\n", o.conflict.c_str(),
              conflict.intensity, r.trace.tokens.size());
  std::printf("consistency min=%.6f mean=%.6f\n", c_min, c_sum / n_tokens);
  std::printf("cls_dist temporal=%.6f action=%.6f object=%.6f spatial=%.6f\n",
              cls[0], cls[1], cls[2], cls[3]);
  std::printf(
      "expert_share temporal=%.6f action=%.6f object=%.6f spatial=%.6f\n",
      r.trace.expert_counts[0] / n_tokens, r.trace.expert_counts[1] / n_tokens,
      r.trace.expert_counts[2] / n_tokens, r.trace.expert_counts[3] / n_tokens);
  std::printf("gate_only %s\n", r.trace.gate_only ? "true" : "false");
  return kExitOk;
}

// --------------------------------------------------------------- train-toy

struct TrainOpts {
  ConfigFlags config;
  std::uint64_t seed = 42;
  double lr = 1e-5;
  std::size_t steps = 200;
  std::size_t warmup = 20;
  std::size_t batch = 32;
  double weight_decay = 0.01;
  train::LossWeights weights;
  std::size_t train_n = 500;
  std::size_t eval_n = 200;
  double intensity = 1.0;
  std::string out_path;
  std::string history_path;
};

int run_train_toy(const TrainOpts& o) {
  moe::ModelConfig cfg = o.config.validated();
  cfg.seed = o.seed;

  const auto train_data = train::gen_synthetic_dataset(
      o.train_n, cfg, num::derive_seed(o.seed, "cli.train-data"), o.intensity);
  const auto eval_data = train::gen_synthetic_dataset(
      o.eval_n, cfg, num::derive_seed(o.seed, "cli.eval-data"), o.intensity);
  const moe::MoEParams init = moe::init_params(cfg);

  moe::MoEParams params = init;
  std::vector<train::StepStats> history;
  if (o.steps > 0) {
    train::TrainConfig tc;
    tc.learning_rate = o.lr;
    tc.warmup_steps = o.warmup;
    tc.weight_decay = o.weight_decay;
    tc.seed = o.seed;
    tc.batch_size = o.batch;
    tc.max_steps = o.steps;
    tc.weights = o.weights;
    train::TrainResult result = train::train(tc, cfg, init, train_data);
    params = std::move(result.params);
    history = std::move(result.history);
  }

  const train::EvalStats stats = train::evaluate(cfg, params, eval_data);
  std::printf("train examples=%zu eval examples=%zu steps=%zu\n",
              train_data.size(), eval_data.size(), history.size());
  std::printf(
      "eval classifier_accuracy=%.6f expert_agreement=%.6f "
      "max_expert_share=%.6f\n",
      stats.classifier_accuracy, stats.expert_agreement,
      stats.max_expert_share);

  moe::save_checkpoint(o.out_path, cfg, params);
  std::printf("wrote checkpoint to %s\n", o.out_path.c_str());
  if (!o.history_path.empty()) {
    write_output(o.history_path, train::history_to_lines(history));
  }
  return kExitOk;
}

// --------------------------------------------------------------- gradcheck

struct GradOpts {
  ConfigFlags config;
  std::uint64_t seed = 42;
  double h = 1e-5;
  double intensity = 0.7;
  std::string corrupt_leaf;
};

int run_gradcheck(const GradOpts& o) {
  moe::ModelConfig cfg = o.config.validated();
  cfg.seed = o.seed;

  const auto data = train::gen_synthetic_dataset(
      1, cfg, num::derive_seed(o.seed, "cli.gradcheck"), o.intensity);
  const moe::MoEParams params = moe::init_params(cfg);
  num::Tape tape;
  const moe::TapeParams tp = moe::register_params(tape, params);
  const train::ExampleLoss loss = train::build_example_loss(
      tape, cfg, tp, data[0], train::LossWeights{});
  const num::GradReport report =
      num::grad_check(tape, loss.total, o.h, 1e-6, 1e-4, o.corrupt_leaf);

  for (const num::LeafCheck& leaf : report.leaves) {
    std::printf("leaf %-24s worst=%.3e %s\n", leaf.name.c_str(),
                leaf.max_error, leaf.pass ? "ok" : "FAIL");
  }
  std::printf("gradcheck entries=%zu worst=%.3e %s\n", report.entries_checked,
              report.worst_error, report.pass ? "pass" : "fail");
  return report.pass ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-overlay hallucination benchmark toolkit"};
  // Long-form help only: gradcheck exposes the finite-difference step as
  // --h, which CLI11 would otherwise reserve for the short help alias.
  app.set_help_flag("--help", "Print help and exit");
  app.require_subcommand(1);

  std::string validate_samples;
  auto* validate = app.add_subcommand(
      "validate", "Check a samples file against the schema");
  validate->add_option("--samples", validate_samples, "Samples file (JSONL)")
      ->required();

  SimulateOpts sim;
  auto* simulate = app.add_subcommand(
      "simulate", "Synthesize model responses for a samples file");
  simulate->add_option("--samples", sim.samples_path, "Samples file (JSONL)")
      ->required();
  simulate->add_option("--out", sim.out_path, "Responses output path")
      ->required();
  simulate->add_option("--model-id", sim.model_id, "Model id to stamp");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--p-correct", sim.p_correct,
                       "P(ground truth) without contradictory text")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--p-halluc", sim.p_halluc,
                       "P(planted option) under contradictory text")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_flag("!--no-probs", sim.with_probs,
                     "Omit option probabilities from the output");

  EvalOpts ev;
  auto* eval = app.add_subcommand(
      "eval", "Join samples with responses and report all metrics");
  eval->add_option("--samples", ev.samples_path, "Samples file (JSONL)")
      ->required();
  eval->add_option("--responses", ev.responses_path, "Responses file (JSONL)")
      ->required();
  eval->add_option("--model-id", ev.model_id, "Model id to evaluate");
  eval->add_option("--format", ev.format, "Report format")
      ->check(CLI::IsMember({"json", "table"}));
  eval->add_option("--out", ev.out_path, "Report path (default stdout)");

  DemoOpts demo;
  auto* moe_demo = app.add_subcommand(
      "moe-demo", "Run the expert block on synthetic features and print the "
                  "routing summary");
  demo.config.attach(moe_demo);
  moe_demo->add_option("--conflict", demo.conflict, "Planted conflict")
      ->check(CLI::IsMember({"none", "temporal", "action", "object",
                             "spatial"}));
  moe_demo->add_option("--intensity", demo.intensity, "Conflict strength")
      ->check(CLI::Range(0.0, 1.0));
  moe_demo->add_option("--seed", demo.seed, "Random seed");
  moe_demo->add_option("--checkpoint", demo.checkpoint_path,
                       "Load parameters from a checkpoint instead of init");

  TrainOpts tr;
  auto* train_toy = app.add_subcommand(
      "train-toy", "Train on synthetic conflicts and write a checkpoint");
  tr.config.attach(train_toy);
  train_toy->add_option("--seed", tr.seed, "Random seed");
  train_toy->add_option("--lr", tr.lr, "Learning rate")
      ->check(CLI::NonNegativeNumber);
  train_toy->add_option("--steps", tr.steps,
                        "Optimizer steps (0: keep the initialization)");
  train_toy->add_option("--warmup", tr.warmup, "Linear warmup steps");
  train_toy->add_option("--batch", tr.batch, "Batch size");
  train_toy->add_option("--weight-decay", tr.weight_decay, "Decoupled decay")
      ->check(CLI::NonNegativeNumber);
  train_toy->add_option("--lambda-cls", tr.weights.lambda_cls,
                        "Classifier loss weight");
  train_toy->add_option("--lambda-sft", tr.weights.lambda_sft,
                        "Allocation loss weight");
  train_toy->add_option("--lambda-aux", tr.weights.lambda_aux,
                        "Balance loss weight");
  train_toy->add_option("--train-n", tr.train_n, "Training examples");
  train_toy->add_option("--eval-n", tr.eval_n, "Held-out examples");
  train_toy->add_option("--intensity", tr.intensity, "Conflict strength")
      ->check(CLI::Range(0.0, 1.0));
  train_toy->add_option("--out", tr.out_path, "Checkpoint output path")
      ->required();
  train_toy->add_option("--history", tr.history_path,
                        "Per-step loss history output path");

  GradOpts gc;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Compare analytic gradients against finite differences");
  // Small defaults keep the finite-difference sweep quick.
  gc.config.cfg = {.d = 8,
                   .n_patches = 6,
                   .k_select = 3,
                   .backbone_depth = 4,
                   .insert_layer = 2,
                   .expert_hidden = 6,
                   .n_query_tokens = 2,
                   .seed = 42};
  gc.config.attach(gradcheck);
  gradcheck->add_option("--seed", gc.seed, "Random seed");
  gradcheck->add_option("--h", gc.h, "Finite-difference step")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--intensity", gc.intensity, "Conflict strength")
      ->check(CLI::Range(0.0, 1.0));
  gradcheck->add_option("--corrupt", gc.corrupt_leaf,
                        "Perturb this leaf's analytic gradient (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return run_validate(validate_samples);
    if (simulate->parsed()) return run_simulate(sim);
    if (eval->parsed()) return run_eval(ev);
    if (moe_demo->parsed()) return run_moe_demo(demo);
    if (train_toy->parsed()) return run_train_toy(tr);
    if (gradcheck->parsed()) return run_gradcheck(gc);
  } catch (const CliFailure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const data::ParseError& e) {
    std::fprintf(stderr, "error line %zu field %s: %s\n", e.line(),
                 e.field().empty() ? "-" : e.field().c_str(), e.what());
    return kExitFail;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitUsage;
}
