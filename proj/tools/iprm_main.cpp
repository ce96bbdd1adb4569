// iprm: score, rerank, train and verify implicit process reward models over
// dual log-probability traces and enumerable toy models.
//
// Every subcommand is a deterministic function of its inputs, flags and
// seed; running twice writes byte-identical output. "-" as an output path
// means stdout.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "iprm/bon.hpp"
#include "iprm/cost.hpp"
#include "iprm/enumeration.hpp"
#include "iprm/errors.hpp"
#include "iprm/io.hpp"
#include "iprm/mcts.hpp"
#include "iprm/objectives.hpp"
#include "iprm/rng.hpp"
#include "iprm/scoring.hpp"
#include "iprm/tabular_lm.hpp"

namespace {

using namespace iprm;

void emit(const std::string& out_path, const std::string& content) {
  if (out_path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    write_file(out_path, content);
  }
}

struct ScoringFlags {
  double beta = 0.05;
  std::string agg = "min";
  bool no_ref = false;
  bool strict = false;

  ScoringConfig config() const {
    return ScoringConfig{beta, parse_aggregation(agg),
                         no_ref ? RefMode::ref_free : RefMode::with_ref};
  }
};

void add_scoring_flags(CLI::App* cmd, ScoringFlags& flags) {
  cmd->add_option("--beta", flags.beta, "Reward temperature")->capture_default_str();
  cmd->add_option("--agg", flags.agg, "Response aggregation: min|sum|last|mean")
      ->capture_default_str();
  cmd->add_flag("--no-ref", flags.no_ref,
                "Ref-free scoring: treat every reference log-probability as 0");
  cmd->add_flag("--strict", flags.strict, "Abort on the first bad record");
}

// Scores a trace file; bad records are reported on stderr unless --strict.
BatchResult load_and_score(const std::string& trace_path, const ScoringFlags& flags) {
  BatchResult batch;
  if (flags.strict) {
    const auto trajectories = read_trace(trace_path);
    batch = score_trace_batch(trajectories, flags.config(), /*strict=*/true);
  } else {
    auto parsed = read_trace_lenient(trace_path);
    batch = score_trace_batch(parsed.records, flags.config(), /*strict=*/false);
    for (const std::string& err : parsed.errors) std::cerr << "skipped: " << err << "\n";
  }
  for (const BatchIssue& issue : batch.issues)
    std::cerr << "skipped '" << issue.trajectory_id << "': " << issue.message << "\n";
  return batch;
}

std::vector<CandidateGroup> score_and_group(const std::string& trace_path,
                                            const ScoringFlags& flags) {
  const BatchResult batch = load_and_score(trace_path, flags);
  std::vector<ScoredResponse> responses;
  responses.reserve(batch.scored.size());
  for (const ScoredTrajectory& st : batch.scored) responses.push_back(st.response);
  return group_by_problem(responses);
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma - start);
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw DomainError(std::string(what) + ": bad integer '" + item + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma - start);
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw DomainError(std::string(what) + ": bad number '" + item + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

int run_score(const std::string& trace_path, const ScoringFlags& flags,
              const std::string& out_path) {
  const BatchResult batch = load_and_score(trace_path, flags);
  std::string content;
  for (const ScoredTrajectory& st : batch.scored) {
    content += to_json_line(st);
    content += '\n';
  }
  emit(out_path, content);
  return 0;
}

int run_rank(const std::string& trace_path, const ScoringFlags& flags, int n,
             const std::string& out_path) {
  const auto groups = score_and_group(trace_path, flags);
  std::string content;
  for (const CandidateGroup& group : groups) {
    const int pool = n <= 0 ? static_cast<int>(group.candidates.size())
                            : std::min(n, static_cast<int>(group.candidates.size()));
    const ScoredResponse& pick = best_of_n(group, pool);
    content += "{\"problem_id\":\"" + group.problem_id + "\",";
    content += "\"selected_id\":\"" + pick.id + "\",";
    content += "\"score\":" + format_double(pick.score);
    if (pick.answer) content += ",\"answer\":\"" + *pick.answer + "\"";
    if (pick.correct) content += std::string(",\"correct\":") + (*pick.correct ? "true" : "false");
    content += "}\n";
  }
  emit(out_path, content);
  return 0;
}

int run_vote(const std::string& trace_path, const ScoringFlags& flags, int n,
             const std::string& vote_mode, const std::string& out_path) {
  const VoteMode mode = parse_vote_mode(vote_mode);
  const auto groups = score_and_group(trace_path, flags);
  std::string content;
  for (const CandidateGroup& group : groups) {
    const int pool = n <= 0 ? static_cast<int>(group.candidates.size())
                            : std::min(n, static_cast<int>(group.candidates.size()));
    const std::string answer = weighted_vote(group, pool, mode);
    content += "{\"problem_id\":\"" + group.problem_id + "\",";
    content += "\"answer\":\"" + answer + "\"";
    bool known = false, correct = false;
    for (const ScoredResponse& c : group.candidates)
      if (c.answer && *c.answer == answer && c.correct) {
        known = true;
        correct = correct || *c.correct;
      }
    if (known) content += std::string(",\"correct\":") + (correct ? "true" : "false");
    content += "}\n";
  }
  emit(out_path, content);
  return 0;
}

int run_eval(const std::string& trace_path, const ScoringFlags& flags, const std::string& n_grid,
             const std::string& selection, const std::string& vote_mode,
             const std::string& out_path) {
  const auto groups = score_and_group(trace_path, flags);
  const auto grid = parse_int_list(n_grid, "--n-grid");
  const EvalReport report =
      evaluate(groups, grid, parse_selection_kind(selection), parse_vote_mode(vote_mode));
  emit(out_path, to_json_line(report) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainCli {
  std::string data_path;
  std::string step_labels_path;
  std::string init_ckpt;
  std::string ref_ckpt;
  int vocab = 4;
  int horizon = 4;
  std::string objective = "ce";
  double beta = 0.05;
  double lr = 0.05;
  int epochs = 100;
  int batch = 0;
  std::string optimizer = "adam";
  std::string balance_mode = "none";
  std::uint64_t seed = 0;
  std::string out_ckpt;
  std::string out_report = "-";
};

int run_train(const TrainCli& cli) {
  TrainConfig cfg;
  cfg.objective = parse_objective(cli.objective);
  cfg.beta = cli.beta;
  cfg.learning_rate = cli.lr;
  cfg.epochs = cli.epochs;
  cfg.batch_size = cli.batch;
  cfg.seed = cli.seed;
  cfg.optimizer = parse_optimizer(cli.optimizer);
  cfg.balancing = parse_balancing(cli.balance_mode);

  // Policy init: checkpoint if given, else a seeded random model. The
  // reference defaults to the (frozen) initial policy.
  TabularLM policy = cli.init_ckpt.empty()
                         ? TabularLM::random(cli.vocab, cli.horizon, derive_seed(cli.seed, 0x1417))
                         : read_checkpoint(cli.init_ckpt).model;
  TabularLM ref = cli.ref_ckpt.empty() ? policy : read_checkpoint(cli.ref_ckpt).model;

  const auto trajectories = read_trace(cli.data_path);
  Dataset data;
  if (cfg.objective == Objective::step_kto) {
    if (cli.step_labels_path.empty())
      throw ConfigError("train: --objective step-kto requires --step-labels");
    std::map<std::string, AnnotationRecord> by_id;
    for (AnnotationRecord& rec : read_annotations(cli.step_labels_path))
      by_id.emplace(rec.id, std::move(rec));
    for (const Trajectory& traj : trajectories) {
      const auto it = by_id.find(traj.id);
      if (it == by_id.end())
        throw ConfigError("train: no step labels for trajectory '" + traj.id + "'");
      StepLabeledExample ex;
      ex.traj = to_toy_trajectory(traj, policy.vocab());
      ex.labels.reserve(it->second.annotation.labels.size());
      // Hard 0/1 and soft fractions both threshold at 1/2.
      for (double l : it->second.annotation.labels) ex.labels.push_back(l >= 0.5 ? 1 : -1);
      data.step_labeled.push_back(std::move(ex));
    }
  } else {
    for (const Trajectory& traj : trajectories) {
      if (!traj.correct)
        throw ConfigError("train: trajectory '" + traj.id + "' lacks the correct flag");
      data.outcomes.push_back({to_toy_trajectory(traj, policy.vocab()), *traj.correct ? 1 : 0});
    }
  }

  const TrainResult result = train(data, policy, ref, cfg);

  if (!cli.out_ckpt.empty()) {
    Checkpoint ckpt{kCheckpointVersion, result.policy, {}};
    ckpt.metadata["objective"] = to_string(cfg.objective);
    ckpt.metadata["beta"] = format_double(cfg.beta);
    ckpt.metadata["learning_rate"] = format_double(cfg.learning_rate);
    ckpt.metadata["epochs"] = std::to_string(cfg.epochs);
    ckpt.metadata["batch_size"] = std::to_string(cfg.batch_size);
    ckpt.metadata["optimizer"] = to_string(cfg.optimizer);
    if (cfg.optimizer == Optimizer::adam) {
      ckpt.metadata["adam_beta1"] = format_double(kAdamBeta1);
      ckpt.metadata["adam_beta2"] = format_double(kAdamBeta2);
      ckpt.metadata["adam_eps"] = format_double(kAdamEps);
    }
    ckpt.metadata["balancing"] = to_string(cfg.balancing);
    ckpt.metadata["seed"] = std::to_string(cfg.seed);
    write_checkpoint(ckpt, cli.out_ckpt);
  }
  emit(cli.out_report, train_report_json(result, cfg) + "\n");
  return 0;
}

int run_annotate(const std::string& trace_path, const std::string& policy_ckpt,
                 const std::string& task_desc, int k, const std::string& mode_name,
                 std::uint64_t seed, const std::string& out_path) {
  const TabularLM policy = read_checkpoint(policy_ckpt).model;
  const ToyTask task = ToyTask::parse(task_desc);
  const LabelMode mode = parse_label_mode(mode_name);
  const auto trajectories = read_trace(trace_path);
  std::string content;
  for (const Trajectory& traj : trajectories) {
    const ToyTrajectory toy = to_toy_trajectory(traj, policy.vocab());
    // Per-record stream keyed by id, so annotations do not depend on the
    // record order in the file.
    const StepAnnotation ann =
        annotate_steps(toy, policy, task, k, mode, derive_seed(seed, fnv1a(traj.id)));
    content += to_json_line(AnnotationRecord{traj.id, traj.problem_id, ann});
    content += '\n';
  }
  emit(out_path, content);
  return 0;
}

// ---------------------------------------------------------------------------

int run_verify_prop1(int vocab, int horizon, const std::vector<double>& betas, int pairs,
                     int trials, std::uint64_t seed, const std::string& out_path) {
  std::string content;
  bool all_pass = true;
  for (int p = 0; p < pairs; ++p) {
    const TabularLM policy = TabularLM::random(vocab, horizon, derive_seed(seed, p, 0));
    const TabularLM ref = TabularLM::random(vocab, horizon, derive_seed(seed, p, 1));
    for (double beta : betas) {
      const IdentityReport identity =
          verify_q_identity(policy, ref, beta, trials, derive_seed(seed, p, 2));
      const RecursionReport recursion =
          verify_backward_recursion(policy, ref, beta, trials, derive_seed(seed, p, 3));
      all_pass = all_pass && identity.pass && recursion.pass;
      content += to_json_line(identity) + "\n";
      content += to_json_line(recursion) + "\n";
    }
  }
  emit(out_path, content);
  return all_pass ? 0 : 1;
}

int run_verify_prop2(int vocab, int horizon, const std::vector<double>& beta_grid,
                     double reward_beta, int pairs, int trials, std::uint64_t seed,
                     const std::string& out_path) {
  std::string content;
  bool all_pass = true;
  for (int p = 0; p < pairs; ++p) {
    const TabularLM policy = TabularLM::random(vocab, horizon, derive_seed(seed, p, 0));
    const TabularLM ref = TabularLM::random(vocab, horizon, derive_seed(seed, p, 1));
    const BoundsReport report =
        verify_q_bounds(policy, ref, beta_grid, trials, derive_seed(seed, p, 2), reward_beta);
    all_pass = all_pass && report.pass;
    content += to_json_line(report) + "\n";
  }
  emit(out_path, content);
  return all_pass ? 0 : 1;
}

int run_flops(const CostConfig& cfg, const std::string& responses_grid,
              const std::string& out_path) {
  std::vector<std::int64_t> grid;
  for (int r : parse_int_list(responses_grid, "--responses-grid")) grid.push_back(r);
  emit(out_path, to_tsv(comparison_table(cfg, grid)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"implicit process reward model toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file (flags take precedence)");

  std::string trace_path, out_path = "-";
  ScoringFlags scoring;
  int n = 0;
  std::string vote_mode = "weighted-sum";
  std::string n_grid = "1,2,4,8";
  std::string selection = "bon";

  auto* score_cmd = app.add_subcommand("score", "Score a trace file response by response");
  score_cmd->add_option("--trace", trace_path, "Line-delimited trace file")->required();
  score_cmd->add_option("--out", out_path, "Output path or -")->capture_default_str();
  add_scoring_flags(score_cmd, scoring);

  auto* rank_cmd = app.add_subcommand("rank", "Best-of-N selection per problem");
  rank_cmd->add_option("--trace", trace_path)->required();
  rank_cmd->add_option("--n", n, "Pool size (0: all candidates)")->capture_default_str();
  rank_cmd->add_option("--out", out_path)->capture_default_str();
  add_scoring_flags(rank_cmd, scoring);

  auto* vote_cmd = app.add_subcommand("vote", "Weighted majority vote per problem");
  vote_cmd->add_option("--trace", trace_path)->required();
  vote_cmd->add_option("--n", n, "Pool size (0: all candidates)")->capture_default_str();
  vote_cmd->add_option("--vote", vote_mode, "weighted-sum|count|max")->capture_default_str();
  vote_cmd->add_option("--out", out_path)->capture_default_str();
  add_scoring_flags(vote_cmd, scoring);

  auto* eval_cmd = app.add_subcommand("eval", "Selection accuracy over an n grid");
  eval_cmd->add_option("--trace", trace_path)->required();
  eval_cmd->add_option("--n-grid", n_grid, "Comma-separated pool sizes")->capture_default_str();
  eval_cmd->add_option("--selection", selection, "bon|vote")->capture_default_str();
  eval_cmd->add_option("--vote", vote_mode, "weighted-sum|count|max")->capture_default_str();
  eval_cmd->add_option("--out", out_path)->capture_default_str();
  add_scoring_flags(eval_cmd, scoring);

  TrainCli train_cli;
  auto* train_cmd = app.add_subcommand("train", "Train a toy implicit reward model");
  train_cmd->add_option("--data", train_cli.data_path, "Trace file with correct flags")->required();
  train_cmd->add_option("--step-labels", train_cli.step_labels_path,
                        "Annotation file (step-kto only)");
  train_cmd->add_option("--init", train_cli.init_ckpt, "Initial policy checkpoint");
  train_cmd->add_option("--ref", train_cli.ref_ckpt,
                        "Reference checkpoint (default: the initial policy)");
  train_cmd->add_option("--vocab", train_cli.vocab, "Vocabulary size when no --init")
      ->capture_default_str();
  train_cmd->add_option("--horizon", train_cli.horizon, "Horizon when no --init")
      ->capture_default_str();
  train_cmd->add_option("--objective", train_cli.objective, "ce|dpo|step-kto")
      ->capture_default_str();
  train_cmd->add_option("--beta", train_cli.beta)->capture_default_str();
  train_cmd->add_option("--lr", train_cli.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", train_cli.epochs)->capture_default_str();
  train_cmd->add_option("--batch", train_cli.batch, "Batch size (0: full batch)")
      ->capture_default_str();
  train_cmd->add_option("--optimizer", train_cli.optimizer, "adam|sgd")->capture_default_str();
  train_cmd->add_option("--balance", train_cli.balance_mode, "none|dataset|instruction")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_cli.seed)->capture_default_str();
  train_cmd->add_option("--out-ckpt", train_cli.out_ckpt, "Trained checkpoint path");
  train_cmd->add_option("--out", train_cli.out_report, "Training report path or -")
      ->capture_default_str();

  std::string policy_ckpt, task_desc = "last-token-eq:0", mode_name = "hard";
  int k = 8;
  std::uint64_t seed = 0;
  auto* annotate_cmd = app.add_subcommand("annotate", "Rollout-based step labels on a toy model");
  annotate_cmd->add_option("--trace", trace_path)->required();
  annotate_cmd->add_option("--policy", policy_ckpt, "Policy checkpoint")->required();
  annotate_cmd->add_option("--task", task_desc, "last-token-eq:<v> | token-sum-mod:<m>:<r>")
      ->capture_default_str();
  annotate_cmd->add_option("--k", k, "Rollouts per step")->capture_default_str();
  annotate_cmd->add_option("--mode", mode_name, "hard|soft")->capture_default_str();
  annotate_cmd->add_option("--seed", seed)->capture_default_str();
  annotate_cmd->add_option("--out", out_path)->capture_default_str();

  int vocab = 5, horizon = 6, pairs = 5, trials = 21;
  std::vector<double> betas{0.05};
  std::string beta_grid_csv = "0.001,0.05,0.1,1,10,1000";
  double reward_beta = 1.0;
  auto* p1_cmd = app.add_subcommand(
      "verify-prop1", "Partial-sum Q against the enumerated exponential average");
  p1_cmd->add_option("--vocab", vocab)->capture_default_str();
  p1_cmd->add_option("--horizon", horizon)->capture_default_str();
  p1_cmd->add_option("--beta", betas, "Temperature (repeatable)")->capture_default_str();
  p1_cmd->add_option("--pairs", pairs, "Seeded (policy, ref) pairs")->capture_default_str();
  p1_cmd->add_option("--trials", trials, "Random prefixes per pair")->capture_default_str();
  p1_cmd->add_option("--seed", seed)->capture_default_str();
  p1_cmd->add_option("--out", out_path)->capture_default_str();

  auto* p2_cmd =
      app.add_subcommand("verify-prop2", "Mean/max bounds and temperature limits of Q");
  p2_cmd->add_option("--vocab", vocab)->capture_default_str();
  p2_cmd->add_option("--horizon", horizon)->capture_default_str();
  p2_cmd->add_option("--beta-grid", beta_grid_csv, "Comma-separated temperatures")
      ->capture_default_str();
  p2_cmd->add_option("--reward-beta", reward_beta, "Fixed reward parameterization")
      ->capture_default_str();
  p2_cmd->add_option("--pairs", pairs)->capture_default_str();
  p2_cmd->add_option("--trials", trials)->capture_default_str();
  p2_cmd->add_option("--seed", seed)->capture_default_str();
  p2_cmd->add_option("--out", out_path)->capture_default_str();

  CostConfig cost;
  cost.gen_params = 8e9;
  cost.rm_params = 8e9;
  cost.tokens_per_response = 512;
  cost.steps_per_response = 10;
  cost.rollouts_per_step = 8;
  cost.instructions = 33000;
  cost.responses_per_instruction = 8;
  std::string responses_grid = "1,2,4,8";
  auto* flops_cmd = app.add_subcommand("flops", "Data-collection and training FLOPs comparison");
  flops_cmd->add_option("--gen-params", cost.gen_params, "Generator parameters")
      ->capture_default_str();
  flops_cmd->add_option("--rm-params", cost.rm_params, "Reward model parameters")
      ->capture_default_str();
  flops_cmd->add_option("--tokens", cost.tokens_per_response, "Mean tokens per response")
      ->capture_default_str();
  flops_cmd->add_option("--steps", cost.steps_per_response, "Steps per response")
      ->capture_default_str();
  flops_cmd->add_option("--rollouts", cost.rollouts_per_step, "Lookahead rollouts per step")
      ->capture_default_str();
  flops_cmd->add_option("--instructions", cost.instructions)->capture_default_str();
  flops_cmd->add_option("--responses", cost.responses_per_instruction)->capture_default_str();
  flops_cmd->add_option("--c-inf", cost.inference_flops_per_token_param,
                        "Inference FLOPs per token per parameter")
      ->capture_default_str();
  flops_cmd->add_option("--c-train", cost.training_flops_per_token_param,
                        "Training FLOPs per token per parameter")
      ->capture_default_str();
  flops_cmd->add_option("--epochs", cost.epochs)->capture_default_str();
  flops_cmd->add_option("--responses-grid", responses_grid, "Comma-separated sweep of R")
      ->capture_default_str();
  flops_cmd->add_option("--out", out_path)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (score_cmd->parsed()) return run_score(trace_path, scoring, out_path);
    if (rank_cmd->parsed()) return run_rank(trace_path, scoring, n, out_path);
    if (vote_cmd->parsed()) return run_vote(trace_path, scoring, n, vote_mode, out_path);
    if (eval_cmd->parsed())
      return run_eval(trace_path, scoring, n_grid, selection, vote_mode, out_path);
    if (train_cmd->parsed()) return run_train(train_cli);
    if (annotate_cmd->parsed())
      return run_annotate(trace_path, policy_ckpt, task_desc, k, mode_name, seed, out_path);
    if (p1_cmd->parsed())
      return run_verify_prop1(vocab, horizon, betas, pairs, trials, seed, out_path);
    if (p2_cmd->parsed())
      return run_verify_prop2(vocab, horizon, parse_double_list(beta_grid_csv, "--beta-grid"),
                              reward_beta, pairs, trials, seed, out_path);
    if (flops_cmd->parsed()) return run_flops(cost, responses_grid, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
