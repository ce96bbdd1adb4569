#include "iprm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "iprm/errors.hpp"

namespace iprm {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void bad_field(const std::string& name, const std::string& why) {
  throw IoError("field '" + name + "': " + why);
}

const json& require_field(const json& obj, const std::string& name) {
  const auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) bad_field(name, "missing");
  return *it;
}

std::string get_string(const json& obj, const std::string& name) {
  const json& v = require_field(obj, name);
  if (!v.is_string()) bad_field(name, "expected a string");
  return v.get<std::string>();
}

double get_double(const json& v, const std::string& name) {
  if (!v.is_number()) bad_field(name, "expected a number");
  return v.get<double>();
}

std::vector<double> get_double_array(const json& obj, const std::string& name) {
  const json& v = require_field(obj, name);
  if (!v.is_array()) bad_field(name, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) out.push_back(get_double(e, name));
  return out;
}

std::vector<int> get_int_array(const json& obj, const std::string& name) {
  const json& v = require_field(obj, name);
  if (!v.is_array()) bad_field(name, "expected an array");
  std::vector<int> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number_integer()) bad_field(name, "expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

// Tokens written back as integers must parse to the same string; anything
// else stays a JSON string.
bool is_canonical_int(const std::string& s) {
  if (s.empty() || s.size() > 18) return false;
  std::size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  if (s[i] == '0' && s.size() > i + 1) return false;
  for (; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return !(s == "-0");
}

json tokens_to_json(const std::vector<std::string>& tokens) {
  json arr = json::array();
  for (const std::string& tok : tokens) {
    if (is_canonical_int(tok)) {
      long long v = 0;
      std::from_chars(tok.data(), tok.data() + tok.size(), v);
      arr.push_back(v);
    } else {
      arr.push_back(tok);
    }
  }
  return arr;
}

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

json trial_diff_to_json(const TrialDiff& d) {
  return json{{"trial", d.trial}, {"prefix_len", d.prefix_len}, {"abs_diff", d.abs_diff}};
}

TrialDiff trial_diff_from_json(const json& v) {
  TrialDiff d;
  d.trial = require_field(v, "trial").get<int>();
  d.prefix_len = require_field(v, "prefix_len").get<int>();
  d.abs_diff = get_double(require_field(v, "abs_diff"), "abs_diff");
  return d;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(line, line_no);
  }
}

}  // namespace

Trajectory trajectory_from_json_line(const std::string& line) {
  const json obj = parse_document(line, "trace record");
  if (!obj.is_object()) throw IoError("trace record: expected a JSON object");

  Trajectory traj;
  traj.id = get_string(obj, "id");
  traj.problem_id = get_string(obj, "problem_id");

  const json& tokens = require_field(obj, "tokens");
  if (!tokens.is_array()) bad_field("tokens", "expected an array");
  for (const json& tok : tokens) {
    if (tok.is_string())
      traj.tokens.push_back(tok.get<std::string>());
    else if (tok.is_number_integer())
      traj.tokens.push_back(std::to_string(tok.get<long long>()));
    else
      bad_field("tokens", "expected strings or integers");
  }

  traj.logp_policy = get_double_array(obj, "logp_policy");
  if (const auto it = obj.find("logp_ref"); it != obj.end() && !it->is_null())
    traj.logp_ref = get_double_array(obj, "logp_ref");
  traj.step_ends = get_int_array(obj, "step_ends");
  if (const auto it = obj.find("answer"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) bad_field("answer", "expected a string");
    traj.answer = it->get<std::string>();
  }
  if (const auto it = obj.find("correct"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) bad_field("correct", "expected a boolean");
    traj.correct = it->get<bool>();
  }

  validate(traj);
  return traj;
}

std::string to_json_line(const Trajectory& traj) {
  json obj;
  obj["id"] = traj.id;
  obj["problem_id"] = traj.problem_id;
  obj["tokens"] = tokens_to_json(traj.tokens);
  obj["logp_policy"] = traj.logp_policy;
  if (traj.logp_ref) obj["logp_ref"] = *traj.logp_ref;
  obj["step_ends"] = traj.step_ends;
  if (traj.answer) obj["answer"] = *traj.answer;
  if (traj.correct) obj["correct"] = *traj.correct;
  return obj.dump();
}

std::vector<Trajectory> read_trace(const std::filesystem::path& path) {
  std::vector<Trajectory> out;
  for_each_line(path, [&](const std::string& line, int line_no) {
    try {
      out.push_back(trajectory_from_json_line(line));
    } catch (const Error& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

TraceParseResult read_trace_lenient(const std::filesystem::path& path) {
  TraceParseResult result;
  for_each_line(path, [&](const std::string& line, int line_no) {
    try {
      result.records.push_back(trajectory_from_json_line(line));
    } catch (const Error& e) {
      result.errors.push_back(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return result;
}

void write_trace(std::span<const Trajectory> trajectories, const std::filesystem::path& path) {
  std::string content;
  for (const Trajectory& traj : trajectories) {
    content += to_json_line(traj);
    content += '\n';
  }
  write_file(path, content);
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json obj;
  obj["format_version"] = ckpt.format_version;
  obj["vocab_size"] = ckpt.model.vocab();
  obj["horizon"] = ckpt.model.horizon();
  obj["seed"] = ckpt.model.seed();
  obj["metadata"] = ckpt.metadata;
  obj["logits"] = std::vector<double>(ckpt.model.raw_logits().begin(), ckpt.model.raw_logits().end());
  write_file(path, obj.dump() + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const json obj = parse_document(read_file(path), "checkpoint");
  if (!obj.is_object()) throw IoError("checkpoint: expected a JSON object");
  const int version = require_field(obj, "format_version").get<int>();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version) +
                  " (expected " + std::to_string(kCheckpointVersion) + ")");
  const int vocab = require_field(obj, "vocab_size").get<int>();
  const int horizon = require_field(obj, "horizon").get<int>();
  const std::uint64_t seed = require_field(obj, "seed").get<std::uint64_t>();
  std::map<std::string, std::string> metadata;
  if (const auto it = obj.find("metadata"); it != obj.end() && !it->is_null())
    metadata = it->get<std::map<std::string, std::string>>();
  std::vector<double> logits = get_double_array(obj, "logits");
  try {
    return Checkpoint{version, TabularLM(vocab, horizon, std::move(logits), seed),
                      std::move(metadata)};
  } catch (const Error& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

std::string to_json_line(const ScoredTrajectory& scored) {
  json obj;
  obj["id"] = scored.response.id;
  obj["problem_id"] = scored.response.problem_id;
  obj["score"] = scored.response.score;
  if (scored.response.answer) obj["answer"] = *scored.response.answer;
  if (scored.response.correct) obj["correct"] = *scored.response.correct;
  obj["outcome"] = scored.steps.outcome;
  obj["q"] = scored.steps.q;
  obj["r_step"] = scored.steps.r_step;
  return obj.dump();
}

std::string to_json_line(const IdentityReport& report) {
  json obj;
  obj["kind"] = "q-identity";
  obj["beta"] = report.beta;
  obj["trials"] = report.trials;
  obj["tolerance"] = report.tolerance;
  obj["max_abs_diff"] = report.max_abs_diff;
  obj["worst"] = trial_diff_to_json(report.worst);
  obj["pass"] = report.pass;
  return obj.dump();
}

IdentityReport identity_report_from_json(const std::string& text) {
  const json obj = parse_document(text, "q-identity report");
  IdentityReport report;
  report.beta = get_double(require_field(obj, "beta"), "beta");
  report.trials = require_field(obj, "trials").get<int>();
  report.tolerance = get_double(require_field(obj, "tolerance"), "tolerance");
  report.max_abs_diff = get_double(require_field(obj, "max_abs_diff"), "max_abs_diff");
  report.worst = trial_diff_from_json(require_field(obj, "worst"));
  report.pass = require_field(obj, "pass").get<bool>();
  return report;
}

std::string to_json_line(const RecursionReport& report) {
  json obj;
  obj["kind"] = "backward-recursion";
  obj["beta"] = report.beta;
  obj["trials"] = report.trials;
  obj["tolerance"] = report.tolerance;
  obj["max_abs_diff"] = report.max_abs_diff;
  obj["worst"] = trial_diff_to_json(report.worst);
  obj["pass"] = report.pass;
  return obj.dump();
}

RecursionReport recursion_report_from_json(const std::string& text) {
  const json obj = parse_document(text, "backward-recursion report");
  RecursionReport report;
  report.beta = get_double(require_field(obj, "beta"), "beta");
  report.trials = require_field(obj, "trials").get<int>();
  report.tolerance = get_double(require_field(obj, "tolerance"), "tolerance");
  report.max_abs_diff = get_double(require_field(obj, "max_abs_diff"), "max_abs_diff");
  report.worst = trial_diff_from_json(require_field(obj, "worst"));
  report.pass = require_field(obj, "pass").get<bool>();
  return report;
}

std::string to_json_line(const BoundsReport& report) {
  json obj;
  obj["kind"] = "q-bounds";
  obj["beta_grid"] = report.beta_grid;
  obj["reward_beta"] = report.reward_beta;
  obj["trials"] = report.trials;
  obj["bound_tolerance"] = report.bound_tolerance;
  obj["limit_rtol"] = report.limit_rtol;
  obj["max_lower_violation"] = report.max_lower_violation;
  obj["max_upper_violation"] = report.max_upper_violation;
  obj["max_monotonicity_violation"] = report.max_monotonicity_violation;
  obj["max_low_beta_excess"] = report.max_low_beta_excess;
  obj["max_high_beta_excess"] = report.max_high_beta_excess;
  obj["worst_limit"] = trial_diff_to_json(report.worst_limit);
  obj["bounds_pass"] = report.bounds_pass;
  obj["monotonic_pass"] = report.monotonic_pass;
  obj["limits_pass"] = report.limits_pass;
  obj["pass"] = report.pass;
  return obj.dump();
}

BoundsReport bounds_report_from_json(const std::string& text) {
  const json obj = parse_document(text, "q-bounds report");
  BoundsReport report;
  report.beta_grid = get_double_array(obj, "beta_grid");
  report.reward_beta = get_double(require_field(obj, "reward_beta"), "reward_beta");
  report.trials = require_field(obj, "trials").get<int>();
  report.bound_tolerance = get_double(require_field(obj, "bound_tolerance"), "bound_tolerance");
  report.limit_rtol = get_double(require_field(obj, "limit_rtol"), "limit_rtol");
  report.max_lower_violation = get_double(require_field(obj, "max_lower_violation"), "max_lower_violation");
  report.max_upper_violation = get_double(require_field(obj, "max_upper_violation"), "max_upper_violation");
  report.max_monotonicity_violation =
      get_double(require_field(obj, "max_monotonicity_violation"), "max_monotonicity_violation");
  report.max_low_beta_excess = get_double(require_field(obj, "max_low_beta_excess"), "max_low_beta_excess");
  report.max_high_beta_excess = get_double(require_field(obj, "max_high_beta_excess"), "max_high_beta_excess");
  report.worst_limit = trial_diff_from_json(require_field(obj, "worst_limit"));
  report.bounds_pass = require_field(obj, "bounds_pass").get<bool>();
  report.monotonic_pass = require_field(obj, "monotonic_pass").get<bool>();
  report.limits_pass = require_field(obj, "limits_pass").get<bool>();
  report.pass = require_field(obj, "pass").get<bool>();
  return report;
}

std::string to_json_line(const EvalReport& report) {
  json obj;
  obj["selection"] = to_string(report.selection);
  if (report.selection == SelectionKind::vote) obj["vote_mode"] = to_string(report.vote_mode);
  obj["n_grid"] = report.n_grid;
  json accuracy;
  for (const auto& [n, acc] : report.accuracy) accuracy[std::to_string(n)] = acc;
  obj["accuracy"] = accuracy;
  json selections = json::array();
  for (const SelectionRecord& rec : report.selections)
    selections.push_back(json{{"n", rec.n},
                              {"problem_id", rec.problem_id},
                              {"selected", rec.selected},
                              {"correct", rec.correct}});
  obj["selections"] = selections;
  return obj.dump();
}

std::string to_json_line(const AnnotationRecord& record) {
  json obj;
  obj["id"] = record.id;
  obj["problem_id"] = record.problem_id;
  obj["mode"] = to_string(record.annotation.mode);
  obj["rollouts_per_step"] = record.annotation.rollouts_per_step;
  obj["total_rollouts"] = record.annotation.total_rollouts;
  obj["labels"] = record.annotation.labels;
  return obj.dump();
}

AnnotationRecord annotation_record_from_json(const std::string& line) {
  const json obj = parse_document(line, "annotation record");
  AnnotationRecord record;
  record.id = get_string(obj, "id");
  record.problem_id = get_string(obj, "problem_id");
  record.annotation.mode = parse_label_mode(get_string(obj, "mode"));
  record.annotation.rollouts_per_step = require_field(obj, "rollouts_per_step").get<int>();
  record.annotation.total_rollouts = require_field(obj, "total_rollouts").get<int>();
  record.annotation.labels = get_double_array(obj, "labels");
  return record;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  for_each_line(path, [&](const std::string& line, int line_no) {
    try {
      out.push_back(annotation_record_from_json(line));
    } catch (const Error& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

std::string train_report_json(const TrainResult& result, const TrainConfig& cfg) {
  json obj;
  obj["objective"] = to_string(cfg.objective);
  obj["beta"] = cfg.beta;
  obj["learning_rate"] = cfg.learning_rate;
  obj["epochs"] = cfg.epochs;
  obj["batch_size"] = cfg.batch_size;
  obj["seed"] = cfg.seed;
  obj["optimizer"] = to_string(cfg.optimizer);
  obj["balancing"] = to_string(cfg.balancing);
  obj["examples_used"] = result.stats.examples_used;
  obj["pairs_built"] = result.stats.pairs_built;
  obj["pair_leftovers"] = result.stats.pair_leftovers;
  if (!result.loss_history.empty()) obj["final_loss"] = result.loss_history.back();
  obj["loss_history"] = result.loss_history;
  return obj.dump();
}

std::string to_tsv(std::span<const CostRow> rows) {
  std::string out =
      "responses_per_instruction\trollouts_per_response\trollouts_total"
      "\timplicit_data_flops\timplicit_train_flops\timplicit_total_flops"
      "\tmcts_data_flops\tmcts_train_flops\tmcts_total_flops\tmcts_over_implicit\n";
  for (const CostRow& row : rows) {
    out += std::to_string(row.responses_per_instruction);
    out += '\t';
    out += std::to_string(row.rollouts_per_response);
    for (double v : {row.rollouts_total, row.implicit_data, row.implicit_train,
                     row.implicit_total, row.mcts_data, row.mcts_train, row.mcts_total,
                     row.mcts_over_implicit}) {
      out += '\t';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string to_string(Aggregation v) {
  switch (v) {
    case Aggregation::min: return "min";
    case Aggregation::sum: return "sum";
    case Aggregation::last: return "last";
    case Aggregation::mean: return "mean";
  }
  return "min";
}

std::string to_string(RefMode v) { return v == RefMode::with_ref ? "with-ref" : "ref-free"; }

std::string to_string(VoteMode v) {
  switch (v) {
    case VoteMode::weighted_sum: return "weighted-sum";
    case VoteMode::count: return "count";
    case VoteMode::max: return "max";
  }
  return "weighted-sum";
}

std::string to_string(SelectionKind v) { return v == SelectionKind::bon ? "bon" : "vote"; }

std::string to_string(Objective v) {
  switch (v) {
    case Objective::ce: return "ce";
    case Objective::dpo: return "dpo";
    case Objective::step_kto: return "step-kto";
  }
  return "ce";
}

std::string to_string(Optimizer v) { return v == Optimizer::sgd ? "sgd" : "adam"; }

std::string to_string(Balancing v) {
  switch (v) {
    case Balancing::none: return "none";
    case Balancing::dataset_wise: return "dataset";
    case Balancing::instruction_wise: return "instruction";
  }
  return "none";
}

std::string to_string(LabelMode v) { return v == LabelMode::hard ? "hard" : "soft"; }

namespace {

[[noreturn]] void bad_enum(const std::string& what, const std::string& name) {
  throw DomainError("unknown " + what + " '" + name + "'");
}

}  // namespace

Aggregation parse_aggregation(const std::string& name) {
  if (name == "min") return Aggregation::min;
  if (name == "sum") return Aggregation::sum;
  if (name == "last") return Aggregation::last;
  if (name == "mean") return Aggregation::mean;
  bad_enum("aggregation", name);
}

VoteMode parse_vote_mode(const std::string& name) {
  if (name == "weighted-sum") return VoteMode::weighted_sum;
  if (name == "count") return VoteMode::count;
  if (name == "max") return VoteMode::max;
  bad_enum("vote mode", name);
}

SelectionKind parse_selection_kind(const std::string& name) {
  if (name == "bon") return SelectionKind::bon;
  if (name == "vote") return SelectionKind::vote;
  bad_enum("selection", name);
}

Objective parse_objective(const std::string& name) {
  if (name == "ce") return Objective::ce;
  if (name == "dpo") return Objective::dpo;
  if (name == "step-kto") return Objective::step_kto;
  bad_enum("objective", name);
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  bad_enum("optimizer", name);
}

Balancing parse_balancing(const std::string& name) {
  if (name == "none") return Balancing::none;
  if (name == "dataset") return Balancing::dataset_wise;
  if (name == "instruction") return Balancing::instruction_wise;
  bad_enum("balancing", name);
}

LabelMode parse_label_mode(const std::string& name) {
  if (name == "hard") return LabelMode::hard;
  if (name == "soft") return LabelMode::soft;
  bad_enum("label mode", name);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace iprm
