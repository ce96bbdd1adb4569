#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "iprm/bon.hpp"
#include "iprm/cost.hpp"
#include "iprm/enumeration.hpp"
#include "iprm/mcts.hpp"
#include "iprm/objectives.hpp"
#include "iprm/scoring.hpp"
#include "iprm/tabular_lm.hpp"
#include "iprm/trajectory.hpp"

namespace iprm {

// Persistence layer: line-delimited JSON records for traces, annotations
// and scores; single-document JSON for checkpoints and reports; TSV for
// cost tables. All real values serialize with shortest round-trip
// formatting, so writing and re-reading is lossless and repeated runs are
// byte-identical.

// ---------------------------------------------------------------------------
// Trace files: one JSON object per line with the Trajectory fields. Tokens
// may be JSON integers or strings; integer-looking tokens are written back
// as integers so toy traces round-trip unchanged.

Trajectory trajectory_from_json_line(const std::string& line);
std::string to_json_line(const Trajectory& traj);

// Strict parse: throws IoError naming the line of the first bad record.
std::vector<Trajectory> read_trace(const std::filesystem::path& path);

struct TraceParseResult {
  std::vector<Trajectory> records;          // valid records, file order
  std::vector<std::string> errors;          // "path:line: message" per rejected record
};

// Lenient parse: collects rejected records instead of throwing.
TraceParseResult read_trace_lenient(const std::filesystem::path& path);

void write_trace(std::span<const Trajectory> trajectories, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints: versioned single-file JSON holding a TabularLM plus free-form
// training metadata.

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointVersion;
  TabularLM model;
  std::map<std::string, std::string> metadata;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Report serialization (single-line JSON documents).

std::string to_json_line(const ScoredTrajectory& scored);

std::string to_json_line(const IdentityReport& report);
IdentityReport identity_report_from_json(const std::string& text);

std::string to_json_line(const RecursionReport& report);
RecursionReport recursion_report_from_json(const std::string& text);

std::string to_json_line(const BoundsReport& report);
BoundsReport bounds_report_from_json(const std::string& text);

std::string to_json_line(const EvalReport& report);

struct AnnotationRecord {
  std::string id;
  std::string problem_id;
  StepAnnotation annotation;
};

std::string to_json_line(const AnnotationRecord& record);
AnnotationRecord annotation_record_from_json(const std::string& line);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

std::string train_report_json(const TrainResult& result, const TrainConfig& cfg);

// Cost comparison table as TSV with a header row.
std::string to_tsv(std::span<const CostRow> rows);

// ---------------------------------------------------------------------------
// Enum names (flag values and metadata keys share these spellings).

std::string to_string(Aggregation v);
std::string to_string(RefMode v);
std::string to_string(VoteMode v);
std::string to_string(SelectionKind v);
std::string to_string(Objective v);
std::string to_string(Optimizer v);
std::string to_string(Balancing v);
std::string to_string(LabelMode v);

Aggregation parse_aggregation(const std::string& name);
VoteMode parse_vote_mode(const std::string& name);
SelectionKind parse_selection_kind(const std::string& name);
Objective parse_objective(const std::string& name);
Optimizer parse_optimizer(const std::string& name);
Balancing parse_balancing(const std::string& name);
LabelMode parse_label_mode(const std::string& name);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Whole-file helpers; writes are binary-mode so output is byte-stable.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace iprm
