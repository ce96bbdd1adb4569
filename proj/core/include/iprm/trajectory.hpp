#pragma once

#include <optional>
#include <string>
#include <vector>

namespace iprm {

// One candidate response: token-level log-probabilities under the policy
// and (optionally) the reference, step boundaries, and outcome metadata.
//
// Scoring never looks at token identities, only at the log-probability
// sequences and step boundaries; tokens travel as opaque strings so traces
// from arbitrary tokenizers round-trip unchanged.
struct Trajectory {
  std::string id;
  std::string problem_id;
  std::vector<std::string> tokens;                     // length T >= 1
  std::vector<double> logp_policy;                     // length T, natural log
  std::optional<std::vector<double>> logp_ref;         // length T when present
  std::vector<int> step_ends;                          // 1-based, strictly increasing, back() == T
  std::optional<std::string> answer;
  std::optional<bool> correct;

  int num_tokens() const { return static_cast<int>(tokens.size()); }
  int num_steps() const { return static_cast<int>(step_ends.size()); }

  bool operator==(const Trajectory&) const = default;
};

// Log-probabilities of discrete tokens are nonpositive; this slack absorbs
// rounding introduced by text round-trips.
inline constexpr double kLogpTolerance = 1e-9;

// Throws ValidationError naming the violated invariant (prefixed with the
// trajectory id when it has one).
void validate(const Trajectory& traj);

enum class Aggregation { min, sum, last, mean };
enum class RefMode { with_ref, ref_free };

struct ScoringConfig {
  double beta = 0.05;
  Aggregation aggregation = Aggregation::min;
  RefMode ref_mode = RefMode::with_ref;
};

// Per-step Q values, per-step process rewards, and the outcome reward of
// one trajectory. r_step[t] = q[t] - q[t-1] with q[-1] := 0, so the step
// rewards telescope to the outcome.
struct StepScores {
  std::vector<double> q;
  std::vector<double> r_step;
  double outcome = 0.0;
};

struct ScoredResponse {
  std::string id;
  std::string problem_id;
  double score = 0.0;
  std::optional<std::string> answer;
  std::optional<bool> correct;

  bool operator==(const ScoredResponse&) const = default;
};

}  // namespace iprm
