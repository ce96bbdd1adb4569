#pragma once

#include <span>
#include <string>
#include <vector>

#include "iprm/trajectory.hpp"

namespace iprm {

// Pure scoring math on dual log-probability traces.
//
// The outcome reward of a response is beta * sum_i (logp_policy[i] -
// logp_ref[i]); the per-step Q value is the same partial sum cut at each
// step end; the process reward of a step is the difference of consecutive
// Q values. In ref-free mode each reference log-probability is taken as 0,
// which shifts equal-length responses by a common constant and leaves
// outcome-reward rankings unchanged.

// beta * sum of per-token log-ratios over the whole response.
double outcome_reward(const Trajectory& traj, const ScoringConfig& cfg);

// Partial sums of beta-scaled log-ratios evaluated at each step end.
// The last element equals outcome_reward.
std::vector<double> q_values(const Trajectory& traj, const ScoringConfig& cfg);

// First differences of a Q sequence: r[0] = q[0], r[t] = q[t] - q[t-1].
// The step rewards telescope: their sum equals q.back().
std::vector<double> process_rewards(std::span<const double> q);

// q_values + process_rewards + outcome bundled for one trajectory.
StepScores step_scores(const Trajectory& traj, const ScoringConfig& cfg);

// Collapses step scores to one response-level score:
//   min  -> lowest step reward (default)
//   sum  -> outcome reward (telescoping)
//   last -> final step reward
//   mean -> arithmetic mean of step rewards
double aggregate_response_score(const StepScores& scores, const ScoringConfig& cfg);

struct ScoredTrajectory {
  ScoredResponse response;
  StepScores steps;
};

struct BatchIssue {
  std::string trajectory_id;
  std::string message;
};

struct BatchResult {
  std::vector<ScoredTrajectory> scored;  // valid records, input order preserved
  std::vector<BatchIssue> issues;        // one entry per rejected record
};

// Scores a batch. Bad records are collected into `issues` and skipped;
// with strict = true the first bad record throws instead.
BatchResult score_trace_batch(std::span<const Trajectory> trajectories,
                              const ScoringConfig& cfg, bool strict = false);

}  // namespace iprm
