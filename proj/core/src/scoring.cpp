#include "iprm/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iprm/errors.hpp"

namespace iprm {

namespace {

void check_scorable(const Trajectory& traj, const ScoringConfig& cfg) {
  validate(traj);
  if (cfg.ref_mode == RefMode::with_ref && !traj.logp_ref)
    throw ConfigError("trajectory '" + traj.id +
                      "': scoring with a reference requires logp_ref (use ref-free mode otherwise)");
  if (cfg.beta <= 0.0) throw ConfigError("beta must be positive");
}

inline double log_ratio_at(const Trajectory& traj, const ScoringConfig& cfg, int i) {
  const double ref = cfg.ref_mode == RefMode::with_ref ? (*traj.logp_ref)[i] : 0.0;
  return traj.logp_policy[i] - ref;
}

}  // namespace

double outcome_reward(const Trajectory& traj, const ScoringConfig& cfg) {
  check_scorable(traj, cfg);
  double sum = 0.0;
  for (int i = 0; i < traj.num_tokens(); ++i) sum += log_ratio_at(traj, cfg, i);
  return cfg.beta * sum;
}

std::vector<double> q_values(const Trajectory& traj, const ScoringConfig& cfg) {
  check_scorable(traj, cfg);
  std::vector<double> q;
  q.reserve(traj.step_ends.size());
  double sum = 0.0;
  int i = 0;
  for (int end : traj.step_ends) {
    for (; i < end; ++i) sum += log_ratio_at(traj, cfg, i);
    q.push_back(cfg.beta * sum);
  }
  return q;
}

std::vector<double> process_rewards(std::span<const double> q) {
  if (q.empty()) throw ValidationError("process_rewards: empty Q sequence");
  for (double v : q)
    if (!std::isfinite(v)) throw ValidationError("process_rewards: non-finite Q value");
  std::vector<double> r(q.size());
  r[0] = q[0];
  for (std::size_t t = 1; t < q.size(); ++t) r[t] = q[t] - q[t - 1];
  return r;
}

StepScores step_scores(const Trajectory& traj, const ScoringConfig& cfg) {
  StepScores out;
  out.q = q_values(traj, cfg);
  out.r_step = process_rewards(out.q);
  out.outcome = out.q.back();
  return out;
}

double aggregate_response_score(const StepScores& scores, const ScoringConfig& cfg) {
  if (scores.r_step.empty() || scores.q.size() != scores.r_step.size())
    throw ValidationError("aggregate_response_score: malformed StepScores");
  switch (cfg.aggregation) {
    case Aggregation::min:
      return *std::min_element(scores.r_step.begin(), scores.r_step.end());
    case Aggregation::sum:
      return scores.outcome;
    case Aggregation::last:
      return scores.r_step.back();
    case Aggregation::mean:
      return std::accumulate(scores.r_step.begin(), scores.r_step.end(), 0.0) /
             static_cast<double>(scores.r_step.size());
  }
  throw ConfigError("unknown aggregation mode");
}

BatchResult score_trace_batch(std::span<const Trajectory> trajectories,
                              const ScoringConfig& cfg, bool strict) {
  BatchResult out;
  out.scored.reserve(trajectories.size());
  for (const Trajectory& traj : trajectories) {
    try {
      ScoredTrajectory st;
      st.steps = step_scores(traj, cfg);
      st.response = ScoredResponse{traj.id, traj.problem_id,
                                   aggregate_response_score(st.steps, cfg), traj.answer,
                                   traj.correct};
      out.scored.push_back(std::move(st));
    } catch (const Error& e) {
      if (strict) throw;
      out.issues.push_back({traj.id, e.what()});
    }
  }
  return out;
}

}  // namespace iprm
