#include "iprm/mcts.hpp"

#include <algorithm>
#include <cmath>

#include "iprm/enumeration.hpp"
#include "iprm/errors.hpp"
#include "iprm/numeric.hpp"
#include "iprm/rng.hpp"

namespace iprm {

RolloutBatch sample_rollouts(const TabularLM& policy, const ToyTask& task,
                             std::span<const int> prefix, int n, std::uint64_t rng_seed) {
  if (n < 1) throw DomainError("sample_rollouts: need at least one rollout");
  RolloutBatch batch;
  batch.prefix.assign(prefix.begin(), prefix.end());
  batch.completions.reserve(static_cast<std::size_t>(n));
  batch.correctness.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    auto seq = policy.sample_completion(prefix, derive_seed(rng_seed, static_cast<std::uint64_t>(j)));
    batch.correctness.push_back(task.correct(seq) ? 1 : 0);
    batch.completions.push_back(std::move(seq));
  }
  return batch;
}

int hard_label(const TabularLM& policy, const ToyTask& task, std::span<const int> prefix, int n,
               std::uint64_t rng_seed) {
  const auto batch = sample_rollouts(policy, task, prefix, n, rng_seed);
  return *std::max_element(batch.correctness.begin(), batch.correctness.end());
}

double soft_label(const TabularLM& policy, const ToyTask& task, std::span<const int> prefix,
                  int n, std::uint64_t rng_seed) {
  const auto batch = sample_rollouts(policy, task, prefix, n, rng_seed);
  long long correct = 0;
  for (int c : batch.correctness) correct += c;
  return static_cast<double>(correct) / static_cast<double>(n);
}

StepAnnotation annotate_steps(const ToyTrajectory& traj, const TabularLM& policy,
                              const ToyTask& task, int rollouts_per_step, LabelMode mode,
                              std::uint64_t rng_seed) {
  if (rollouts_per_step < 1) throw DomainError("annotate_steps: need at least one rollout per step");
  if (traj.step_ends.empty() ||
      traj.step_ends.back() != static_cast<int>(traj.tokens.size()))
    throw ValidationError("annotate_steps: malformed step boundaries");

  StepAnnotation ann;
  ann.mode = mode;
  ann.rollouts_per_step = rollouts_per_step;
  ann.labels.reserve(traj.step_ends.size());
  const std::span<const int> tokens(traj.tokens);
  for (std::size_t s = 0; s < traj.step_ends.size(); ++s) {
    const auto prefix = tokens.first(static_cast<std::size_t>(traj.step_ends[s]));
    const std::uint64_t step_seed = derive_seed(rng_seed, s);
    ann.labels.push_back(mode == LabelMode::hard
                             ? static_cast<double>(hard_label(policy, task, prefix,
                                                              rollouts_per_step, step_seed))
                             : soft_label(policy, task, prefix, rollouts_per_step, step_seed));
  }
  ann.total_rollouts = static_cast<int>(traj.step_ends.size()) * rollouts_per_step;
  return ann;
}

double exact_mean_correctness(const TabularLM& policy, const ToyTask& task,
                              std::span<const int> prefix) {
  double mean = 0.0;
  for_each_completion(policy, prefix, [&](std::span<const int> seq, double lp_cont) {
    if (task.correct(seq)) mean += std::exp(lp_cont);
  });
  return mean;
}

int exact_max_correctness(const TabularLM& policy, const ToyTask& task,
                          std::span<const int> prefix) {
  int best = 0;
  for_each_completion(policy, prefix, [&](std::span<const int> seq, double) {
    if (task.correct(seq)) best = 1;
  });
  return best;
}

double exp_avg_correctness(const TabularLM& policy, const ToyTask& task,
                           std::span<const int> prefix, double beta) {
  if (beta <= 0.0) throw DomainError("exp_avg_correctness: beta must be positive");
  std::vector<double> terms;
  for_each_completion(policy, prefix, [&](std::span<const int> seq, double lp_cont) {
    terms.push_back(lp_cont + (task.correct(seq) ? 1.0 : 0.0) / beta);
  });
  return beta * log_sum_exp(terms);
}

}  // namespace iprm
