#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iprm/tabular_lm.hpp"

namespace iprm {

// Monte-Carlo rollout step annotation: the lookahead baseline that implicit
// Q values replace. A step label is estimated by sampling completions of
// the step prefix under the policy and checking task correctness. Hard
// estimation takes the max of the rollout correctness bits, soft estimation
// their mean, so hard >= soft on every prefix by construction.
//
// On toy tasks correctness comes from the ground-truth predicate rather
// than a judge model, which isolates estimation error from judge error.

struct RolloutBatch {
  std::vector<int> prefix;
  std::vector<std::vector<int>> completions;  // each extends prefix to the horizon
  std::vector<int> correctness;               // 0/1 per completion
};

// n rollouts of the prefix under the policy. Rollout j uses the RNG stream
// derive_seed(rng_seed, j).
RolloutBatch sample_rollouts(const TabularLM& policy, const ToyTask& task,
                             std::span<const int> prefix, int n, std::uint64_t rng_seed);

// 1 if any of n rollouts is correct, else 0.
int hard_label(const TabularLM& policy, const ToyTask& task, std::span<const int> prefix, int n,
               std::uint64_t rng_seed);

// Fraction of correct rollouts among n.
double soft_label(const TabularLM& policy, const ToyTask& task, std::span<const int> prefix,
                  int n, std::uint64_t rng_seed);

enum class LabelMode { hard, soft };

struct StepAnnotation {
  std::vector<double> labels;  // one per step; hard labels are 0.0 / 1.0
  LabelMode mode = LabelMode::hard;
  int rollouts_per_step = 0;
  int total_rollouts = 0;  // steps * rollouts_per_step, the lookahead bill
};

// Labels every step of the trajectory from k rollouts continuing each step
// prefix. Step s, rollout j draws from the stream derive_seed(seed, s, j).
StepAnnotation annotate_steps(const ToyTrajectory& traj, const TabularLM& policy,
                              const ToyTask& task, int rollouts_per_step, LabelMode mode,
                              std::uint64_t rng_seed);

// Enumerated ground truth the sampled estimates converge to: correctness
// statistics over all completions of the prefix under the policy.
double exact_mean_correctness(const TabularLM& policy, const ToyTask& task,
                              std::span<const int> prefix);
int exact_max_correctness(const TabularLM& policy, const ToyTask& task,
                          std::span<const int> prefix);

// beta * log E exp(correctness / beta) over completions under the policy:
// the exponential average of correctness-as-reward, which the mean and max
// above bracket for every beta.
double exp_avg_correctness(const TabularLM& policy, const ToyTask& task,
                           std::span<const int> prefix, double beta);

}  // namespace iprm
