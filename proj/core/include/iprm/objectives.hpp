#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iprm/tabular_lm.hpp"

namespace iprm {

// Response-level training objectives for the log-likelihood-ratio reward
// r = beta * (logprob_policy - logprob_ref), with exact gradients with
// respect to the policy logits. The reference model is frozen: no gradient
// ever flows into it.
//
// Gradients are returned as flat tables shaped like the policy logits
// (num_rows * vocab); only rows visited by an instance receive nonzero
// entries, via d log softmax(z)[a] / d z[b] = delta(a, b) - softmax(z)[b].

struct OutcomeExample {
  ToyTrajectory traj;
  int label = 0;  // 0 or 1

  bool operator==(const OutcomeExample&) const = default;
};

struct PreferencePair {
  ToyTrajectory chosen;
  ToyTrajectory rejected;
  std::string problem_id;
};

struct StepLabeledExample {
  ToyTrajectory traj;
  std::vector<int> labels;  // +1 / -1, one per step
};

enum class Objective { ce, dpo, step_kto };
enum class Optimizer { sgd, adam };
enum class Balancing { none, dataset_wise, instruction_wise };

// Standard Adam constants; recorded in checkpoint metadata by the CLI.
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct TrainConfig {
  Objective objective = Objective::ce;
  double beta = 0.05;
  double learning_rate = 0.05;
  int epochs = 100;
  int batch_size = 0;  // <= 0: full batch
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  Balancing balancing = Balancing::none;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // policy-logit shaped
};

// Sigmoid cross-entropy on the response reward:
// loss = -[l log sigma(r) + (1 - l) log(1 - sigma(r))].
LossGrad ce_loss(const OutcomeExample& example, const TabularLM& policy, const TabularLM& ref,
                 double beta);

// Pairwise logistic loss on the reward margin: -log sigma(r_chosen - r_rejected).
LossGrad dpo_loss(const PreferencePair& pair, const TabularLM& policy, const TabularLM& ref,
                  double beta);

// Step-level labels on the per-step reward magnitudes:
// loss = -(1/n) sum_t log sigma(l_t * |r_t|), with d|r|/dr taken as 0 at
// r = 0. Note the loss depends on r_t only through |r_t|, so for l_t = +1
// it rewards magnitude regardless of the reward's sign.
LossGrad step_kto_loss(const StepLabeledExample& example, const TabularLM& policy,
                       const TabularLM& ref, double beta);

struct PairBuildResult {
  std::vector<PreferencePair> pairs;
  std::vector<std::string> leftover_ids;  // responses left unpaired, none dropped silently
};

// Pairs correct with incorrect responses per problem: both classes sorted
// by trajectory id and zipped, min(#correct, #incorrect) pairs per problem.
PairBuildResult build_pairs(std::span<const OutcomeExample> examples);

// Drops seeded-random examples from the majority label class until counts
// match: dataset_wise over the whole set, instruction_wise per problem.
// Surviving examples keep their input order.
std::vector<OutcomeExample> balance(std::span<const OutcomeExample> examples, Balancing mode,
                                    std::uint64_t seed);

struct Dataset {
  std::vector<OutcomeExample> outcomes;          // ce, and the source of dpo pairs
  std::vector<StepLabeledExample> step_labeled;  // step_kto
};

struct TrainStats {
  int examples_used = 0;
  int pairs_built = 0;
  int pair_leftovers = 0;
};

struct TrainResult {
  TabularLM policy;
  std::vector<double> loss_history;  // mean loss per epoch
  TrainStats stats;
};

// Deterministic trainer: batches are consecutive input-order slices,
// gradients accumulate in input order, and the only randomness is the
// seeded balancing step, so identical configs give bit-identical policies.
TrainResult train(const Dataset& data, const TabularLM& policy_init, const TabularLM& ref,
                  const TrainConfig& cfg);

// Central-finite-difference checks of the analytic gradients over every
// logit touched by the instance; returns the max relative error.
double grad_check(const OutcomeExample& example, const TabularLM& policy, const TabularLM& ref,
                  double beta, double h);
double grad_check(const PreferencePair& pair, const TabularLM& policy, const TabularLM& ref,
                  double beta, double h);
double grad_check(const StepLabeledExample& example, const TabularLM& policy,
                  const TabularLM& ref, double beta, double h);

}  // namespace iprm
