#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "iprm/tabular_lm.hpp"

namespace iprm {

// Exhaustive-enumeration oracles over a TabularLM pair. Everything here
// walks the complete continuation space of a prefix, so results are exact
// up to floating-point rounding and independent of the partial-sum scoring
// path in scoring.hpp.

// Walks every completion of `prefix` to the model horizon. The callback
// receives the complete sequence and the log-probability of the
// continuation under `model` (0 when the prefix is already complete).
void for_each_completion(const TabularLM& model, std::span<const int> prefix,
                         const std::function<void(std::span<const int>, double)>& visit);

// beta * log E_{ref continuations} exp(r(y) / beta), evaluated with a
// log-sum-exp shift, where the full-sequence reward is
// r(y) = reward_beta * (logprob_policy(y) - logprob_ref(y)).
//
// With reward_beta == beta this is the exponential-average Q value of the
// beta-parameterized reward; holding reward_beta fixed while varying beta
// sweeps the averaging temperature of one fixed reward between its maximum
// (beta -> 0) and its mean (beta -> infinity).
double exp_avg_reward(const TabularLM& policy, const TabularLM& ref,
                      std::span<const int> prefix, double reward_beta, double beta);

// Exponential-average Q of the beta-parameterized reward (reward and
// averaging temperature coupled). At a complete prefix this returns the
// outcome reward of the sequence exactly.
double exact_exp_avg_q(const TabularLM& policy, const TabularLM& ref,
                       std::span<const int> prefix, double beta);

// E under ref continuations of r(y), and max over continuations of r(y),
// with r parameterized at reward_beta.
double exact_mean_reward(const TabularLM& policy, const TabularLM& ref,
                         std::span<const int> prefix, double reward_beta = 1.0);
double exact_max_reward(const TabularLM& policy, const TabularLM& ref,
                        std::span<const int> prefix, double reward_beta = 1.0);

// ---------------------------------------------------------------------------
// Verification reports. Trial prefixes cycle through every length
// 0 .. horizon and draw tokens uniformly from the stream
// derive_seed(rng_seed, trial).

struct TrialDiff {
  int trial = 0;
  int prefix_len = 0;
  double abs_diff = 0.0;
};

// Identity check: partial-sum Q against the enumerated exponential average,
// at the same beta, over random prefixes. Also checks the complete-prefix
// base case (the two sides collapse to the outcome reward).
struct IdentityReport {
  double beta = 0.0;
  int trials = 0;
  double tolerance = 1e-9;
  double max_abs_diff = 0.0;
  TrialDiff worst;
  bool pass = false;
};

IdentityReport verify_q_identity(const TabularLM& policy, const TabularLM& ref, double beta,
                                 int trials, std::uint64_t rng_seed);

// One-step backward recursion: q^t == beta * log E_{next token ~ ref}
// exp(q^{t+1} / beta), with both sides enumerated, over random prefixes of
// length < horizon.
struct RecursionReport {
  double beta = 0.0;
  int trials = 0;
  double tolerance = 1e-9;
  double max_abs_diff = 0.0;
  TrialDiff worst;
  bool pass = false;
};

RecursionReport verify_backward_recursion(const TabularLM& policy, const TabularLM& ref,
                                          double beta, int trials, std::uint64_t rng_seed);

// Bound/limit checks for the temperature sweep of the fixed reward
// r(y) = reward_beta * (logprob_policy - logprob_ref):
//   mean - tol <= q(beta) <= max + tol   for every grid beta,
//   q nonincreasing in beta,
//   |q(beta_min) - max| and |q(beta_max) - mean| within a tolerance scaled
//   by the spread: limit_rtol * (max - mean + 1e-12).
struct BoundsReport {
  std::vector<double> beta_grid;  // sorted ascending
  double reward_beta = 1.0;
  int trials = 0;
  double bound_tolerance = 1e-9;
  double limit_rtol = 1e-2;

  double max_lower_violation = 0.0;   // max over trials/betas of mean - q
  double max_upper_violation = 0.0;   // max over trials/betas of q - max
  double max_monotonicity_violation = 0.0;
  double max_low_beta_excess = 0.0;   // max of |q(beta_min) - max| - trial tolerance
  double max_high_beta_excess = 0.0;  // max of |q(beta_max) - mean| - trial tolerance
  TrialDiff worst_limit;
  bool bounds_pass = false;
  bool monotonic_pass = false;
  bool limits_pass = false;
  bool pass = false;
};

inline constexpr double kDefaultBetaGrid[] = {1e-3, 0.05, 0.1, 1.0, 10.0, 1e3};

BoundsReport verify_q_bounds(const TabularLM& policy, const TabularLM& ref,
                             std::span<const double> beta_grid, int trials,
                             std::uint64_t rng_seed, double reward_beta = 1.0);

// Uniform-random trial prefix of the given length.
std::vector<int> random_prefix(int vocab, int length, std::uint64_t stream_seed);

}  // namespace iprm
