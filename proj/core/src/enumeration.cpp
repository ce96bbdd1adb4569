#include "iprm/enumeration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iprm/errors.hpp"
#include "iprm/numeric.hpp"
#include "iprm/rng.hpp"
#include "iprm/scoring.hpp"

namespace iprm {

namespace {

void check_pair(const TabularLM& policy, const TabularLM& ref) {
  if (policy.vocab() != ref.vocab() || policy.horizon() != ref.horizon())
    throw DomainError("enumeration: policy and reference shapes differ");
}

// Depth-first walk of every completion, carrying the continuation
// log-probability under both models.
template <typename Leaf>
void dual_walk(const TabularLM& policy, const TabularLM& ref, std::vector<int>& seq,
               double lp_policy_cont, double lp_ref_cont, Leaf&& leaf) {
  if (static_cast<int>(seq.size()) == policy.horizon()) {
    leaf(std::span<const int>(seq), lp_policy_cont, lp_ref_cont);
    return;
  }
  const auto lp_p = policy.token_log_dist(seq);
  const auto lp_r = ref.token_log_dist(seq);
  for (int v = 0; v < policy.vocab(); ++v) {
    seq.push_back(v);
    dual_walk(policy, ref, seq, lp_policy_cont + lp_p[static_cast<std::size_t>(v)],
              lp_ref_cont + lp_r[static_cast<std::size_t>(v)], leaf);
    seq.pop_back();
  }
}

std::size_t continuation_count(const TabularLM& lm, std::size_t prefix_len) {
  std::size_t n = 1;
  for (std::size_t t = prefix_len; t < static_cast<std::size_t>(lm.horizon()); ++t)
    n *= static_cast<std::size_t>(lm.vocab());
  return n;
}

// Partial-sum Q of the prefix, routed through the scoring module so the
// verifiers compare two genuinely different computation paths.
double partial_sum_q(const TabularLM& policy, const TabularLM& ref, std::span<const int> prefix,
                     double beta) {
  if (prefix.empty()) return 0.0;
  ToyTrajectory toy;
  toy.id = "prefix";
  toy.tokens.assign(prefix.begin(), prefix.end());
  toy.step_ends = {static_cast<int>(prefix.size())};
  const Trajectory traj = make_trajectory(policy, ref, toy);
  const ScoringConfig cfg{beta, Aggregation::sum, RefMode::with_ref};
  return q_values(traj, cfg).back();
}

}  // namespace

void for_each_completion(const TabularLM& model, std::span<const int> prefix,
                         const std::function<void(std::span<const int>, double)>& visit) {
  std::vector<int> seq(prefix.begin(), prefix.end());
  // Reuse the dual walk against itself; the second accumulator is ignored.
  dual_walk(model, model, seq, 0.0, 0.0,
            [&](std::span<const int> full, double lp_cont, double) { visit(full, lp_cont); });
}

double exp_avg_reward(const TabularLM& policy, const TabularLM& ref, std::span<const int> prefix,
                      double reward_beta, double beta) {
  check_pair(policy, ref);
  if (beta <= 0.0) throw DomainError("exp_avg_reward: beta must be positive");
  const double lp_policy_prefix = policy.seq_logprob(prefix);
  const double lp_ref_prefix = ref.seq_logprob(prefix);

  std::vector<double> terms;
  terms.reserve(continuation_count(policy, prefix.size()));
  std::vector<int> seq(prefix.begin(), prefix.end());
  dual_walk(policy, ref, seq, 0.0, 0.0,
            [&](std::span<const int>, double lp_policy_cont, double lp_ref_cont) {
              const double reward = reward_beta * ((lp_policy_prefix + lp_policy_cont) -
                                                   (lp_ref_prefix + lp_ref_cont));
              terms.push_back(lp_ref_cont + reward / beta);
            });
  return beta * log_sum_exp(terms);
}

double exact_exp_avg_q(const TabularLM& policy, const TabularLM& ref, std::span<const int> prefix,
                       double beta) {
  return exp_avg_reward(policy, ref, prefix, beta, beta);
}

double exact_mean_reward(const TabularLM& policy, const TabularLM& ref,
                         std::span<const int> prefix, double reward_beta) {
  check_pair(policy, ref);
  const double lp_policy_prefix = policy.seq_logprob(prefix);
  const double lp_ref_prefix = ref.seq_logprob(prefix);
  double mean = 0.0;
  std::vector<int> seq(prefix.begin(), prefix.end());
  dual_walk(policy, ref, seq, 0.0, 0.0,
            [&](std::span<const int>, double lp_policy_cont, double lp_ref_cont) {
              const double reward = reward_beta * ((lp_policy_prefix + lp_policy_cont) -
                                                   (lp_ref_prefix + lp_ref_cont));
              mean += std::exp(lp_ref_cont) * reward;
            });
  return mean;
}

double exact_max_reward(const TabularLM& policy, const TabularLM& ref, std::span<const int> prefix,
                        double reward_beta) {
  check_pair(policy, ref);
  const double lp_policy_prefix = policy.seq_logprob(prefix);
  const double lp_ref_prefix = ref.seq_logprob(prefix);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> seq(prefix.begin(), prefix.end());
  dual_walk(policy, ref, seq, 0.0, 0.0,
            [&](std::span<const int>, double lp_policy_cont, double lp_ref_cont) {
              const double reward = reward_beta * ((lp_policy_prefix + lp_policy_cont) -
                                                   (lp_ref_prefix + lp_ref_cont));
              best = std::max(best, reward);
            });
  return best;
}

std::vector<int> random_prefix(int vocab, int length, std::uint64_t stream_seed) {
  std::mt19937_64 eng(stream_seed);
  std::vector<int> prefix(static_cast<std::size_t>(length));
  for (int& tok : prefix) tok = static_cast<int>(next_index(eng, static_cast<std::uint64_t>(vocab)));
  return prefix;
}

IdentityReport verify_q_identity(const TabularLM& policy, const TabularLM& ref, double beta,
                                 int trials, std::uint64_t rng_seed) {
  check_pair(policy, ref);
  if (trials < 1) throw DomainError("verify_q_identity: trials must be >= 1");
  IdentityReport report;
  report.beta = beta;
  report.trials = trials;
  for (int i = 0; i < trials; ++i) {
    // Cycle lengths so every prefix length 0 .. horizon is exercised.
    const int len = i % (policy.horizon() + 1);
    const auto prefix = random_prefix(policy.vocab(), len, derive_seed(rng_seed, static_cast<std::uint64_t>(i)));
    const double lhs = partial_sum_q(policy, ref, prefix, beta);
    const double rhs = exact_exp_avg_q(policy, ref, prefix, beta);
    const double diff = std::abs(lhs - rhs);
    if (diff > report.max_abs_diff) {
      report.max_abs_diff = diff;
      report.worst = {i, len, diff};
    }
  }
  report.pass = report.max_abs_diff <= report.tolerance;
  return report;
}

RecursionReport verify_backward_recursion(const TabularLM& policy, const TabularLM& ref,
                                          double beta, int trials, std::uint64_t rng_seed) {
  check_pair(policy, ref);
  if (trials < 1) throw DomainError("verify_backward_recursion: trials must be >= 1");
  if (beta <= 0.0) throw DomainError("verify_backward_recursion: beta must be positive");
  RecursionReport report;
  report.beta = beta;
  report.trials = trials;
  for (int i = 0; i < trials; ++i) {
    const int len = i % policy.horizon();  // recursion needs a next token
    auto prefix = random_prefix(policy.vocab(), len, derive_seed(rng_seed, static_cast<std::uint64_t>(i)));
    const double lhs = partial_sum_q(policy, ref, prefix, beta);

    // beta * log E_{next token ~ ref} exp(q^{t+1} / beta)
    const auto lp_next_ref = ref.token_log_dist(prefix);
    std::vector<double> terms(static_cast<std::size_t>(policy.vocab()));
    for (int v = 0; v < policy.vocab(); ++v) {
      prefix.push_back(v);
      terms[static_cast<std::size_t>(v)] =
          lp_next_ref[static_cast<std::size_t>(v)] + partial_sum_q(policy, ref, prefix, beta) / beta;
      prefix.pop_back();
    }
    const double rhs = beta * log_sum_exp(terms);

    const double diff = std::abs(lhs - rhs);
    if (diff > report.max_abs_diff) {
      report.max_abs_diff = diff;
      report.worst = {i, len, diff};
    }
  }
  report.pass = report.max_abs_diff <= report.tolerance;
  return report;
}

BoundsReport verify_q_bounds(const TabularLM& policy, const TabularLM& ref,
                             std::span<const double> beta_grid, int trials,
                             std::uint64_t rng_seed, double reward_beta) {
  check_pair(policy, ref);
  if (trials < 1) throw DomainError("verify_q_bounds: trials must be >= 1");
  if (beta_grid.size() < 2) throw DomainError("verify_q_bounds: need at least two betas");
  for (double b : beta_grid)
    if (b <= 0.0) throw DomainError("verify_q_bounds: betas must be positive");

  BoundsReport report;
  report.beta_grid.assign(beta_grid.begin(), beta_grid.end());
  std::sort(report.beta_grid.begin(), report.beta_grid.end());
  report.reward_beta = reward_beta;
  report.trials = trials;
  report.worst_limit.abs_diff = -std::numeric_limits<double>::infinity();
  report.max_low_beta_excess = -std::numeric_limits<double>::infinity();
  report.max_high_beta_excess = -std::numeric_limits<double>::infinity();

  for (int i = 0; i < trials; ++i) {
    const int len = i % (policy.horizon() + 1);
    const auto prefix = random_prefix(policy.vocab(), len, derive_seed(rng_seed, static_cast<std::uint64_t>(i)));
    const double mean = exact_mean_reward(policy, ref, prefix, reward_beta);
    const double max = exact_max_reward(policy, ref, prefix, reward_beta);

    std::vector<double> q(report.beta_grid.size());
    for (std::size_t k = 0; k < report.beta_grid.size(); ++k) {
      q[k] = exp_avg_reward(policy, ref, prefix, reward_beta, report.beta_grid[k]);
      report.max_lower_violation = std::max(report.max_lower_violation, mean - q[k]);
      report.max_upper_violation = std::max(report.max_upper_violation, q[k] - max);
    }
    for (std::size_t k = 0; k + 1 < q.size(); ++k)
      report.max_monotonicity_violation =
          std::max(report.max_monotonicity_violation, q[k + 1] - q[k]);

    const double limit_tol = report.limit_rtol * (max - mean + 1e-12);
    const double low_excess = std::abs(q.front() - max) - limit_tol;
    const double high_excess = std::abs(q.back() - mean) - limit_tol;
    report.max_low_beta_excess = std::max(report.max_low_beta_excess, low_excess);
    report.max_high_beta_excess = std::max(report.max_high_beta_excess, high_excess);
    const double worst_excess = std::max(low_excess, high_excess);
    if (worst_excess > report.worst_limit.abs_diff) report.worst_limit = {i, len, worst_excess};
  }

  report.bounds_pass = report.max_lower_violation <= report.bound_tolerance &&
                       report.max_upper_violation <= report.bound_tolerance;
  report.monotonic_pass = report.max_monotonicity_violation <= report.bound_tolerance;
  report.limits_pass = report.max_low_beta_excess <= 0.0 && report.max_high_beta_excess <= 0.0;
  report.pass = report.bounds_pass && report.monotonic_pass && report.limits_pass;
  return report;
}

}  // namespace iprm
