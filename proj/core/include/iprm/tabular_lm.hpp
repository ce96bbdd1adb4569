#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iprm/trajectory.hpp"

namespace iprm {

// A fully enumerable autoregressive model over a small vocabulary with a
// fixed horizon: every prefix of length 0 .. horizon-1 owns one logit row,
// and a complete sequence always has exactly `horizon` tokens. The whole
// sequence space (at most 2^20 complete sequences) can be walked exactly,
// which is what makes the enumeration oracles in enumeration.hpp possible.
//
// Rows are stored flat. Prefixes of length t occupy the level starting at
// (V^t - 1) / (V - 1); within a level a prefix is indexed by its base-V
// value, most significant token first.
class TabularLM {
 public:
  // Enumeration cap: V^horizon complete sequences.
  static constexpr std::uint64_t kMaxSequences = 1u << 20;

  TabularLM(int vocab, int horizon, std::vector<double> logits, std::uint64_t seed = 0);

  // Logits drawn i.i.d. uniform on [-2, 2] from the seeded stream. The
  // bounded range keeps exponential averages well conditioned at small
  // temperatures.
  static TabularLM random(int vocab, int horizon, std::uint64_t seed);

  int vocab() const { return vocab_; }
  int horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_entries() const { return logits_.size(); }

  // Flat row index of a prefix (length 0 .. horizon-1).
  std::size_t row_index(std::span<const int> prefix) const;

  std::span<const double> logit_row(std::span<const int> prefix) const;

  // softmax of the logit row; entries positive, summing to 1 within 1e-12.
  std::vector<double> token_dist(std::span<const int> prefix) const;

  // log softmax of the logit row.
  std::vector<double> token_log_dist(std::span<const int> prefix) const;

  // Conditional log-probability of one token after a prefix.
  double token_logprob(std::span<const int> prefix, int token) const;

  // Sum of conditional log-probabilities over the sequence; 0 for an empty
  // sequence, nonpositive otherwise.
  double seq_logprob(std::span<const int> seq) const;

  // Ancestral sampling of n complete sequences. Draw j uses the RNG stream
  // derive_seed(rng_seed, j), so individual draws are reproducible and
  // order-independent.
  std::vector<std::vector<int>> sample(std::uint64_t rng_seed, int n) const;
  std::vector<int> sample_completion(std::span<const int> prefix, std::uint64_t rng_seed) const;

  std::span<const double> raw_logits() const { return logits_; }
  std::vector<double>& mutable_logits() { return logits_; }

  bool operator==(const TabularLM&) const = default;

 private:
  void check_prefix(std::span<const int> prefix, std::size_t max_len) const;

  int vocab_ = 0;
  int horizon_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t num_rows_ = 0;
  std::vector<std::size_t> level_offsets_;  // level_offsets_[t] = first row of length-t prefixes
  std::vector<double> logits_;              // num_rows_ * vocab_, row-major
};

// Ground truth for toy experiments: a total correctness predicate over
// complete sequences plus an answer extractor (default: decimal rendering
// of the final token).
struct ToyTask {
  std::string name;
  std::function<bool(std::span<const int>)> correct;
  std::function<std::string(std::span<const int>)> answer;

  // Correct iff the final token equals `target`.
  static ToyTask last_token_eq(int target);
  // Correct iff the token sum is congruent to `residue` mod `modulus`.
  static ToyTask token_sum_mod(int modulus, int residue);
  // Parses "last-token-eq:<v>" / "token-sum-mod:<m>:<r>".
  static ToyTask parse(const std::string& descriptor);
};

// A toy-model response: integer tokens plus step boundaries, convertible
// to a scoring Trajectory by filling in exact log-probabilities.
struct ToyTrajectory {
  std::string id;
  std::string problem_id;
  std::vector<int> tokens;
  std::vector<int> step_ends;  // 1-based, strictly increasing, back() == tokens.size()

  bool operator==(const ToyTrajectory&) const = default;
};

// Step boundaries every `step_len` tokens (the last step absorbs the
// remainder); step_len = 1 gives token-level steps.
std::vector<int> uniform_step_ends(int num_tokens, int step_len);

// Exact dual-logprob trajectory for a complete toy sequence. The task, when
// given, fills answer and correctness.
Trajectory make_trajectory(const TabularLM& policy, const TabularLM& ref,
                           const ToyTrajectory& toy, const ToyTask* task = nullptr);

// Parses trace tokens back into toy-model token ids; rejects tokens that are
// not integers in [0, vocab).
ToyTrajectory to_toy_trajectory(const Trajectory& traj, int vocab);

}  // namespace iprm
