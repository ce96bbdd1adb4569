#include "iprm/tabular_lm.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <numeric>

#include "iprm/errors.hpp"
#include "iprm/numeric.hpp"
#include "iprm/rng.hpp"

namespace iprm {

TabularLM::TabularLM(int vocab, int horizon, std::vector<double> logits, std::uint64_t seed)
    : vocab_(vocab), horizon_(horizon), seed_(seed) {
  if (vocab < 2) throw DomainError("TabularLM: vocab must be >= 2");
  if (horizon < 1) throw DomainError("TabularLM: horizon must be >= 1");
  std::uint64_t sequences = 1;
  level_offsets_.assign(static_cast<std::size_t>(horizon) + 1, 0);
  for (int t = 0; t < horizon; ++t) {
    level_offsets_[static_cast<std::size_t>(t) + 1] =
        level_offsets_[static_cast<std::size_t>(t)] + sequences;
    sequences *= static_cast<std::uint64_t>(vocab);
    if (sequences > kMaxSequences)
      throw ResourceError("TabularLM: vocab^horizon exceeds the enumeration cap");
  }
  num_rows_ = level_offsets_.back();
  if (logits.size() != num_rows_ * static_cast<std::size_t>(vocab))
    throw DomainError("TabularLM: logits size does not match vocab/horizon");
  logits_ = std::move(logits);
}

TabularLM TabularLM::random(int vocab, int horizon, std::uint64_t seed) {
  if (vocab < 2) throw DomainError("TabularLM: vocab must be >= 2");
  if (horizon < 1) throw DomainError("TabularLM: horizon must be >= 1");
  std::uint64_t rows = 0, level = 1;
  for (int t = 0; t < horizon; ++t) {
    rows += level;
    level *= static_cast<std::uint64_t>(vocab);
    if (level > kMaxSequences)
      throw ResourceError("TabularLM: vocab^horizon exceeds the enumeration cap");
  }
  std::vector<double> logits(rows * static_cast<std::uint64_t>(vocab));
  std::mt19937_64 eng(derive_seed(seed, 0x7ab1e));
  for (double& z : logits) z = next_double(eng, -2.0, 2.0);
  return TabularLM(vocab, horizon, std::move(logits), seed);
}

void TabularLM::check_prefix(std::span<const int> prefix, std::size_t max_len) const {
  if (prefix.size() > max_len) throw DomainError("TabularLM: prefix too long for horizon");
  for (int tok : prefix)
    if (tok < 0 || tok >= vocab_) throw DomainError("TabularLM: token out of vocabulary");
}

std::size_t TabularLM::row_index(std::span<const int> prefix) const {
  check_prefix(prefix, static_cast<std::size_t>(horizon_) - 1);
  std::size_t idx = 0;
  for (int tok : prefix) idx = idx * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(tok);
  return level_offsets_[prefix.size()] + idx;
}

std::span<const double> TabularLM::logit_row(std::span<const int> prefix) const {
  return std::span<const double>(logits_).subspan(row_index(prefix) * static_cast<std::size_t>(vocab_),
                                                  static_cast<std::size_t>(vocab_));
}

std::vector<double> TabularLM::token_dist(std::span<const int> prefix) const {
  const auto row = logit_row(prefix);
  const double lse = log_sum_exp(row);
  std::vector<double> p(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) p[i] = std::exp(row[i] - lse);
  return p;
}

std::vector<double> TabularLM::token_log_dist(std::span<const int> prefix) const {
  const auto row = logit_row(prefix);
  const double lse = log_sum_exp(row);
  std::vector<double> lp(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) lp[i] = row[i] - lse;
  return lp;
}

double TabularLM::token_logprob(std::span<const int> prefix, int token) const {
  if (token < 0 || token >= vocab_) throw DomainError("TabularLM: token out of vocabulary");
  const auto row = logit_row(prefix);
  return row[static_cast<std::size_t>(token)] - log_sum_exp(row);
}

double TabularLM::seq_logprob(std::span<const int> seq) const {
  check_prefix(seq, static_cast<std::size_t>(horizon_));
  double lp = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) lp += token_logprob(seq.first(i), seq[i]);
  return lp;
}

std::vector<int> TabularLM::sample_completion(std::span<const int> prefix,
                                              std::uint64_t rng_seed) const {
  check_prefix(prefix, static_cast<std::size_t>(horizon_));
  std::mt19937_64 eng(rng_seed);
  std::vector<int> seq(prefix.begin(), prefix.end());
  seq.reserve(static_cast<std::size_t>(horizon_));
  while (static_cast<int>(seq.size()) < horizon_) {
    const auto p = token_dist(seq);
    seq.push_back(static_cast<int>(next_categorical(eng, p)));
  }
  return seq;
}

std::vector<std::vector<int>> TabularLM::sample(std::uint64_t rng_seed, int n) const {
  if (n < 0) throw DomainError("TabularLM::sample: n must be >= 0");
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    out.push_back(sample_completion({}, derive_seed(rng_seed, static_cast<std::uint64_t>(j))));
  return out;
}

ToyTask ToyTask::last_token_eq(int target) {
  ToyTask task;
  task.name = "last-token-eq:" + std::to_string(target);
  task.correct = [target](std::span<const int> seq) { return !seq.empty() && seq.back() == target; };
  task.answer = [](std::span<const int> seq) { return std::to_string(seq.back()); };
  return task;
}

ToyTask ToyTask::token_sum_mod(int modulus, int residue) {
  if (modulus < 1) throw DomainError("token_sum_mod: modulus must be >= 1");
  ToyTask task;
  task.name = "token-sum-mod:" + std::to_string(modulus) + ":" + std::to_string(residue);
  task.correct = [modulus, residue](std::span<const int> seq) {
    long long sum = std::accumulate(seq.begin(), seq.end(), 0LL);
    return sum % modulus == residue % modulus;
  };
  task.answer = [](std::span<const int> seq) { return std::to_string(seq.back()); };
  return task;
}

ToyTask ToyTask::parse(const std::string& descriptor) {
  const auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t colon = s.find(':', start);
      parts.push_back(s.substr(start, colon - start));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    return parts;
  };
  const auto to_int = [&](const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw DomainError("ToyTask: bad integer in descriptor '" + descriptor + "'");
    return v;
  };
  const auto parts = split(descriptor);
  if (parts.size() == 2 && parts[0] == "last-token-eq") return last_token_eq(to_int(parts[1]));
  if (parts.size() == 3 && parts[0] == "token-sum-mod")
    return token_sum_mod(to_int(parts[1]), to_int(parts[2]));
  throw DomainError("ToyTask: unknown descriptor '" + descriptor +
                    "' (expected last-token-eq:<v> or token-sum-mod:<m>:<r>)");
}

std::vector<int> uniform_step_ends(int num_tokens, int step_len) {
  if (num_tokens < 1) throw DomainError("uniform_step_ends: need at least one token");
  if (step_len < 1) throw DomainError("uniform_step_ends: step length must be >= 1");
  std::vector<int> ends;
  for (int e = step_len; e < num_tokens; e += step_len) ends.push_back(e);
  ends.push_back(num_tokens);
  return ends;
}

Trajectory make_trajectory(const TabularLM& policy, const TabularLM& ref,
                           const ToyTrajectory& toy, const ToyTask* task) {
  if (policy.vocab() != ref.vocab() || policy.horizon() != ref.horizon())
    throw DomainError("make_trajectory: policy and reference shapes differ");
  Trajectory traj;
  traj.id = toy.id;
  traj.problem_id = toy.problem_id;
  traj.tokens.reserve(toy.tokens.size());
  traj.logp_policy.reserve(toy.tokens.size());
  std::vector<double> logp_ref;
  logp_ref.reserve(toy.tokens.size());
  const std::span<const int> seq(toy.tokens);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    traj.tokens.push_back(std::to_string(seq[i]));
    traj.logp_policy.push_back(policy.token_logprob(seq.first(i), seq[i]));
    logp_ref.push_back(ref.token_logprob(seq.first(i), seq[i]));
  }
  traj.logp_ref = std::move(logp_ref);
  traj.step_ends = toy.step_ends;
  if (task) {
    traj.answer = task->answer(seq);
    traj.correct = task->correct(seq);
  }
  validate(traj);
  return traj;
}

ToyTrajectory to_toy_trajectory(const Trajectory& traj, int vocab) {
  ToyTrajectory toy;
  toy.id = traj.id;
  toy.problem_id = traj.problem_id;
  toy.tokens.reserve(traj.tokens.size());
  for (const std::string& tok : traj.tokens) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < 0 || v >= vocab)
      throw DomainError("trajectory '" + traj.id + "': token '" + tok +
                        "' is not an integer in [0, " + std::to_string(vocab) + ")");
    toy.tokens.push_back(v);
  }
  toy.step_ends = traj.step_ends;
  return toy;
}

}  // namespace iprm
