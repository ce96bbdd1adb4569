#include "iprm/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "iprm/errors.hpp"
#include "iprm/numeric.hpp"
#include "iprm/rng.hpp"

namespace iprm {

namespace {

void check_pair_shapes(const TabularLM& policy, const TabularLM& ref) {
  if (policy.vocab() != ref.vocab() || policy.horizon() != ref.horizon())
    throw DomainError("objectives: policy and reference shapes differ");
}

void check_toy(const ToyTrajectory& traj, const TabularLM& lm) {
  if (traj.tokens.empty()) throw ValidationError("objectives: empty trajectory '" + traj.id + "'");
  if (static_cast<int>(traj.tokens.size()) > lm.horizon())
    throw DomainError("objectives: trajectory '" + traj.id + "' exceeds the model horizon");
  for (int tok : traj.tokens)
    if (tok < 0 || tok >= lm.vocab())
      throw DomainError("objectives: trajectory '" + traj.id + "' has a token out of vocabulary");
  if (traj.step_ends.empty() || traj.step_ends.back() != static_cast<int>(traj.tokens.size()))
    throw ValidationError("objectives: trajectory '" + traj.id + "' has malformed step boundaries");
}

double response_reward(const ToyTrajectory& traj, const TabularLM& policy, const TabularLM& ref,
                       double beta) {
  return beta * (policy.seq_logprob(traj.tokens) - ref.seq_logprob(traj.tokens));
}

// Adds coeff * beta * d(sum of policy token log-probs over [from, to)) /
// d logits into grad. The reference contributes no gradient.
void accumulate_logprob_grad(const TabularLM& policy, std::span<const int> tokens, int from,
                             int to, double coeff_beta, std::vector<double>& grad) {
  const int vocab = policy.vocab();
  for (int i = from; i < to; ++i) {
    const auto prefix = tokens.first(static_cast<std::size_t>(i));
    const auto p = policy.token_dist(prefix);
    double* row = grad.data() + policy.row_index(prefix) * static_cast<std::size_t>(vocab);
    for (int b = 0; b < vocab; ++b) {
      const double indicator = b == tokens[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      row[static_cast<std::size_t>(b)] += coeff_beta * (indicator - p[static_cast<std::size_t>(b)]);
    }
  }
}

std::vector<std::size_t> touched_rows(const TabularLM& lm, const ToyTrajectory& traj) {
  std::vector<std::size_t> rows;
  const std::span<const int> tokens(traj.tokens);
  for (std::size_t i = 0; i < tokens.size(); ++i) rows.push_back(lm.row_index(tokens.first(i)));
  return rows;
}

template <typename LossFn>
double max_rel_fd_error(const TabularLM& policy, const std::vector<std::size_t>& rows, double h,
                        std::span<const double> analytic, LossFn&& loss_at) {
  TabularLM probe = policy;
  double worst = 0.0;
  for (std::size_t row : rows) {
    for (int b = 0; b < policy.vocab(); ++b) {
      const std::size_t k = row * static_cast<std::size_t>(policy.vocab()) + static_cast<std::size_t>(b);
      const double saved = probe.mutable_logits()[k];
      probe.mutable_logits()[k] = saved + h;
      const double up = loss_at(probe);
      probe.mutable_logits()[k] = saved - h;
      const double down = loss_at(probe);
      probe.mutable_logits()[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double rel = std::abs(analytic[k] - fd) / std::max({std::abs(analytic[k]), std::abs(fd), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

LossGrad ce_loss(const OutcomeExample& example, const TabularLM& policy, const TabularLM& ref,
                 double beta) {
  check_pair_shapes(policy, ref);
  check_toy(example.traj, policy);
  if (example.label != 0 && example.label != 1)
    throw ValidationError("ce_loss: label must be 0 or 1");
  if (beta <= 0.0) throw DomainError("ce_loss: beta must be positive");

  const double r = response_reward(example.traj, policy, ref, beta);
  LossGrad out;
  // -log sigma(r) when l = 1, -log(1 - sigma(r)) when l = 0.
  out.loss = example.label == 1 ? neg_log_sigmoid(r) : neg_log_sigmoid(-r);
  out.grad.assign(policy.num_entries(), 0.0);
  const double dloss_dr = sigmoid(r) - static_cast<double>(example.label);
  accumulate_logprob_grad(policy, example.traj.tokens, 0,
                          static_cast<int>(example.traj.tokens.size()), dloss_dr * beta, out.grad);
  return out;
}

LossGrad dpo_loss(const PreferencePair& pair, const TabularLM& policy, const TabularLM& ref,
                  double beta) {
  check_pair_shapes(policy, ref);
  check_toy(pair.chosen, policy);
  check_toy(pair.rejected, policy);
  if (beta <= 0.0) throw DomainError("dpo_loss: beta must be positive");

  const double margin = response_reward(pair.chosen, policy, ref, beta) -
                        response_reward(pair.rejected, policy, ref, beta);
  LossGrad out;
  out.loss = neg_log_sigmoid(margin);
  out.grad.assign(policy.num_entries(), 0.0);
  const double dloss_dmargin = sigmoid(margin) - 1.0;
  accumulate_logprob_grad(policy, pair.chosen.tokens, 0,
                          static_cast<int>(pair.chosen.tokens.size()), dloss_dmargin * beta,
                          out.grad);
  accumulate_logprob_grad(policy, pair.rejected.tokens, 0,
                          static_cast<int>(pair.rejected.tokens.size()), -dloss_dmargin * beta,
                          out.grad);
  return out;
}

LossGrad step_kto_loss(const StepLabeledExample& example, const TabularLM& policy,
                       const TabularLM& ref, double beta) {
  check_pair_shapes(policy, ref);
  check_toy(example.traj, policy);
  if (example.labels.size() != example.traj.step_ends.size())
    throw ValidationError("step_kto_loss: label count must match step count");
  for (int l : example.labels)
    if (l != 1 && l != -1) throw DomainError("step_kto_loss: labels must be +1 or -1");
  if (beta <= 0.0) throw DomainError("step_kto_loss: beta must be positive");

  const std::span<const int> tokens(example.traj.tokens);
  const double n = static_cast<double>(example.traj.step_ends.size());
  LossGrad out;
  out.grad.assign(policy.num_entries(), 0.0);
  int start = 0;
  for (std::size_t t = 0; t < example.traj.step_ends.size(); ++t) {
    const int end = example.traj.step_ends[t];
    double r_step = 0.0;
    for (int i = start; i < end; ++i) {
      const auto prefix = tokens.first(static_cast<std::size_t>(i));
      r_step += policy.token_logprob(prefix, tokens[static_cast<std::size_t>(i)]) -
                ref.token_logprob(prefix, tokens[static_cast<std::size_t>(i)]);
    }
    r_step *= beta;

    const double l = static_cast<double>(example.labels[t]);
    out.loss += neg_log_sigmoid(l * std::abs(r_step)) / n;
    // d|r|/dr = sign(r), with the subgradient 0 at r = 0.
    const double sign = r_step > 0.0 ? 1.0 : (r_step < 0.0 ? -1.0 : 0.0);
    const double dloss_dr = (sigmoid(l * std::abs(r_step)) - 1.0) * l * sign / n;
    accumulate_logprob_grad(policy, tokens, start, end, dloss_dr * beta, out.grad);
    start = end;
  }
  return out;
}

PairBuildResult build_pairs(std::span<const OutcomeExample> examples) {
  std::map<std::string, std::pair<std::vector<const OutcomeExample*>, std::vector<const OutcomeExample*>>>
      by_problem;
  for (const OutcomeExample& ex : examples) {
    if (ex.label != 0 && ex.label != 1) throw ValidationError("build_pairs: label must be 0 or 1");
    auto& [correct, incorrect] = by_problem[ex.traj.problem_id];
    (ex.label == 1 ? correct : incorrect).push_back(&ex);
  }

  const auto by_id = [](const OutcomeExample* a, const OutcomeExample* b) {
    return a->traj.id < b->traj.id;
  };
  PairBuildResult out;
  for (auto& [problem_id, classes] : by_problem) {
    auto& [correct, incorrect] = classes;
    std::sort(correct.begin(), correct.end(), by_id);
    std::sort(incorrect.begin(), incorrect.end(), by_id);
    const std::size_t paired = std::min(correct.size(), incorrect.size());
    for (std::size_t k = 0; k < paired; ++k)
      out.pairs.push_back({correct[k]->traj, incorrect[k]->traj, problem_id});
    for (std::size_t k = paired; k < correct.size(); ++k)
      out.leftover_ids.push_back(correct[k]->traj.id);
    for (std::size_t k = paired; k < incorrect.size(); ++k)
      out.leftover_ids.push_back(incorrect[k]->traj.id);
  }
  return out;
}

namespace {

// Seeded choice of `drop` indices from `candidates`; the survivors keep
// their original input order.
void drop_random(std::vector<std::size_t>& candidates, std::size_t drop, std::uint64_t stream,
                 std::set<std::size_t>& dropped) {
  std::mt19937_64 eng(stream);
  deterministic_shuffle(candidates, eng);
  for (std::size_t k = 0; k < drop; ++k) dropped.insert(candidates[k]);
}

}  // namespace

std::vector<OutcomeExample> balance(std::span<const OutcomeExample> examples, Balancing mode,
                                    std::uint64_t seed) {
  if (mode == Balancing::none) return {examples.begin(), examples.end()};

  std::set<std::size_t> dropped;
  if (mode == Balancing::dataset_wise) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < examples.size(); ++i)
      (examples[i].label == 1 ? pos : neg).push_back(i);
    auto& majority = pos.size() > neg.size() ? pos : neg;
    const std::size_t drop = majority.size() - std::min(pos.size(), neg.size());
    drop_random(majority, drop, derive_seed(seed, 0xba1a), dropped);
  } else {
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_problem;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto& [pos, neg] = by_problem[examples[i].traj.problem_id];
      (examples[i].label == 1 ? pos : neg).push_back(i);
    }
    for (auto& [problem_id, classes] : by_problem) {
      auto& [pos, neg] = classes;
      auto& majority = pos.size() > neg.size() ? pos : neg;
      const std::size_t drop = majority.size() - std::min(pos.size(), neg.size());
      drop_random(majority, drop, derive_seed(seed, fnv1a(problem_id)), dropped);
    }
  }

  std::vector<OutcomeExample> out;
  out.reserve(examples.size() - dropped.size());
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (!dropped.contains(i)) out.push_back(examples[i]);
  return out;
}

namespace {

class StepRule {
 public:
  StepRule(const TrainConfig& cfg, std::size_t entries) : cfg_(cfg) {
    if (cfg.optimizer == Optimizer::adam) {
      m_.assign(entries, 0.0);
      v_.assign(entries, 0.0);
    }
  }

  void apply(std::vector<double>& weights, std::span<const double> grad) {
    if (cfg_.optimizer == Optimizer::sgd) {
      for (std::size_t k = 0; k < weights.size(); ++k)
        weights[k] -= cfg_.learning_rate * grad[k];
      return;
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < weights.size(); ++k) {
      m_[k] = kAdamBeta1 * m_[k] + (1.0 - kAdamBeta1) * grad[k];
      v_[k] = kAdamBeta2 * v_[k] + (1.0 - kAdamBeta2) * grad[k] * grad[k];
      weights[k] -= cfg_.learning_rate * (m_[k] / bc1) / (std::sqrt(v_[k] / bc2) + kAdamEps);
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_, v_;
  long long step_ = 0;
};

// One epoch over `count` instances whose loss/grad comes from `eval(i)`;
// returns the epoch mean loss.
template <typename Eval>
double run_epoch(std::size_t count, std::size_t batch_size, std::vector<double>& weights,
                 StepRule& rule, Eval&& eval) {
  double epoch_loss = 0.0;
  std::vector<double> batch_grad(weights.size());
  std::size_t b = 0;
  while (b < count) {
    const std::size_t batch_end = std::min(count, b + batch_size);
    const double scale = 1.0 / static_cast<double>(batch_end - b);
    std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
    double batch_loss = 0.0;
    for (; b < batch_end; ++b) {
      LossGrad lg = eval(b);
      batch_loss += lg.loss;
      for (std::size_t k = 0; k < batch_grad.size(); ++k) batch_grad[k] += lg.grad[k] * scale;
    }
    if (!std::isfinite(batch_loss))
      throw Error("train: non-finite loss; lower the learning rate or beta");
    epoch_loss += batch_loss;
    rule.apply(weights, batch_grad);
  }
  return epoch_loss / static_cast<double>(count);
}

}  // namespace

TrainResult train(const Dataset& data, const TabularLM& policy_init, const TabularLM& ref,
                  const TrainConfig& cfg) {
  check_pair_shapes(policy_init, ref);
  if (cfg.learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
  if (cfg.beta <= 0.0) throw ConfigError("train: beta must be positive");
  if (cfg.epochs < 0) throw ConfigError("train: epochs must be >= 0");

  TrainResult result{policy_init, {}, {}};

  std::vector<OutcomeExample> outcomes;
  std::vector<PreferencePair> pairs;
  std::size_t count = 0;
  switch (cfg.objective) {
    case Objective::ce:
      outcomes = balance(data.outcomes, cfg.balancing, cfg.seed);
      count = outcomes.size();
      break;
    case Objective::dpo: {
      outcomes = balance(data.outcomes, cfg.balancing, cfg.seed);
      PairBuildResult built = build_pairs(outcomes);
      pairs = std::move(built.pairs);
      result.stats.pairs_built = static_cast<int>(pairs.size());
      result.stats.pair_leftovers = static_cast<int>(built.leftover_ids.size());
      count = pairs.size();
      break;
    }
    case Objective::step_kto:
      count = data.step_labeled.size();
      break;
  }
  if (count == 0) throw DomainError("train: no usable training examples");
  result.stats.examples_used = static_cast<int>(count);

  const std::size_t batch_size = cfg.batch_size <= 0 ? count : static_cast<std::size_t>(cfg.batch_size);
  StepRule rule(cfg, result.policy.num_entries());
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double mean_loss = run_epoch(
        count, batch_size, result.policy.mutable_logits(), rule, [&](std::size_t i) {
          switch (cfg.objective) {
            case Objective::ce:
              return ce_loss(outcomes[i], result.policy, ref, cfg.beta);
            case Objective::dpo:
              return dpo_loss(pairs[i], result.policy, ref, cfg.beta);
            case Objective::step_kto:
            default:
              return step_kto_loss(data.step_labeled[i], result.policy, ref, cfg.beta);
          }
        });
    result.loss_history.push_back(mean_loss);
  }
  return result;
}

double grad_check(const OutcomeExample& example, const TabularLM& policy, const TabularLM& ref,
                  double beta, double h) {
  const LossGrad analytic = ce_loss(example, policy, ref, beta);
  return max_rel_fd_error(policy, touched_rows(policy, example.traj), h, analytic.grad,
                          [&](const TabularLM& p) { return ce_loss(example, p, ref, beta).loss; });
}

double grad_check(const PreferencePair& pair, const TabularLM& policy, const TabularLM& ref,
                  double beta, double h) {
  const LossGrad analytic = dpo_loss(pair, policy, ref, beta);
  auto rows = touched_rows(policy, pair.chosen);
  const auto rejected_rows = touched_rows(policy, pair.rejected);
  rows.insert(rows.end(), rejected_rows.begin(), rejected_rows.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return max_rel_fd_error(policy, rows, h, analytic.grad,
                          [&](const TabularLM& p) { return dpo_loss(pair, p, ref, beta).loss; });
}

double grad_check(const StepLabeledExample& example, const TabularLM& policy, const TabularLM& ref,
                  double beta, double h) {
  const LossGrad analytic = step_kto_loss(example, policy, ref, beta);
  return max_rel_fd_error(
      policy, touched_rows(policy, example.traj), h, analytic.grad,
      [&](const TabularLM& p) { return step_kto_loss(example, p, ref, beta).loss; });
}

}  // namespace iprm
