#include "iprm/cost.hpp"

#include "iprm/errors.hpp"

namespace iprm {

void validate(const CostConfig& cfg) {
  const bool counts_ok = cfg.gen_params > 0 && cfg.rm_params > 0 && cfg.tokens_per_response > 0 &&
                         cfg.steps_per_response > 0 && cfg.rollouts_per_step > 0 &&
                         cfg.instructions > 0 && cfg.responses_per_instruction > 0;
  if (!counts_ok) throw ValidationError("CostConfig: all counts must be positive");
  if (cfg.inference_flops_per_token_param <= 0 || cfg.training_flops_per_token_param <= 0)
    throw ValidationError("CostConfig: per-token FLOPs constants must be positive");
  if (cfg.epochs < 0) throw ValidationError("CostConfig: epochs must be >= 0");
}

std::int64_t mcts_trajectory_count_per_response(const CostConfig& cfg) {
  validate(cfg);
  return cfg.steps_per_response * cfg.rollouts_per_step;
}

double mcts_trajectory_count_total(const CostConfig& cfg) {
  return static_cast<double>(cfg.instructions) *
         static_cast<double>(cfg.responses_per_instruction) *
         static_cast<double>(mcts_trajectory_count_per_response(cfg));
}

double data_collection_flops(const CostConfig& cfg, AnnotationMethod method) {
  validate(cfg);
  const double responses = static_cast<double>(cfg.instructions) *
                           static_cast<double>(cfg.responses_per_instruction);
  const double generate = responses * cfg.tokens_per_response *
                          cfg.inference_flops_per_token_param * cfg.gen_params;
  if (method == AnnotationMethod::implicit_orm) return generate;
  const double lookahead = generate * static_cast<double>(cfg.steps_per_response) *
                           static_cast<double>(cfg.rollouts_per_step);
  return generate + lookahead;
}

double training_flops(const CostConfig& cfg, AnnotationMethod method) {
  validate(cfg);
  const double responses = static_cast<double>(cfg.instructions) *
                           static_cast<double>(cfg.responses_per_instruction);
  // Step labels ride along as one extra token per step.
  const double tokens = method == AnnotationMethod::mcts
                            ? cfg.tokens_per_response + static_cast<double>(cfg.steps_per_response)
                            : cfg.tokens_per_response;
  return cfg.epochs * responses * tokens * cfg.training_flops_per_token_param * cfg.rm_params;
}

double total_flops(const CostConfig& cfg, AnnotationMethod method) {
  return data_collection_flops(cfg, method) + training_flops(cfg, method);
}

double total_cost_ratio(const CostConfig& cfg_a, AnnotationMethod method_a,
                        const CostConfig& cfg_b, AnnotationMethod method_b) {
  return total_flops(cfg_a, method_a) / total_flops(cfg_b, method_b);
}

std::vector<CostRow> comparison_table(const CostConfig& base,
                                      std::span<const std::int64_t> responses_grid) {
  std::vector<CostRow> rows;
  rows.reserve(responses_grid.size());
  for (std::int64_t r : responses_grid) {
    CostConfig cfg = base;
    cfg.responses_per_instruction = r;
    CostRow row;
    row.responses_per_instruction = r;
    row.rollouts_per_response = mcts_trajectory_count_per_response(cfg);
    row.rollouts_total = mcts_trajectory_count_total(cfg);
    row.implicit_data = data_collection_flops(cfg, AnnotationMethod::implicit_orm);
    row.implicit_train = training_flops(cfg, AnnotationMethod::implicit_orm);
    row.implicit_total = row.implicit_data + row.implicit_train;
    row.mcts_data = data_collection_flops(cfg, AnnotationMethod::mcts);
    row.mcts_train = training_flops(cfg, AnnotationMethod::mcts);
    row.mcts_total = row.mcts_data + row.mcts_train;
    row.mcts_over_implicit = row.mcts_total / row.implicit_total;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace iprm
