#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace iprm {

// Parametric FLOPs accounting for reward-model development: response
// generation, optional per-step lookahead rollouts, and training. The
// per-token constants follow standard scaling-law accounting (2 * params
// inference, 6 * params training) and are overridable, since any fixed
// counting rule is a modeling choice.

struct CostConfig {
  double gen_params = 0.0;          // parameters of the generation/annotation model
  double rm_params = 0.0;           // parameters of the reward model
  double tokens_per_response = 0.0; // mean response length L
  std::int64_t steps_per_response = 0;   // S
  std::int64_t rollouts_per_step = 0;    // K, lookahead rollouts per step
  std::int64_t instructions = 0;         // M
  std::int64_t responses_per_instruction = 0;  // R
  double inference_flops_per_token_param = 2.0;
  double training_flops_per_token_param = 6.0;
  double epochs = 1.0;
};

void validate(const CostConfig& cfg);

enum class AnnotationMethod {
  implicit_orm,  // response-level labels only: generate M*R responses
  mcts,          // adds S*K lookahead rollouts per response for step labels
};

// Lookahead trajectories needed to step-label one response: S * K.
std::int64_t mcts_trajectory_count_per_response(const CostConfig& cfg);

// Total lookahead trajectories across the dataset: M * R * S * K.
double mcts_trajectory_count_total(const CostConfig& cfg);

// Generation cost. Rollouts are assumed to have the same mean length L as
// full responses, so the mcts total is (1 + S*K) times the response-only
// cost.
double data_collection_flops(const CostConfig& cfg, AnnotationMethod method);

// Training cost over the collected responses; step labels add one label
// token per step to each mcts-annotated response.
double training_flops(const CostConfig& cfg, AnnotationMethod method);

double total_flops(const CostConfig& cfg, AnnotationMethod method);

// (data + training) ratio between two setups.
double total_cost_ratio(const CostConfig& cfg_a, AnnotationMethod method_a,
                        const CostConfig& cfg_b, AnnotationMethod method_b);

struct CostRow {
  std::int64_t responses_per_instruction = 0;
  std::int64_t rollouts_per_response = 0;  // S * K
  double rollouts_total = 0.0;             // M * R * S * K
  double implicit_data = 0.0;
  double implicit_train = 0.0;
  double implicit_total = 0.0;
  double mcts_data = 0.0;
  double mcts_train = 0.0;
  double mcts_total = 0.0;
  double mcts_over_implicit = 0.0;
};

// One row per responses-per-instruction value: the axis along which data
// scale is usually swept when comparing annotation costs.
std::vector<CostRow> comparison_table(const CostConfig& base,
                                      std::span<const std::int64_t> responses_grid);

}  // namespace iprm
