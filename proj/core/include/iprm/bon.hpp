#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "iprm/trajectory.hpp"

namespace iprm {

// Best-of-N selection, weighted majority voting, and accuracy evaluation
// over groups of scored candidates. All argmax operations break ties
// deterministically: lowest trajectory id for candidates, lexicographically
// smallest string for answers.

struct CandidateGroup {
  std::string problem_id;
  std::vector<ScoredResponse> candidates;  // stored order defines the BoN pools
};

// Argmax score among the first n candidates.
const ScoredResponse& best_of_n(const CandidateGroup& group, int n);

enum class VoteMode { weighted_sum, count, max };

// Groups the first n candidates by answer and aggregates scores per answer
// (sum, candidate count, or per-answer max); returns the winning answer.
// Requires every pooled candidate to carry an answer.
std::string weighted_vote(const CandidateGroup& group, int n, VoteMode mode);

enum class SelectionKind { bon, vote };

struct SelectionRecord {
  int n = 0;
  std::string problem_id;
  std::string selected;  // trajectory id (bon) or answer (vote)
  bool correct = false;
};

struct EvalReport {
  SelectionKind selection = SelectionKind::bon;
  VoteMode vote_mode = VoteMode::weighted_sum;  // meaningful for vote only
  std::vector<int> n_grid;
  std::map<int, double> accuracy;  // per n
  std::vector<SelectionRecord> selections;
};

// Accuracy of the configured selection rule at every n in the grid
// (n is clamped to the group size). A selected answer counts as correct
// when any candidate of the group carrying that answer is marked correct;
// a selected candidate counts via its own flag. Candidates need `correct`
// populated (and `answer`, for voting).
EvalReport evaluate(std::span<const CandidateGroup> groups, std::span<const int> n_grid,
                    SelectionKind selection, VoteMode vote_mode = VoteMode::weighted_sum);

// Mean correctness of the first candidate per problem: the untreated
// generation accuracy.
double pass_at_1(std::span<const CandidateGroup> groups);

// Buckets scored responses by problem id (groups sorted by id, candidates
// in input order).
std::vector<CandidateGroup> group_by_problem(std::span<const ScoredResponse> responses);

}  // namespace iprm
