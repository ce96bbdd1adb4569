#include "iprm/bon.hpp"

#include <algorithm>
#include <cmath>

#include "iprm/errors.hpp"

namespace iprm {

namespace {

void check_group(const CandidateGroup& group) {
  if (group.candidates.empty())
    throw ValidationError("candidate group '" + group.problem_id + "' is empty");
  for (const ScoredResponse& c : group.candidates) {
    if (c.problem_id != group.problem_id)
      throw ValidationError("candidate '" + c.id + "' does not belong to problem '" +
                            group.problem_id + "'");
    if (!std::isfinite(c.score))
      throw ValidationError("candidate '" + c.id + "' has a non-finite score");
  }
}

bool require_correct(const ScoredResponse& c) {
  if (!c.correct)
    throw DomainError("candidate '" + c.id + "' lacks a correctness flag needed for evaluation");
  return *c.correct;
}

}  // namespace

const ScoredResponse& best_of_n(const CandidateGroup& group, int n) {
  check_group(group);
  if (n < 1 || n > static_cast<int>(group.candidates.size()))
    throw DomainError("best_of_n: n out of range for problem '" + group.problem_id + "'");
  const ScoredResponse* best = &group.candidates.front();
  for (int i = 1; i < n; ++i) {
    const ScoredResponse& c = group.candidates[static_cast<std::size_t>(i)];
    if (c.score > best->score || (c.score == best->score && c.id < best->id)) best = &c;
  }
  return *best;
}

std::string weighted_vote(const CandidateGroup& group, int n, VoteMode mode) {
  check_group(group);
  if (n < 1 || n > static_cast<int>(group.candidates.size()))
    throw DomainError("weighted_vote: n out of range for problem '" + group.problem_id + "'");

  std::map<std::string, double> aggregate;  // ordered: ties resolve to the smallest answer
  for (int i = 0; i < n; ++i) {
    const ScoredResponse& c = group.candidates[static_cast<std::size_t>(i)];
    if (!c.answer)
      throw DomainError("candidate '" + c.id + "' lacks an answer needed for voting");
    auto [it, inserted] = aggregate.try_emplace(*c.answer, 0.0);
    switch (mode) {
      case VoteMode::weighted_sum:
        it->second += c.score;
        break;
      case VoteMode::count:
        it->second += 1.0;
        break;
      case VoteMode::max:
        it->second = inserted ? c.score : std::max(it->second, c.score);
        break;
    }
  }

  const auto winner = std::max_element(
      aggregate.begin(), aggregate.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  return winner->first;  // max_element keeps the first (smallest) key on ties
}

EvalReport evaluate(std::span<const CandidateGroup> groups, std::span<const int> n_grid,
                    SelectionKind selection, VoteMode vote_mode) {
  EvalReport report;
  report.selection = selection;
  report.vote_mode = vote_mode;
  report.n_grid.assign(n_grid.begin(), n_grid.end());

  for (int n : report.n_grid) {
    if (n < 1) throw DomainError("evaluate: every n must be >= 1");
    int correct_count = 0;
    for (const CandidateGroup& group : groups) {
      check_group(group);
      const int pool = std::min(n, static_cast<int>(group.candidates.size()));
      SelectionRecord record;
      record.n = n;
      record.problem_id = group.problem_id;
      if (selection == SelectionKind::bon) {
        const ScoredResponse& pick = best_of_n(group, pool);
        record.selected = pick.id;
        record.correct = require_correct(pick);
      } else {
        const std::string answer = weighted_vote(group, pool, vote_mode);
        record.selected = answer;
        record.correct = false;
        for (const ScoredResponse& c : group.candidates)
          if (c.answer && *c.answer == answer && require_correct(c)) record.correct = true;
      }
      correct_count += record.correct ? 1 : 0;
      report.selections.push_back(std::move(record));
    }
    report.accuracy[n] =
        groups.empty() ? 0.0 : static_cast<double>(correct_count) / static_cast<double>(groups.size());
  }
  return report;
}

double pass_at_1(std::span<const CandidateGroup> groups) {
  if (groups.empty()) return 0.0;
  int correct_count = 0;
  for (const CandidateGroup& group : groups) {
    check_group(group);
    correct_count += require_correct(group.candidates.front()) ? 1 : 0;
  }
  return static_cast<double>(correct_count) / static_cast<double>(groups.size());
}

std::vector<CandidateGroup> group_by_problem(std::span<const ScoredResponse> responses) {
  std::map<std::string, CandidateGroup> by_problem;
  for (const ScoredResponse& r : responses) {
    auto [it, inserted] = by_problem.try_emplace(r.problem_id);
    if (inserted) it->second.problem_id = r.problem_id;
    it->second.candidates.push_back(r);
  }
  std::vector<CandidateGroup> out;
  out.reserve(by_problem.size());
  for (auto& [id, group] : by_problem) out.push_back(std::move(group));
  return out;
}

}  // namespace iprm
