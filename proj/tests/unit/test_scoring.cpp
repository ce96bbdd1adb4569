#include <doctest.h>

#include <cmath>
#include <random>

#include "iprm/errors.hpp"
#include "iprm/rng.hpp"
#include "iprm/scoring.hpp"

using namespace iprm;

namespace {

Trajectory two_token_fixture() {
  Trajectory traj;
  traj.id = "t0";
  traj.problem_id = "p0";
  traj.tokens = {"a", "b"};
  traj.logp_policy = {-0.5, -1.0};
  traj.logp_ref = std::vector<double>{-1.0, -1.5};
  traj.step_ends = {1, 2};
  return traj;
}

// Random well-formed trajectory: lengths 1..12, random step partition.
Trajectory random_trajectory(std::mt19937_64& eng, bool with_ref) {
  Trajectory traj;
  traj.id = "r" + std::to_string(eng() % 100000);
  traj.problem_id = "p";
  const int t = 1 + static_cast<int>(next_index(eng, 12));
  std::vector<double> ref;
  for (int i = 0; i < t; ++i) {
    traj.tokens.push_back("x");
    traj.logp_policy.push_back(-next_double(eng, 0.0, 8.0));
    ref.push_back(-next_double(eng, 0.0, 8.0));
  }
  if (with_ref) traj.logp_ref = std::move(ref);
  for (int i = 1; i < t; ++i)
    if (next_double(eng) < 0.4) traj.step_ends.push_back(i);
  traj.step_ends.push_back(t);
  return traj;
}

}  // namespace

TEST_CASE("outcome reward matches the hand-evaluated definition") {
  // beta = 2, logp_policy = [-0.5, -1.0], logp_ref = [-1.0, -1.5]:
  // 2 * ((-1.5) - (-2.5)) = 2.0
  const Trajectory traj = two_token_fixture();
  const ScoringConfig cfg{2.0, Aggregation::min, RefMode::with_ref};
  CHECK(outcome_reward(traj, cfg) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("outcome reward is zero when policy equals reference") {
  Trajectory traj = two_token_fixture();
  traj.logp_ref = traj.logp_policy;
  const ScoringConfig cfg{0.05, Aggregation::min, RefMode::with_ref};
  CHECK(outcome_reward(traj, cfg) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("outcome reward is linear in beta") {
  std::mt19937_64 eng(7);
  for (int i = 0; i < 20; ++i) {
    const Trajectory traj = random_trajectory(eng, true);
    const ScoringConfig one{0.7, Aggregation::min, RefMode::with_ref};
    const ScoringConfig two{1.4, Aggregation::min, RefMode::with_ref};
    CHECK(outcome_reward(traj, two) ==
          doctest::Approx(2.0 * outcome_reward(traj, one)).epsilon(1e-12));
  }
}

TEST_CASE("q values are the partial sums at step ends") {
  const Trajectory traj = two_token_fixture();
  const ScoringConfig cfg{2.0, Aggregation::min, RefMode::with_ref};
  const auto q = q_values(traj, cfg);
  REQUIRE(q.size() == 2);
  CHECK(q[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(q.back() == doctest::Approx(outcome_reward(traj, cfg)).epsilon(1e-12));
}

TEST_CASE("q values vanish when policy equals reference") {
  Trajectory traj = two_token_fixture();
  traj.logp_ref = traj.logp_policy;
  for (double q : q_values(traj, ScoringConfig{1.0, Aggregation::min, RefMode::with_ref}))
    CHECK(q == 0.0);
}

TEST_CASE("a single step yields q = [outcome]") {
  Trajectory traj = two_token_fixture();
  traj.step_ends = {2};
  const ScoringConfig cfg{0.3, Aggregation::min, RefMode::with_ref};
  const auto q = q_values(traj, cfg);
  REQUIRE(q.size() == 1);
  CHECK(q[0] == doctest::Approx(outcome_reward(traj, cfg)).epsilon(1e-12));
}

TEST_CASE("process rewards difference the q sequence") {
  CHECK(process_rewards(std::vector<double>{1.0, 2.0}) == std::vector<double>{1.0, 1.0});
  CHECK(process_rewards(std::vector<double>{0.0}) == std::vector<double>{0.0});
  const auto r = process_rewards(std::vector<double>{3.5, 3.5, 3.5});
  CHECK(r == std::vector<double>{3.5, 0.0, 0.0});
  CHECK_THROWS_AS(process_rewards(std::vector<double>{}), ValidationError);
}

TEST_CASE("telescoping: step rewards sum to the outcome") {
  std::mt19937_64 eng(11);
  for (int i = 0; i < 200; ++i) {
    const bool with_ref = i % 2 == 0;
    const Trajectory traj = random_trajectory(eng, with_ref);
    const ScoringConfig cfg{0.05, Aggregation::min,
                            with_ref ? RefMode::with_ref : RefMode::ref_free};
    const StepScores scores = step_scores(traj, cfg);
    double sum = 0.0;
    for (double r : scores.r_step) sum += r;
    CHECK(std::abs(sum - scores.outcome) <= 1e-9);
    CHECK(std::abs(scores.q.back() - scores.outcome) <= 1e-9);
  }
}

TEST_CASE("aggregation modes") {
  StepScores scores;
  scores.r_step = {1.0, -0.3, 0.4};
  scores.q = {1.0, 0.7, 1.1};
  scores.outcome = 1.1;
  CHECK(aggregate_response_score(scores, {1, Aggregation::min, RefMode::with_ref}) ==
        doctest::Approx(-0.3));
  CHECK(aggregate_response_score(scores, {1, Aggregation::sum, RefMode::with_ref}) ==
        doctest::Approx(1.1));
  CHECK(aggregate_response_score(scores, {1, Aggregation::last, RefMode::with_ref}) ==
        doctest::Approx(0.4));
  CHECK(aggregate_response_score(scores, {1, Aggregation::mean, RefMode::with_ref}) ==
        doctest::Approx(1.1 / 3.0));

  StepScores single;
  single.r_step = {2.0};
  single.q = {2.0};
  single.outcome = 2.0;
  for (Aggregation agg :
       {Aggregation::min, Aggregation::sum, Aggregation::last, Aggregation::mean})
    CHECK(aggregate_response_score(single, {1, agg, RefMode::with_ref}) == doctest::Approx(2.0));
}

TEST_CASE("sum aggregation equals the outcome reward on any trajectory") {
  std::mt19937_64 eng(13);
  for (int i = 0; i < 30; ++i) {
    const Trajectory traj = random_trajectory(eng, true);
    const ScoringConfig cfg{0.05, Aggregation::sum, RefMode::with_ref};
    CHECK(aggregate_response_score(step_scores(traj, cfg), cfg) ==
          doctest::Approx(outcome_reward(traj, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("scaling beta scales every response score and keeps the argmax") {
  std::mt19937_64 eng(17);
  for (Aggregation agg :
       {Aggregation::min, Aggregation::sum, Aggregation::last, Aggregation::mean}) {
    std::vector<Trajectory> pool;
    for (int i = 0; i < 6; ++i) pool.push_back(random_trajectory(eng, true));
    const ScoringConfig low{0.05, agg, RefMode::with_ref};
    const ScoringConfig high{0.05 * 7.0, agg, RefMode::with_ref};
    std::size_t argmax_low = 0, argmax_high = 0;
    double best_low = -1e300, best_high = -1e300;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double s_low = aggregate_response_score(step_scores(pool[i], low), low);
      const double s_high = aggregate_response_score(step_scores(pool[i], high), high);
      CHECK(s_high == doctest::Approx(7.0 * s_low).epsilon(1e-9));
      if (s_low > best_low) {
        best_low = s_low;
        argmax_low = i;
      }
      if (s_high > best_high) {
        best_high = s_high;
        argmax_high = i;
      }
    }
    CHECK(argmax_low == argmax_high);
  }
}

TEST_CASE("ref-free scoring shifts equal-length outcome rewards by a constant") {
  std::mt19937_64 eng(23);
  const int t = 6;
  const double c = -1.7;  // any constant per-token reference log-probability
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Trajectory> pool;
    for (int i = 0; i < 5; ++i) {
      Trajectory traj;
      traj.id = "c" + std::to_string(i);
      traj.problem_id = "p";
      for (int j = 0; j < t; ++j) {
        traj.tokens.push_back("x");
        traj.logp_policy.push_back(-next_double(eng, 0.0, 6.0));
      }
      traj.step_ends = {t};
      pool.push_back(traj);
    }
    const ScoringConfig free_cfg{0.05, Aggregation::sum, RefMode::ref_free};
    const ScoringConfig const_cfg{0.05, Aggregation::sum, RefMode::with_ref};

    std::size_t argmax_free = 0, argmax_const = 0;
    double best_free = -1e300, best_const = -1e300;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double s_free = outcome_reward(pool[i], free_cfg);
      Trajectory with_const = pool[i];
      with_const.logp_ref = std::vector<double>(static_cast<std::size_t>(t), c);
      const double s_const = outcome_reward(with_const, const_cfg);
      // The shift is exactly beta * T * c for every candidate.
      CHECK(s_const - s_free == doctest::Approx(-0.05 * t * c).epsilon(1e-9));
      if (s_free > best_free) {
        best_free = s_free;
        argmax_free = i;
      }
      if (s_const > best_const) {
        best_const = s_const;
        argmax_const = i;
      }
    }
    CHECK(argmax_free == argmax_const);
  }
}

TEST_CASE("validation rejects malformed trajectories") {
  Trajectory traj = two_token_fixture();

  SUBCASE("length mismatch") {
    traj.logp_policy.pop_back();
    CHECK_THROWS_AS(validate(traj), ValidationError);
  }
  SUBCASE("positive log-probability") {
    traj.logp_policy[0] = 0.5;
    CHECK_THROWS_AS(validate(traj), ValidationError);
  }
  SUBCASE("tiny positive values inside the tolerance survive") {
    traj.logp_policy[0] = 5e-10;
    CHECK_NOTHROW(validate(traj));
  }
  SUBCASE("step_ends not increasing") {
    traj.step_ends = {2, 2};
    CHECK_THROWS_AS(validate(traj), ValidationError);
  }
  SUBCASE("step_ends not ending at T") {
    traj.step_ends = {1};
    CHECK_THROWS_AS(validate(traj), ValidationError);
  }
  SUBCASE("empty") {
    traj.tokens.clear();
    traj.logp_policy.clear();
    traj.logp_ref->clear();
    traj.step_ends.clear();
    CHECK_THROWS_AS(validate(traj), ValidationError);
  }
}

TEST_CASE("with-ref scoring requires a reference") {
  Trajectory traj = two_token_fixture();
  traj.logp_ref.reset();
  CHECK_THROWS_AS(outcome_reward(traj, ScoringConfig{}), ConfigError);
  CHECK_NOTHROW(outcome_reward(traj, ScoringConfig{0.05, Aggregation::min, RefMode::ref_free}));
}

TEST_CASE("batch scoring preserves order and collects issues") {
  std::mt19937_64 eng(29);
  std::vector<Trajectory> batch;
  for (int i = 0; i < 8; ++i) {
    Trajectory traj = random_trajectory(eng, true);
    traj.id = "b" + std::to_string(i);
    batch.push_back(traj);
  }
  batch[3].logp_ref.reset();  // bad under with_ref
  const ScoringConfig cfg{0.05, Aggregation::min, RefMode::with_ref};

  const BatchResult result = score_trace_batch(batch, cfg);
  REQUIRE(result.scored.size() == 7);
  REQUIRE(result.issues.size() == 1);
  CHECK(result.issues[0].trajectory_id == "b3");
  // Order contract: the surviving outputs keep input order.
  std::vector<std::string> ids;
  for (const auto& st : result.scored) ids.push_back(st.response.id);
  CHECK(ids == std::vector<std::string>{"b0", "b1", "b2", "b4", "b5", "b6", "b7"});

  CHECK_THROWS_AS(score_trace_batch(batch, cfg, /*strict=*/true), ConfigError);

  SUBCASE("empty batch") {
    const BatchResult empty = score_trace_batch(std::vector<Trajectory>{}, cfg);
    CHECK(empty.scored.empty());
    CHECK(empty.issues.empty());
  }
  SUBCASE("singleton batch consistent with the single-trajectory path") {
    const BatchResult one = score_trace_batch(std::vector<Trajectory>{batch[0]}, cfg);
    REQUIRE(one.scored.size() == 1);
    CHECK(one.scored[0].response.score ==
          doctest::Approx(aggregate_response_score(step_scores(batch[0], cfg), cfg)));
  }
}

TEST_CASE("permuting the batch permutes the output identically") {
  std::mt19937_64 eng(31);
  std::vector<Trajectory> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_trajectory(eng, true));
  const ScoringConfig cfg{0.05, Aggregation::min, RefMode::with_ref};
  const BatchResult forward = score_trace_batch(batch, cfg);

  std::vector<Trajectory> reversed(batch.rbegin(), batch.rend());
  const BatchResult backward = score_trace_batch(reversed, cfg);
  REQUIRE(forward.scored.size() == backward.scored.size());
  for (std::size_t i = 0; i < forward.scored.size(); ++i) {
    const auto& a = forward.scored[i];
    const auto& b = backward.scored[backward.scored.size() - 1 - i];
    CHECK(a.response == b.response);
    CHECK(a.steps.q == b.steps.q);
  }
}
