#include <doctest.h>

#include <cmath>

#include "iprm/enumeration.hpp"
#include "iprm/errors.hpp"
#include "iprm/io.hpp"
#include "iprm/rng.hpp"
#include "iprm/scoring.hpp"

using namespace iprm;

TEST_CASE("identical models give zero reward everywhere") {
  const TabularLM lm = TabularLM::random(3, 3, 4);
  for (int len = 0; len <= 3; ++len) {
    const auto prefix = random_prefix(3, len, 77 + len);
    for (double beta : {1e-3, 0.05, 1.0, 1e3}) {
      CHECK(std::abs(exp_avg_reward(lm, lm, prefix, 1.0, beta)) <= 1e-12);
      CHECK(std::abs(exact_exp_avg_q(lm, lm, prefix, beta)) <= 1e-12);
    }
    CHECK(std::abs(exact_mean_reward(lm, lm, prefix)) <= 1e-12);
    CHECK(std::abs(exact_max_reward(lm, lm, prefix)) <= 1e-12);
  }
}

TEST_CASE("complete prefixes collapse to the outcome reward") {
  const TabularLM policy = TabularLM::random(3, 3, 1);
  const TabularLM ref = TabularLM::random(3, 3, 2);
  const std::vector<int> seq{2, 0, 1};
  const double r = 0.7 * (policy.seq_logprob(seq) - ref.seq_logprob(seq));
  CHECK(exact_exp_avg_q(policy, ref, seq, 0.7) == doctest::Approx(r).epsilon(1e-12));
  CHECK(exact_mean_reward(policy, ref, seq, 0.7) == doctest::Approx(r).epsilon(1e-12));
  CHECK(exact_max_reward(policy, ref, seq, 0.7) == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("hand enumeration over V=2, T=2 matches the partial-sum q") {
  // The smallest nontrivial case: a length-1 prefix with two continuations.
  const TabularLM policy = TabularLM::random(2, 2, 5);
  const TabularLM ref = TabularLM::random(2, 2, 6);
  const std::vector<int> prefix{1};
  const double beta = 1.0;

  // Enumerate both continuations by hand.
  double sum = 0.0;
  for (int v = 0; v < 2; ++v) {
    const std::vector<int> full{1, v};
    const double r = beta * (policy.seq_logprob(full) - ref.seq_logprob(full));
    sum += std::exp(ref.token_logprob(prefix, v)) * std::exp(r / beta);
  }
  const double by_hand = beta * std::log(sum);

  const double partial = beta * (policy.seq_logprob(prefix) - ref.seq_logprob(prefix));
  CHECK(by_hand == doctest::Approx(partial).epsilon(1e-12));
  CHECK(exact_exp_avg_q(policy, ref, prefix, beta) == doctest::Approx(partial).epsilon(1e-12));
}

TEST_CASE("for_each_completion enumerates the whole continuation space") {
  const TabularLM lm = TabularLM::random(3, 3, 8);
  const std::vector<int> prefix{1};
  int leaves = 0;
  double mass = 0.0;
  for_each_completion(lm, prefix, [&](std::span<const int> full, double lp_cont) {
    ++leaves;
    REQUIRE(full.size() == 3);
    CHECK(full[0] == 1);
    mass += std::exp(lp_cont);
  });
  CHECK(leaves == 9);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mean and max bracket the exponential average") {
  const TabularLM policy = TabularLM::random(4, 4, 12);
  const TabularLM ref = TabularLM::random(4, 4, 13);
  for (int len = 0; len <= 3; ++len) {
    const auto prefix = random_prefix(4, len, 1000 + len);
    const double mean = exact_mean_reward(policy, ref, prefix);
    const double max = exact_max_reward(policy, ref, prefix);
    CHECK(mean <= max + 1e-12);
    for (double beta : {1e-3, 0.1, 1.0, 100.0}) {
      const double q = exp_avg_reward(policy, ref, prefix, 1.0, beta);
      CHECK(q >= mean - 1e-9);
      CHECK(q <= max + 1e-9);
    }
  }
}

TEST_CASE("a deterministic reference makes mean equal max") {
  // Reference concentrated on one continuation path.
  const int vocab = 3, horizon = 2;
  std::vector<double> ref_logits((1 + 3) * 3, 0.0);
  for (std::size_t row = 0; row < ref_logits.size() / 3; ++row) ref_logits[row * 3] = 40.0;
  const TabularLM ref(vocab, horizon, std::move(ref_logits));
  const TabularLM policy = TabularLM::random(vocab, horizon, 3);

  const std::vector<int> prefix{2};
  const double mean = exact_mean_reward(policy, ref, prefix);
  const std::vector<int> supported{2, 0};
  const double r = policy.seq_logprob(supported) - ref.seq_logprob(supported);
  CHECK(mean == doctest::Approx(r).epsilon(1e-8));
}

TEST_CASE("verify_q_identity passes on random pairs") {
  const TabularLM policy = TabularLM::random(3, 4, 100);
  const TabularLM ref = TabularLM::random(3, 4, 101);
  for (double beta : {0.1, 1.0, 5.0}) {
    const IdentityReport report = verify_q_identity(policy, ref, beta, 15, 2024);
    CHECK(report.pass);
    CHECK(report.max_abs_diff <= 1e-9);
    CHECK(report.trials == 15);
  }
}

TEST_CASE("verify_backward_recursion passes on random pairs") {
  const TabularLM policy = TabularLM::random(4, 3, 200);
  const TabularLM ref = TabularLM::random(4, 3, 201);
  for (double beta : {0.1, 1.0, 5.0}) {
    const RecursionReport report = verify_backward_recursion(policy, ref, beta, 12, 7);
    CHECK(report.pass);
    CHECK(report.max_abs_diff <= 1e-9);
  }
}

TEST_CASE("verify_q_bounds checks bounds, monotonicity and limits") {
  const TabularLM policy = TabularLM::random(4, 4, 300);
  const TabularLM ref = TabularLM::random(4, 4, 301);
  const BoundsReport report = verify_q_bounds(policy, ref, kDefaultBetaGrid, 10, 11);
  CHECK(report.bounds_pass);
  CHECK(report.monotonic_pass);
  CHECK(report.max_lower_violation <= 1e-9);
  CHECK(report.max_upper_violation <= 1e-9);
  CHECK(report.max_monotonicity_violation <= 1e-9);
}

TEST_CASE("identical models pass every verifier with zero slack") {
  const TabularLM lm = TabularLM::random(3, 3, 400);
  const IdentityReport identity = verify_q_identity(lm, lm, 0.05, 10, 1);
  CHECK(identity.pass);
  CHECK(identity.max_abs_diff <= 1e-12);
  const BoundsReport bounds = verify_q_bounds(lm, lm, kDefaultBetaGrid, 10, 1);
  CHECK(bounds.pass);  // max == mean == 0, limits degenerate cleanly
}

TEST_CASE("verifier reports round-trip through serialization") {
  const TabularLM policy = TabularLM::random(3, 3, 500);
  const TabularLM ref = TabularLM::random(3, 3, 501);

  const IdentityReport identity = verify_q_identity(policy, ref, 0.5, 8, 2);
  const IdentityReport identity2 = identity_report_from_json(to_json_line(identity));
  CHECK(identity2.beta == identity.beta);
  CHECK(identity2.trials == identity.trials);
  CHECK(identity2.max_abs_diff == identity.max_abs_diff);
  CHECK(identity2.worst.trial == identity.worst.trial);
  CHECK(identity2.pass == identity.pass);

  const RecursionReport rec = verify_backward_recursion(policy, ref, 0.5, 8, 3);
  const RecursionReport rec2 = recursion_report_from_json(to_json_line(rec));
  CHECK(rec2.max_abs_diff == rec.max_abs_diff);
  CHECK(rec2.pass == rec.pass);

  const BoundsReport bounds = verify_q_bounds(policy, ref, kDefaultBetaGrid, 8, 4);
  const BoundsReport bounds2 = bounds_report_from_json(to_json_line(bounds));
  CHECK(bounds2.beta_grid == bounds.beta_grid);
  CHECK(bounds2.max_lower_violation == bounds.max_lower_violation);
  CHECK(bounds2.max_low_beta_excess == bounds.max_low_beta_excess);
  CHECK(bounds2.pass == bounds.pass);
}

TEST_CASE("enumeration oracle rejects mismatched pairs and bad betas") {
  const TabularLM a = TabularLM::random(3, 3, 1);
  const TabularLM b = TabularLM::random(4, 3, 1);
  CHECK_THROWS_AS(exact_exp_avg_q(a, b, {}, 1.0), DomainError);
  CHECK_THROWS_AS(exp_avg_reward(a, a, {}, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(verify_q_bounds(a, a, std::vector<double>{1.0}, 5, 0), DomainError);
}
