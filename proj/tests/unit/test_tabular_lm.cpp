#include <doctest.h>

#include <cmath>
#include <numeric>

#include "iprm/errors.hpp"
#include "iprm/tabular_lm.hpp"

using namespace iprm;

TEST_CASE("all-zero logits give the uniform distribution") {
  TabularLM lm(4, 2, std::vector<double>((1 + 4) * 4, 0.0));
  const auto p = lm.token_dist({});
  for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax of [ln 3, 0] is [0.75, 0.25]") {
  TabularLM lm(2, 1, {std::log(3.0), 0.0});
  const auto p = lm.token_dist({});
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to shifting a logit row") {
  TabularLM lm = TabularLM::random(3, 3, 5);
  const std::vector<int> prefix{1, 2};
  const auto before = lm.token_dist(prefix);

  TabularLM shifted = lm;
  const std::size_t row = shifted.row_index(prefix) * 3;
  for (int v = 0; v < 3; ++v) shifted.mutable_logits()[row + v] += 17.25;
  const auto after = shifted.token_dist(prefix);
  for (int v = 0; v < 3; ++v) CHECK(after[v] == doctest::Approx(before[v]).epsilon(1e-12));
}

TEST_CASE("every conditional distribution sums to one") {
  const TabularLM lm = TabularLM::random(5, 4, 99);
  std::vector<int> prefix;
  // spot-check one row per level down a path
  for (int t = 0; t < 4; ++t) {
    const auto p = lm.token_dist(prefix);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    prefix.push_back(t % 5);
  }
}

TEST_CASE("sequence log-probability") {
  SUBCASE("uniform model: 3 tokens cost 3 ln 2") {
    TabularLM lm(2, 3, std::vector<double>((1 + 2 + 4) * 2, 0.0));
    CHECK(lm.seq_logprob(std::vector<int>{0, 1, 0}) ==
          doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-12));
  }
  SUBCASE("empty sequence has log-probability 0") {
    const TabularLM lm = TabularLM::random(3, 2, 1);
    CHECK(lm.seq_logprob({}) == 0.0);
  }
  SUBCASE("additivity over a split point") {
    const TabularLM lm = TabularLM::random(4, 5, 21);
    const std::vector<int> seq{2, 0, 3, 1, 2};
    const std::span<const int> s(seq);
    double tail = 0.0;
    for (std::size_t i = 2; i < seq.size(); ++i) tail += lm.token_logprob(s.first(i), seq[i]);
    CHECK(lm.seq_logprob(seq) ==
          doctest::Approx(lm.seq_logprob(s.first(2)) + tail).epsilon(1e-12));
  }
}

TEST_CASE("sampling is deterministic under the seed") {
  const TabularLM lm = TabularLM::random(4, 4, 3);
  CHECK(lm.sample(123, 5) == lm.sample(123, 5));
  CHECK(lm.sample(123, 0).empty());
  // per-draw streams: the first k draws agree regardless of n
  const auto ten = lm.sample(7, 10);
  const auto three = lm.sample(7, 3);
  for (int j = 0; j < 3; ++j) CHECK(ten[j] == three[j]);
}

TEST_CASE("a near-deterministic model samples its greedy path") {
  // one dominant logit per row
  const int vocab = 3, horizon = 3;
  std::vector<double> logits((1 + 3 + 9) * 3, 0.0);
  for (std::size_t row = 0; row < logits.size() / 3; ++row)
    logits[row * 3 + (row % 3)] = 1e6;
  TabularLM lm(vocab, horizon, std::move(logits));
  const auto draws = lm.sample(99, 8);
  for (const auto& seq : draws) CHECK(seq == draws.front());
}

TEST_CASE("domain errors") {
  const TabularLM lm = TabularLM::random(3, 2, 0);
  CHECK_THROWS_AS(lm.token_dist(std::vector<int>{0, 1}), DomainError);   // prefix too long
  CHECK_THROWS_AS(lm.token_dist(std::vector<int>{7}), DomainError);     // out of vocab
  CHECK_THROWS_AS(lm.seq_logprob(std::vector<int>{0, 1, 2}), DomainError);
  CHECK_THROWS_AS(TabularLM::random(1, 2, 0), DomainError);
  CHECK_THROWS_AS(TabularLM::random(2, 0, 0), DomainError);
  CHECK_THROWS_AS(TabularLM::random(2, 21, 0), ResourceError);  // 2^21 sequences over the cap
  CHECK_THROWS_AS(TabularLM(2, 2, std::vector<double>{0.0}), DomainError);
}

TEST_CASE("random construction is seed-reproducible") {
  const TabularLM a = TabularLM::random(4, 3, 42);
  const TabularLM b = TabularLM::random(4, 3, 42);
  const TabularLM c = TabularLM::random(4, 3, 43);
  CHECK(a == b);
  CHECK(a != c);
  for (double z : a.raw_logits()) {
    CHECK(z >= -2.0);
    CHECK(z < 2.0);
  }
}

TEST_CASE("toy task predicates and answers") {
  const ToyTask last = ToyTask::last_token_eq(2);
  CHECK(last.correct(std::vector<int>{0, 1, 2}));
  CHECK_FALSE(last.correct(std::vector<int>{2, 1, 0}));
  CHECK(last.answer(std::vector<int>{0, 1, 2}) == "2");

  const ToyTask mod = ToyTask::token_sum_mod(3, 1);
  CHECK(mod.correct(std::vector<int>{2, 2}));       // 4 % 3 == 1
  CHECK_FALSE(mod.correct(std::vector<int>{1, 2}));

  CHECK(ToyTask::parse("last-token-eq:2").correct(std::vector<int>{2}));
  CHECK(ToyTask::parse("token-sum-mod:3:1").correct(std::vector<int>{2, 2}));
  CHECK_THROWS_AS(ToyTask::parse("nope"), DomainError);
  CHECK_THROWS_AS(ToyTask::parse("last-token-eq:x"), DomainError);
}

TEST_CASE("uniform step ends") {
  CHECK(uniform_step_ends(6, 2) == std::vector<int>{2, 4, 6});
  CHECK(uniform_step_ends(5, 2) == std::vector<int>{2, 4, 5});
  CHECK(uniform_step_ends(3, 1) == std::vector<int>{1, 2, 3});
  CHECK(uniform_step_ends(3, 10) == std::vector<int>{3});
}

TEST_CASE("toy trajectories convert to exact dual-logprob trajectories") {
  const TabularLM policy = TabularLM::random(4, 3, 10);
  const TabularLM ref = TabularLM::random(4, 3, 11);
  const ToyTask task = ToyTask::last_token_eq(1);
  const ToyTrajectory toy{"t1", "p1", {2, 0, 1}, {1, 3}};

  const Trajectory traj = make_trajectory(policy, ref, toy, &task);
  REQUIRE(traj.tokens.size() == 3);
  CHECK(traj.tokens[0] == "2");
  CHECK(*traj.correct);
  CHECK(*traj.answer == "1");

  double sum = 0.0;
  for (double lp : traj.logp_policy) sum += lp;
  CHECK(sum == doctest::Approx(policy.seq_logprob(toy.tokens)).epsilon(1e-12));

  const ToyTrajectory back = to_toy_trajectory(traj, 4);
  CHECK(back == toy);

  Trajectory alien = traj;
  alien.tokens[1] = "banana";
  CHECK_THROWS_AS(to_toy_trajectory(alien, 4), DomainError);
  CHECK_THROWS_AS(to_toy_trajectory(traj, 2), DomainError);  // token 2 out of range
}
