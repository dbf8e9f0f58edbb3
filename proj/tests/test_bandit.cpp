#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support/oracles.hpp"
#include "ztwin/bandit.hpp"
#include "ztwin/errors.hpp"

using namespace ztwin;

namespace {

// Two-node chain embedded in the eight-node layout (see test_bayes_dag).
struct Chain {
  DagStructure dag;
  std::array<int, kNumNodes> card{};
  static constexpr int A = kSpeed;
  static constexpr int B = kRsrp;

  Chain() {
    const std::vector<std::pair<int, int>> edges = {{A, B}};
    dag = DagStructure::from_edges(edges);
    card.fill(1);
    card[A] = 2;
    card[B] = 2;
  }

  Cpt cpt(double pa, double pb0, double pb1) const {
    Cpt c(dag, card);
    for (int n = 0; n < kNumNodes; ++n)
      if (n != A && n != B) c.cell(n, 0, 0) = 1.0;
    c.cell(A, 0, 0) = 1.0 - pa;
    c.cell(A, 0, 1) = pa;
    c.cell(B, 0, 0) = 1.0 - pb0;
    c.cell(B, 0, 1) = pb0;
    c.cell(B, 1, 0) = 1.0 - pb1;
    c.cell(B, 1, 1) = pb1;
    return c;
  }
};

}  // namespace

TEST_CASE("explanation score") {
  const Chain chain;

  SUBCASE("deterministic child pins the explanation at 1") {
    const auto cpt = chain.cpt(0.5, 0.0, 1.0);
    const auto s = explanation_score(Evidence::of({{Chain::A, 1}}), chain.dag, cpt);
    CHECK(s.value == doctest::Approx(1.0));
    CHECK_FALSE(s.zero_probability_evidence);
  }

  SUBCASE("fully observed evidence is vacuously certain") {
    const auto cpt = chain.cpt(0.5, 0.25, 0.75);
    Evidence full = Evidence::none();
    for (int n = 0; n < kNumNodes; ++n) full.set(n, 0);
    CHECK(explanation_score(full, chain.dag, cpt).value == 1.0);
  }

  SUBCASE("infeasible candidates score zero") {
    const auto cpt = chain.cpt(0.5, 0.0, 1.0);
    const auto s = explanation_score(Evidence::of({{Chain::A, 1}}), chain.dag, cpt, false);
    CHECK(s.value == 0.0);
  }

  SUBCASE("zero-probability evidence scores zero with a flag") {
    const auto cpt = chain.cpt(0.5, 0.0, 1.0);
    const auto s = explanation_score(Evidence::of({{Chain::A, 0}, {Chain::B, 1}}), chain.dag, cpt);
    CHECK(s.value == 0.0);
    CHECK(s.zero_probability_evidence);
  }
}

TEST_CASE("arm updates implement the incremental mean") {
  BanditState state(3, 1.0);

  SUBCASE("first pull sets theta to the score") {
    update_arm(state, 1, 0.3);
    CHECK(state.theta[1] == doctest::Approx(0.3));
    CHECK(state.counts[1] == 1);
    CHECK(state.mean_score == doctest::Approx(0.3));
  }

  SUBCASE("hand-evaluated second step") {
    update_arm(state, 0, 0.5);
    update_arm(state, 0, 0.7);  // theta = 0.5 + (0.7-0.5)/2 = 0.6
    CHECK(state.theta[0] == doctest::Approx(0.6));
    CHECK(state.counts[0] == 2);
  }

  SUBCASE("incremental equals batch mean on random streams") {
    Rng rng(11);
    std::vector<std::vector<double>> history(3);
    for (int step = 0; step < 5000; ++step) {
      const int arm = static_cast<int>(rng.uniform_int(0, 2));
      const double score = rng.next_double();
      update_arm(state, arm, score);
      history[arm].push_back(score);
    }
    double all_sum = 0.0;
    std::size_t all_count = 0;
    for (int a = 0; a < 3; ++a) {
      if (history[a].empty()) continue;
      const double batch =
          std::accumulate(history[a].begin(), history[a].end(), 0.0) / history[a].size();
      CHECK(std::fabs(state.theta[a] - batch) <= 1e-12);
      all_sum += std::accumulate(history[a].begin(), history[a].end(), 0.0);
      all_count += history[a].size();
    }
    CHECK(std::fabs(state.mean_score - all_sum / all_count) <= 1e-9);
  }

  CHECK_THROWS_AS(update_arm(state, 5, 0.1), ValidationError);
}

TEST_CASE("ucb selection") {
  SUBCASE("single arm") {
    BanditState one(1, 1.0);
    CHECK(select_ucb(one) == 0);
  }

  SUBCASE("untried arms are selected first in index order") {
    BanditState state(3, 1.0);
    update_arm(state, 0, 0.9);
    CHECK(select_ucb(state) == 1);
    update_arm(state, 1, 0.1);
    CHECK(select_ucb(state) == 2);
  }

  SUBCASE("larger exploration bonus wins at equal scores") {
    BanditState state(2, 1.0);
    state.theta = {0.5, 0.5};
    state.counts = {1, 10};
    state.decision_index = 19;  // j = 20
    CHECK(select_ucb(state) == 0);
  }

  SUBCASE("equal counts: higher score wins") {
    BanditState state(2, 1.0);  // phi = 1 per the experiment setup
    state.theta = {0.4, 0.6};
    state.counts = {10, 10};
    state.decision_index = 99;  // j = 100
    CHECK(select_ucb(state) == 1);
  }

  SUBCASE("exact ties break to the lowest index") {
    BanditState state(3, 1.0);
    state.theta = {0.5, 0.5, 0.5};
    state.counts = {4, 4, 4};
    state.decision_index = 11;
    CHECK(select_ucb(state) == 0);
  }

  SUBCASE("argmax is invariant to a common positive scaling of theta and phi") {
    for (const double c : {0.5, 2.0, 10.0}) {
      BanditState base(3, 1.0);
      base.theta = {0.2, 0.55, 0.4};
      base.counts = {7, 3, 9};
      base.decision_index = 18;

      BanditState scaled(3, c);
      for (int a = 0; a < 3; ++a) scaled.theta[a] = c * base.theta[a];
      scaled.counts = base.counts;
      scaled.decision_index = base.decision_index;
      CHECK(select_ucb(scaled) == select_ucb(base));
    }
  }
}

TEST_CASE("residual") {
  BanditState state(2, 1.0);

  SUBCASE("all scores at the target give zero residual") {
    for (int i = 0; i < 10; ++i) update_arm(state, i % 2, 1.0);
    CHECK(residual(state, 10, 1.0) == doctest::Approx(0.0));
  }

  SUBCASE("gap to the target") {
    update_arm(state, 0, 0.6);
    CHECK(residual(state, 1, 1.0) == doctest::Approx(0.4));
  }

  SUBCASE("literal accumulated-score residual collapses to zero") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i)
      update_arm(state, static_cast<int>(rng.uniform_int(0, 1)), rng.next_double());
    CHECK(std::fabs(literal_residual(state, 1000)) <= 1e-12);
  }

  CHECK_THROWS_AS(residual(state, 0, 1.0), ValidationError);
}

TEST_CASE("residual trajectory trends down on a stationary environment") {
  Rng env_rng(11);
  BanditState state(3, 1.0);
  const double means[3] = {0.2, 0.3, 0.8};

  std::vector<double> trajectory;
  for (int t = 0; t < 1100; ++t) {
    const int arm = select_ucb(state);
    const double score = env_rng.next_double() < means[arm] ? 1.0 : 0.0;
    update_arm(state, arm, score);
    trajectory.push_back(residual(state, t + 1, 1.0));
  }

  // window means over 11 windows of 100 -> 10 comparisons, at least 9 down
  int non_increasing = 0;
  double prev = 0.0;
  for (int w = 0; w < 11; ++w) {
    double sum = 0.0;
    for (int i = 0; i < 100; ++i) sum += trajectory[w * 100 + i];
    const double mean = sum / 100.0;
    if (w > 0 && mean <= prev + 1e-9) ++non_increasing;
    prev = mean;
  }
  CHECK(non_increasing >= 9);
}

TEST_CASE("epsilon greedy") {
  SUBCASE("epsilon 0 is pure greedy with lowest-index ties") {
    BanditState state(3, 1.0);
    state.theta = {0.1, 0.9, 0.9};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(select_epsilon_greedy(state, 0.0, rng) == 1);
  }

  SUBCASE("epsilon 1 is uniform within 3 sigma") {
    BanditState state(5, 1.0);
    Rng rng(33);
    std::vector<int> counts(5, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[select_epsilon_greedy(state, 1.0, rng)];
    const double sigma = std::sqrt(0.2 * 0.8 / draws);
    for (int a = 0; a < 5; ++a) {
      const double freq = static_cast<double>(counts[a]) / draws;
      CHECK(std::fabs(freq - 0.2) <= 3.0 * sigma);
    }
  }

  SUBCASE("selections stay inside the arm set") {
    BanditState state(4, 1.0);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      const int arm = select_epsilon_greedy(state, 0.1, rng);
      CHECK(arm >= 0);
      CHECK(arm < 4);
    }
  }

  SUBCASE("epsilon outside [0,1] is rejected") {
    BanditState state(2, 1.0);
    Rng rng(1);
    CHECK_THROWS_AS(select_epsilon_greedy(state, 1.5, rng), ValidationError);
  }
}

TEST_CASE("gradient bandit") {
  SUBCASE("equal preferences give a uniform softmax") {
    BanditState state(4, 1.0);
    const auto pi = softmax_probabilities(state);
    for (double p : pi) CHECK(p == doctest::Approx(0.25));
  }

  SUBCASE("a score above the baseline strictly raises the chosen preference") {
    BanditState state(3, 1.0);
    update_arm(state, 0, 0.2);  // baseline mean = 0.2
    const double before = state.preferences[1];
    update_gradient_preferences(state, 1, 0.9, 0.1);
    CHECK(state.preferences[1] > before);
    CHECK(state.preferences[0] < 0.0);  // others move the opposite way
  }

  SUBCASE("softmax stays normalized through many updates") {
    BanditState state(5, 1.0);
    Rng rng(202);
    for (int i = 0; i < 1000; ++i) {
      const int arm = select_gradient_bandit(state, rng);
      const double score = rng.next_double();
      update_gradient_preferences(state, arm, score, 0.1);
      update_arm(state, arm, score);
      const auto pi = softmax_probabilities(state);
      const double sum = std::accumulate(pi.begin(), pi.end(), 0.0);
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }

  SUBCASE("non-positive step is rejected") {
    BanditState state(2, 1.0);
    CHECK_THROWS_AS(update_gradient_preferences(state, 0, 0.5, 0.0), ValidationError);
  }
}

TEST_CASE("ucb finds the best arm on the bernoulli benchmark") {
  // 5 arms, means (0.5, 0.5, 0.5, 0.5, 0.6): after 1e4 steps the best arm
  // should take the majority of pulls in at least 9 of 10 seeds.
  int seeds_passing = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 7919);
    BanditState state(5, 1.0);
    const double means[5] = {0.5, 0.5, 0.5, 0.5, 0.6};
    for (int t = 0; t < 10000; ++t) {
      const int arm = select_ucb(state);
      update_arm(state, arm, rng.next_double() < means[arm] ? 1.0 : 0.0);
    }
    const double share = static_cast<double>(state.counts[4]) / 10000.0;
    if (share > 0.5) ++seeds_passing;
  }
  CHECK(seeds_passing >= 9);
}
