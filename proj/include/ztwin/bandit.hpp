#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ztwin/bayes_dag.hpp"
#include "ztwin/rng.hpp"
#include "ztwin/service_delay.hpp"

namespace ztwin {

// Per-arm statistics of the explicit learner. theta holds the incremental
// mean explanation score of each gNB, counts the per-arm knowledge-base size,
// mean_score the running mean over all observations.
struct BanditState {
  BanditState(int num_arms, double exploration_coeff);

  int num_arms() const { return static_cast<int>(theta.size()); }

  std::vector<double> theta;           // score per arm, in [0,1]
  std::vector<std::int64_t> counts;    // pulls per arm
  std::vector<double> preferences;     // gradient-bandit preferences H
  double mean_score = 0.0;             // running mean over all observed scores
  std::int64_t total_observations = 0;
  std::int64_t decision_index = 0;     // j, incremented per recorded observation
  double exploration_coeff = 1.0;      // phi
};

// Explanation score of one candidate decision: the conditional probability of
// the most probable explanation given the evidence (allocation bins plus the
// observed context). Zero-probability evidence scores 0 with a flag rather
// than throwing; an infeasible candidate multiplies the score by 0.
struct ExplanationScore {
  double value = 0.0;
  bool zero_probability_evidence = false;
};

ExplanationScore explanation_score(const Evidence& evidence, const DagStructure& dag,
                                   const Cpt& cpt, bool feasible = true);

// Increments the arm count, then moves theta by (score - theta)/count; the
// first observation sets theta to the score. Also advances the running mean
// and the decision index.
void update_arm(BanditState& state, int arm, double score);

// argmax over arms of theta + phi * sqrt(log(j)/count); untried arms first in
// index order, ties to the lowest index. j is the index of the decision being
// made (decision_index + 1).
int select_ucb(const BanditState& state);

// Reported residual: the gap between the configured target score and the
// running mean. The literal accumulated-score difference collapses toward 0
// by the mean identities; see literal_residual.
double residual(const BanditState& state, std::int64_t sessions, double target = 1.0);

// (mean_score * sessions - sum_a count_a * theta_a) / sessions, kept for
// transparency alongside the reported residual.
double literal_residual(const BanditState& state, std::int64_t sessions);

// With probability epsilon a uniform arm, otherwise greedy argmax theta with
// lowest-index tie-break.
int select_epsilon_greedy(const BanditState& state, double epsilon, Rng& rng);

// Softmax sample over the preference vector.
int select_gradient_bandit(const BanditState& state, Rng& rng);

std::vector<double> softmax_probabilities(const BanditState& state);

// Standard gradient-bandit preference update against the pre-observation mean
// baseline; call before update_arm records the score.
void update_gradient_preferences(BanditState& state, int arm, double score, double step);

// One recorded decision of the explicit learner: exactly one arm per record.
struct DecisionRecord {
  std::int64_t session = 0;
  int gnb = 0;
  Allocation allocation;
  double score = 0.0;  // explanation score of the chosen arm
  ConstraintFlags verdict;
  double residual = 0.0;  // residual after this decision
};

}  // namespace ztwin
