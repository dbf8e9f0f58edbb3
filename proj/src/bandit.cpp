#include "ztwin/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ztwin/errors.hpp"

namespace ztwin {

BanditState::BanditState(int num_arms, double exploration_coeff)
    : theta(num_arms, 0.0),
      counts(num_arms, 0),
      preferences(num_arms, 0.0),
      exploration_coeff(exploration_coeff) {
  if (num_arms < 1) throw ValidationError("bandit: need at least one arm");
}

ExplanationScore explanation_score(const Evidence& evidence, const DagStructure& dag,
                                   const Cpt& cpt, bool feasible) {
  ExplanationScore s;
  if (!feasible) return s;  // infeasible candidates are worth nothing
  try {
    s.value = most_probable_explanation(evidence, dag, cpt).probability;
  } catch (const InferenceError&) {
    s.zero_probability_evidence = true;
    s.value = 0.0;
  }
  return s;
}

void update_arm(BanditState& state, int arm, double score) {
  if (arm < 0 || arm >= state.num_arms()) throw ValidationError("update_arm: arm out of range");
  ++state.counts[arm];
  state.theta[arm] += (score - state.theta[arm]) / static_cast<double>(state.counts[arm]);
  ++state.total_observations;
  state.mean_score += (score - state.mean_score) / static_cast<double>(state.total_observations);
  ++state.decision_index;
}

int select_ucb(const BanditState& state) {
  for (int a = 0; a < state.num_arms(); ++a)
    if (state.counts[a] == 0) return a;  // unexplored arms carry an infinite bonus

  const double j = static_cast<double>(state.decision_index + 1);
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < state.num_arms(); ++a) {
    const double bonus =
        state.exploration_coeff * std::sqrt(std::log(j) / static_cast<double>(state.counts[a]));
    const double value = state.theta[a] + bonus;
    if (value > best_value) {
      best_value = value;
      best = a;
    }
  }
  return best;
}

double residual(const BanditState& state, std::int64_t sessions, double target) {
  if (sessions < 1) throw ValidationError("residual: sessions must be >= 1");
  return target - state.mean_score;
}

double literal_residual(const BanditState& state, std::int64_t sessions) {
  if (sessions < 1) throw ValidationError("residual: sessions must be >= 1");
  double accumulated = 0.0;
  for (int a = 0; a < state.num_arms(); ++a)
    accumulated += static_cast<double>(state.counts[a]) * state.theta[a];
  return (state.mean_score * static_cast<double>(sessions) - accumulated) /
         static_cast<double>(sessions);
}

int select_epsilon_greedy(const BanditState& state, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ValidationError("epsilon-greedy: epsilon must be in [0,1]");
  if (epsilon > 0.0 && rng.next_double() < epsilon)
    return static_cast<int>(rng.uniform_int(0, state.num_arms() - 1));
  int best = 0;
  for (int a = 1; a < state.num_arms(); ++a)
    if (state.theta[a] > state.theta[best]) best = a;
  return best;
}

std::vector<double> softmax_probabilities(const BanditState& state) {
  const double h_max = *std::max_element(state.preferences.begin(), state.preferences.end());
  std::vector<double> pi(state.preferences.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    pi[a] = std::exp(state.preferences[a] - h_max);
    sum += pi[a];
  }
  for (double& p : pi) p /= sum;
  return pi;
}

int select_gradient_bandit(const BanditState& state, Rng& rng) {
  const auto pi = softmax_probabilities(state);
  const double u = rng.next_double();
  double cum = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    cum += pi[a];
    if (u < cum) return static_cast<int>(a);
  }
  return state.num_arms() - 1;
}

void update_gradient_preferences(BanditState& state, int arm, double score, double step) {
  if (!(step > 0.0)) throw ValidationError("gradient bandit: step must be > 0");
  if (arm < 0 || arm >= state.num_arms())
    throw ValidationError("gradient bandit: arm out of range");
  const auto pi = softmax_probabilities(state);
  const double advantage = score - state.mean_score;  // baseline: mean of prior scores
  for (int a = 0; a < state.num_arms(); ++a) {
    if (a == arm)
      state.preferences[a] += step * advantage * (1.0 - pi[a]);
    else
      state.preferences[a] -= step * advantage * pi[a];
  }
}

}  // namespace ztwin
