#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ztwin/bandit.hpp"
#include "ztwin/bayes_dag.hpp"
#include "ztwin/config.hpp"
#include "ztwin/regressor.hpp"
#include "ztwin/service_delay.hpp"
#include "ztwin/trace.hpp"

namespace ztwin {

enum class PolicyKind { kUcb, kEpsilonGreedy, kGradient };

std::string policy_name(PolicyKind kind);
PolicyKind policy_from_name(const std::string& name);  // throws ConfigError

struct RunConfig {
  int num_gnbs = 5;
  std::string trace_source = "synthetic";  // "synthetic" | "csv"
  std::string trace_path;
  SynthConfig synth;
  ColumnMapping mapping = ColumnMapping::identity();

  std::size_t kb_sessions = 662;
  std::size_t test_sessions = 100;
  std::uint64_t seed = 1;

  double exploration_coeff = 1.0;  // phi
  double tolerance = 0.5;          // nu, Mbps
  double epsilon = 0.1;
  double gradient_step = 0.1;
  double residual_target = 1.0;
  double smoothing = 1.0;
  PolicyKind policy = PolicyKind::kUcb;  // primary policy; all three are evaluated

  std::string bin_preset = "standard";
  BinRuleSet bins;
  DagStructure dag;
  LinkParams link;

  // Class-level queueing parameters; per-request moments are rebuilt from the
  // request payload.
  double arrival_rate = 2.0;      // lambda
  double compute_capacity = 2.0;  // gamma
  double squared_cv = 1.0;
  double max_utilization = 0.8;
  int users = 1;

  ServiceRequest request;  // demand template applied to every session

  std::string out_dir = "out";

  RunConfig();

  static RunConfig from_file(const std::string& path);
  static RunConfig from_config(const ConfigFile& cfg);

  ServiceClassParams service_class() const;
  void validate() const;
};

struct TraceStats {
  std::size_t rows_parsed = 0;
  std::size_t rows_skipped = 0;
  bool gnb_assigned_round_robin = false;
};

// Loads the configured trace (file or synthetic). Malformed rows are skipped
// and counted; gNB ids are assigned round-robin when the source has none.
std::vector<ContextSample> load_sessions(const RunConfig& config, TraceStats* stats = nullptr);

// One (session, arm) evaluation produced by the implicit learner.
struct ArmEval {
  ContextSample view;  // context as this gNB observes it
  Allocation allocation;
  DelayChainResult chain;
  ConstraintFlags flags;
  bool feasible = false;  // conjunction of the flags, finite delays
  Assignment w{};         // discretized tuple with gnb = this arm
};

struct SessionData {
  ContextSample sample;
  ServiceRequest request;
  std::vector<ArmEval> arms;
};

struct ImplicitResult {
  std::vector<RateEstimator> estimators;     // per gNB
  std::vector<std::size_t> training_counts;  // KB rows per gNB
  std::vector<Assignment> kb_tuples;         // home-arm W per KB session
  std::vector<SessionData> test_sessions;
  std::vector<Allocation> predicted;  // home-arm predictions on test sessions
  std::vector<Allocation> observed;   // observed rates on test sessions
  int clamped_predictions = 0;
};

// Algorithm of the physical space: fit the per-gNB estimators on the KB
// split, predict allocations, evaluate the delay chain and constraints, and
// emit the W tuples for the reasoner.
ImplicitResult run_implicit(const RunConfig& config, std::span<const ContextSample> samples);

// accuracy = 100 * (1 - mean |pred - truth| / max(truth, 0.01 Mbps)) over
// sessions and both rate columns.
double report_accuracy(std::span<const Allocation> predicted, std::span<const Allocation> truth);

struct PolicyOutcome {
  PolicyKind kind = PolicyKind::kUcb;
  std::vector<DecisionRecord> decisions;
  std::vector<double> residual_trajectory;          // target - running mean, per session
  std::vector<double> literal_residual_trajectory;  // accumulated-score form
  std::vector<double> theta;                        // final per-arm scores
  std::vector<std::int64_t> counts;                 // final per-arm pulls
  double mean_trust = 0.0;
};

struct MetricsReport {
  double accuracy_pct = 0.0;
  std::vector<double> uplink_errors;    // |pred - observed| per test session, Mbps
  std::vector<double> downlink_errors;
  std::vector<int> association_counts;            // chosen arms, primary policy
  std::vector<double> cqi_band_fractions;         // by CQI bin, ascending; sums to 1
  std::vector<std::string> cqi_band_labels;
  std::map<std::string, double> mean_trust;        // per policy
  std::map<std::string, double> normalized_trust;  // per policy, best run = 1
  std::vector<double> marginal_trust;              // per gNB, sums to 1
  std::vector<PolicyOutcome> policies;             // evaluation order: ucb, epsilon, gradient
  // Per-node maximum marginal probability and its bin, with empty evidence.
  std::map<std::string, std::pair<std::string, double>> max_marginals;
  TraceStats trace_stats;

  nlohmann::ordered_json to_json(const RunConfig& config) const;
};

// Algorithm of the virtual space: learn CPTs from the KB tuples, then run the
// bandit loop over the test sessions for every policy. The configured policy
// is the primary one (its decisions are the ones logged).
MetricsReport run_explicit(const RunConfig& config, const ImplicitResult& implicit);
MetricsReport run_explicit(const RunConfig& config, const ImplicitResult& implicit,
                           const Cpt& cpt);

struct RunArtifacts {
  MetricsReport report;
  Reasoner reasoner;
};

RunArtifacts execute_run(const RunConfig& config);

// Writes metrics.json, summary.csv, decisions.ndjson and bn.json into
// config.out_dir. Identical config and seed produce byte-identical files.
void write_run_outputs(const RunConfig& config, const RunArtifacts& artifacts);

}  // namespace ztwin
