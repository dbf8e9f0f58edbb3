#include "ztwin/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ztwin/errors.hpp"
#include "ztwin/rng.hpp"

namespace ztwin {

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kUcb: return "ucb";
    case PolicyKind::kEpsilonGreedy: return "epsilon";
    case PolicyKind::kGradient: return "gradient";
  }
  return "ucb";
}

PolicyKind policy_from_name(const std::string& name) {
  if (name == "ucb") return PolicyKind::kUcb;
  if (name == "epsilon") return PolicyKind::kEpsilonGreedy;
  if (name == "gradient") return PolicyKind::kGradient;
  throw ConfigError("unknown policy: " + name + " (expected ucb | epsilon | gradient)");
}

RunConfig::RunConfig() : bins(BinRuleSet::standard_bins(num_gnbs)), dag(DagStructure::default_edges()) {}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_config(ConfigFile::parse_file(path));
}

RunConfig RunConfig::from_config(const ConfigFile& cfg) {
  RunConfig c;
  c.num_gnbs = static_cast<int>(cfg.get_int_or("run", "gnbs", c.num_gnbs));
  c.trace_source = cfg.get_or("trace", "source", c.trace_source);
  c.trace_path = cfg.get_or("trace", "path", c.trace_path);
  c.synth = SynthConfig::from_config(cfg);
  c.synth.num_gnbs = c.num_gnbs;
  if (cfg.has_section("trace.columns")) c.mapping = ColumnMapping::from_config(cfg);

  c.kb_sessions = static_cast<std::size_t>(cfg.get_int_or("run", "kb_sessions", 662));
  c.test_sessions = static_cast<std::size_t>(cfg.get_int_or("run", "test_sessions", 100));
  c.seed = static_cast<std::uint64_t>(cfg.get_int_or("run", "seed", 1));

  c.exploration_coeff = cfg.get_double_or("run", "exploration_coeff", c.exploration_coeff);
  c.tolerance = cfg.get_double_or("run", "tolerance", c.tolerance);
  c.epsilon = cfg.get_double_or("run", "epsilon", c.epsilon);
  c.gradient_step = cfg.get_double_or("run", "gradient_step", c.gradient_step);
  c.residual_target = cfg.get_double_or("run", "residual_target", c.residual_target);
  c.smoothing = cfg.get_double_or("run", "smoothing", c.smoothing);
  c.policy = policy_from_name(cfg.get_or("run", "policy", "ucb"));
  c.out_dir = cfg.get_or("run", "out_dir", c.out_dir);

  c.bin_preset = cfg.get_or("bins", "preset", c.bin_preset);
  c.bins = BinRuleSet::preset(c.bin_preset, c.num_gnbs);
  for (int n = 0; n < kNumNodes; ++n) {
    const std::string& name = node_names()[n];
    if (cfg.has("bins", name + "_edges")) {
      BinRule rule;
      rule.edges = cfg.get_doubles_or("bins", name + "_edges", {});
      rule.labels = cfg.get_list_or("bins", name + "_labels", {});
      if (rule.labels.empty())  // default labels from the edges
        for (std::size_t b = 0; b <= rule.edges.size(); ++b)
          rule.labels.push_back("bin" + std::to_string(b));
      rule.validate();
      c.bins.rules[n] = rule;
    }
  }

  if (cfg.has("dag", "edges")) {
    std::vector<std::pair<int, int>> edges;
    for (const auto& item : cfg.get_list_or("dag", "edges", {})) {
      const auto arrow = item.find("->");
      if (arrow == std::string::npos)
        throw ConfigError("dag.edges: expected parent->child, got " + item);
      try {
        edges.emplace_back(node_index(trim(item.substr(0, arrow))),
                           node_index(trim(item.substr(arrow + 2))));
      } catch (const InferenceError& e) {
        throw ConfigError(std::string("dag.edges: ") + e.what());
      }
    }
    try {
      c.dag = DagStructure::from_edges(edges);
    } catch (const ValidationError& e) {
      throw ConfigError(std::string("dag.edges: ") + e.what());
    }
  }

  c.link.uplink_bandwidth_mhz = cfg.get_double_or("link", "uplink_bandwidth_mhz", 20.0);
  c.link.downlink_bandwidth_mhz = cfg.get_double_or("link", "downlink_bandwidth_mhz", 20.0);
  c.link.cqi_coeff = cfg.get_double_or("link", "cqi_coeff", c.link.cqi_coeff);
  c.link.cqi_offset = cfg.get_double_or("link", "cqi_offset", c.link.cqi_offset);
  c.link.min_cqi = cfg.get_double_or("link", "min_cqi", c.link.min_cqi);

  c.arrival_rate = cfg.get_double_or("service", "arrival_rate", c.arrival_rate);
  c.compute_capacity = cfg.get_double_or("service", "compute_capacity", c.compute_capacity);
  c.squared_cv = cfg.get_double_or("service", "squared_cv", c.squared_cv);
  c.max_utilization = cfg.get_double_or("service", "max_utilization", c.max_utilization);
  c.users = static_cast<int>(cfg.get_int_or("service", "users", c.users));

  c.request.upload_mb = cfg.get_double_or("service", "upload_mb", c.request.upload_mb);
  c.request.download_mb = cfg.get_double_or("service", "download_mb", c.request.download_mb);
  c.request.delay_budget_s = cfg.get_double_or("service", "delay_budget", c.request.delay_budget_s);
  c.request.required_uplink =
      cfg.get_double_or("service", "required_uplink", c.request.required_uplink);
  c.request.required_downlink =
      cfg.get_double_or("service", "required_downlink", c.request.required_downlink);

  c.validate();
  return c;
}

ServiceClassParams RunConfig::service_class() const {
  ServiceClassParams p;
  p.arrival_rate = arrival_rate;
  p.compute_capacity = compute_capacity;
  p.squared_cv = squared_cv;
  p.max_utilization = max_utilization;
  p.mean_service_time = 0.0;  // per-request moments come from for_request()
  p.second_moment = 0.0;
  p.validate();
  return p;
}

void RunConfig::validate() const {
  if (num_gnbs < 1) throw ConfigError("run: gnbs must be >= 1");
  if (kb_sessions == 0 || test_sessions == 0)
    throw ConfigError("run: kb_sessions and test_sessions must be >= 1");
  if (trace_source != "synthetic" && trace_source != "csv")
    throw ConfigError("trace: source must be synthetic or csv");
  if (trace_source == "csv" && trace_path.empty())
    throw ConfigError("trace: source=csv requires a path");
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("run: epsilon must be in [0,1]");
  if (!(gradient_step > 0.0)) throw ConfigError("run: gradient_step must be > 0");
  if (smoothing < 0.0) throw ConfigError("run: smoothing must be >= 0");
  if (users < 1) throw ConfigError("service: users must be >= 1");
  bins.validate();
  link.validate();
  service_class();
  request.validate();
}

std::vector<ContextSample> load_sessions(const RunConfig& config, TraceStats* stats) {
  TraceStats local;
  std::vector<ContextSample> samples;
  if (config.trace_source == "synthetic") {
    samples = synthesize_trace(config.synth, config.seed).samples;
    local.rows_parsed = samples.size();
  } else {
    const bool has_gnb_column = config.mapping.columns.count("gnb_id") > 0;
    auto parsed = parse_trace(config.trace_path, config.mapping, config.num_gnbs);
    local.rows_parsed = parsed.samples.size();
    local.rows_skipped = parsed.errors.size();
    if (!has_gnb_column) {
      local.gnb_assigned_round_robin = true;
      for (std::size_t i = 0; i < parsed.samples.size(); ++i)
        parsed.samples[i].gnb_id = static_cast<int>(i) % config.num_gnbs;
    }
    samples = std::move(parsed.samples);
  }
  if (config.kb_sessions + config.test_sessions > samples.size())
    throw ConfigError("run: kb_sessions + test_sessions exceed the trace length (" +
                      std::to_string(samples.size()) + " rows)");
  if (stats) *stats = local;
  return samples;
}

namespace {

// Context as arm `gnb` observes it: the SINR offset difference between the
// arms is applied, and CQI follows at the generator's CQI-per-dB slope.
ContextSample arm_view(const ContextSample& sample, int gnb, const RunConfig& config) {
  ContextSample view = sample;
  view.gnb_id = gnb;
  const double delta =
      config.synth.gnb_sinr_offset(gnb, config.seed) - config.synth.gnb_sinr_offset(sample.gnb_id, config.seed);
  if (delta != 0.0) {
    view.sinr_db += delta;
    const double cqi_per_db = (config.synth.cqi_max - config.synth.cqi_min) /
                              (config.synth.sinr_max - config.synth.sinr_min);
    const double cqi = std::round(sample.cqi + cqi_per_db * delta);
    view.cqi = static_cast<int>(std::clamp(cqi, 0.0, 15.0));
  }
  return view;
}

Allocation predict_one(const RateEstimator& estimator, const ContextSample& sample,
                       int* clamped) {
  DesignMatrix x(1, kNumFeatures + 1);
  x(0, 0) = 1.0;
  const auto f = sample.features();
  for (int k = 0; k < kNumFeatures; ++k) x(0, k + 1) = f[k];
  const auto pred = estimator.predict(x);
  if (clamped) *clamped += pred.clamped_count;
  return Allocation{pred.rates(0, 0), pred.rates(0, 1)};
}

}  // namespace

ImplicitResult run_implicit(const RunConfig& config, std::span<const ContextSample> samples) {
  if (config.kb_sessions + config.test_sessions > samples.size())
    throw ValidationError("run_implicit: split sizes exceed the sample count");

  const auto kb = samples.subspan(0, config.kb_sessions);
  const auto test = samples.subspan(config.kb_sessions, config.test_sessions);
  const ServiceClassParams service = config.service_class();

  ImplicitResult result;
  result.training_counts.assign(config.num_gnbs, 0);

  // Per-gNB least-squares fit on that gNB's KB rows.
  std::vector<std::vector<ContextSample>> per_gnb(config.num_gnbs);
  for (const auto& s : kb) per_gnb[s.gnb_id].push_back(s);
  for (int g = 0; g < config.num_gnbs; ++g) {
    result.training_counts[g] = per_gnb[g].size();
    if (per_gnb[g].size() < kNumFeatures + 2)
      throw EstimationError("run_implicit: gNB " + std::to_string(g + 1) + " has only " +
                            std::to_string(per_gnb[g].size()) + " KB samples, needs at least " +
                            std::to_string(kNumFeatures + 2));
    FitOptions options;
    options.tolerance = config.tolerance;
    result.estimators.push_back(
        RateEstimator::fit(make_design(per_gnb[g]), make_response(per_gnb[g]), options));
  }

  // KB tuples: each KB session discretized under its home arm's decision.
  for (const auto& s : kb) {
    const Allocation alloc =
        predict_one(result.estimators[s.gnb_id], s, &result.clamped_predictions);
    result.kb_tuples.push_back(discretize(s, alloc, s.gnb_id, config.bins).bins);
  }

  // Test sessions: every arm evaluated for the bandit loop.
  std::int64_t user_id = 0;
  for (const auto& s : test) {
    SessionData session;
    session.sample = s;
    session.request = config.request;
    session.request.user_id = static_cast<int>(user_id++);
    for (int g = 0; g < config.num_gnbs; ++g) {
      ArmEval arm;
      arm.view = arm_view(s, g, config);
      arm.allocation = predict_one(result.estimators[g], arm.view, &result.clamped_predictions);
      arm.chain = evaluate_delay_chain(session.request, arm.allocation, service, config.users);
      arm.flags = check_constraints(session.request, arm.view, arm.allocation, arm.chain.delays,
                                    arm.chain.omega, service, config.link, 1);
      arm.feasible = arm.flags.all() && !arm.chain.infinite;
      arm.w = discretize(arm.view, arm.allocation, g, config.bins).bins;
      session.arms.push_back(std::move(arm));
    }
    result.predicted.push_back(session.arms[s.gnb_id].allocation);
    result.observed.push_back(Allocation{s.uplink_rate, s.downlink_rate});
    result.test_sessions.push_back(std::move(session));
  }
  return result;
}

double report_accuracy(std::span<const Allocation> predicted, std::span<const Allocation> truth) {
  if (predicted.size() != truth.size())
    throw ValidationError("report_accuracy: length mismatch");
  if (predicted.empty()) throw ValidationError("report_accuracy: empty input");
  constexpr double kFloor = 0.01;  // Mbps
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    total += std::fabs(predicted[i].uplink_mbps - truth[i].uplink_mbps) /
             std::max(truth[i].uplink_mbps, kFloor);
    total += std::fabs(predicted[i].downlink_mbps - truth[i].downlink_mbps) /
             std::max(truth[i].downlink_mbps, kFloor);
  }
  return 100.0 * (1.0 - total / (2.0 * static_cast<double>(predicted.size())));
}

namespace {

Evidence arm_evidence(const ArmEval& arm) {
  Evidence e = Evidence::none();
  for (int n = 0; n < kNumNodes; ++n)
    if (n != kGnb) e.set(n, arm.w[n]);
  return e;
}

PolicyOutcome run_policy(PolicyKind kind, const RunConfig& config,
                         const std::vector<SessionData>& sessions,
                         const std::vector<std::vector<double>>& scores) {
  PolicyOutcome outcome;
  outcome.kind = kind;
  BanditState state(config.num_gnbs, config.exploration_coeff);
  Rng rng(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(kind)));

  for (std::size_t t = 0; t < sessions.size(); ++t) {
    int arm = 0;
    switch (kind) {
      case PolicyKind::kUcb: arm = select_ucb(state); break;
      case PolicyKind::kEpsilonGreedy:
        arm = select_epsilon_greedy(state, config.epsilon, rng);
        break;
      case PolicyKind::kGradient: arm = select_gradient_bandit(state, rng); break;
    }
    const double score = scores[t][arm];
    if (kind == PolicyKind::kGradient)
      update_gradient_preferences(state, arm, score, config.gradient_step);
    update_arm(state, arm, score);

    DecisionRecord record;
    record.session = static_cast<std::int64_t>(t);
    record.gnb = arm;
    record.allocation = sessions[t].arms[arm].allocation;
    record.score = score;
    record.verdict = sessions[t].arms[arm].flags;
    record.residual = residual(state, static_cast<std::int64_t>(t) + 1, config.residual_target);
    outcome.decisions.push_back(record);
    outcome.residual_trajectory.push_back(record.residual);
    outcome.literal_residual_trajectory.push_back(
        literal_residual(state, static_cast<std::int64_t>(t) + 1));
  }
  outcome.theta = state.theta;
  outcome.counts = state.counts;
  outcome.mean_trust = state.mean_score;
  return outcome;
}

}  // namespace

MetricsReport run_explicit(const RunConfig& config, const ImplicitResult& implicit) {
  return run_explicit(
      config, implicit,
      learn_cpts(implicit.kb_tuples, config.dag, config.bins.cardinalities(), config.smoothing));
}

MetricsReport run_explicit(const RunConfig& config, const ImplicitResult& implicit,
                           const Cpt& cpt) {
  // Explanation score of every (session, arm) candidate, shared by the
  // policies so they face the same environment.
  std::vector<std::vector<double>> scores;
  scores.reserve(implicit.test_sessions.size());
  for (const auto& session : implicit.test_sessions) {
    std::vector<double> row;
    row.reserve(session.arms.size());
    for (const auto& arm : session.arms)
      row.push_back(explanation_score(arm_evidence(arm), config.dag, cpt, arm.feasible).value);
    scores.push_back(std::move(row));
  }

  MetricsReport report;
  for (const PolicyKind kind :
       {PolicyKind::kUcb, PolicyKind::kEpsilonGreedy, PolicyKind::kGradient}) {
    report.policies.push_back(run_policy(kind, config, implicit.test_sessions, scores));
    report.mean_trust[policy_name(kind)] = report.policies.back().mean_trust;
  }

  double best = 0.0;
  for (const auto& [name, value] : report.mean_trust) best = std::max(best, value);
  for (const auto& [name, value] : report.mean_trust)
    report.normalized_trust[name] = best > 0.0 ? value / best : 0.0;

  const auto primary_it =
      std::find_if(report.policies.begin(), report.policies.end(),
                   [&](const PolicyOutcome& p) { return p.kind == config.policy; });
  const PolicyOutcome& primary = *primary_it;

  report.association_counts.assign(config.num_gnbs, 0);
  const auto& cqi_rule = config.bins.rules[kCqi];
  report.cqi_band_labels = cqi_rule.labels;
  std::vector<double> cqi_counts(cqi_rule.labels.size(), 0.0);
  for (const auto& record : primary.decisions) {
    report.association_counts[record.gnb] += 1;
    const auto& arm = implicit.test_sessions[record.session].arms[record.gnb];
    cqi_counts[arm.w[kCqi]] += 1.0;
  }
  report.cqi_band_fractions.assign(cqi_counts.size(), 0.0);
  for (std::size_t b = 0; b < cqi_counts.size(); ++b)
    report.cqi_band_fractions[b] = cqi_counts[b] / static_cast<double>(primary.decisions.size());

  double theta_sum = 0.0;
  for (double v : primary.theta) theta_sum += v;
  report.marginal_trust.assign(config.num_gnbs, 1.0 / config.num_gnbs);
  if (theta_sum > 0.0)
    for (int g = 0; g < config.num_gnbs; ++g)
      report.marginal_trust[g] = primary.theta[g] / theta_sum;

  for (std::size_t i = 0; i < implicit.predicted.size(); ++i) {
    report.uplink_errors.push_back(
        std::fabs(implicit.predicted[i].uplink_mbps - implicit.observed[i].uplink_mbps));
    report.downlink_errors.push_back(
        std::fabs(implicit.predicted[i].downlink_mbps - implicit.observed[i].downlink_mbps));
  }
  report.accuracy_pct = report_accuracy(implicit.predicted, implicit.observed);

  for (int n = 0; n < kNumNodes; ++n) {
    const auto dist = query_conditional(n, Evidence::none(), config.dag, cpt);
    const auto max_it = std::max_element(dist.begin(), dist.end());
    const auto bin = static_cast<std::size_t>(max_it - dist.begin());
    report.max_marginals[node_names()[n]] = {config.bins.rules[n].labels[bin], *max_it};
  }
  return report;
}

RunArtifacts execute_run(const RunConfig& config) {
  config.validate();
  TraceStats stats;
  const auto samples = load_sessions(config, &stats);
  const auto implicit = run_implicit(config, samples);

  RunArtifacts artifacts;
  artifacts.reasoner.bins = config.bins;
  artifacts.reasoner.dag = config.dag;
  artifacts.reasoner.cpt =
      learn_cpts(implicit.kb_tuples, config.dag, config.bins.cardinalities(), config.smoothing);
  artifacts.report = run_explicit(config, implicit, artifacts.reasoner.cpt);
  artifacts.report.trace_stats = stats;
  return artifacts;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

nlohmann::ordered_json flags_to_json(const ConstraintFlags& f) {
  nlohmann::ordered_json j;
  j["uplink_volume"] = f.uplink_volume;
  j["downlink_volume"] = f.downlink_volume;
  j["uplink_capacity"] = f.uplink_capacity;
  j["downlink_capacity"] = f.downlink_capacity;
  j["min_cqi"] = f.min_cqi;
  j["delay"] = f.delay;
  j["utilization"] = f.utilization;
  j["assignment"] = f.assignment;
  return j;
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json(const RunConfig& config) const {
  nlohmann::ordered_json j;
  j["run"]["gnbs"] = config.num_gnbs;
  j["run"]["seed"] = config.seed;
  j["run"]["kb_sessions"] = config.kb_sessions;
  j["run"]["test_sessions"] = config.test_sessions;
  j["run"]["policy"] = policy_name(config.policy);
  j["run"]["exploration_coeff"] = config.exploration_coeff;
  j["run"]["bin_preset"] = config.bin_preset;
  j["run"]["trace_source"] = config.trace_source;
  j["trace"]["rows_parsed"] = trace_stats.rows_parsed;
  j["trace"]["rows_skipped"] = trace_stats.rows_skipped;
  j["trace"]["gnb_assigned_round_robin"] = trace_stats.gnb_assigned_round_robin;

  // Accuracy definition recorded so the number is interpretable.
  j["accuracy"]["definition"] =
      "100*(1 - mean(|predicted-observed|/max(observed, 0.01 Mbps)))";
  j["accuracy"]["percent"] = accuracy_pct;
  j["accuracy"]["uplink_errors_mbps"] = uplink_errors;
  j["accuracy"]["downlink_errors_mbps"] = downlink_errors;

  j["association_counts"] = association_counts;
  j["cqi_bands"]["labels"] = cqi_band_labels;
  j["cqi_bands"]["fractions"] = cqi_band_fractions;

  j["trust"]["mean"] = mean_trust;
  j["trust"]["normalized"] = normalized_trust;
  j["trust"]["marginal_per_gnb"] = marginal_trust;

  for (const auto& [node, best] : max_marginals) {
    j["max_marginals"][node]["bin"] = best.first;
    j["max_marginals"][node]["probability"] = best.second;
  }

  for (const auto& policy : policies) {
    nlohmann::ordered_json p;
    p["mean_trust"] = policy.mean_trust;
    p["theta"] = policy.theta;
    p["counts"] = policy.counts;
    p["residual_trajectory"] = policy.residual_trajectory;
    p["literal_residual_trajectory"] = policy.literal_residual_trajectory;
    j["policies"][policy_name(policy.kind)] = p;
  }
  return j;
}

void write_run_outputs(const RunConfig& config, const RunArtifacts& artifacts) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const auto path = [&](const char* name) { return (fs::path(config.out_dir) / name).string(); };

  {
    std::ofstream out(path("metrics.json"), std::ios::binary);
    out << artifacts.report.to_json(config).dump(2) << "\n";
  }
  {
    std::ofstream out(path("bn.json"), std::ios::binary);
    out << reasoner_to_json(artifacts.reasoner.bins, artifacts.reasoner.dag,
                            artifacts.reasoner.cpt)
               .dump(2)
        << "\n";
  }
  {
    std::ofstream out(path("summary.csv"), std::ios::binary);
    out << "policy,session,chosen_gnb,score,residual,literal_residual\n";
    for (const auto& policy : artifacts.report.policies) {
      const std::string name = policy_name(policy.kind);
      for (std::size_t t = 0; t < policy.decisions.size(); ++t) {
        const auto& d = policy.decisions[t];
        out << name << ',' << t << ',' << (d.gnb + 1) << ',' << fmt(d.score) << ','
            << fmt(policy.residual_trajectory[t]) << ','
            << fmt(policy.literal_residual_trajectory[t]) << "\n";
      }
    }
  }
  {
    std::ofstream out(path("decisions.ndjson"), std::ios::binary);
    const auto primary_it = std::find_if(
        artifacts.report.policies.begin(), artifacts.report.policies.end(),
        [&](const PolicyOutcome& p) { return p.kind == config.policy; });
    for (const auto& d : primary_it->decisions) {
      nlohmann::ordered_json j;
      j["session"] = d.session;
      j["gnb"] = d.gnb + 1;  // 1-based in reports
      j["uplink_mbps"] = d.allocation.uplink_mbps;
      j["downlink_mbps"] = d.allocation.downlink_mbps;
      j["score"] = d.score;
      j["feasible"] = d.verdict.all();
      j["constraints"] = flags_to_json(d.verdict);
      j["residual"] = d.residual;
      out << j.dump() << "\n";
    }
  }
}

}  // namespace ztwin
