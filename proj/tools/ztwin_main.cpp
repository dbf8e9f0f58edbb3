// ztwin: trace-driven simulator for zero-touch IoE service management.
//
// Subcommands:
//   synth   emit a synthetic trace CSV
//   fit     fit the per-gNB rate estimators and report accuracy
//   reason  query a serialized reasoner (conditionals + most probable explanation)
//   run     full twin loop: implicit learners, reasoner, bandit policies
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/harness.hpp"

namespace {

using namespace ztwin;

struct CommonArgs {
  std::string config_path;
  std::string trace_path;
  std::string out_dir;
  std::string policy;
  long long seed = -1;
  long long kb_sessions = -1;
  long long test_sessions = -1;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig config =
      args.config_path.empty() ? RunConfig() : RunConfig::from_file(args.config_path);
  if (!args.trace_path.empty()) {
    config.trace_source = "csv";
    config.trace_path = args.trace_path;
  }
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.policy.empty()) config.policy = policy_from_name(args.policy);
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.kb_sessions >= 0) config.kb_sessions = static_cast<std::size_t>(args.kb_sessions);
  if (args.test_sessions >= 0) config.test_sessions = static_cast<std::size_t>(args.test_sessions);
  config.validate();
  return config;
}

int cmd_synth(const CommonArgs& args) {
  const RunConfig config = load_config(args);
  const auto trace = synthesize_trace(config.synth, config.seed);
  std::filesystem::create_directories(config.out_dir);
  const auto path = std::filesystem::path(config.out_dir) / "trace.csv";
  std::ofstream out(path, std::ios::binary);
  write_trace_csv(out, trace.samples);
  std::cout << "wrote " << trace.samples.size() << " samples to " << path.string() << "\n";
  return 0;
}

int cmd_fit(const CommonArgs& args) {
  const RunConfig config = load_config(args);
  const auto samples = load_sessions(config);
  const auto implicit = run_implicit(config, samples);

  nlohmann::ordered_json j;
  for (std::size_t g = 0; g < implicit.estimators.size(); ++g) {
    nlohmann::ordered_json item = implicit.estimators[g].to_json();
    item["gnb"] = g + 1;
    item["training_samples"] = implicit.training_counts[g];
    item["converged"] = implicit.estimators[g].residual_converged();
    j["estimators"].push_back(item);
  }
  j["accuracy_percent"] = report_accuracy(implicit.predicted, implicit.observed);
  j["clamped_predictions"] = implicit.clamped_predictions;

  std::filesystem::create_directories(config.out_dir);
  const auto path = std::filesystem::path(config.out_dir) / "estimators.json";
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_reason(const std::string& model_path, const std::vector<std::string>& evidence_args) {
  std::ifstream in(model_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + model_path);
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(in);
  const Reasoner reasoner = reasoner_from_json(doc);

  Evidence evidence = Evidence::none();
  for (const auto& item : evidence_args) {
    for (const auto& part : split(item, ',')) {
      const std::string token = trim(part);
      if (token.empty()) continue;
      const auto eq = token.find('=');
      if (eq == std::string::npos)
        throw ConfigError("evidence: expected node=label, got " + token);
      const int node = node_index(trim(token.substr(0, eq)));
      const std::string label = trim(token.substr(eq + 1));
      const int bin = reasoner.bins.rules[node].index_of_label(label);
      if (bin < 0)
        throw ConfigError("evidence: unknown label '" + label + "' for node " +
                          node_names()[node]);
      evidence.set(node, bin);
    }
  }

  nlohmann::ordered_json out;
  for (int n = 0; n < kNumNodes; ++n) {
    if (!evidence.observed(n)) continue;
    out["evidence"][node_names()[n]] = reasoner.bins.rules[n].labels[evidence.values[n]];
  }
  for (int n = 0; n < kNumNodes; ++n) {
    if (evidence.observed(n)) continue;
    const auto dist = query_conditional(n, evidence, reasoner.dag, reasoner.cpt);
    nlohmann::ordered_json d;
    for (std::size_t b = 0; b < dist.size(); ++b)
      d[reasoner.bins.rules[n].labels[b]] = dist[b];
    out["conditionals"][node_names()[n]] = d;
  }
  const auto mpe = most_probable_explanation(evidence, reasoner.dag, reasoner.cpt);
  for (int n = 0; n < kNumNodes; ++n) {
    if (evidence.observed(n)) continue;
    out["mpe"]["assignment"][node_names()[n]] =
        reasoner.bins.rules[n].labels[mpe.assignment[n]];
  }
  out["mpe"]["probability"] = mpe.probability;

  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_run(const CommonArgs& args) {
  const RunConfig config = load_config(args);
  const auto artifacts = execute_run(config);
  write_run_outputs(config, artifacts);

  std::cout << "accuracy: " << artifacts.report.accuracy_pct << "%\n";
  for (const auto& [name, value] : artifacts.report.normalized_trust)
    std::cout << "trust[" << name << "]: " << artifacts.report.mean_trust.at(name)
              << " (normalized " << value << ")\n";
  std::cout << "outputs in " << config.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neuro-symbolic twin simulator for zero-touch IoE service management"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string model_path;
  std::vector<std::string> evidence_args;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", args.config_path, "run configuration file");
    if (needs_config) opt->required();
    cmd->add_option("--trace", args.trace_path, "trace CSV (overrides config)");
    cmd->add_option("--seed", args.seed, "seed (overrides config)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--policy", args.policy, "ucb | epsilon | gradient (overrides config)");
    cmd->add_option("--kb-sessions", args.kb_sessions, "knowledge-base split size");
    cmd->add_option("--test-sessions", args.test_sessions, "test split size");
  };

  auto* synth = app.add_subcommand("synth", "emit a synthetic trace CSV");
  add_common(synth, false);
  auto* fit = app.add_subcommand("fit", "fit the implicit learners only");
  add_common(fit, false);
  auto* run = app.add_subcommand("run", "full twin loop");
  add_common(run, true);
  auto* reason = app.add_subcommand("reason", "query a serialized reasoner");
  reason->add_option("--model", model_path, "bn.json produced by run")->required();
  reason->add_option("--evidence", evidence_args, "node=label[,node=label...]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(args);
    if (fit->parsed()) return cmd_fit(args);
    if (run->parsed()) return cmd_run(args);
    if (reason->parsed()) return cmd_reason(model_path, evidence_args);
  } catch (const Error& e) {
    // domain errors: bad config, bad input data, infeasible queries
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
