#include "ztwin/bayes_dag.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ztwin/errors.hpp"

namespace ztwin {

namespace {

const std::vector<std::string> kNodeNames = {"speed", "rsrp",   "rsrq",     "sinr",
                                             "cqi",   "uplink", "downlink", "gnb"};

}  // namespace

std::span<const std::string> node_names() { return kNodeNames; }

int node_index(const std::string& name) {
  const auto it = std::find(kNodeNames.begin(), kNodeNames.end(), name);
  if (it == kNodeNames.end()) throw InferenceError("unknown node: " + name);
  return static_cast<int>(it - kNodeNames.begin());
}

int BinRule::bin_of(double value) const {
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (value < edges[i]) return static_cast<int>(i);
  return num_bins() - 1;
}

bool BinRule::outside_envelope(double value) const {
  return value < envelope_low || value > envelope_high;
}

int BinRule::index_of_label(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

void BinRule::validate() const {
  if (labels.empty()) throw ValidationError("bin rule: no bins");
  if (categorical) {
    if (!edges.empty()) throw ValidationError("bin rule: categorical rule has edges");
  } else if (edges.size() + 1 != labels.size()) {
    throw ValidationError("bin rule: need exactly one more label than interior edges");
  }
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i - 1] < edges[i])) throw ValidationError("bin rule: edges must be ascending");
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw ValidationError("bin rule: duplicate labels");
}

namespace {

BinRule interval_rule(std::vector<double> edges, std::vector<std::string> labels) {
  BinRule r;
  r.edges = std::move(edges);
  r.labels = std::move(labels);
  return r;
}

BinRule gnb_rule(int num_gnbs) {
  BinRule r;
  r.categorical = true;
  for (int g = 0; g < num_gnbs; ++g) r.labels.push_back("gnb" + std::to_string(g + 1));
  return r;
}

}  // namespace

BinRuleSet BinRuleSet::standard_bins(int num_gnbs) {
  BinRuleSet set;
  set.rules[kSpeed] = interval_rule({30, 60, 80}, {"<=30", "30-60", "60-80", ">=80"});
  set.rules[kRsrp] = interval_rule({-100, -90, -80}, {"<=-100", "-100--90", "-90--80", ">=-80"});
  set.rules[kRsrq] = interval_rule({-15, -10}, {"<=-15", "-15--10", ">=-10"});
  set.rules[kSinr] = interval_rule({0, 13, 20}, {"<=0", "0-13", "13-20", ">=20"});
  set.rules[kCqi] = interval_rule({7, 10}, {"<=7", "7-10", ">=10"});
  set.rules[kUplink] = interval_rule({50, 100}, {"<=50", "50-100", ">=100"});
  set.rules[kDownlink] = interval_rule({0.1, 0.8}, {"<=0.1", "0.1-0.8", ">=0.8"});
  set.rules[kGnb] = gnb_rule(num_gnbs);
  set.validate();
  return set;
}

BinRuleSet BinRuleSet::standard_swapped(int num_gnbs) {
  BinRuleSet set = standard_bins(num_gnbs);
  std::swap(set.rules[kUplink], set.rules[kDownlink]);
  return set;
}

BinRuleSet BinRuleSet::preset(const std::string& name, int num_gnbs) {
  if (name == "standard" || name.empty()) return standard_bins(num_gnbs);
  if (name == "swapped") return standard_swapped(num_gnbs);
  throw ConfigError("unknown bin preset: " + name);
}

std::array<int, kNumNodes> BinRuleSet::cardinalities() const {
  std::array<int, kNumNodes> card{};
  for (int n = 0; n < kNumNodes; ++n) card[n] = rules[n].num_bins();
  return card;
}

void BinRuleSet::validate() const {
  for (const auto& r : rules) r.validate();
}

nlohmann::ordered_json BinRuleSet::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (int n = 0; n < kNumNodes; ++n) {
    const auto& r = rules[n];
    nlohmann::ordered_json item;
    item["variable"] = kNodeNames[n];
    item["categorical"] = r.categorical;
    item["edges"] = r.edges;
    item["labels"] = r.labels;
    if (std::isfinite(r.envelope_low)) item["envelope_low"] = r.envelope_low;
    if (std::isfinite(r.envelope_high)) item["envelope_high"] = r.envelope_high;
    j.push_back(item);
  }
  return j;
}

BinRuleSet BinRuleSet::from_json(const nlohmann::ordered_json& j) {
  BinRuleSet set;
  for (const auto& item : j) {
    const int n = node_index(item.at("variable").get<std::string>());
    BinRule r;
    r.categorical = item.at("categorical").get<bool>();
    r.edges = item.at("edges").get<std::vector<double>>();
    r.labels = item.at("labels").get<std::vector<std::string>>();
    if (item.contains("envelope_low")) r.envelope_low = item.at("envelope_low").get<double>();
    if (item.contains("envelope_high")) r.envelope_high = item.at("envelope_high").get<double>();
    set.rules[n] = std::move(r);
  }
  set.validate();
  return set;
}

Discretized discretize(const ContextSample& sample, const Allocation& allocation, int gnb,
                       const BinRuleSet& rules) {
  if (gnb < 0 || gnb >= rules.rules[kGnb].num_bins())
    throw ValidationError("discretize: gnb outside the categorical rule set");

  Discretized out;
  const double values[kNumNodes - 1] = {sample.speed,
                                        sample.rsrp,
                                        sample.rsrq,
                                        sample.sinr_db,
                                        static_cast<double>(sample.cqi),
                                        allocation.uplink_mbps,
                                        allocation.downlink_mbps};
  for (int n = 0; n < kNumNodes - 1; ++n) {
    const auto& rule = rules.rules[n];
    out.bins[n] = rule.bin_of(values[n]);
    out.clamped = out.clamped || rule.outside_envelope(values[n]);
  }
  out.bins[kGnb] = gnb;
  return out;
}

DagStructure DagStructure::default_edges() {
  const std::vector<std::pair<int, int>> edges = {
      {kSpeed, kRsrp},    {kRsrp, kSinr},    {kRsrp, kRsrq},   {kSinr, kCqi},
      {kRsrq, kDownlink}, {kCqi, kDownlink}, {kRsrq, kUplink}, {kCqi, kUplink},
      {kUplink, kGnb},    {kDownlink, kGnb}};
  return from_edges(edges);
}

DagStructure DagStructure::from_edges(std::span<const std::pair<int, int>> edges) {
  DagStructure dag;
  std::array<std::vector<int>, kNumNodes> children;
  for (const auto& [parent, child] : edges) {
    if (parent < 0 || parent >= kNumNodes || child < 0 || child >= kNumNodes)
      throw ValidationError("dag: node index out of range");
    if (parent == child) throw ValidationError("dag: self edge");
    dag.parents[child].push_back(parent);
    children[parent].push_back(child);
  }

  // Kahn's algorithm; leftover nodes mean a cycle.
  std::array<int, kNumNodes> indegree{};
  for (int n = 0; n < kNumNodes; ++n) indegree[n] = static_cast<int>(dag.parents[n].size());
  std::vector<int> ready;
  for (int n = 0; n < kNumNodes; ++n)
    if (indegree[n] == 0) ready.push_back(n);
  while (!ready.empty()) {
    const int n = ready.front();
    ready.erase(ready.begin());
    dag.topo_order.push_back(n);
    for (int c : children[n])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (dag.topo_order.size() != kNumNodes) throw ValidationError("dag: edge set has a cycle");
  return dag;
}

std::vector<std::pair<int, int>> DagStructure::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int n = 0; n < kNumNodes; ++n)
    for (int p : parents[n]) out.emplace_back(p, n);
  return out;
}

nlohmann::ordered_json DagStructure::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [parent, child] : edges())
    j.push_back(nlohmann::ordered_json::array({kNodeNames[parent], kNodeNames[child]}));
  return j;
}

DagStructure DagStructure::from_json(const nlohmann::ordered_json& j) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : j)
    edges.emplace_back(node_index(e.at(0).get<std::string>()),
                       node_index(e.at(1).get<std::string>()));
  return from_edges(edges);
}

Cpt::Cpt(const DagStructure& dag, const std::array<int, kNumNodes>& cardinalities)
    : parents_(dag.parents), cardinality_(cardinalities) {
  for (int n = 0; n < kNumNodes; ++n) {
    std::size_t rows = 1;
    for (int p : parents_[n]) rows *= cardinality_[p];
    tables_[n].assign(rows * cardinality_[n], 0.0);
  }
}

int Cpt::rows(int node) const {
  return static_cast<int>(tables_[node].size()) / cardinality_[node];
}

int Cpt::row_of(int node, const Assignment& full) const {
  int row = 0;
  for (int p : parents_[node]) {
    const int bin = full[p];
    if (bin < 0 || bin >= cardinality_[p])
      throw InferenceError("cpt: assignment missing node " + kNodeNames[p]);
    row = row * cardinality_[p] + bin;
  }
  return row;
}

double Cpt::prob(int node, int bin, const Assignment& full) const {
  if (bin < 0 || bin >= cardinality_[node])
    throw InferenceError("cpt: bin out of range for node " + kNodeNames[node]);
  return cell(node, row_of(node, full), bin);
}

double& Cpt::cell(int node, int row, int bin) {
  return tables_[node][static_cast<std::size_t>(row) * cardinality_[node] + bin];
}

double Cpt::cell(int node, int row, int bin) const {
  return tables_[node][static_cast<std::size_t>(row) * cardinality_[node] + bin];
}

void Cpt::normalize_rows() {
  for (int n = 0; n < kNumNodes; ++n) {
    for (int r = 0; r < rows(n); ++r) {
      double sum = 0.0;
      for (int b = 0; b < cardinality_[n]; ++b) sum += cell(n, r, b);
      if (sum <= 0.0) {
        // Unseen parent combination with zero smoothing: fall back to uniform.
        for (int b = 0; b < cardinality_[n]; ++b) cell(n, r, b) = 1.0 / cardinality_[n];
        continue;
      }
      for (int b = 0; b < cardinality_[n]; ++b) cell(n, r, b) /= sum;
    }
  }
}

Cpt learn_cpts(std::span<const Assignment> sessions, const DagStructure& dag,
               const std::array<int, kNumNodes>& cardinalities, double smoothing) {
  if (smoothing < 0.0) throw ValidationError("learn_cpts: negative smoothing");
  if (sessions.empty() && smoothing == 0.0)
    throw EstimationError("learn_cpts: no sessions and no smoothing");

  Cpt cpt(dag, cardinalities);
  for (int n = 0; n < kNumNodes; ++n)
    for (int r = 0; r < cpt.rows(n); ++r)
      for (int b = 0; b < cardinalities[n]; ++b) cpt.cell(n, r, b) = smoothing;

  for (const auto& session : sessions) {
    for (int n = 0; n < kNumNodes; ++n) {
      const int bin = session[n];
      if (bin < 0 || bin >= cardinalities[n])
        throw ValidationError("learn_cpts: session bin out of range");
      cpt.cell(n, cpt.row_of(n, session), bin) += 1.0;
    }
  }
  cpt.normalize_rows();
  return cpt;
}

Evidence Evidence::none() {
  Evidence e;
  e.values.fill(-1);
  return e;
}

Evidence Evidence::of(std::initializer_list<std::pair<int, int>> observed) {
  Evidence e = none();
  for (const auto& [node, bin] : observed) e.set(node, bin);
  return e;
}

int Evidence::count_observed() const {
  int count = 0;
  for (int v : values) count += v >= 0;
  return count;
}

double joint_probability(const Assignment& full, const DagStructure& dag, const Cpt& cpt) {
  (void)dag;  // structure is baked into the CPT row layout
  double p = 1.0;
  for (int n = 0; n < kNumNodes; ++n) p *= cpt.prob(n, full[n], full);
  return p;
}

namespace {

// Visits every completion of the evidence, ascending lexicographically in the
// bin vector of the unobserved nodes (node-index order).
template <typename Fn>
void for_each_completion(const Evidence& evidence, const std::array<int, kNumNodes>& card,
                         Fn&& fn) {
  std::vector<int> free_nodes;
  Assignment a{};
  for (int n = 0; n < kNumNodes; ++n) {
    if (evidence.observed(n)) {
      a[n] = evidence.values[n];
    } else {
      a[n] = 0;
      free_nodes.push_back(n);
    }
  }
  while (true) {
    fn(static_cast<const Assignment&>(a));
    int i = static_cast<int>(free_nodes.size()) - 1;
    for (; i >= 0; --i) {
      const int n = free_nodes[i];
      if (++a[n] < card[n]) break;
      a[n] = 0;
    }
    if (i < 0) break;
  }
}

void check_evidence(const Evidence& evidence, const std::array<int, kNumNodes>& card) {
  for (int n = 0; n < kNumNodes; ++n)
    if (evidence.values[n] >= card[n])
      throw InferenceError("evidence bin out of range for node " + kNodeNames[n]);
}

}  // namespace

std::vector<double> query_conditional(int target, const Evidence& evidence,
                                      const DagStructure& dag, const Cpt& cpt) {
  if (target < 0 || target >= kNumNodes) throw InferenceError("query: target out of range");
  if (evidence.observed(target)) throw InferenceError("query: target is already observed");
  check_evidence(evidence, cpt.cardinalities());

  std::vector<double> dist(cpt.cardinality(target), 0.0);
  for_each_completion(evidence, cpt.cardinalities(), [&](const Assignment& a) {
    dist[a[target]] += joint_probability(a, dag, cpt);
  });
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  if (total <= 0.0) throw InferenceError("query: evidence has probability zero");
  for (double& p : dist) p /= total;
  return dist;
}

MpeResult most_probable_explanation(const Evidence& evidence, const DagStructure& dag,
                                    const Cpt& cpt) {
  check_evidence(evidence, cpt.cardinalities());

  MpeResult best;
  double best_joint = -1.0;
  double total = 0.0;
  for_each_completion(evidence, cpt.cardinalities(), [&](const Assignment& a) {
    const double p = joint_probability(a, dag, cpt);
    total += p;
    if (p > best_joint) {  // strict: the first maximum is lexicographically smallest
      best_joint = p;
      best.assignment = a;
    }
  });
  if (total <= 0.0) throw InferenceError("mpe: evidence has probability zero");
  best.probability = evidence.count_observed() == kNumNodes ? 1.0 : best_joint / total;
  return best;
}

nlohmann::ordered_json Cpt::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (int n = 0; n < kNumNodes; ++n) {
    nlohmann::ordered_json item;
    item["node"] = kNodeNames[n];
    nlohmann::ordered_json parent_names = nlohmann::ordered_json::array();
    for (int p : parents_[n]) parent_names.push_back(kNodeNames[p]);
    item["parents"] = parent_names;
    item["cardinality"] = cardinality_[n];
    nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
    for (int r = 0; r < rows(n); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int b = 0; b < cardinality_[n]; ++b) row.push_back(cell(n, r, b));
      rows_json.push_back(row);
    }
    item["rows"] = rows_json;
    j.push_back(item);
  }
  return j;
}

Cpt Cpt::from_json(const nlohmann::ordered_json& j, const DagStructure& dag) {
  std::array<int, kNumNodes> card{};
  for (const auto& item : j)
    card[node_index(item.at("node").get<std::string>())] = item.at("cardinality").get<int>();
  Cpt cpt(dag, card);
  for (const auto& item : j) {
    const int n = node_index(item.at("node").get<std::string>());
    const auto& rows_json = item.at("rows");
    if (static_cast<int>(rows_json.size()) != cpt.rows(n))
      throw InferenceError("cpt json: row count does not match the dag");
    for (int r = 0; r < cpt.rows(n); ++r)
      for (int b = 0; b < card[n]; ++b) cpt.cell(n, r, b) = rows_json.at(r).at(b).get<double>();
  }
  return cpt;
}

nlohmann::ordered_json reasoner_to_json(const BinRuleSet& bins, const DagStructure& dag,
                                        const Cpt& cpt) {
  nlohmann::ordered_json j;
  j["nodes"] = kNodeNames;
  j["bins"] = bins.to_json();
  j["edges"] = dag.to_json();
  j["cpts"] = cpt.to_json();
  return j;
}

Reasoner reasoner_from_json(const nlohmann::ordered_json& j) {
  Reasoner r;
  r.bins = BinRuleSet::from_json(j.at("bins"));
  r.dag = DagStructure::from_json(j.at("edges"));
  r.cpt = Cpt::from_json(j.at("cpts"), r.dag);
  return r;
}

}  // namespace ztwin
