#pragma once

#include <array>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ztwin/service_delay.hpp"
#include "ztwin/trace.hpp"

namespace ztwin {

// Node order of the reasoning DAG. Fixed: every assignment, evidence vector
// and CPT indexes by this order.
enum Node : int {
  kSpeed = 0,
  kRsrp,
  kRsrq,
  kSinr,
  kCqi,
  kUplink,
  kDownlink,
  kGnb,
};
inline constexpr int kNumNodes = 8;

std::span<const std::string> node_names();
int node_index(const std::string& name);  // throws InferenceError on unknown name

// Discretization rule for one variable: ordered half-open bins [low, high)
// over ascending interior edges, the top bin closed above. The outer bins are
// unbounded unless explicit envelope bounds are set, in which case values
// outside are clamped into the boundary bins and flagged.
struct BinRule {
  std::vector<double> edges;        // ascending interior edges; empty for categorical
  std::vector<std::string> labels;  // one per bin, ascending interval order
  bool categorical = false;
  double envelope_low = -std::numeric_limits<double>::infinity();
  double envelope_high = std::numeric_limits<double>::infinity();

  int num_bins() const { return static_cast<int>(labels.size()); }
  int bin_of(double value) const;
  bool outside_envelope(double value) const;
  int index_of_label(const std::string& label) const;  // -1 when unknown

  void validate() const;
};

struct BinRuleSet {
  std::array<BinRule, kNumNodes> rules;

  // Default rules: speed {<=30,30-60,60-80,>=80} km/h, RSRP
  // {<=-100,-100--90,-90--80,>=-80} dBm, RSRQ {<=-15,-15--10,>=-10} dB,
  // SINR {<=0,0-13,13-20,>=20} dB, CQI {<=7,7-10,>=10}, uplink
  // {<=50,50-100,>=100} Mbps, downlink {<=0.1,0.1-0.8,>=0.8} Mbps.
  static BinRuleSet standard_bins(int num_gnbs);
  // Same, with the uplink and downlink rate bins exchanged.
  static BinRuleSet standard_swapped(int num_gnbs);
  static BinRuleSet preset(const std::string& name, int num_gnbs);

  std::array<int, kNumNodes> cardinalities() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static BinRuleSet from_json(const nlohmann::ordered_json& j);
};

// Full assignment: one bin index per node.
using Assignment = std::array<int, kNumNodes>;

struct Discretized {
  Assignment bins{};
  bool clamped = false;  // some value fell outside a bounded envelope
};

Discretized discretize(const ContextSample& sample, const Allocation& allocation, int gnb,
                       const BinRuleSet& rules);

// Directed acyclic graph over the eight nodes.
struct DagStructure {
  std::array<std::vector<int>, kNumNodes> parents;
  std::vector<int> topo_order;

  // speed->RSRP; RSRP->SINR; RSRP->RSRQ; SINR->CQI; {RSRQ,CQI}->downlink;
  // {RSRQ,CQI}->uplink; {uplink,downlink}->gNB.
  static DagStructure default_edges();
  // Throws ValidationError when the edge set has a cycle.
  static DagStructure from_edges(std::span<const std::pair<int, int>> edges);

  std::vector<std::pair<int, int>> edges() const;

  nlohmann::ordered_json to_json() const;
  static DagStructure from_json(const nlohmann::ordered_json& j);
};

// Conditional probability tables, one row per parent-bin combination.
class Cpt {
 public:
  Cpt() = default;
  Cpt(const DagStructure& dag, const std::array<int, kNumNodes>& cardinalities);

  double prob(int node, int bin, const Assignment& full) const;
  double& cell(int node, int row, int bin);
  double cell(int node, int row, int bin) const;
  int rows(int node) const;
  int cardinality(int node) const { return cardinality_[static_cast<std::size_t>(node)]; }
  const std::array<int, kNumNodes>& cardinalities() const { return cardinality_; }

  // Row index of the parent-bin combination in `full` (mixed radix over the
  // node's parents in listed order).
  int row_of(int node, const Assignment& full) const;

  void normalize_rows();  // throws EstimationError on an all-zero row

  nlohmann::ordered_json to_json() const;
  static Cpt from_json(const nlohmann::ordered_json& j, const DagStructure& dag);

 private:
  std::array<std::vector<double>, kNumNodes> tables_;
  std::array<std::vector<int>, kNumNodes> parents_;
  std::array<int, kNumNodes> cardinality_{};
};

// Maximum-likelihood CPT estimation with additive smoothing: the pseudo-count
// is added to every cell before normalization. Throws EstimationError when
// sessions are empty and smoothing is zero.
Cpt learn_cpts(std::span<const Assignment> sessions, const DagStructure& dag,
               const std::array<int, kNumNodes>& cardinalities, double smoothing = 1.0);

// Partial assignment: bin index per observed node, -1 for unobserved.
struct Evidence {
  std::array<int, kNumNodes> values;

  static Evidence none();
  static Evidence of(std::initializer_list<std::pair<int, int>> observed);

  bool observed(int node) const { return values[static_cast<std::size_t>(node)] >= 0; }
  void set(int node, int bin) { values[static_cast<std::size_t>(node)] = bin; }
  int count_observed() const;
};

// Product over nodes of P(node bin | parent bins). The assignment must cover
// every node.
double joint_probability(const Assignment& full, const DagStructure& dag, const Cpt& cpt);

// P(target | evidence) by exact enumeration over the unobserved nodes.
// Throws InferenceError when the evidence has probability zero.
std::vector<double> query_conditional(int target, const Evidence& evidence,
                                      const DagStructure& dag, const Cpt& cpt);

struct MpeResult {
  Assignment assignment{};    // evidence bins plus the argmax completion
  double probability = 0.0;   // conditional probability of the completion
};

// Most probable explanation of the unobserved nodes given the evidence; ties
// break toward the lexicographically smallest bin-index vector. An empty
// unobserved set yields probability 1 by convention.
MpeResult most_probable_explanation(const Evidence& evidence, const DagStructure& dag,
                                    const Cpt& cpt);

// Serialized reasoner: bins + DAG + CPTs in one document.
nlohmann::ordered_json reasoner_to_json(const BinRuleSet& bins, const DagStructure& dag,
                                        const Cpt& cpt);
struct Reasoner {
  BinRuleSet bins;
  DagStructure dag;
  Cpt cpt;
};
Reasoner reasoner_from_json(const nlohmann::ordered_json& j);

}  // namespace ztwin
