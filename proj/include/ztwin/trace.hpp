#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ztwin/config.hpp"

namespace ztwin {

inline constexpr int kNumFeatures = 5;  // speed, rsrp, rsrq, sinr, cqi

// One observed per-session measurement tuple plus the rates the serving cell
// achieved. Canonical units throughout: Mbps, seconds, km/h, dBm, dB.
struct ContextSample {
  double timestamp = 0.0;      // s
  double speed = 0.0;          // km/h
  double rsrp = 0.0;           // dBm
  double rsrq = 0.0;           // dB
  double sinr_db = 0.0;        // dB
  int cqi = 0;                 // 0..15
  double uplink_rate = 0.0;    // Mbps
  double downlink_rate = 0.0;  // Mbps
  int gnb_id = 0;              // 0-based index into the gNB set

  std::array<double, kNumFeatures> features() const {
    return {speed, rsrp, rsrq, sinr_db, static_cast<double>(cqi)};
  }
};

// SINR is stored in dB; the linear ratio is derived on demand.
double sinr_linear(double sinr_db);

// Empty result means valid; otherwise names the offending field.
std::optional<std::string> validate_sample(const ContextSample& s, int num_gnbs);

// Per-user IoE service demand.
struct ServiceRequest {
  int service_id = 0;
  int user_id = 0;
  double upload_mb = 5.0;           // Mb to send uplink
  double download_mb = 0.5;         // Mb returned downlink
  double delay_budget_s = 2.0;      // end-to-end tolerable delay
  double required_uplink = 50.0;    // Mbps
  double required_downlink = 0.5;   // Mbps

  void validate() const;  // all strictly positive
};

// Maps canonical field names to source CSV headers, with per-field unit
// scale factors (kbps traces use scale 0.001 on the rate columns).
struct ColumnMapping {
  std::map<std::string, std::string> columns;  // canonical -> source header
  std::map<std::string, double> scales;        // canonical -> multiplier

  // Canonical names as headers, all scales 1.
  static ColumnMapping identity();
  // Reads [trace.columns] and [trace.scales].
  static ColumnMapping from_config(const ConfigFile& cfg);

  // Throws ConfigError unless every canonical field is mapped exactly once.
  // gnb_id is the one optional field: public traces rarely carry cell labels,
  // and the harness assigns gNBs round-robin when it is absent.
  void validate() const;
};

// Canonical field list, in CSV column order.
std::span<const std::string> canonical_fields();

struct RowError {
  std::size_t row = 0;  // 1-based data row index
  std::string field;
  std::string message;
};

struct ParseResult {
  std::vector<ContextSample> samples;
  std::vector<RowError> errors;  // one entry per rejected row
};

// Malformed rows are skipped and recorded, not fatal:
// samples.size() + errors.size() == number of data rows.
ParseResult parse_trace(const std::string& path, const ColumnMapping& mapping, int num_gnbs);
ParseResult parse_trace_stream(std::istream& in, const ColumnMapping& mapping, int num_gnbs);

// Canonical-format CSV, parseable with ColumnMapping::identity().
void write_trace_csv(std::ostream& out, std::span<const ContextSample> samples);

// Synthetic trace generator. A linear map from the feature tuple to the two
// rates is embedded (plus bounded uniform noise) so regression accuracy has a
// checkable ground truth. Per-gNB offsets make the arms distinguishable.
struct SynthConfig {
  int num_samples = 2206;
  int num_gnbs = 5;

  double speed_min = 0.0, speed_max = 100.0;    // km/h, covers the rule-set envelope
  double rsrp_min = -110.0, rsrp_max = -70.0;   // dBm
  double rsrq_min = -17.0, rsrq_max = -7.0;     // dB
  double sinr_min = 0.0, sinr_max = 25.0;       // dB
  int cqi_min = 0, cqi_max = 15;

  // Uniform rate noise in [-a, +a] Mbps on the uplink column; the downlink
  // column uses a/100, matching its smaller rate scale.
  double noise_amplitude = 0.0;

  // Ground-truth coefficients per rate column, order: intercept then the five
  // features. Unset -> drawn from the seed with the intercept raised so the
  // map stays positive over the whole feature envelope.
  std::optional<std::array<double, kNumFeatures + 1>> uplink_coeffs;
  std::optional<std::array<double, kNumFeatures + 1>> downlink_coeffs;

  double gnb_sinr_spread_db = 0.0;    // arm SINR offsets span [-s, +s]
  double gnb_rate_scale_spread = 0.0; // arm rate scales span [1-s/2, 1+s/2]
  // Assign the per-arm quality ranks through a seeded shuffle so arm quality
  // is uncorrelated with arm index (and with any index-based tie-break).
  bool shuffle_gnb_quality = true;

  double timestamp_step_s = 1.0;

  static SynthConfig from_config(const ConfigFile& cfg);
  void validate() const;

  // Quality rank of each arm under the given master seed.
  std::vector<int> gnb_quality_ranks(std::uint64_t seed) const;
  double gnb_sinr_offset(int gnb, std::uint64_t seed) const;
  double gnb_rate_scale(int gnb, std::uint64_t seed) const;
};

struct SynthTrace {
  std::vector<ContextSample> samples;
  // Ground-truth coefficient matrix per gNB: (kNumFeatures+1) rows, columns
  // {uplink, downlink}, already including the per-gNB rate scale.
  std::vector<std::array<std::array<double, 2>, kNumFeatures + 1>> ground_truth;
};

SynthTrace synthesize_trace(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace ztwin
