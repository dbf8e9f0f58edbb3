#include "ztwin/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ztwin/errors.hpp"
#include "ztwin/rng.hpp"

namespace ztwin {

double sinr_linear(double sinr_db) { return std::pow(10.0, sinr_db / 10.0); }

std::optional<std::string> validate_sample(const ContextSample& s, int num_gnbs) {
  // Messages lead with the canonical field name; row errors reuse it.
  const struct {
    const char* name;
    double value;
  } finite_fields[] = {{"timestamp", s.timestamp},     {"speed", s.speed},
                       {"rsrp", s.rsrp},               {"rsrq", s.rsrq},
                       {"sinr", s.sinr_db},            {"uplink_rate", s.uplink_rate},
                       {"downlink_rate", s.downlink_rate}};
  for (const auto& f : finite_fields)
    if (!std::isfinite(f.value)) return std::string(f.name) + " non-finite";
  if (s.cqi < 0 || s.cqi > 15) return "cqi out of range";
  if (s.speed < 0.0) return "speed must be >= 0";
  if (s.uplink_rate < 0.0) return "uplink_rate must be >= 0";
  if (s.downlink_rate < 0.0) return "downlink_rate must be >= 0";
  if (s.gnb_id < 0 || s.gnb_id >= num_gnbs) return "gnb_id out of range";
  return std::nullopt;
}

void ServiceRequest::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(upload_mb)) throw ValidationError("service request: upload_mb must be > 0");
  if (!positive(download_mb)) throw ValidationError("service request: download_mb must be > 0");
  if (!positive(delay_budget_s)) throw ValidationError("service request: delay_budget_s must be > 0");
  if (!positive(required_uplink)) throw ValidationError("service request: required_uplink must be > 0");
  if (!positive(required_downlink))
    throw ValidationError("service request: required_downlink must be > 0");
}

namespace {

const std::vector<std::string> kCanonicalFields = {
    "timestamp", "speed",       "rsrp",          "rsrq",  "sinr",
    "cqi",       "uplink_rate", "downlink_rate", "gnb_id"};

}  // namespace

std::span<const std::string> canonical_fields() { return kCanonicalFields; }

ColumnMapping ColumnMapping::identity() {
  ColumnMapping m;
  for (const auto& f : kCanonicalFields) {
    m.columns[f] = f;
    m.scales[f] = 1.0;
  }
  return m;
}

ColumnMapping ColumnMapping::from_config(const ConfigFile& cfg) {
  ColumnMapping m;
  for (const auto& [key, value] : cfg.section_items("trace.columns")) m.columns[key] = value;
  for (const auto& f : kCanonicalFields) m.scales[f] = 1.0;
  for (const auto& [key, value] : cfg.section_items("trace.scales")) {
    char* end = nullptr;
    const double scale = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || scale == 0.0)
      throw ConfigError("trace.scales." + key + ": scale must be a nonzero number");
    m.scales[key] = scale;
  }
  m.validate();
  return m;
}

void ColumnMapping::validate() const {
  for (const auto& f : kCanonicalFields) {
    if (f == "gnb_id") continue;  // optional, assigned round-robin when absent
    if (columns.count(f) == 0) throw ConfigError("column mapping: canonical field unmapped: " + f);
  }
  for (const auto& [canonical, source] : columns) {
    if (std::find(kCanonicalFields.begin(), kCanonicalFields.end(), canonical) ==
        kCanonicalFields.end())
      throw ConfigError("column mapping: unknown canonical field: " + canonical);
    if (source.empty()) throw ConfigError("column mapping: empty source column for " + canonical);
  }
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  auto cells = split(line, ',');
  for (auto& c : cells) c = trim(c);
  return cells;
}

bool parse_cell(const std::string& cell, double* out) {
  if (cell.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

}  // namespace

ParseResult parse_trace_stream(std::istream& in, const ColumnMapping& mapping, int num_gnbs) {
  mapping.validate();

  std::string header_line;
  if (!std::getline(in, header_line)) throw ConfigError("trace: empty file, no header row");
  const auto headers = split_csv_row(header_line);

  // canonical field -> column index
  std::map<std::string, std::size_t> index;
  for (const auto& [canonical, source] : mapping.columns) {
    const auto it = std::find(headers.begin(), headers.end(), source);
    if (it == headers.end()) {
      if (canonical == "gnb_id") continue;
      throw ConfigError("trace: mapped column not in header: " + source);
    }
    index[canonical] = static_cast<std::size_t>(it - headers.begin());
  }

  const bool has_gnb = index.count("gnb_id") > 0;

  ParseResult result;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_row(line);

    ContextSample s;
    std::string bad_field;
    std::string message;

    const auto field = [&](const std::string& name, double* out) {
      if (!bad_field.empty()) return;
      const auto it = index.find(name);
      if (it == index.end()) return;  // optional field
      if (it->second >= cells.size()) {
        bad_field = name;
        message = "missing cell";
        return;
      }
      double v = 0.0;
      if (!parse_cell(cells[it->second], &v)) {
        bad_field = name;
        message = "unparseable cell";
        return;
      }
      const auto sit = mapping.scales.find(name);
      *out = sit == mapping.scales.end() ? v : v * sit->second;
    };

    double cqi = 0.0, gnb = 0.0;
    field("timestamp", &s.timestamp);
    field("speed", &s.speed);
    field("rsrp", &s.rsrp);
    field("rsrq", &s.rsrq);
    field("sinr", &s.sinr_db);
    field("cqi", &cqi);
    field("uplink_rate", &s.uplink_rate);
    field("downlink_rate", &s.downlink_rate);
    if (has_gnb) field("gnb_id", &gnb);

    if (bad_field.empty()) {
      if (cqi != std::floor(cqi)) {
        bad_field = "cqi";
        message = "not an integer";
      } else if (gnb != std::floor(gnb)) {
        bad_field = "gnb_id";
        message = "not an integer";
      }
    }
    if (bad_field.empty()) {
      s.cqi = static_cast<int>(cqi);
      s.gnb_id = static_cast<int>(gnb);
      if (const auto err = validate_sample(s, num_gnbs)) {
        // validate_sample messages name the field first, e.g. "cqi out of range"
        bad_field = err->substr(0, err->find(' '));
        message = *err;
      }
    }

    if (bad_field.empty()) {
      result.samples.push_back(s);
    } else {
      result.errors.push_back({row, bad_field, message});
    }
  }
  return result;
}

ParseResult parse_trace(const std::string& path, const ColumnMapping& mapping, int num_gnbs) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  return parse_trace_stream(in, mapping, num_gnbs);
}

void write_trace_csv(std::ostream& out, std::span<const ContextSample> samples) {
  for (std::size_t i = 0; i < kCanonicalFields.size(); ++i)
    out << (i ? "," : "") << kCanonicalFields[i];
  out << "\n";
  char buf[512];
  for (const auto& s : samples) {
    // %.17g round-trips doubles exactly
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%d\n",
                  s.timestamp, s.speed, s.rsrp, s.rsrq, s.sinr_db, s.cqi, s.uplink_rate,
                  s.downlink_rate, s.gnb_id);
    out << buf;
  }
}

SynthConfig SynthConfig::from_config(const ConfigFile& cfg) {
  SynthConfig c;
  c.num_samples = static_cast<int>(cfg.get_int_or("synth", "samples", c.num_samples));
  c.num_gnbs = static_cast<int>(cfg.get_int_or("run", "gnbs", c.num_gnbs));
  c.speed_min = cfg.get_double_or("synth", "speed_min", c.speed_min);
  c.speed_max = cfg.get_double_or("synth", "speed_max", c.speed_max);
  c.rsrp_min = cfg.get_double_or("synth", "rsrp_min", c.rsrp_min);
  c.rsrp_max = cfg.get_double_or("synth", "rsrp_max", c.rsrp_max);
  c.rsrq_min = cfg.get_double_or("synth", "rsrq_min", c.rsrq_min);
  c.rsrq_max = cfg.get_double_or("synth", "rsrq_max", c.rsrq_max);
  c.sinr_min = cfg.get_double_or("synth", "sinr_min", c.sinr_min);
  c.sinr_max = cfg.get_double_or("synth", "sinr_max", c.sinr_max);
  c.cqi_min = static_cast<int>(cfg.get_int_or("synth", "cqi_min", c.cqi_min));
  c.cqi_max = static_cast<int>(cfg.get_int_or("synth", "cqi_max", c.cqi_max));
  c.noise_amplitude = cfg.get_double_or("synth", "noise_amplitude", c.noise_amplitude);
  c.gnb_sinr_spread_db = cfg.get_double_or("synth", "gnb_sinr_spread", c.gnb_sinr_spread_db);
  c.gnb_rate_scale_spread =
      cfg.get_double_or("synth", "gnb_rate_scale_spread", c.gnb_rate_scale_spread);
  c.shuffle_gnb_quality = cfg.get_bool_or("synth", "shuffle_gnb_quality", c.shuffle_gnb_quality);
  c.timestamp_step_s = cfg.get_double_or("synth", "timestamp_step", c.timestamp_step_s);
  const auto up = cfg.get_doubles_or("synth", "uplink_coeffs", {});
  const auto down = cfg.get_doubles_or("synth", "downlink_coeffs", {});
  const auto to_array = [](const std::vector<double>& v, const char* which) {
    if (v.size() != kNumFeatures + 1)
      throw ConfigError(std::string("synth.") + which + ": expected 6 coefficients");
    std::array<double, kNumFeatures + 1> a{};
    std::copy(v.begin(), v.end(), a.begin());
    return a;
  };
  if (!up.empty()) c.uplink_coeffs = to_array(up, "uplink_coeffs");
  if (!down.empty()) c.downlink_coeffs = to_array(down, "downlink_coeffs");
  c.validate();
  return c;
}

void SynthConfig::validate() const {
  if (num_samples < 1) throw ConfigError("synth: samples must be >= 1");
  if (num_gnbs < 1) throw ConfigError("synth: gnbs must be >= 1");
  const auto range_ok = [](double lo, double hi) { return std::isfinite(lo) && lo < hi; };
  if (!range_ok(speed_min, speed_max) || speed_min < 0.0)
    throw ConfigError("synth: empty or negative speed range");
  if (!range_ok(rsrp_min, rsrp_max)) throw ConfigError("synth: empty rsrp range");
  if (!range_ok(rsrq_min, rsrq_max)) throw ConfigError("synth: empty rsrq range");
  if (!range_ok(sinr_min, sinr_max)) throw ConfigError("synth: empty sinr range");
  if (cqi_min < 0 || cqi_max > 15 || cqi_min > cqi_max)
    throw ConfigError("synth: cqi range must lie in [0,15]");
  if (noise_amplitude < 0.0) throw ConfigError("synth: noise_amplitude must be >= 0");
  if (gnb_sinr_spread_db < 0.0) throw ConfigError("synth: gnb_sinr_spread must be >= 0");
  // Negative spread couples a high rate scale to a low quality rank
  // (overallocating arms on weak channels).
  if (gnb_rate_scale_spread <= -2.0 || gnb_rate_scale_spread >= 2.0)
    throw ConfigError("synth: gnb_rate_scale_spread must be in (-2,2)");
}

std::vector<int> SynthConfig::gnb_quality_ranks(std::uint64_t seed) const {
  std::vector<int> ranks(num_gnbs);
  for (int g = 0; g < num_gnbs; ++g) ranks[g] = g;
  if (shuffle_gnb_quality && num_gnbs > 1) {
    Rng rng(derive_seed(seed, 2));
    for (int i = num_gnbs - 1; i > 0; --i)
      std::swap(ranks[i], ranks[rng.uniform_int(0, i)]);
  }
  return ranks;
}

double SynthConfig::gnb_sinr_offset(int gnb, std::uint64_t seed) const {
  if (num_gnbs <= 1) return 0.0;
  const int rank = gnb_quality_ranks(seed)[gnb];
  const double t = static_cast<double>(rank) / (num_gnbs - 1);  // 0 = best
  return gnb_sinr_spread_db * (1.0 - 2.0 * t);
}

double SynthConfig::gnb_rate_scale(int gnb, std::uint64_t seed) const {
  if (num_gnbs <= 1) return 1.0;
  const int rank = gnb_quality_ranks(seed)[gnb];
  const double t = static_cast<double>(rank) / (num_gnbs - 1);
  return 1.0 + 0.5 * gnb_rate_scale_spread * (1.0 - 2.0 * t);
}

namespace {

using Coeffs = std::array<double, kNumFeatures + 1>;

// Minimum of intercept + sum coeff_k * x_k over the feature box.
double map_minimum(const Coeffs& c, const SynthConfig& cfg) {
  const double lo[kNumFeatures] = {cfg.speed_min, cfg.rsrp_min, cfg.rsrq_min, cfg.sinr_min,
                                   static_cast<double>(cfg.cqi_min)};
  const double hi[kNumFeatures] = {cfg.speed_max, cfg.rsrp_max, cfg.rsrq_max, cfg.sinr_max,
                                   static_cast<double>(cfg.cqi_max)};
  double m = c[0];
  for (int k = 0; k < kNumFeatures; ++k) m += c[k + 1] > 0.0 ? c[k + 1] * lo[k] : c[k + 1] * hi[k];
  return m;
}

Coeffs draw_coeffs(Rng& rng, const SynthConfig& cfg, bool uplink) {
  // Slope magnitudes sized so uplink spans the ~50/100 Mbps rule-set edges and
  // downlink the ~0.1/0.8 Mbps edges.
  const double s = uplink ? 1.0 : 0.012;
  Coeffs c{};
  c[1] = rng.uniform(-0.15, 0.15) * s;  // speed
  c[2] = rng.uniform(-0.40, 0.40) * s;  // rsrp
  c[3] = rng.uniform(-0.80, 0.80) * s;  // rsrq
  c[4] = rng.uniform(0.50, 1.50) * s;   // sinr
  c[5] = rng.uniform(0.50, 1.50) * s;   // cqi
  const double margin = uplink ? 45.0 : 0.08;
  c[0] = margin - map_minimum(c, cfg);
  return c;
}

double dot_features(const Coeffs& c, const std::array<double, kNumFeatures>& x) {
  double y = c[0];
  for (int k = 0; k < kNumFeatures; ++k) y += c[k + 1] * x[k];
  return y;
}

}  // namespace

SynthTrace synthesize_trace(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();

  Rng coeff_rng(derive_seed(seed, 1));
  const Coeffs up = cfg.uplink_coeffs ? *cfg.uplink_coeffs : draw_coeffs(coeff_rng, cfg, true);
  const Coeffs down =
      cfg.downlink_coeffs ? *cfg.downlink_coeffs : draw_coeffs(coeff_rng, cfg, false);

  // The embedded map must stay nonnegative over the whole envelope, noise and
  // per-gNB scaling included, so that rate invariants hold without clamping.
  double scale_min = 1.0;
  for (int g = 0; g < cfg.num_gnbs; ++g) scale_min = std::min(scale_min, cfg.gnb_rate_scale(g, seed));
  if (scale_min <= 0.0) throw ConfigError("synth: gnb rate scale must stay positive");
  if (scale_min * map_minimum(up, cfg) - cfg.noise_amplitude < 0.0)
    throw ConfigError("synth: uplink map can go negative over the configured envelope");
  if (scale_min * map_minimum(down, cfg) - cfg.noise_amplitude * 0.01 < 0.0)
    throw ConfigError("synth: downlink map can go negative over the configured envelope");

  const double speed_range = cfg.speed_max - cfg.speed_min;
  const double rsrp_range = cfg.rsrp_max - cfg.rsrp_min;
  const double rsrq_range = cfg.rsrq_max - cfg.rsrq_min;
  const double sinr_range = cfg.sinr_max - cfg.sinr_min;
  const double cqi_per_db = (cfg.cqi_max - cfg.cqi_min) / sinr_range;

  const auto clamp = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };

  SynthTrace trace;
  trace.samples.reserve(static_cast<std::size_t>(cfg.num_samples));
  std::vector<double> sinr_offset(cfg.num_gnbs);
  std::vector<double> rate_scale(cfg.num_gnbs);
  for (int g = 0; g < cfg.num_gnbs; ++g) {
    sinr_offset[g] = cfg.gnb_sinr_offset(g, seed);
    rate_scale[g] = cfg.gnb_rate_scale(g, seed);
    std::array<std::array<double, 2>, kNumFeatures + 1> gt{};
    for (int k = 0; k <= kNumFeatures; ++k)
      gt[k] = {rate_scale[g] * up[k], rate_scale[g] * down[k]};
    trace.ground_truth.push_back(gt);
  }

  Rng rng(derive_seed(seed, 0));
  for (int j = 0; j < cfg.num_samples; ++j) {
    ContextSample s;
    s.timestamp = j * cfg.timestamp_step_s;
    s.gnb_id = j % cfg.num_gnbs;

    s.speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    const double f_speed = (s.speed - cfg.speed_min) / speed_range;
    // Simple causal chain mirroring the reasoning DAG: faster users see worse
    // RSRP; RSRQ and SINR track RSRP; CQI tracks SINR.
    s.rsrp = clamp(cfg.rsrp_max - 0.7 * f_speed * rsrp_range + rng.uniform(-1.0, 1.0) * 0.15 * rsrp_range,
                   cfg.rsrp_min, cfg.rsrp_max);
    const double f_rsrp = (s.rsrp - cfg.rsrp_min) / rsrp_range;
    s.rsrq = clamp(cfg.rsrq_min + 0.8 * f_rsrp * rsrq_range + rng.uniform(-1.0, 1.0) * 0.10 * rsrq_range,
                   cfg.rsrq_min, cfg.rsrq_max);
    s.sinr_db = clamp(cfg.sinr_min + 0.8 * f_rsrp * sinr_range + sinr_offset[s.gnb_id] +
                          rng.uniform(-1.0, 1.0) * 0.10 * sinr_range,
                      cfg.sinr_min, cfg.sinr_max);
    const double cqi_raw =
        cfg.cqi_min + cqi_per_db * (s.sinr_db - cfg.sinr_min) + rng.uniform(-1.0, 1.0);
    s.cqi = static_cast<int>(clamp(std::round(cqi_raw), cfg.cqi_min, cfg.cqi_max));

    const double scale = rate_scale[s.gnb_id];
    const auto x = s.features();
    s.uplink_rate = scale * dot_features(up, x) + rng.uniform(-1.0, 1.0) * cfg.noise_amplitude;
    s.downlink_rate =
        scale * dot_features(down, x) + rng.uniform(-1.0, 1.0) * cfg.noise_amplitude * 0.01;

    trace.samples.push_back(s);
  }
  return trace;
}

}  // namespace ztwin
