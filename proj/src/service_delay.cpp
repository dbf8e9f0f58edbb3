#include "ztwin/service_delay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ztwin/errors.hpp"

namespace ztwin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack for the volume comparisons: alpha <= u * (alpha/u) must not
// flip on the last bit of the division round-trip.
constexpr double kVolumeTol = 1e-9;

bool leq(double lhs, double rhs) {
  return lhs <= rhs + kVolumeTol * std::max({1.0, std::fabs(lhs), std::fabs(rhs)});
}

}  // namespace

ServiceClassParams ServiceClassParams::from_cv(double lambda, double gamma, double mean_s,
                                               double cv2, double omega_max) {
  ServiceClassParams p;
  p.arrival_rate = lambda;
  p.compute_capacity = gamma;
  p.mean_service_time = mean_s;
  p.squared_cv = cv2;
  p.second_moment = (1.0 + cv2) * mean_s * mean_s;
  p.max_utilization = omega_max;
  p.validate();
  return p;
}

ServiceClassParams ServiceClassParams::from_moments(double lambda, double gamma, double mean_s,
                                                    double second_moment, double omega_max) {
  ServiceClassParams p;
  p.arrival_rate = lambda;
  p.compute_capacity = gamma;
  p.mean_service_time = mean_s;
  p.second_moment = second_moment;
  p.squared_cv = second_moment / (mean_s * mean_s) - 1.0;
  p.max_utilization = omega_max;
  p.validate();
  return p;
}

ServiceClassParams ServiceClassParams::for_request(double alpha_mb) const {
  const auto sr = service_rate(*this, alpha_mb);
  ServiceClassParams p = *this;
  if (sr.degenerate || sr.mu <= 0.0) {
    p.mean_service_time = 0.0;
    p.second_moment = 0.0;
    return p;  // zero payload: nothing to execute
  }
  p.mean_service_time = 1.0 / sr.mu;
  p.second_moment = (1.0 + squared_cv) * p.mean_service_time * p.mean_service_time;
  return p;
}

void ServiceClassParams::validate() const {
  if (!(arrival_rate > 0.0)) throw ValidationError("service class: arrival_rate must be > 0");
  if (!(compute_capacity > 0.0))
    throw ValidationError("service class: compute_capacity must be > 0");
  if (mean_service_time < 0.0) throw ValidationError("service class: negative mean service time");
  if (second_moment + 1e-15 < mean_service_time * mean_service_time)
    throw ValidationError("service class: E[S^2] < E[S]^2");
  if (mean_service_time > 0.0) {
    const double cv2 = second_moment / (mean_service_time * mean_service_time) - 1.0;
    if (std::fabs(cv2 - squared_cv) > 1e-9)
      throw ValidationError("service class: C^2 inconsistent with the stated moments");
  }
  if (!(max_utilization > 0.0) || max_utilization > 1.0)
    throw ValidationError("service class: max_utilization must be in (0,1]");
}

void LinkParams::validate() const {
  if (!(uplink_bandwidth_mhz > 0.0) || !(downlink_bandwidth_mhz > 0.0))
    throw ValidationError("link: bandwidths must be > 0");
  if (min_cqi < 0.0 || min_cqi > 15.0) throw ValidationError("link: min_cqi must be in [0,15]");
}

double uplink_duration(double alpha_mb, double uplink_mbps) {
  if (alpha_mb == 0.0) return 0.0;
  if (alpha_mb < 0.0) throw ValidationError("uplink_duration: negative payload");
  if (uplink_mbps <= 0.0) throw ValidationError("uplink_duration: infeasible rate");
  return alpha_mb / uplink_mbps;
}

double downlink_duration(double beta_mb, double downlink_mbps) {
  if (beta_mb == 0.0) return 0.0;
  if (beta_mb < 0.0) throw ValidationError("downlink_duration: negative payload");
  if (downlink_mbps <= 0.0) throw ValidationError("downlink_duration: infeasible rate");
  return beta_mb / downlink_mbps;
}

ServiceRateResult service_rate(const ServiceClassParams& params, double alpha_mb) {
  if (!(params.compute_capacity > 0.0))
    throw ValidationError("service_rate: compute_capacity must be > 0");
  if (alpha_mb < 0.0) throw ValidationError("service_rate: negative payload");
  ServiceRateResult r;
  r.mu = params.arrival_rate * alpha_mb / params.compute_capacity;
  r.degenerate = alpha_mb == 0.0;
  return r;
}

UtilizationResult utilization(double lambda, double mu, int users) {
  if (mu <= 0.0) throw ValidationError("utilization: mu must be > 0");
  if (users < 0) throw ValidationError("utilization: negative user count");
  UtilizationResult r;
  r.value = static_cast<double>(users) * lambda / mu;
  r.unstable = r.value >= 1.0;
  return r;
}

double pk_waiting_time(double lambda, double second_moment, double omega) {
  if (lambda < 0.0 || second_moment < 0.0)
    throw ValidationError("pk_waiting_time: negative input");
  if (omega >= 1.0) throw InstabilityError("pk_waiting_time: utilization at or above 1");
  return lambda * second_moment / (2.0 * (1.0 - omega));
}

double execution_time(const ServiceClassParams& params, double omega) {
  if (omega < 0.0) throw ValidationError("execution_time: negative utilization");
  if (omega >= 1.0) throw InstabilityError("execution_time: utilization at or above 1");
  return (1.0 + 0.5 * (1.0 + params.squared_cv) * omega / (1.0 - omega)) *
         params.mean_service_time;
}

namespace {

DelayBreakdown make_breakdown(double up, double queue_wait, double execution, double down) {
  for (double part : {up, queue_wait, execution, down})
    if (part < 0.0 || std::isnan(part)) throw ValidationError("total_delay: negative delay part");
  DelayBreakdown d;
  d.uplink = up;
  d.queue_wait = queue_wait;
  d.execution = execution;
  d.downlink = down;
  d.total = up + queue_wait + execution + down;
  return d;
}

}  // namespace

DelayBreakdown total_delay(double up, double queue_wait, double execution, double down) {
  return make_breakdown(up, queue_wait, execution, down);
}

DelayBreakdown total_delay(double up, double queue_exec, double down) {
  return make_breakdown(up, 0.0, queue_exec, down);
}

double cqi_from_sinr(double sinr_linear_ratio, const LinkParams& link) {
  if (!(sinr_linear_ratio > 0.0)) throw ValidationError("cqi_from_sinr: ratio must be > 0");
  const double raw = link.cqi_coeff * 10.0 * std::log2(sinr_linear_ratio) + link.cqi_offset;
  return std::clamp(raw, 0.0, 15.0);
}

double shannon_capacity_mbps(double bandwidth_mhz, double sinr_linear_ratio) {
  if (!(bandwidth_mhz > 0.0)) throw ValidationError("capacity: bandwidth must be > 0");
  if (sinr_linear_ratio < 0.0) throw ValidationError("capacity: negative ratio");
  return bandwidth_mhz * std::log2(1.0 + sinr_linear_ratio);
}

ConstraintFlags check_constraints(const ServiceRequest& request, const ContextSample& sample,
                                  const Allocation& allocation, const DelayBreakdown& delays,
                                  double omega, const ServiceClassParams& params,
                                  const LinkParams& link, int assignment_indicator) {
  const double a = assignment_indicator != 0 ? 1.0 : 0.0;
  // 0 * inf must follow the algebraic limit (an unselected candidate
  // contributes nothing), not the IEEE NaN.
  const auto mult = [a](double x) { return a == 0.0 ? 0.0 : a * x; };
  const double delta = sinr_linear(sample.sinr_db);

  ConstraintFlags flags;
  flags.uplink_volume = leq(request.upload_mb, mult(allocation.uplink_mbps * delays.uplink));
  flags.downlink_volume =
      leq(request.download_mb, mult(allocation.downlink_mbps * delays.downlink));
  flags.uplink_capacity =
      shannon_capacity_mbps(link.uplink_bandwidth_mhz, delta) >= mult(allocation.uplink_mbps);
  flags.downlink_capacity =
      shannon_capacity_mbps(link.downlink_bandwidth_mhz, delta) >= mult(allocation.downlink_mbps);
  flags.min_cqi = mult(cqi_from_sinr(delta, link)) >= link.min_cqi;
  flags.delay = mult(delays.total) <= request.delay_budget_s;
  flags.utilization = mult(omega) <= params.max_utilization;
  flags.assignment = assignment_indicator == 0 || assignment_indicator == 1;
  return flags;
}

DelayChainResult evaluate_delay_chain(const ServiceRequest& request, const Allocation& allocation,
                                      const ServiceClassParams& params, int users) {
  DelayChainResult r;

  const double up = allocation.uplink_mbps > 0.0
                        ? request.upload_mb / allocation.uplink_mbps
                        : (request.upload_mb == 0.0 ? 0.0 : kInf);
  const double down = allocation.downlink_mbps > 0.0
                          ? request.download_mb / allocation.downlink_mbps
                          : (request.download_mb == 0.0 ? 0.0 : kInf);

  const auto sr = service_rate(params, request.upload_mb);
  r.mu = sr.mu;
  r.degenerate = sr.degenerate;

  double queue_wait = 0.0;
  double execution = 0.0;
  if (!sr.degenerate) {
    const auto util = utilization(params.arrival_rate, sr.mu, users);
    r.omega = util.value;
    r.unstable = util.unstable;
    const ServiceClassParams per_request = params.for_request(request.upload_mb);
    if (util.unstable) {
      queue_wait = kInf;
      execution = per_request.mean_service_time;
    } else {
      queue_wait = pk_waiting_time(params.arrival_rate, per_request.second_moment, util.value);
      execution = per_request.mean_service_time;
    }
  }

  r.infinite = std::isinf(up) || std::isinf(down) || std::isinf(queue_wait);
  r.delays.uplink = up;
  r.delays.queue_wait = queue_wait;
  r.delays.execution = execution;
  r.delays.downlink = down;
  r.delays.total = up + queue_wait + execution + down;
  return r;
}

}  // namespace ztwin
