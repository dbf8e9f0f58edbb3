#pragma once

#include "ztwin/trace.hpp"

namespace ztwin {

// Per-service-class queueing parameters. The service-time moments must agree:
// E[S^2] >= E[S]^2 and C^2 == Var[S]/E[S]^2 within 1e-9.
struct ServiceClassParams {
  double arrival_rate = 2.0;       // lambda, requests/s
  double compute_capacity = 2.0;   // gamma, Mb/s of processing
  double mean_service_time = 0.5;  // E[S], s
  double second_moment = 0.5;      // E[S^2], s^2
  double squared_cv = 1.0;         // C^2
  double max_utilization = 0.8;    // omega_max in (0,1]

  // E[S^2] derived from E[S] and C^2.
  static ServiceClassParams from_cv(double lambda, double gamma, double mean_s, double cv2,
                                    double omega_max);
  static ServiceClassParams from_moments(double lambda, double gamma, double mean_s,
                                         double second_moment, double omega_max);

  // Same class, with the service-time moments rebuilt for a request of
  // alpha Mb: mu = lambda*alpha/gamma, E[S] = 1/mu, E[S^2] = (1+C^2) E[S]^2.
  ServiceClassParams for_request(double alpha_mb) const;

  void validate() const;
};

struct LinkParams {
  double uplink_bandwidth_mhz = 20.0;    // chi_up
  double downlink_bandwidth_mhz = 20.0;  // chi_down
  double cqi_coeff = 0.5223;             // upsilon_1
  double cqi_offset = 4.6176;            // upsilon_2
  double min_cqi = 7.0;                  // eta, in [0,15]

  void validate() const;
};

struct DelayBreakdown {
  double uplink = 0.0;      // s
  double queue_wait = 0.0;  // s
  double execution = 0.0;   // s
  double downlink = 0.0;    // s
  double total = 0.0;       // exact sum of the four parts
};

// --- delay chain ------------------------------------------------------------

// alpha/u for one request; 0 for an empty payload. Throws ValidationError on
// u <= 0 with a nonzero payload.
double uplink_duration(double alpha_mb, double uplink_mbps);
double downlink_duration(double beta_mb, double downlink_mbps);

struct ServiceRateResult {
  double mu = 0.0;          // requests/s
  bool degenerate = false;  // alpha == 0: service time undefined
};

// mu = lambda * alpha / gamma.
ServiceRateResult service_rate(const ServiceClassParams& params, double alpha_mb);

struct UtilizationResult {
  double value = 0.0;
  bool unstable = false;  // omega >= 1
};

// omega = users * lambda / mu.
UtilizationResult utilization(double lambda, double mu, int users);

// Pollaczek-Khinchin mean wait lambda * E[S^2] / (2 (1 - omega)).
// Throws InstabilityError at omega >= 1; batch evaluation goes through
// evaluate_delay_chain, which flags instead.
double pk_waiting_time(double lambda, double second_moment, double omega);

// (1 + ((1 + C^2)/2) * omega/(1 - omega)) * E[S]; equals E[S] at omega = 0.
double execution_time(const ServiceClassParams& params, double omega);

DelayBreakdown total_delay(double up, double queue_wait, double execution, double down);
// Middle argument is the combined queue-plus-execution term of the chain.
DelayBreakdown total_delay(double up, double queue_exec, double down);

// --- CQI and constraints ----------------------------------------------------

// upsilon_1 * 10 * log2(delta) + upsilon_2 on the linear SINR ratio, clamped
// to the CQI index range [0, 15].
double cqi_from_sinr(double sinr_linear_ratio, const LinkParams& link);

// chi * log2(1 + delta) with chi in MHz and delta the linear SINR ratio;
// 1 MHz * (bit/s/Hz) = 1 Mbps.
double shannon_capacity_mbps(double bandwidth_mhz, double sinr_linear_ratio);

struct Allocation {
  double uplink_mbps = 0.0;   // u_exe
  double downlink_mbps = 0.0; // d_exe
};

// One flag per feasibility constraint of the service-assignment problem.
struct ConstraintFlags {
  bool uplink_volume = false;      // upload fits through the mean uplink duration
  bool downlink_volume = false;    // download fits through the mean downlink duration
  bool uplink_capacity = false;    // allocated uplink within Shannon capacity
  bool downlink_capacity = false;  // allocated downlink within Shannon capacity
  bool min_cqi = false;            // achieved CQI at least eta
  bool delay = false;              // total delay within the request budget
  bool utilization = false;        // server utilization within omega_max
  bool assignment = false;         // selection indicator is binary

  bool all() const {
    return uplink_volume && downlink_volume && uplink_capacity && downlink_capacity && min_cqi &&
           delay && utilization && assignment;
  }
};

// Evaluates the eight feasibility flags for one candidate decision.
// `assignment_indicator` is the 0/1 selection variable multiplying each
// constraint; candidate evaluations pass 1. Infeasibility is data, not an
// error: the flags simply come back false.
ConstraintFlags check_constraints(const ServiceRequest& request, const ContextSample& sample,
                                  const Allocation& allocation, const DelayBreakdown& delays,
                                  double omega, const ServiceClassParams& params,
                                  const LinkParams& link, int assignment_indicator = 1);

// --- batch evaluation -------------------------------------------------------

struct DelayChainResult {
  DelayBreakdown delays;
  double mu = 0.0;
  double omega = 0.0;
  bool unstable = false;    // omega >= 1: wait reported as +inf, not an error
  bool degenerate = false;  // zero payload
  bool infinite = false;    // some component is +inf (zero rate or unstable queue)
};

// Non-throwing delay chain for scoring loops: infeasible inputs produce
// flagged infinite delays so the caller can score the candidate as worthless.
DelayChainResult evaluate_delay_chain(const ServiceRequest& request, const Allocation& allocation,
                                      const ServiceClassParams& params, int users);

}  // namespace ztwin
