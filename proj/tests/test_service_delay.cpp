#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "support/oracles.hpp"
#include "ztwin/errors.hpp"
#include "ztwin/rng.hpp"
#include "ztwin/service_delay.hpp"

using namespace ztwin;

TEST_CASE("uplink and downlink durations") {
  CHECK(uplink_duration(10.0, 10.0) == doctest::Approx(1.0));
  CHECK(uplink_duration(0.0, 10.0) == 0.0);
  CHECK(uplink_duration(0.0, 0.0) == 0.0);  // empty payload needs no rate
  CHECK_THROWS_AS(uplink_duration(5.0, 0.0), ValidationError);
  CHECK_THROWS_AS(downlink_duration(5.0, -1.0), ValidationError);

  // Poisson-arrival oracle: mean transfer of ~10 Mb payloads at 10 Mbps.
  const double sim = oracle::simulate_mean_transfer(10.0, 10.0, 10000, 99);
  CHECK(std::fabs(sim - 1.0) < 0.01);  // within 1%
}

TEST_CASE("service rate follows lambda * alpha / gamma") {
  ServiceClassParams p;
  p.arrival_rate = 2.0;
  p.compute_capacity = 10.0;
  CHECK(service_rate(p, 5.0).mu == doctest::Approx(1.0));
  CHECK_FALSE(service_rate(p, 5.0).degenerate);

  const auto degenerate = service_rate(p, 0.0);
  CHECK(degenerate.mu == 0.0);
  CHECK(degenerate.degenerate);

  ServiceClassParams doubled = p;
  doubled.compute_capacity = 20.0;
  CHECK(service_rate(doubled, 5.0).mu == doctest::Approx(0.5 * service_rate(p, 5.0).mu));
}

TEST_CASE("utilization") {
  CHECK(utilization(0.25, 1.0, 2).value == doctest::Approx(0.5));
  CHECK_FALSE(utilization(0.25, 1.0, 2).unstable);
  CHECK(utilization(0.5, 1.0, 2).unstable);  // omega = 1 exactly
  CHECK(utilization(0.5, 1.0, 3).value > utilization(0.5, 1.0, 2).value);  // monotone in users
  CHECK_THROWS_AS(utilization(0.5, 0.0, 1), ValidationError);
}

TEST_CASE("pollaczek-khinchin waiting time") {
  // M/M/1 cross-check: lambda=0.5, mu=1 (E[S^2]=2), omega=0.5 -> Wq = rho/(mu-lambda) = 1.
  CHECK(pk_waiting_time(0.5, 2.0, 0.5) == doctest::Approx(1.0));
  CHECK(pk_waiting_time(0.0, 2.0, 0.0) == 0.0);
  CHECK_THROWS_AS(pk_waiting_time(0.5, 2.0, 1.0), InstabilityError);

  // strictly increasing in omega
  double prev = -1.0;
  for (double omega : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    const double w = pk_waiting_time(0.5, 2.0, omega);
    CHECK(w > prev);
    prev = w;
  }
}

TEST_CASE("analytic wait matches the discrete-event oracle at omega 0.5") {
  const std::size_t arrivals = 100000;
  const std::size_t warmup = 5000;

  SUBCASE("exponential service") {
    // lambda = 0.5, E[S] = 1 -> omega = 0.5, E[S^2] = 2.
    const double analytic = pk_waiting_time(0.5, 2.0, 0.5);
    const auto sim = oracle::simulate_mg1(0.5, 1.0, oracle::ServiceKind::kExponential, arrivals,
                                          4242, warmup);
    CHECK(std::fabs(sim.mean_wait - analytic) / analytic < 0.02);
  }

  SUBCASE("deterministic service") {
    const double analytic = pk_waiting_time(0.5, 1.0, 0.5);  // E[S^2] = 1
    const auto sim = oracle::simulate_mg1(0.5, 1.0, oracle::ServiceKind::kDeterministic, arrivals,
                                          4243, warmup);
    CHECK(std::fabs(sim.mean_wait - analytic) / analytic < 0.02);
  }
}

TEST_CASE("execution time") {
  const auto params = ServiceClassParams::from_cv(2.0, 2.0, 1.0, 0.0, 0.8);
  CHECK(execution_time(params, 0.0) == doctest::Approx(1.0));  // reduces to E[S]
  CHECK(execution_time(params, 0.5) == doctest::Approx(1.5));  // C^2 = 0 deterministic

  const auto exp_params = ServiceClassParams::from_cv(2.0, 2.0, 1.0, 1.0, 0.8);
  CHECK(execution_time(exp_params, 0.5) == doctest::Approx(2.0));  // C^2 = 1 exponential
  // Consistency: E[S] + pk wait for exponential service at lambda = omega/E[S].
  CHECK(execution_time(exp_params, 0.5) ==
        doctest::Approx(1.0 + pk_waiting_time(0.5, exp_params.second_moment, 0.5)));

  CHECK_THROWS_AS(execution_time(exp_params, 1.0), InstabilityError);

  // strictly increasing in C^2 for omega > 0
  double prev = -1.0;
  for (double cv2 : {0.0, 0.5, 1.0, 2.0}) {
    const double t = execution_time(ServiceClassParams::from_cv(2.0, 2.0, 1.0, cv2, 0.8), 0.5);
    CHECK(t > prev);
    prev = t;
  }
}

TEST_CASE("total delay is the exact sum of its parts") {
  const auto d = total_delay(0.1, 1.5, 0.2);
  CHECK(d.total == doctest::Approx(1.8));
  CHECK(d.total == d.uplink + d.queue_wait + d.execution + d.downlink);

  const auto zero = total_delay(0.0, 0.0, 0.0);
  CHECK(zero.total == 0.0);

  // reordering the parts leaves the total unchanged
  CHECK(total_delay(0.2, 1.5, 0.1).total == doctest::Approx(total_delay(0.1, 1.5, 0.2).total));
  CHECK(total_delay(0.1, 0.7, 0.8, 0.2).total == doctest::Approx(1.8));

  CHECK_THROWS_AS(total_delay(-0.1, 1.0, 0.2), ValidationError);
}

TEST_CASE("cqi from sinr") {
  const LinkParams link;
  CHECK(cqi_from_sinr(1.0, link) == doctest::Approx(4.6176));  // log term vanishes
  CHECK(cqi_from_sinr(2.0, link) == doctest::Approx(9.8406));  // 0.5223*10*1 + 4.6176
  CHECK(cqi_from_sinr(2.0, link) < 10.0);  // fails a minimum-CQI threshold of 10

  CHECK(cqi_from_sinr(1e9, link) == 15.0);  // clamped above
  CHECK(cqi_from_sinr(1e-9, link) == 0.0);  // clamped below
  CHECK_THROWS_AS(cqi_from_sinr(0.0, link), ValidationError);
  CHECK_THROWS_AS(cqi_from_sinr(-1.0, link), ValidationError);
}

TEST_CASE("shannon capacity") {
  CHECK(shannon_capacity_mbps(20.0, 3.0) == doctest::Approx(40.0));  // 20 * log2(4)
  CHECK(shannon_capacity_mbps(20.0, 0.0) == 0.0);
  CHECK_THROWS_AS(shannon_capacity_mbps(0.0, 3.0), ValidationError);
}

namespace {

struct Fixture {
  ServiceRequest request;
  ContextSample sample;
  Allocation allocation;
  ServiceClassParams params = ServiceClassParams::from_cv(2.0, 2.0, 0.2, 1.0, 0.8);
  LinkParams link;

  Fixture() {
    request.upload_mb = 5.0;
    request.download_mb = 0.5;
    request.delay_budget_s = 2.0;
    sample.sinr_db = 10.0 * std::log10(3.0);  // linear ratio 3
    sample.cqi = 12;
    allocation.uplink_mbps = 30.0;
    allocation.downlink_mbps = 30.0;
  }
};

}  // namespace

TEST_CASE("constraint checker") {
  Fixture f;

  SUBCASE("downlink capacity at 20 MHz and ratio 3 is 40 Mbps") {
    const auto chain = evaluate_delay_chain(f.request, f.allocation, f.params, 1);
    const auto flags = check_constraints(f.request, f.sample, f.allocation, chain.delays,
                                         chain.omega, f.params, f.link, 1);
    CHECK(flags.downlink_capacity);  // 30 <= 40
    CHECK(flags.uplink_capacity);
    CHECK(flags.uplink_volume);  // alpha = u * (alpha/u) exactly
    CHECK(flags.downlink_volume);
    CHECK(flags.assignment);
  }

  SUBCASE("delay budget violation") {
    const auto delays = total_delay(0.1, 1.5, 0.2);  // 1.8 s
    ServiceRequest tight = f.request;
    tight.delay_budget_s = 1.0;
    const auto flags =
        check_constraints(tight, f.sample, f.allocation, delays, 0.4, f.params, f.link, 1);
    CHECK_FALSE(flags.delay);
  }

  SUBCASE("utilization cap") {
    const auto chain = evaluate_delay_chain(f.request, f.allocation, f.params, 1);
    const auto flags = check_constraints(f.request, f.sample, f.allocation, chain.delays, 0.9,
                                         f.params, f.link, 1);
    CHECK_FALSE(flags.utilization);  // 0.9 > omega_max = 0.8
  }

  SUBCASE("minimum cqi threshold") {
    LinkParams strict = f.link;
    strict.min_cqi = 10.0;
    ContextSample weak = f.sample;
    weak.sinr_db = 10.0 * std::log10(2.0);  // cqi formula gives 9.8406
    const auto chain = evaluate_delay_chain(f.request, f.allocation, f.params, 1);
    const auto flags = check_constraints(f.request, weak, f.allocation, chain.delays, chain.omega,
                                         f.params, strict, 1);
    CHECK_FALSE(flags.min_cqi);
  }

  SUBCASE("unselected candidate fails the volume constraints") {
    const auto chain = evaluate_delay_chain(f.request, f.allocation, f.params, 1);
    const auto flags = check_constraints(f.request, f.sample, f.allocation, chain.delays,
                                         chain.omega, f.params, f.link, 0);
    CHECK_FALSE(flags.uplink_volume);  // alpha > 0 but a = 0
    CHECK_FALSE(flags.downlink_volume);
    CHECK(flags.assignment);  // 0 is still binary
    CHECK(flags.delay);
    CHECK(flags.utilization);
  }

  SUBCASE("non-binary indicator trips the assignment flag") {
    const auto chain = evaluate_delay_chain(f.request, f.allocation, f.params, 1);
    const auto flags = check_constraints(f.request, f.sample, f.allocation, chain.delays,
                                         chain.omega, f.params, f.link, 2);
    CHECK_FALSE(flags.assignment);
  }

  SUBCASE("overall verdict is the conjunction of the eight flags") {
    Rng rng(606);
    for (int trial = 0; trial < 200; ++trial) {
      ServiceRequest request;
      request.upload_mb = rng.uniform(0.1, 20.0);
      request.download_mb = rng.uniform(0.1, 5.0);
      request.delay_budget_s = rng.uniform(0.2, 3.0);
      ContextSample sample;
      sample.sinr_db = rng.uniform(-5.0, 25.0);
      Allocation alloc{rng.uniform(0.0, 150.0), rng.uniform(0.0, 2.0)};
      const auto chain = evaluate_delay_chain(request, alloc, f.params, 1);
      const auto flags = check_constraints(request, sample, alloc, chain.delays, chain.omega,
                                           f.params, f.link, rng.uniform_int(0, 1));
      const bool conjunction = flags.uplink_volume && flags.downlink_volume &&
                               flags.uplink_capacity && flags.downlink_capacity &&
                               flags.min_cqi && flags.delay && flags.utilization &&
                               flags.assignment;
      CHECK(flags.all() == conjunction);
    }
  }
}

TEST_CASE("delay chain evaluation never throws on infeasible candidates") {
  const auto params = ServiceClassParams::from_cv(2.0, 2.0, 0.2, 1.0, 0.8);
  ServiceRequest request;
  request.upload_mb = 5.0;
  request.download_mb = 0.5;

  SUBCASE("zero allocation gives flagged infinite delay") {
    const auto chain = evaluate_delay_chain(request, Allocation{0.0, 0.0}, params, 1);
    CHECK(chain.infinite);
    CHECK(std::isinf(chain.delays.total));
  }

  SUBCASE("unstable queue gives flagged infinite wait") {
    // gamma > alpha makes omega = users * gamma / alpha >= 1
    const auto hot = ServiceClassParams::from_cv(2.0, 10.0, 0.2, 1.0, 0.8);
    const auto chain = evaluate_delay_chain(request, Allocation{30.0, 30.0}, hot, 1);
    CHECK(chain.unstable);
    CHECK(chain.infinite);
    CHECK(std::isinf(chain.delays.queue_wait));
  }

  SUBCASE("feasible case: total equals the sum of parts") {
    const auto chain = evaluate_delay_chain(request, Allocation{30.0, 30.0}, params, 1);
    CHECK_FALSE(chain.infinite);
    CHECK(chain.delays.total == doctest::Approx(chain.delays.uplink + chain.delays.queue_wait +
                                                chain.delays.execution + chain.delays.downlink));
    // mu = 2*5/2 = 5, omega = 2/5
    CHECK(chain.mu == doctest::Approx(5.0));
    CHECK(chain.omega == doctest::Approx(0.4));
  }
}

TEST_CASE("service class parameter validation") {
  CHECK_THROWS_AS(ServiceClassParams::from_moments(2.0, 2.0, 1.0, 0.5, 0.8),
                  ValidationError);  // E[S^2] < E[S]^2

  ServiceClassParams inconsistent = ServiceClassParams::from_cv(2.0, 2.0, 1.0, 1.0, 0.8);
  inconsistent.squared_cv = 3.0;
  CHECK_THROWS_AS(inconsistent.validate(), ValidationError);

  const auto p = ServiceClassParams::from_cv(2.0, 2.0, 0.5, 1.0, 0.8);
  CHECK(p.second_moment == doctest::Approx(0.5));  // (1+1) * 0.25

  const auto per_request = p.for_request(5.0);
  CHECK(per_request.mean_service_time == doctest::Approx(0.2));  // 1/mu, mu = 2*5/2 = 5
  CHECK(per_request.second_moment == doctest::Approx(2.0 * 0.04));

  CHECK_THROWS_AS(ServiceClassParams::from_cv(0.0, 2.0, 0.5, 1.0, 0.8), ValidationError);
  CHECK_THROWS_AS(ServiceClassParams::from_cv(2.0, 2.0, 0.5, 1.0, 1.5), ValidationError);
}
