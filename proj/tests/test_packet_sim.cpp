#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "rcp/packet_sim.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

rcp::NetworkConfig small_link(double a, double rho, double duration) {
    rcp::NetworkConfig cfg;
    cfg.protocol.a = a;
    cfg.protocol.b = rcp::rho_to_b(rho);
    cfg.protocol.capacity = 100.0;
    cfg.protocol.tau1 = 10.0;
    cfg.protocol.tau2 = 50.0;
    cfg.n_sources = 100;
    cfg.duration = duration;
    return cfg;
}

} // namespace

TEST_CASE("event queue ordering", "[packet]") {
    rcp::EventQueue q;
    q.push({2.0, rcp::EventType::PacketArrival});
    q.push({1.0, rcp::EventType::FeedbackDelivery, 0, 1});
    q.push({1.0, rcp::EventType::RateUpdate});
    q.push({1.0, rcp::EventType::FeedbackDelivery, 0, 2});
    q.push({1.0, rcp::EventType::ServiceCompletion});
    q.push({1.0, rcp::EventType::PacketArrival});
    CHECK(q.pop().type == rcp::EventType::ServiceCompletion);
    CHECK(q.pop().type == rcp::EventType::PacketArrival);
    CHECK(q.pop().type == rcp::EventType::RateUpdate);
    CHECK(q.pop().source == 1);
    CHECK(q.pop().source == 2);
    CHECK(q.pop().time == 2.0);
    CHECK(q.empty());
}

TEST_CASE("packet conservation at every sample", "[packet][property]") {
    const auto r = rcp::run(small_link(0.6, 0.95, 6000.0));
    REQUIRE(r.samples.size() > 100);
    double last_t = -1.0;
    for (const auto& s : r.samples) {
        CHECK(static_cast<double>(s.departed) + s.queue == static_cast<double>(s.arrived));
        CHECK(s.t > last_t);
        CHECK(s.queue >= 0.0);
        CHECK(s.router_rate > 0.0);
        last_t = s.t;
    }
    CHECK(r.stats.arrived >= r.stats.departed);
}

TEST_CASE("identical seeds give identical traces", "[packet][property]") {
    auto cfg = small_link(1.0, 0.95, 3000.0);
    cfg.seed = 99;
    const auto x = rcp::run(cfg);
    const auto y = rcp::run(cfg);
    REQUIRE(x.samples.size() == y.samples.size());
    for (std::size_t i = 0; i < x.samples.size(); ++i) {
        CHECK(x.samples[i].queue == y.samples[i].queue);
        CHECK(x.samples[i].router_rate == y.samples[i].router_rate);
        CHECK(x.samples[i].arrivals_per_ms == y.samples[i].arrivals_per_ms);
    }
    cfg.seed = 100;
    const auto z = rcp::run(cfg);
    CHECK(z.stats.arrived != x.stats.arrived);
}

TEST_CASE("stable regime tracks the fluid equilibrium", "[packet]") {
    const auto r = rcp::run(small_link(0.2, 0.95, 20000.0));
    CHECK_THAT(r.stats.mean_utilization, WithinAbs(0.95, 0.05));
    CHECK_THAT(r.stats.mean_arrival_rate, WithinRel(95.0, 0.05));
    CHECK(r.stats.rate_clamps == 0);
    CHECK_FALSE(r.stats.overflow);
}

TEST_CASE("swapping RTT classes leaves the statistics unchanged", "[packet][property]") {
    auto cfg = small_link(0.2, 0.95, 20000.0);
    const auto base = rcp::run(cfg);
    auto rtts = cfg.source_rtts();
    for (double& r : rtts) r = r == cfg.protocol.tau1 ? cfg.protocol.tau2 : cfg.protocol.tau1;
    cfg.rtts = rtts;
    const auto swapped = rcp::run(cfg);
    CHECK_THAT(swapped.stats.mean_utilization, WithinRel(base.stats.mean_utilization, 0.02));
    CHECK_THAT(swapped.stats.mean_arrival_rate, WithinRel(base.stats.mean_arrival_rate, 0.02));
}

TEST_CASE("default RTT split", "[packet]") {
    rcp::NetworkConfig cfg;
    cfg.n_sources = 5;
    cfg.protocol.tau1 = 3.0;
    cfg.protocol.tau2 = 8.0;
    const auto r = cfg.source_rtts();
    CHECK(std::count(r.begin(), r.end(), 3.0) == 3);
    CHECK(std::count(r.begin(), r.end(), 8.0) == 2);
    CHECK(cfg.max_rtt() == 8.0);
    CHECK(cfg.interval() == 5.5);
}

TEST_CASE("rate clamping and overflow", "[packet]") {
    auto cfg = small_link(1.0, 0.95, 4000.0);
    cfg.initial_rate = 20.0;
    const auto r = rcp::run(cfg);
    CHECK(r.stats.rate_clamps > 0);
    const double r_min = 1e-6 * cfg.protocol.capacity / cfg.n_sources;
    for (const auto& s : r.samples) CHECK(s.router_rate >= r_min);

    cfg.max_queue = 500.0;
    const auto o = rcp::run(cfg);
    CHECK(o.stats.overflow);
    CHECK(o.samples.back().queue > 500.0);
    CHECK(o.samples.back().t < cfg.duration);
}

TEST_CASE("oscillation metrics", "[packet]") {
    std::vector<double> t, flat, wave;
    for (int i = 0; i <= 1000; ++i) {
        t.push_back(i * 10.0);
        flat.push_back(7.0);
        wave.push_back(i < 500 ? 0.0 : 5.0 + 2.0 * std::sin(i * 0.3));
    }
    const auto m = rcp::oscillation_metrics(t, flat, 100.0);
    CHECK(m.peak_to_peak == 0.0);
    CHECK(m.mean == 7.0);
    const auto w = rcp::oscillation_metrics(t, wave, 100.0);
    CHECK_THAT(w.peak_to_peak, WithinAbs(4.0, 0.01));
    CHECK_THAT(w.mean, WithinAbs(5.0, 0.05));
    CHECK_THROWS_AS(rcp::oscillation_metrics(t, flat, 1000.0), rcp::DomainError);
}

TEST_CASE("network configuration validation", "[packet]") {
    auto cfg = small_link(0.2, 0.95, 1000.0);
    cfg.n_sources = 0;
    CHECK_THROWS_AS(rcp::run(cfg), rcp::DomainError);
    cfg = small_link(0.2, 0.95, 1000.0);
    cfg.rtts = {10.0, 20.0};
    CHECK_THROWS_AS(rcp::run(cfg), rcp::DomainError);
    cfg = small_link(0.2, 0.95, 0.0);
    CHECK_THROWS_AS(rcp::run(cfg), rcp::DomainError);
    cfg = small_link(0.2, 0.95, 1000.0);
    cfg.update_interval = -1.0;
    CHECK_THROWS_AS(rcp::run(cfg), rcp::DomainError);
}
