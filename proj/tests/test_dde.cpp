#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rcp/dde.hpp"
#include "rcp/stability.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using rcp::OutcomeKind;

namespace {

rcp::ModelParams make(double a, double b, double t1, double t2, double kappa) {
    rcp::ModelParams p;
    p.a = a;
    p.b = b;
    p.tau1 = t1;
    p.tau2 = t2;
    p.kappa = kappa;
    return p;
}

rcp::TraceSeries simulate(const rcp::ModelParams& p, double horizon_sums, double dt = 0.0) {
    rcp::SimConfig cfg;
    cfg.params = p;
    cfg.t_end = horizon_sums * p.delay_sum();
    cfg.dt = dt;
    return rcp::integrate(cfg);
}

rcp::TraceSeries synthetic(double r_star, double amplitude, double period, double t_end, double h) {
    rcp::TraceSeries tr;
    tr.equilibrium_rate = r_star;
    tr.outcome = OutcomeKind::LimitCycle;
    for (double t = 0.0; t <= t_end; t += h) {
        tr.times.push_back(t);
        tr.rates.push_back(r_star + amplitude * std::sin(2.0 * std::numbers::pi * t / period));
    }
    return tr;
}

} // namespace

TEST_CASE("cycle metrics of a synthetic sinusoid", "[dde]") {
    const auto tr = synthetic(45.0, 3.0, 160.0, 8000.0, 0.2);
    const auto m = rcp::extract_cycle_metrics(tr, 0.5);
    CHECK_FALSE(m.inconclusive);
    CHECK_THAT(m.amplitude, WithinAbs(6.0, 0.1));
    REQUIRE(m.period);
    CHECK_THAT(*m.period, WithinAbs(160.0, 1.0));
    CHECK(m.oscillations >= 5);
}

TEST_CASE("cycle metrics of a constant trace", "[dde]") {
    const auto tr = synthetic(45.0, 0.0, 160.0, 4000.0, 0.5);
    const auto m = rcp::extract_cycle_metrics(tr, 0.8);
    CHECK(m.amplitude == 0.0);
    CHECK_FALSE(m.period);
    CHECK_FALSE(m.inconclusive);
}

TEST_CASE("too few oscillations are inconclusive", "[dde]") {
    const auto tr = synthetic(45.0, 3.0, 1000.0, 4000.0, 0.5);
    const auto m = rcp::extract_cycle_metrics(tr, 0.5);
    CHECK(m.inconclusive);
}

TEST_CASE("metrics refuse escaped traces", "[dde]") {
    auto tr = synthetic(45.0, 3.0, 160.0, 4000.0, 0.5);
    tr.outcome = OutcomeKind::Escaped;
    CHECK_THROWS_AS(rcp::extract_cycle_metrics(tr, 0.8), rcp::DomainError);
}

TEST_CASE("supercritical reference set", "[dde]") {
    const auto below = simulate(make(2.16, 0.0222, 10, 70, 0.95), 800.0);
    CHECK(below.outcome == OutcomeKind::ConvergedToEquilibrium);
    CHECK_THAT(below.rates.back(), WithinAbs(45.0, 0.5));

    const auto above = simulate(make(2.16, 0.0222, 10, 70, 1.05), 400.0);
    CHECK(above.outcome == OutcomeKind::LimitCycle);
    REQUIRE(above.period);
    CHECK_THAT(*above.period, WithinAbs(160.0, 8.0));
    CHECK(above.amplitude > 1.0);
    CHECK_FALSE(above.saturated);
    CHECK(*std::min_element(above.rates.begin(), above.rates.end()) > 0.0);
    CHECK(above.queue.size() == above.times.size());
}

TEST_CASE("subcritical sets escape above kappa_c", "[dde]") {
    for (auto p : {make(0.87, 0.0222, 10, 15, 1.05), make(0.95, 0.0222, 10, 20, 1.05)}) {
        const auto tr = simulate(p, 100.0);
        CHECK(tr.outcome == OutcomeKind::Escaped);
        REQUIRE(tr.escape_time);
        CHECK(*tr.escape_time < 100.0 * p.delay_sum());
        // Rates stay positive until the step that crosses an escape bound.
        for (std::size_t i = 0; i + 1 < tr.rates.size(); ++i) CHECK(tr.rates[i] > 0.0);
    }
}

TEST_CASE("convergence well below the stability boundary", "[dde][property]") {
    for (auto base : {make(1.17, 0.736, 10, 20, 1.0), make(0.3, 0.0, 25, 60, 1.0), make(2.16, 0.0222, 10, 70, 1.0)}) {
        // margin < -0.05 in units of the stability condition
        const double kc = rcp::critical_kappa(base).kappa_c;
        const auto p = base.with_kappa(kc * (1.0 - 0.08 / (std::numbers::pi / 2.0)));
        REQUIRE(rcp::is_stable(p).margin < -0.05);
        const auto tr = simulate(p, 600.0);
        const double r_star = rcp::equilibrium(p).r_star;
        const auto tail = static_cast<std::ptrdiff_t>(0.9 * static_cast<double>(tr.rates.size()));
        double sup = 0.0;
        for (auto it = tr.rates.begin() + tail; it != tr.rates.end(); ++it) sup = std::max(sup, std::abs(*it - r_star));
        CHECK(sup < 1e-3 * r_star);
    }
}

TEST_CASE("step halving leaves the cycle amplitude unchanged", "[dde][property]") {
    const auto p = make(2.16, 0.0222, 10, 70, 1.05);
    const auto coarse = simulate(p, 400.0, 0.2);
    const auto fine = simulate(p, 400.0, 0.1);
    REQUIRE(coarse.outcome == OutcomeKind::LimitCycle);
    REQUIRE(fine.outcome == OutcomeKind::LimitCycle);
    CHECK_THAT(fine.amplitude, WithinRel(coarse.amplitude, 5e-3));
}

TEST_CASE("rate-only model settles at gamma C / 2", "[dde]") {
    auto p = make(1.0, 0.0, 10, 30, 0.8);
    p.gamma = 0.9;
    const auto tr = simulate(p, 200.0);
    CHECK(tr.outcome == OutcomeKind::ConvergedToEquilibrium);
    CHECK_THAT(tr.rates.back(), WithinAbs(45.0, 1e-3));
    CHECK(tr.queue.empty());
}

TEST_CASE("queue saturation is clamped and flagged", "[dde]") {
    rcp::SimConfig cfg;
    cfg.params = make(0.5, 0.0222, 10, 20, 0.5);
    cfg.t_end = 40.0 * cfg.params.delay_sum();
    cfg.history = 0.6 * cfg.params.capacity;
    const auto tr = rcp::integrate(cfg);
    CHECK(tr.saturated);
    for (double q : tr.queue) CHECK(std::isfinite(q));
}

TEST_CASE("non-finite states raise a numerical error", "[dde]") {
    rcp::SimConfig cfg;
    cfg.params = make(1.0, 0.0, 10, 20, 1.0);
    cfg.t_end = 40.0 * cfg.params.delay_sum();
    cfg.history = 1e300;
    CHECK_THROWS_AS(rcp::integrate(cfg), rcp::NumericalError);
}

TEST_CASE("configuration invariants", "[dde]") {
    rcp::SimConfig cfg;
    cfg.params = make(1.0, 0.1, 10, 20, 1.0);
    cfg.t_end = 39.0 * cfg.params.delay_sum();
    CHECK_THROWS_AS(rcp::integrate(cfg), rcp::DomainError);
    cfg.t_end = 40.0 * cfg.params.delay_sum();
    cfg.dt = 0.5;
    CHECK_THROWS_AS(rcp::integrate(cfg), rcp::DomainError);
    cfg.dt = 0.0;
    cfg.record_stride = 0;
    CHECK_THROWS_AS(rcp::integrate(cfg), rcp::DomainError);
}

TEST_CASE("amplitude sweeps", "[dde]") {
    rcp::SweepOptions opt;
    opt.t_end = 400.0 * 30.0;
    const auto sub = rcp::amplitude_sweep(make(0.95, 0.0222, 10, 20, 1.0), 0.95, 1.05, 3, opt);
    REQUIRE(sub.size() == 3);
    CHECK(sub[0].kappa == 0.95);
    CHECK(sub[0].amplitude == 0.0);
    CHECK(sub[1].outcome != OutcomeKind::LimitCycle);
    CHECK(sub[2].outcome == OutcomeKind::Escaped);

    opt.t_end = 400.0 * 80.0;
    opt.parallel = false;
    const auto super = rcp::amplitude_sweep(make(2.16, 0.0222, 10, 70, 1.0), 1.02, 1.05, 2, opt);
    CHECK(super[0].outcome == OutcomeKind::LimitCycle);
    CHECK(super[1].outcome == OutcomeKind::LimitCycle);
    CHECK(super[1].amplitude > super[0].amplitude);
    CHECK_THROWS_AS(rcp::amplitude_sweep(make(1, 0, 10, 10, 1), 1.1, 1.0, 3), rcp::DomainError);
}
