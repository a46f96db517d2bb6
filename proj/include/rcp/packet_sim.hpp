#pragma once

// Discrete-event simulation of one RCP bottleneck: Poisson sources split into
// RTT classes, a FIFO queue served at a deterministic rate C, and a router that
// periodically recomputes the advertised per-flow rate from measured load and
// queue occupancy. Times are ms, rates packets/ms, packets have unit size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "rcp/errors.hpp"
#include "rcp/model.hpp"

namespace rcp {

struct NetworkConfig {
    ModelParams protocol;          ///< a, b, gamma, kappa, capacity; tau1/tau2 define the default RTT split
    int n_sources = 100;
    std::vector<double> rtts;      ///< per-source RTT; empty assigns tau1 to the first half, tau2 to the rest
    double update_interval = 0.0;  ///< router period; 0 selects (tau1 + tau2) / 2
    double duration = 0.0;         ///< ms
    std::uint64_t seed = 1;
    double max_queue = 1e6;        ///< overflow abort threshold, packets
    std::optional<double> initial_rate; ///< per-source; defaults to the fluid equilibrium share

    [[nodiscard]] double interval() const {
        return update_interval > 0.0 ? update_interval : protocol.mean_rtt();
    }

    [[nodiscard]] std::vector<double> source_rtts() const {
        if (!rtts.empty()) return rtts;
        std::vector<double> out(static_cast<std::size_t>(n_sources));
        const int first = (n_sources + 1) / 2;
        for (int i = 0; i < n_sources; ++i) out[static_cast<std::size_t>(i)] = i < first ? protocol.tau1 : protocol.tau2;
        return out;
    }

    [[nodiscard]] double max_rtt() const {
        const auto r = source_rtts();
        return *std::max_element(r.begin(), r.end());
    }

    void validate() const {
        protocol.validate();
        detail::require(n_sources >= 1, "n_sources must be >= 1");
        detail::require(update_interval >= 0.0 && std::isfinite(update_interval), "update_interval must be > 0");
        detail::require(std::isfinite(duration) && duration > 0.0, "duration must be > 0");
        detail::require(max_queue > 0.0, "max_queue must be > 0");
        if (!rtts.empty()) {
            detail::require(rtts.size() == static_cast<std::size_t>(n_sources), "rtts must list one RTT per source");
            for (double r : rtts) detail::require(std::isfinite(r) && r > 0.0, "RTTs must be > 0");
        }
        if (initial_rate) detail::require(std::isfinite(*initial_rate) && *initial_rate > 0.0, "initial_rate must be > 0");
    }
};

struct RouterState {
    double rate = 0.0;               ///< advertised per-flow rate R
    std::uint64_t measured_arrivals = 0; ///< since the last update
    std::uint64_t queue = 0;         ///< packets in system, including the one in service
    double last_update_time = 0.0;
};

enum class EventType : int { ServiceCompletion = 0, PacketArrival = 1, RateUpdate = 2, FeedbackDelivery = 3 };

struct Event {
    double time = 0.0;
    EventType type = EventType::RateUpdate;
    std::uint64_t seq = 0;
    int source = -1;
    double rate = 0.0;
    std::uint64_t generation = 0;
};

/// Min-heap on (time, type priority, insertion order).
class EventQueue {
public:
    void push(Event e) {
        e.seq = next_seq_++;
        heap_.push(e);
    }
    [[nodiscard]] bool empty() const { return heap_.empty(); }
    [[nodiscard]] std::size_t size() const { return heap_.size(); }
    Event pop() {
        Event e = heap_.top();
        heap_.pop();
        return e;
    }

private:
    struct Later {
        bool operator()(const Event& x, const Event& y) const {
            if (x.time != y.time) return x.time > y.time;
            if (x.type != y.type) return static_cast<int>(x.type) > static_cast<int>(y.type);
            return x.seq > y.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

struct PacketSample {
    double t = 0.0;
    double queue = 0.0;
    double router_rate = 0.0;
    double arrivals_per_ms = 0.0;
    std::uint64_t arrived = 0;
    std::uint64_t departed = 0;
};

struct UtilizationStats {
    double mean_utilization = 0.0; ///< departures / (C * time) over the final half
    double mean_arrival_rate = 0.0; ///< packets/ms over the final half
    std::uint64_t arrived = 0;
    std::uint64_t departed = 0;
    std::uint64_t rate_clamps = 0;
    std::uint64_t events = 0;
    bool overflow = false;
};

struct PacketRun {
    std::vector<PacketSample> samples;
    UtilizationStats stats;
    double max_rtt = 0.0;

    [[nodiscard]] std::vector<double> times() const { return column(&PacketSample::t); }
    [[nodiscard]] std::vector<double> queue_trace() const { return column(&PacketSample::queue); }
    [[nodiscard]] std::vector<double> rate_trace() const { return column(&PacketSample::router_rate); }

private:
    [[nodiscard]] std::vector<double> column(double PacketSample::*field) const {
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.*field);
        return out;
    }
};

inline PacketRun run(const NetworkConfig& cfg) {
    cfg.validate();
    const ModelParams& p = cfg.protocol;
    const auto n = static_cast<std::size_t>(cfg.n_sources);
    const std::vector<double> rtts = cfg.source_rtts();
    const double delta = cfg.interval();
    const double c = p.capacity;
    const double service = 1.0 / c;
    const double target = p.target_capacity();
    const double step_gain = p.kappa * p.a * delta / (target * p.mean_rtt());
    const double r_min = 1e-6 * c / static_cast<double>(n);
    const double r0 = cfg.initial_rate.value_or(2.0 * equilibrium(p).r_star / static_cast<double>(n));

    std::vector<std::mt19937_64> rng;
    rng.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(i)};
        rng.emplace_back(seq);
    }
    std::vector<double> source_rate(n, r0);
    std::vector<std::uint64_t> generation(n, 0);

    PacketRun out;
    out.max_rtt = *std::max_element(rtts.begin(), rtts.end());
    RouterState router;
    router.rate = r0;
    EventQueue events;
    bool busy = false;
    bool stop = false;

    auto schedule_arrival = [&](std::size_t i, double now) {
        std::exponential_distribution<double> gap(source_rate[i]);
        events.push({now + gap(rng[i]), EventType::PacketArrival, 0, static_cast<int>(i), 0.0, generation[i]});
    };
    for (std::size_t i = 0; i < n; ++i) schedule_arrival(i, 0.0);
    events.push({delta, EventType::RateUpdate});
    out.samples.push_back({0.0, 0.0, r0, 0.0, 0, 0});
    out.samples.reserve(static_cast<std::size_t>(cfg.duration / delta) + 2);

    while (!stop && !events.empty()) {
        const Event e = events.pop();
        if (e.time > cfg.duration) break;
        ++out.stats.events;
        switch (e.type) {
        case EventType::PacketArrival: {
            const auto i = static_cast<std::size_t>(e.source);
            if (e.generation != generation[i]) break;
            ++router.queue;
            ++router.measured_arrivals;
            ++out.stats.arrived;
            if (!busy) {
                busy = true;
                events.push({e.time + service, EventType::ServiceCompletion});
            }
            schedule_arrival(i, e.time);
            break;
        }
        case EventType::ServiceCompletion:
            --router.queue;
            ++out.stats.departed;
            if (router.queue > 0) events.push({e.time + service, EventType::ServiceCompletion});
            else busy = false;
            break;
        case EventType::RateUpdate: {
            const double elapsed = e.time - router.last_update_time;
            const double y_hat = static_cast<double>(router.measured_arrivals) / elapsed;
            const double q_hat = static_cast<double>(router.queue);
            out.samples.push_back({e.time, q_hat, router.rate, y_hat, out.stats.arrived, out.stats.departed});
            if (q_hat > cfg.max_queue) {
                out.stats.overflow = true;
                stop = true;
                break;
            }
            double drive = target - y_hat;
            if (p.has_queue_feedback()) drive -= p.b * c * q_hat;
            double next = router.rate * (1.0 + step_gain * drive);
            if (!(next >= r_min)) {
                next = r_min;
                ++out.stats.rate_clamps;
            }
            router.rate = next;
            router.measured_arrivals = 0;
            router.last_update_time = e.time;
            for (std::size_t i = 0; i < n; ++i) {
                events.push({e.time + rtts[i], EventType::FeedbackDelivery, 0, static_cast<int>(i), next});
            }
            events.push({e.time + delta, EventType::RateUpdate});
            break;
        }
        case EventType::FeedbackDelivery: {
            const auto i = static_cast<std::size_t>(e.source);
            source_rate[i] = e.rate;
            ++generation[i];
            schedule_arrival(i, e.time);
            break;
        }
        }
    }

    const double half = 0.5 * cfg.duration;
    const auto mid = std::find_if(out.samples.begin(), out.samples.end(), [&](const PacketSample& s) { return s.t >= half; });
    if (mid != out.samples.end() && out.samples.size() > 1) {
        const PacketSample& last = out.samples.back();
        const double span = last.t - mid->t;
        if (span > 0.0) {
            out.stats.mean_utilization = static_cast<double>(last.departed - mid->departed) / (c * span);
            out.stats.mean_arrival_rate = static_cast<double>(last.arrived - mid->arrived) / span;
        }
    }
    return out;
}

struct OscillationMetrics {
    double mean = 0.0;
    double peak = 0.0;
    double peak_to_peak = 0.0;
};

/// Metrics over the final half of a sampled trace spanning more than 10 max RTTs.
inline OscillationMetrics oscillation_metrics(const std::vector<double>& times, const std::vector<double>& values,
                                              double max_rtt) {
    detail::require(times.size() == values.size() && times.size() >= 2, "trace too short");
    detail::require(times.back() - times.front() > 10.0 * max_rtt, "trace must span more than 10 max RTTs");
    const double half = times.front() + 0.5 * (times.back() - times.front());
    const auto first = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), half) - times.begin());
    OscillationMetrics m;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double total = 0.0;
    for (std::size_t i = first; i < values.size(); ++i) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
        total += values[i];
    }
    m.mean = total / static_cast<double>(values.size() - first);
    m.peak = hi;
    m.peak_to_peak = hi - lo;
    return m;
}

inline OscillationMetrics queue_oscillation(const PacketRun& r) {
    return oscillation_metrics(r.times(), r.queue_trace(), r.max_rtt);
}

} // namespace rcp
