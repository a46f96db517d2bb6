#pragma once

// Fixed-step RK4 integration of the nonlinear two-delay fluid model, with
// delayed values read from the stored solution by cubic Lagrange
// interpolation, plus limit-cycle amplitude/period extraction and kappa sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rcp/errors.hpp"
#include "rcp/model.hpp"

namespace rcp {

enum class OutcomeKind { ConvergedToEquilibrium, LimitCycle, Escaped, Inconclusive };

inline const char* to_string(OutcomeKind k) {
    switch (k) {
    case OutcomeKind::ConvergedToEquilibrium: return "converged";
    case OutcomeKind::LimitCycle: return "limit_cycle";
    case OutcomeKind::Escaped: return "escaped";
    case OutcomeKind::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct SimConfig {
    ModelParams params;
    double t_end = 0.0; ///< ms; must cover at least 40 (tau1 + tau2)
    double dt = 0.0;    ///< ms; 0 selects min(tau1, tau2) / 50
    /// Constant history on [-max(tau1, tau2), 0]; defaults to R* (1 + 0.01).
    std::optional<double> history;
    double transient_fraction = 0.8;
    double escape_upper = 10.0; ///< escape when R > escape_upper * C
    double escape_lower = 1e-9; ///< escape when R < escape_lower * C
    std::size_t record_stride = 1;

    [[nodiscard]] double step() const {
        return dt > 0.0 ? dt : std::min(params.tau1, params.tau2) / 50.0;
    }

    void validate() const {
        params.validate();
        const double h = step();
        detail::require(h <= std::min(params.tau1, params.tau2) / 50.0 * (1.0 + 1e-12),
                        "dt must not exceed min(tau1, tau2) / 50");
        detail::require(t_end >= 40.0 * params.delay_sum() * (1.0 - 1e-12),
                        "t_end must be at least 40 (tau1 + tau2)");
        detail::require(transient_fraction >= 0.0 && transient_fraction < 1.0,
                        "transient_fraction must lie in [0, 1)");
        detail::require(escape_upper > 0.0 && escape_lower >= 0.0, "escape bounds must be positive");
        detail::require(record_stride >= 1, "record_stride must be >= 1");
        if (history) detail::require(std::isfinite(*history) && *history > 0.0, "history must be > 0");
    }
};

struct CycleMetrics {
    double amplitude = 0.0;      ///< mean peak-to-trough
    std::optional<double> period;
    std::size_t oscillations = 0;
    double drift = 0.0;          ///< (last - first) peak-to-trough, relative to the mean
    bool inconclusive = false;
};

struct TraceSeries {
    std::vector<double> times;
    std::vector<double> rates;
    std::vector<double> queue; ///< p(y(t)); filled only with queue feedback
    double equilibrium_rate = 0.0;
    OutcomeKind outcome = OutcomeKind::Inconclusive;
    double amplitude = 0.0;
    std::optional<double> period;
    std::optional<double> escape_time;
    bool saturated = false; ///< y(t) reached C and the queue term was clamped
};

namespace detail {

struct Extremum {
    double time;
    double value;
};

// Parabolic refinement through three equally spaced samples.
inline Extremum refine(double t, double h, double left, double mid, double right) {
    const double curv = left - 2.0 * mid + right;
    if (curv == 0.0) return {t, mid};
    const double shift = 0.5 * (left - right) / curv;
    return {t + shift * h, mid - 0.25 * (left - right) * shift};
}

} // namespace detail

/// Amplitude and period over the trace after the transient. A trace whose
/// variation stays below 1e-4 R* is reported as (0, none).
inline CycleMetrics extract_cycle_metrics(const TraceSeries& trace, double transient_fraction,
                                          double settle_tolerance = 0.02) {
    if (trace.outcome == OutcomeKind::Escaped) throw DomainError("cannot extract cycle metrics from an escaped trace");
    detail::require(trace.times.size() == trace.rates.size() && trace.times.size() >= 3, "trace too short");
    detail::require(transient_fraction >= 0.0 && transient_fraction < 1.0, "transient_fraction must lie in [0, 1)");

    const double t0 = trace.times.front();
    const double cut = t0 + transient_fraction * (trace.times.back() - t0);
    const auto first = static_cast<std::size_t>(
        std::lower_bound(trace.times.begin(), trace.times.end(), cut) - trace.times.begin());
    const std::size_t n = trace.rates.size();

    CycleMetrics m;
    const auto [lo, hi] = std::minmax_element(trace.rates.begin() + static_cast<std::ptrdiff_t>(first), trace.rates.end());
    const double variation = *hi - *lo;
    if (variation < 1e-4 * trace.equilibrium_rate) return m;

    const double h = n > 1 ? trace.times[1] - trace.times[0] : 0.0;
    std::vector<detail::Extremum> peaks, troughs;
    for (std::size_t i = std::max<std::size_t>(first, 1); i + 1 < n; ++i) {
        const double l = trace.rates[i - 1], c = trace.rates[i], r = trace.rates[i + 1];
        if (c > l && c >= r) peaks.push_back(detail::refine(trace.times[i], h, l, c, r));
        else if (c < l && c <= r) troughs.push_back(detail::refine(trace.times[i], h, l, c, r));
    }

    std::vector<double> swings;
    std::size_t j = 0;
    for (const auto& pk : peaks) {
        while (j < troughs.size() && troughs[j].time <= pk.time) ++j;
        if (j == troughs.size()) break;
        swings.push_back(pk.value - troughs[j].value);
    }

    if (peaks.size() < 5 || swings.size() < 4) {
        m.amplitude = variation;
        m.oscillations = swings.size();
        m.inconclusive = true;
        return m;
    }

    double total = 0.0;
    for (double s : swings) total += s;
    m.amplitude = total / static_cast<double>(swings.size());
    m.period = (peaks.back().time - peaks.front().time) / static_cast<double>(peaks.size() - 1);
    m.oscillations = swings.size();
    m.drift = (swings.back() - swings.front()) / m.amplitude;
    m.inconclusive = std::abs(m.drift) > settle_tolerance;
    return m;
}

inline TraceSeries integrate(const SimConfig& config) {
    config.validate();
    const ModelParams& p = config.params;
    const Equilibrium eq = equilibrium(p);
    const double h = config.step();
    const double history = config.history.value_or(eq.r_star * 1.01);
    const auto steps = static_cast<std::size_t>(std::ceil(config.t_end / h - 1e-9));
    const double lag1 = p.tau1 / h;
    const double lag2 = p.tau2 / h;
    const double upper = config.escape_upper * p.capacity;
    const double lower = config.escape_lower * p.capacity;
    const double y_cap = p.capacity * (1.0 - 1e-9);

    std::vector<double> x;
    x.reserve(steps + 1);
    x.push_back(history);

    // Solution at fractional step index s (s <= current index - 48).
    auto at = [&](double s) {
        if (s <= 0.0) return history;
        const double base = std::floor(s);
        const double f = s - base;
        const auto i = static_cast<std::ptrdiff_t>(base);
        auto v = [&](std::ptrdiff_t k) { return k < 0 ? history : x[static_cast<std::size_t>(k)]; };
        const double vm = v(i - 1), v0 = v(i), v1 = v(i + 1), v2 = v(i + 2);
        return vm * (-f * (f - 1.0) * (f - 2.0) / 6.0) + v0 * ((f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0) +
               v1 * (-(f + 1.0) * f * (f - 2.0) / 2.0) + v2 * ((f + 1.0) * f * (f - 1.0) / 6.0);
    };

    TraceSeries trace;
    trace.equilibrium_rate = eq.r_star;
    const bool queued = p.has_queue_feedback();
    const double target = p.target_capacity();
    const double gain = p.kappa * p.a / (target * p.mean_rtt());

    auto field = [&](double s, double r) {
        const double y = at(s - lag1) + at(s - lag2);
        double drive = target - y;
        if (queued) {
            double yq = y;
            if (yq >= y_cap) {
                yq = y_cap;
                trace.saturated = true;
            }
            drive -= p.b * p.capacity * (std::max(yq, 0.0) * p.sigma_sq / (2.0 * (p.capacity - yq)));
        }
        return gain * r * drive;
    };

    auto record = [&](std::size_t n) {
        trace.times.push_back(static_cast<double>(n) * h);
        trace.rates.push_back(x[n]);
        if (queued) {
            const double y = std::clamp(at(static_cast<double>(n) - lag1) + at(static_cast<double>(n) - lag2), 0.0, y_cap);
            trace.queue.push_back(y * p.sigma_sq / (2.0 * (p.capacity - y)));
        }
    };

    const std::size_t expected = steps / config.record_stride + 2;
    trace.times.reserve(expected);
    trace.rates.reserve(expected);
    if (queued) trace.queue.reserve(expected);
    record(0);

    for (std::size_t n = 0; n < steps; ++n) {
        const double s = static_cast<double>(n);
        const double r = x[n];
        const double k1 = field(s, r);
        const double k2 = field(s + 0.5, r + 0.5 * h * k1);
        const double k3 = field(s + 0.5, r + 0.5 * h * k2);
        const double k4 = field(s + 1.0, r + h * k3);
        const double next = r + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(next)) {
            std::ostringstream msg;
            msg << "non-finite state at step " << n + 1 << " (t = " << (s + 1.0) * h << ", dt = " << h
                << ", R = " << r << ", stages = " << k1 << ", " << k2 << ", " << k3 << ", " << k4 << ")";
            throw NumericalError(msg.str());
        }
        x.push_back(next);
        if (next > upper || next < lower) {
            record(n + 1);
            trace.escape_time = static_cast<double>(n + 1) * h;
            trace.outcome = OutcomeKind::Escaped;
            return trace;
        }
        if ((n + 1) % config.record_stride == 0 || n + 1 == steps) record(n + 1);
    }

    const CycleMetrics m = extract_cycle_metrics(trace, config.transient_fraction);
    trace.amplitude = m.amplitude;
    trace.period = m.period;
    if (m.amplitude == 0.0) trace.outcome = OutcomeKind::ConvergedToEquilibrium;
    else if (m.inconclusive) trace.outcome = OutcomeKind::Inconclusive;
    else trace.outcome = OutcomeKind::LimitCycle;
    return trace;
}

struct SweepOptions {
    double t_end = 0.0;           ///< 0 selects 400 (tau1 + tau2)
    double dt = 0.0;              ///< 0 selects min(tau1, tau2) / 50
    double history_offset = 0.01; ///< history = R* (1 + offset)
    int max_extensions = 3;       ///< doublings of t_end on an inconclusive run
    bool parallel = true;
};

struct SweepPoint {
    double kappa = 0.0;
    double amplitude = 0.0;
    std::optional<double> period;
    OutcomeKind outcome = OutcomeKind::Inconclusive;
    double t_end_used = 0.0;
};

/// Integrates one kappa, doubling t_end while the cycle has not settled.
inline SweepPoint sweep_point(const ModelParams& params, double kappa, const SweepOptions& opt) {
    SimConfig cfg;
    cfg.params = params.with_kappa(kappa);
    cfg.dt = opt.dt;
    cfg.t_end = opt.t_end > 0.0 ? opt.t_end : 400.0 * params.delay_sum();
    cfg.history = equilibrium(cfg.params).r_star * (1.0 + opt.history_offset);
    // Roughly 50 samples per onset period 2 (tau1 + tau2).
    cfg.record_stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(params.delay_sum() / 25.0 / cfg.step()));

    SweepPoint pt;
    pt.kappa = kappa;
    for (int attempt = 0;; ++attempt) {
        const TraceSeries tr = integrate(cfg);
        pt.amplitude = tr.amplitude;
        pt.period = tr.period;
        pt.outcome = tr.outcome;
        pt.t_end_used = cfg.t_end;
        if (tr.outcome != OutcomeKind::Inconclusive || attempt >= opt.max_extensions) break;
        cfg.t_end *= 2.0;
    }
    return pt;
}

inline std::vector<SweepPoint> amplitude_sweep(const ModelParams& params, double kappa_min, double kappa_max,
                                               std::size_t n_points, const SweepOptions& opt = {}) {
    params.validate();
    detail::require(n_points >= 1, "n_points must be >= 1");
    detail::require(kappa_min > 0.0 && kappa_max >= kappa_min, "invalid kappa range");
    std::vector<double> kappas(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        kappas[i] = n_points == 1 ? kappa_min
                                  : kappa_min + (kappa_max - kappa_min) * static_cast<double>(i) /
                                                    static_cast<double>(n_points - 1);
    }

    std::vector<SweepPoint> out(n_points);
    if (!opt.parallel || n_points == 1) {
        for (std::size_t i = 0; i < n_points; ++i) out[i] = sweep_point(params, kappas[i], opt);
        return out;
    }
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t start = 0; start < n_points; start += workers) {
        std::vector<std::future<SweepPoint>> batch;
        for (std::size_t i = start; i < std::min(n_points, start + workers); ++i) {
            batch.push_back(std::async(std::launch::async, sweep_point, std::cref(params), kappas[i], std::cref(opt)));
        }
        for (std::size_t k = 0; k < batch.size(); ++k) out[start + k] = batch[k].get();
    }
    return out;
}

} // namespace rcp
