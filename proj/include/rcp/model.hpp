#pragma once

// Single-bottleneck RCP fluid model with two round-trip delay classes.
//
//   dR/dt = kappa * a R(t) / (C Tbar) * (C - y(t) - b C p(y(t))),    b > 0
//   dR/dt = kappa * a R(t) / (gamma C Tbar) * (gamma C - y(t)),      b = 0
//
// with y(t) = R(t - tau1) + R(t - tau2), Tbar = (tau1 + tau2) / 2 and p the
// stationary Brownian mean queue. Rates are packets/ms and delays ms.

#include <cmath>
#include <string>
#include <utility>

#include "rcp/errors.hpp"

namespace rcp {

struct ModelParams {
    double a = 1.0;          ///< protocol gain, > 0
    double b = 0.0;          ///< queue-feedback gain, >= 0 (0 disables the queue term)
    double gamma = 1.0;      ///< target utilisation, only used when b == 0
    double capacity = 100.0; ///< link capacity C, packets per ms
    double tau1 = 10.0;
    double tau2 = 10.0;
    double kappa = 1.0;      ///< exogenous bifurcation parameter
    double sigma_sq = 1.0;   ///< traffic variability of the Brownian queue model

    [[nodiscard]] bool has_queue_feedback() const noexcept { return b > 0.0; }
    [[nodiscard]] double delay_sum() const noexcept { return tau1 + tau2; }
    [[nodiscard]] double mean_rtt() const noexcept { return 0.5 * (tau1 + tau2); }

    /// Capacity the controller steers towards: C with queue feedback, gamma*C without.
    [[nodiscard]] double target_capacity() const noexcept {
        return has_queue_feedback() ? capacity : gamma * capacity;
    }

    [[nodiscard]] ModelParams with_kappa(double k) const {
        ModelParams p = *this;
        p.kappa = k;
        return p;
    }

    [[nodiscard]] ModelParams with_swapped_delays() const {
        ModelParams p = *this;
        std::swap(p.tau1, p.tau2);
        return p;
    }

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        detail::require(finite(a) && a > 0.0, "parameter a must be > 0");
        detail::require(finite(b) && b >= 0.0, "parameter b must be >= 0");
        detail::require(finite(gamma) && gamma > 0.0 && gamma <= 1.0, "parameter gamma must lie in (0, 1]");
        detail::require(finite(capacity) && capacity > 0.0, "capacity must be > 0");
        detail::require(finite(tau1) && tau1 > 0.0, "tau1 must be > 0");
        detail::require(finite(tau2) && tau2 > 0.0, "tau2 must be > 0");
        detail::require(finite(kappa) && kappa > 0.0, "kappa must be > 0");
        detail::require(finite(sigma_sq) && sigma_sq > 0.0, "sigma_sq must be > 0");
    }
};

struct Equilibrium {
    double r_star = 0.0;   ///< per-flow rate R*
    double rho_star = 0.0; ///< utilisation 2R*/C
    double a_tilde = 0.0;  ///< linearised gain, per ms
};

/// Stationary mean of a reflected Brownian workload: y sigma^2 / (2 (C - y)).
inline double mean_queue(double y, double capacity, double sigma_sq = 1.0) {
    detail::require(std::isfinite(y) && y >= 0.0, "arrival rate must be >= 0");
    detail::require(capacity > 0.0, "capacity must be > 0");
    if (y >= capacity) throw DomainError("queue model singular at or above capacity");
    return y * sigma_sq / (2.0 * (capacity - y));
}

inline Equilibrium equilibrium(const ModelParams& p) {
    p.validate();
    Equilibrium eq;
    const double sum = p.delay_sum();
    if (p.has_queue_feedback()) {
        // C(4 + b - sqrt(b^2 + 8b))/8, rationalised to avoid cancellation at large b.
        const double be = p.b * p.sigma_sq;
        eq.r_star = 2.0 * p.capacity / (4.0 + be + std::sqrt(be * be + 8.0 * be));
        eq.rho_star = 2.0 * eq.r_star / p.capacity;
        eq.a_tilde = p.a / sum * (1.0 + eq.rho_star);
    } else {
        eq.r_star = 0.5 * p.gamma * p.capacity;
        eq.rho_star = p.gamma;
        eq.a_tilde = p.a / sum;
    }
    return eq;
}

/// Queue-feedback gain b that places the equilibrium utilisation at rho_star.
inline double rho_to_b(double rho_star, double sigma_sq = 1.0) {
    detail::require(std::isfinite(rho_star) && rho_star > 0.0 && rho_star < 1.0,
                    "utilisation must lie in (0, 1)");
    detail::require(sigma_sq > 0.0, "sigma_sq must be > 0");
    // Equilibrium condition 1 - rho = b sigma^2 rho / (2 (1 - rho)).
    const double gap = 1.0 - rho_star;
    return 2.0 * gap * gap / (rho_star * sigma_sq);
}

/// Right-hand side f(x, y, z) of dx/dt = kappa f with x = R(t), y = R(t - tau1),
/// z = R(t - tau2). Throws DomainError when the queue term is evaluated at or above C.
inline double rate_field(const ModelParams& p, double x, double y, double z) {
    const double load = y + z;
    if (p.has_queue_feedback()) {
        const double scale = p.a * x / (p.capacity * p.mean_rtt());
        return scale * (p.capacity - load - p.b * p.capacity * mean_queue(load, p.capacity, p.sigma_sq));
    }
    const double target = p.gamma * p.capacity;
    return p.a * x / (target * p.mean_rtt()) * (target - load);
}

/// Taylor coefficients of f about (R*, R*, R*). Names follow the derivative
/// pattern: xi_xy multiplies u(t) u(t - tau1), xi_yyz multiplies
/// u(t - tau1)^2 u(t - tau2), and so on. Every coefficient not stored here
/// (xi_x, xi_xx, xi_xxy, xi_xxz, xi_xxx) is identically zero.
struct TaylorCoefficients {
    double xi_y = 0.0, xi_z = 0.0;
    double xi_xy = 0.0, xi_xz = 0.0;
    double xi_yy = 0.0, xi_yz = 0.0, xi_zz = 0.0;
    double xi_xyy = 0.0, xi_xyz = 0.0, xi_xzz = 0.0;
    double xi_yyz = 0.0, xi_yzz = 0.0;
    double xi_yyy = 0.0, xi_zzz = 0.0;
};

inline TaylorCoefficients taylor_coefficients(const ModelParams& p, const Equilibrium& eq) {
    p.validate();
    TaylorCoefficients t;
    const double sum = p.delay_sum();
    const double r = eq.r_star;

    if (!p.has_queue_feedback()) {
        t.xi_y = t.xi_z = -p.a / sum;
        t.xi_xy = t.xi_xz = -p.a / (r * sum);
        return t;
    }

    if (!(r > 0.0 && r < 0.5 * p.capacity)) {
        throw NumericalError("equilibrium rate outside (0, C/2) for a queue-feedback model");
    }
    const double be = p.b * p.sigma_sq;
    const double rho = 2.0 * r / p.capacity;
    const double bcr = be * p.capacity * r;

    t.xi_y = t.xi_z = -p.a * (1.0 + rho) / sum;
    t.xi_xy = t.xi_xz = t.xi_y / r;
    t.xi_yz = -2.0 * p.a / (sum * std::sqrt(bcr));
    t.xi_yy = t.xi_zz = 0.5 * t.xi_yz;
    t.xi_xyz = t.xi_yz / r;
    t.xi_xyy = t.xi_xzz = 0.5 * t.xi_xyz;
    t.xi_yyz = t.xi_yzz = -3.0 * p.a / (sum * bcr);
    t.xi_yyy = t.xi_zzz = -p.a / (sum * bcr);
    return t;
}

} // namespace rcp
