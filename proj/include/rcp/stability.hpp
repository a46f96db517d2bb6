#pragma once

// Linear stability of the equilibrium: the characteristic equation
//   lambda + kappa * a_tilde * (exp(-lambda tau1) + exp(-lambda tau2)) = 0,
// its first imaginary-axis crossing, and a grid-seeded Newton root scan used
// as an independent check on the closed-form boundary.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "rcp/errors.hpp"
#include "rcp/model.hpp"

namespace rcp {

using Complex = std::complex<double>;

struct HopfFrequency {
    double omega0 = 0.0; ///< pi / (tau1 + tau2), rad/ms
    double theta = 0.0;  ///< omega0 * tau1, in (0, pi)
};

struct HopfPoint {
    double omega0 = 0.0;
    double theta = 0.0;
    double kappa_c = 0.0;
    double alpha_prime = 0.0; ///< Re(d lambda / d kappa) at kappa_c
};

struct StabilityVerdict {
    bool stable = false;
    /// kappa a_tilde (tau1 + tau2) cos(pi (tau1 - tau2) / (2 (tau1 + tau2))) - pi/2
    double margin = 0.0;
};

inline HopfFrequency hopf_frequency(double tau1, double tau2) {
    detail::require(tau1 > 0.0 && tau2 > 0.0, "delays must be > 0");
    const double sum = tau1 + tau2;
    return {std::numbers::pi / sum, std::numbers::pi * tau1 / sum};
}

/// cos(omega0 (tau1 - tau2) / 2); strictly positive for positive delays.
inline double delay_asymmetry_factor(double tau1, double tau2) {
    return std::cos(std::numbers::pi * (tau1 - tau2) / (2.0 * (tau1 + tau2)));
}

inline StabilityVerdict is_stable(const ModelParams& p) {
    const Equilibrium eq = equilibrium(p);
    const double lhs = p.kappa * eq.a_tilde * p.delay_sum() * delay_asymmetry_factor(p.tau1, p.tau2);
    const double margin = lhs - std::numbers::pi / 2.0;
    return {margin < 0.0, margin};
}

/// Stability-chart condition at kappa = 1 and equal delays for the queue-feedback
/// controller: a (8 + b - sqrt(b^2 + 8b)) / 4 < pi/2, where the bracket equals
/// 1 + rho*(b). b = 0 is the limit rho* -> 1. Points on the boundary count as stable.
inline StabilityVerdict chart_condition(double a, double b) {
    detail::require(std::isfinite(a) && a > 0.0, "parameter a must be > 0");
    detail::require(std::isfinite(b) && b >= 0.0, "parameter b must be >= 0");
    const double bracket = (8.0 + b - std::sqrt(b * b + 8.0 * b)) / 4.0;
    const double margin = a * bracket - std::numbers::pi / 2.0;
    return {margin <= 0.0, margin};
}

/// Largest stable a on the chart for a given b: pi / (2 (1 + rho*(b))).
inline double chart_boundary(double b) {
    detail::require(std::isfinite(b) && b >= 0.0, "parameter b must be >= 0");
    return std::numbers::pi / 2.0 / ((8.0 + b - std::sqrt(b * b + 8.0 * b)) / 4.0);
}

/// lambda + gain * (exp(-lambda tau1) + exp(-lambda tau2)), with gain = kappa * a_tilde.
/// Delays may be zero here, which recovers the undelayed root lambda = -2 gain.
struct CharacteristicFunction {
    double gain = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;

    static CharacteristicFunction from(const ModelParams& p) {
        return {p.kappa * equilibrium(p).a_tilde, p.tau1, p.tau2};
    }

    [[nodiscard]] Complex operator()(Complex lambda) const {
        return lambda + gain * (std::exp(-lambda * tau1) + std::exp(-lambda * tau2));
    }

    [[nodiscard]] Complex derivative(Complex lambda) const {
        return 1.0 - gain * (tau1 * std::exp(-lambda * tau1) + tau2 * std::exp(-lambda * tau2));
    }
};

inline Complex characteristic_residual(Complex lambda, const ModelParams& p) {
    return CharacteristicFunction::from(p)(lambda);
}

/// Re(d lambda / d kappa) at the Hopf point. Requires params.kappa == hp.kappa_c.
inline double transversality(const ModelParams& p, const HopfPoint& hp) {
    detail::require(std::abs(p.kappa - hp.kappa_c) <= 1e-10 * hp.kappa_c,
                    "transversality must be evaluated at kappa = kappa_c");
    const Equilibrium eq = equilibrium(p);
    const double s = std::sin(hp.theta);
    const double big_a = 1.0 - hp.omega0 * std::cos(hp.theta) * (p.tau1 - p.tau2) / (2.0 * s);
    const double big_b = std::numbers::pi / 2.0;
    return std::numbers::pi * eq.a_tilde * s / (big_a * big_a + big_b * big_b);
}

inline HopfPoint critical_kappa(const ModelParams& p) {
    const Equilibrium eq = equilibrium(p);
    const HopfFrequency hf = hopf_frequency(p.tau1, p.tau2);
    HopfPoint hp;
    hp.omega0 = hf.omega0;
    hp.theta = hf.theta;
    hp.kappa_c = std::numbers::pi /
                 (2.0 * eq.a_tilde * p.delay_sum() * std::cos(hf.omega0 * (p.tau1 - p.tau2) / 2.0));
    hp.alpha_prime = transversality(p.with_kappa(hp.kappa_c), hp);
    return hp;
}

struct SearchBox {
    double re_min = 0.0;
    double re_max = 0.0;
    double im_min = 0.0;
    double im_max = 0.0;

    [[nodiscard]] bool contains(Complex z, double slack = 0.0) const {
        return z.real() >= re_min - slack && z.real() <= re_max + slack &&
               z.imag() >= im_min - slack && z.imag() <= im_max + slack;
    }
};

/// Re in [-omega0, omega0], Im in [0, 3 omega0].
inline SearchBox default_search_box(const ModelParams& p) {
    const double w0 = hopf_frequency(p.tau1, p.tau2).omega0;
    return {-w0, w0, 0.0, 3.0 * w0};
}

/// All roots of the characteristic function inside `box` (upper half plane;
/// conjugates implied), sorted by decreasing real part.
inline std::vector<Complex> rightmost_root_scan(const ModelParams& p, const SearchBox& box) {
    detail::require(box.re_max > box.re_min && box.im_max > box.im_min, "empty search box");
    const CharacteristicFunction f = CharacteristicFunction::from(p);
    const double sum = p.delay_sum();
    const double w0 = std::numbers::pi / sum;
    const double spacing = std::min(0.1 / sum, w0 / 10.0);
    const double dedup_tol = 1e-8;

    const auto n_re = static_cast<int>(std::ceil((box.re_max - box.re_min) / spacing));
    const auto n_im = static_cast<int>(std::ceil((box.im_max - box.im_min) / spacing));

    std::vector<Complex> roots;
    auto known = [&](Complex z) {
        return std::any_of(roots.begin(), roots.end(), [&](Complex r) {
            return std::abs(r - z) < dedup_tol * std::max(1.0, std::abs(z));
        });
    };

    for (int i = 0; i <= n_re; ++i) {
        for (int j = 0; j <= n_im; ++j) {
            Complex z(box.re_min + (box.re_max - box.re_min) * i / n_re,
                      box.im_min + (box.im_max - box.im_min) * j / n_im);
            bool converged = false;
            for (int it = 0; it < 60; ++it) {
                const Complex step = f(z) / f.derivative(z);
                z -= step;
                if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) break;
                if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(z))) {
                    converged = true;
                    break;
                }
            }
            if (!converged) continue;
            if (std::abs(f(z)) > 1e-9 * std::max(1.0, f.gain)) continue;
            if (z.imag() < 0.0) z = std::conj(z);
            if (std::abs(z.imag()) < 1e-12) z = {z.real(), 0.0};
            if (!box.contains(z, 1e-12)) continue;
            if (!known(z)) roots.push_back(z);
        }
    }

    std::sort(roots.begin(), roots.end(), [](Complex x, Complex y) { return x.real() > y.real(); });
    if (roots.empty() && !is_stable(p).stable) {
        throw OracleDisagreement("root scan found no roots but the stability boundary reports instability");
    }
    return roots;
}

} // namespace rcp
