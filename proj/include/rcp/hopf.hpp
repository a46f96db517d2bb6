#pragma once

// Centre-manifold reduction at the first Hopf point and the resulting
// criticality of the bifurcation.
//
// The delay equation du/dt = kappa * (xi_y u(t-tau1) + xi_z u(t-tau2) + quadratic + cubic)
// is projected onto the critical eigenspace spanned by q(theta) = exp(i w0 theta),
// with adjoint q*(s) = D exp(i w0 s) normalised so that <q*, q> = 1. The
// reduced flow z' = i w0 z + g20 z^2/2 + g11 z zbar + g02 zbar^2/2 + g21 z^2 zbar/2
// gives the first Lyapunov quantity c1(0); mu2 = -Re c1(0) / alpha'(0) fixes the
// direction of the bifurcation and beta2 = 2 Re c1(0) the orbital stability.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "rcp/errors.hpp"
#include "rcp/model.hpp"
#include "rcp/stability.hpp"

namespace rcp {

enum class Criticality { Supercritical, Subcritical, Degenerate };

inline const char* to_string(Criticality c) {
    switch (c) {
    case Criticality::Supercritical: return "supercritical";
    case Criticality::Subcritical: return "subcritical";
    case Criticality::Degenerate: return "degenerate";
    }
    return "unknown";
}

/// Linear part of the delay equation at kappa_c together with the adjoint
/// normalisation D. Enough to evaluate the bilinear form <q*, phi>.
struct CriticalLinearization {
    double omega0 = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    double kxi_y = 0.0; ///< kappa_c * xi_y
    double kxi_z = 0.0; ///< kappa_c * xi_z
    Complex d_norm;

    static CriticalLinearization make(double omega0, double tau1, double tau2, double kxi_y, double kxi_z) {
        const Complex i1(0.0, 1.0);
        CriticalLinearization lin{omega0, tau1, tau2, kxi_y, kxi_z, {}};
        lin.d_norm = 1.0 / (1.0 + kxi_y * tau1 * std::exp(i1 * omega0 * tau1) +
                            kxi_z * tau2 * std::exp(i1 * omega0 * tau2));
        return lin;
    }
};

namespace detail {

// 16-point Gauss-Legendre rule on [-1, 1], computed once by Newton iteration.
struct GaussLegendre16 {
    std::array<double, 16> nodes{};
    std::array<double, 16> weights{};

    GaussLegendre16() {
        constexpr int n = 16;
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    static const GaussLegendre16& get() {
        static const GaussLegendre16 rule;
        return rule;
    }
};

inline Complex integrate(const std::function<Complex(double)>& f, double lo, double hi, int panels = 8) {
    const auto& gl = GaussLegendre16::get();
    Complex total = 0.0;
    const double width = (hi - lo) / panels;
    for (int k = 0; k < panels; ++k) {
        const double mid = lo + (k + 0.5) * width;
        for (int i = 0; i < 16; ++i) total += gl.weights[i] * f(mid + 0.5 * width * gl.nodes[i]);
    }
    return 0.5 * width * total;
}

} // namespace detail

/// Bilinear form <q*, phi> = conj(q*(0)) phi(0) - int_{-tau}^{0} int_{0}^{theta}
/// conj(q*(xi - theta)) d eta(theta) phi(xi) d xi, evaluated by quadrature.
/// The measure d eta is two point masses at -tau1 and -tau2.
inline Complex adjoint_pairing(const CriticalLinearization& lin, const std::function<Complex(double)>& phi) {
    const Complex i1(0.0, 1.0);
    const Complex dbar = std::conj(lin.d_norm);
    auto mass = [&](double tau, double weight) {
        // int_0^{-tau} conj(D exp(i w (xi + tau))) phi(xi) d xi
        auto integrand = [&](double xi) { return std::exp(-i1 * lin.omega0 * (xi + tau)) * phi(xi); };
        return weight * (-detail::integrate(integrand, -tau, 0.0));
    };
    return dbar * (phi(0.0) - mass(lin.tau1, lin.kxi_y) - mass(lin.tau2, lin.kxi_z));
}

struct NormalForm {
    Complex d_norm;
    Complex g20, g11, g02, g21;
    Complex e_const, f_const;
    Complex w20_0, w20_t1, w20_t2;
    Complex w11_0, w11_t1, w11_t2;
    Complex c1_0;
    double alpha_prime = 0.0;
    double mu2 = 0.0;
    double beta2 = 0.0;
    Criticality criticality = Criticality::Degenerate;
    CriticalLinearization linearization;
};

inline Criticality classify_lyapunov(Complex c1) {
    const double tol = 1e-12 * std::max(1.0, std::abs(c1));
    if (std::abs(c1.real()) < tol) return Criticality::Degenerate;
    // alpha'(0) > 0, so mu2 > 0 exactly when Re c1(0) < 0.
    return c1.real() < 0.0 ? Criticality::Supercritical : Criticality::Subcritical;
}

inline NormalForm normal_form(const ModelParams& p, const Equilibrium& eq, const TaylorCoefficients& xi,
                              const HopfPoint& hp) {
    detail::require(std::abs(p.kappa - hp.kappa_c) <= 1e-10 * hp.kappa_c,
                    "normal form must be evaluated at kappa = kappa_c");
    if (std::abs(eq.a_tilde + xi.xi_y) > 1e-12 * eq.a_tilde) {
        throw DomainError("equilibrium and Taylor coefficients describe different models");
    }
    if (xi.xi_y + xi.xi_z == 0.0) throw DomainError("degenerate parameters: xi_y + xi_z = 0");

    const Complex i1(0.0, 1.0);
    const double k = p.kappa;
    const double w = hp.omega0;
    const double t1 = p.tau1;
    const double t2 = p.tau2;

    // exp(-i w tau_j) and conjugates, shared by every coefficient below.
    const Complex e1 = std::exp(-i1 * w * t1);
    const Complex e2 = std::exp(-i1 * w * t2);
    const Complex e1c = std::conj(e1);
    const Complex e2c = std::conj(e2);

    NormalForm nf;
    nf.linearization = CriticalLinearization::make(w, t1, t2, k * xi.xi_y, k * xi.xi_z);
    nf.d_norm = nf.linearization.d_norm;
    const Complex dbar = std::conj(nf.d_norm);

    // Quadratic terms evaluated on z q + zbar qbar: coefficient of z^2 and z zbar.
    const Complex quad_zz = xi.xi_xy * e1 + xi.xi_xz * e2 + xi.xi_yy * e1 * e1 + xi.xi_yz * e1 * e2 +
                            xi.xi_zz * e2 * e2;
    const Complex quad_zzbar = xi.xi_xy * (e1 + e1c) + xi.xi_xz * (e2 + e2c) + 2.0 * xi.xi_yy +
                               xi.xi_yz * (e1 * e2c + e1c * e2) + 2.0 * xi.xi_zz;

    nf.g20 = 2.0 * dbar * k * quad_zz;
    nf.g11 = dbar * k * quad_zzbar;
    nf.g02 = 2.0 * dbar * k * std::conj(quad_zz);

    const Complex e_den = dbar * (k * xi.xi_y * e1 * e1 + k * xi.xi_z * e2 * e2 - 2.0 * i1 * w);
    if (std::abs(e_den) < 1e-14) throw NumericalError("resonance: centre-manifold constant E is singular");
    nf.e_const = -nf.g20 / e_den;
    nf.f_const = -nf.g11 / (dbar * k * (xi.xi_y + xi.xi_z));

    auto w20 = [&](double theta) {
        return i1 * nf.g20 / w * std::exp(i1 * w * theta) +
               i1 * std::conj(nf.g02) / (3.0 * w) * std::exp(-i1 * w * theta) +
               nf.e_const * std::exp(2.0 * i1 * w * theta);
    };
    auto w11 = [&](double theta) {
        return -i1 * nf.g11 / w * std::exp(i1 * w * theta) +
               i1 * std::conj(nf.g11) / w * std::exp(-i1 * w * theta) + nf.f_const;
    };
    nf.w20_0 = w20(0.0);
    nf.w20_t1 = w20(-t1);
    nf.w20_t2 = w20(-t2);
    nf.w11_0 = w11(0.0);
    nf.w11_t1 = w11(-t1);
    nf.w11_t2 = w11(-t2);

    const Complex bracket =
        xi.xi_xy * (2.0 * nf.w11_0 * e1 + nf.w20_0 * e1c + 2.0 * nf.w11_t1 + nf.w20_t1) +
        xi.xi_xz * (2.0 * nf.w11_0 * e2 + nf.w20_0 * e2c + 2.0 * nf.w11_t2 + nf.w20_t2) +
        xi.xi_yy * (4.0 * nf.w11_t1 * e1 + 2.0 * nf.w20_t1 * e1c) +
        xi.xi_yz * (2.0 * nf.w11_t1 * e2 + nf.w20_t1 * e2c + 2.0 * nf.w11_t2 * e1 + nf.w20_t2 * e1c) +
        xi.xi_zz * (4.0 * nf.w11_t2 * e2 + 2.0 * nf.w20_t2 * e2c) +
        xi.xi_xyy * (2.0 * e1 * e1 + 4.0) +
        xi.xi_xzz * (2.0 * e2 * e2 + 4.0) +
        xi.xi_yyz * (2.0 * e1 * e1 * e2c + 4.0 * e2) +
        xi.xi_yzz * (2.0 * e2 * e2 * e1c + 4.0 * e1) +
        xi.xi_xyz * (2.0 * e1 * e2c + 2.0 * e1c * e2 + 2.0 * e1 * e2) +
        6.0 * xi.xi_yyy * e1 +
        6.0 * xi.xi_zzz * e2;
    nf.g21 = dbar * k * bracket;

    nf.c1_0 = i1 / (2.0 * w) *
                  (nf.g20 * nf.g11 - 2.0 * std::norm(nf.g11) - std::norm(nf.g02) / 3.0) +
              nf.g21 / 2.0;
    nf.alpha_prime = hp.alpha_prime;
    nf.mu2 = -nf.c1_0.real() / hp.alpha_prime;
    nf.beta2 = 2.0 * nf.c1_0.real();
    nf.criticality = classify_lyapunov(nf.c1_0);
    return nf;
}

struct HopfAnalysis {
    ModelParams params; ///< input parameters with kappa moved to kappa_c
    Equilibrium equilibrium;
    TaylorCoefficients coefficients;
    HopfPoint hopf;
    NormalForm normal_form;
};

/// Full pipeline at the first Hopf point; the input kappa is ignored.
inline HopfAnalysis analyze_hopf(const ModelParams& p) {
    HopfAnalysis out;
    out.hopf = critical_kappa(p);
    out.params = p.with_kappa(out.hopf.kappa_c);
    out.equilibrium = equilibrium(out.params);
    out.coefficients = taylor_coefficients(out.params, out.equilibrium);
    out.normal_form = normal_form(out.params, out.equilibrium, out.coefficients, out.hopf);
    return out;
}

// ---------------------------------------------------------------------------
// Closed forms in the delay phase theta = pi tau1 / (tau1 + tau2).

/// Sign-determining part of Re c1(0) for the rate-mismatch-only controller.
inline double f_tilde(double theta) {
    detail::require(theta > 0.0 && theta < std::numbers::pi, "theta must lie in (0, pi)");
    const double s = std::sin(theta);
    const double c2 = std::cos(2.0 * theta);
    const double pi = std::numbers::pi;
    return -2.0 * pi * std::pow(s, 4) - pi * s * s * c2 * c2 - 2.0 * c2 * s * s * s -
           c2 * s * s * std::cos(theta) * (pi - 2.0 * theta);
}

/// Re c1(0) for b = 0 in closed form,
///   2 pi f~(theta) / ((gamma C)^2 (tau1 + tau2)) / (sin^2 theta (cos^2 2theta + 4 sin^2 theta) (A^2 + B^2)),
/// where A + iB = 1/conj(D) is the transversality denominator. The trailing
/// factor is positive, so the sign is that of f~.
inline double re_c1_rate_only(double theta, double target_capacity, double delay_sum) {
    detail::require(target_capacity > 0.0 && delay_sum > 0.0, "capacity and delay sum must be > 0");
    const double s = std::sin(theta);
    const double c2 = std::cos(2.0 * theta);
    const double big_a = 1.0 + (std::numbers::pi - 2.0 * theta) * std::cos(theta) / (2.0 * s);
    const double big_b = std::numbers::pi / 2.0;
    const double shape = s * s * (c2 * c2 + 4.0 * s * s) * (big_a * big_a + big_b * big_b);
    return 2.0 * std::numbers::pi * f_tilde(theta) /
           (target_capacity * target_capacity * delay_sum * shape);
}

/// The four-term function g~(theta, rho*) for the queue-feedback controller.
inline Complex g_tilde(double theta, double rho) {
    const Complex i1(0.0, 1.0);
    const double s = std::sin(theta);
    const double c2 = std::cos(2.0 * theta);
    const Complex den = c2 + 2.0 * i1 * s;
    const double q = 1.0 - rho;
    return s / (rho * q) * (2.0 * i1 * s - (2.0 * c2 + i1 * s) / den) +
           (1.0 + rho) * (-s + i1 * c2) / (rho * rho * den) +
           2.0 * s * s * (-4.0 * s + 3.0 * i1 * c2) / (q * q * (1.0 + rho) * den) -
           3.0 * i1 * (3.0 * s - std::sin(3.0 * theta)) / (4.0 * q * q * s);
}

/// Adjoint normalisation D at the Hopf point, which depends on theta only.
/// Realised on the delay pair tau1 = 1, tau2 = (pi - theta) / theta.
inline Complex hopf_normalization(double theta) {
    const double tau1 = 1.0;
    const double tau2 = (std::numbers::pi - theta) / theta;
    const double w0 = std::numbers::pi / (tau1 + tau2);
    // kappa_c xi_y = -kappa_c a_tilde = -w0 / (2 sin theta) for either controller.
    const double kxi = -w0 / (2.0 * std::sin(theta));
    return CriticalLinearization::make(w0, tau1, tau2, kxi, kxi).d_norm;
}

/// Re(g~ conj(D)) / Re(i (1 + rho) conj(D)): free of a, C and the delay scale,
/// and of the same sign as mu2.
inline double mu2_reduced(double theta, double rho) {
    detail::require(theta > 0.0 && theta < std::numbers::pi, "theta must lie in (0, pi)");
    detail::require(rho >= 0.01 && rho <= 0.99, "utilisation must lie in [0.01, 0.99]");
    const Complex i1(0.0, 1.0);
    const Complex dbar = std::conj(hopf_normalization(theta));
    return (g_tilde(theta, rho) * dbar).real() / (i1 * (1.0 + rho) * dbar).real();
}

/// mu2 for the queue-feedback controller from the closed form. The reduced
/// quotient is rescaled by 2 pi / (a C^2 (1 + rho) sin theta), which restores
/// the dimensional mu2 = -Re c1(0) / alpha'(0) of the full reduction.
inline double g_tilde_mu2(double theta, double rho, double a = 1.0, double capacity = 1.0) {
    detail::require(a > 0.0 && capacity > 0.0, "a and capacity must be > 0");
    const double scale = 2.0 * std::numbers::pi / (a * capacity * capacity * (1.0 + rho) * std::sin(theta));
    return scale * mu2_reduced(theta, rho);
}

struct CriticalityRow {
    double theta = 0.0;
    double rho_star = 0.0;
    double mu2 = 0.0;
    double mu2_reduced = 0.0;
    Criticality criticality = Criticality::Degenerate;
};

inline Criticality classify_mu2(double mu2, double scale) {
    if (std::abs(mu2) < 1e-12 * std::max(1.0, scale)) return Criticality::Degenerate;
    return mu2 > 0.0 ? Criticality::Supercritical : Criticality::Subcritical;
}

/// mu2 of the rate-mismatch-only controller (b = 0); gamma C is the target capacity.
/// Independent of the delay scale: Re c1(0) and alpha'(0) both scale as 1/(tau1 + tau2).
inline double mu2_rate_only(double theta, double a, double target_capacity) {
    const double sum = std::numbers::pi / theta; // tau1 = 1 realisation
    const double s = std::sin(theta);
    const double big_a = 1.0 + (std::numbers::pi - 2.0 * theta) * std::cos(theta) / (2.0 * s);
    const double alpha = std::numbers::pi * (a / sum) * s /
                         (big_a * big_a + std::numbers::pi * std::numbers::pi / 4.0);
    return -re_c1_rate_only(theta, target_capacity, sum) / alpha;
}

/// mu2 over a (theta, rho*) grid for the queue-feedback controller, theta-major.
inline std::vector<CriticalityRow> criticality_map(const std::vector<double>& thetas, const std::vector<double>& rhos,
                                                   double a = 1.0, double capacity = 1.0) {
    std::vector<CriticalityRow> rows;
    rows.reserve(thetas.size() * rhos.size());
    for (double theta : thetas) {
        for (double rho : rhos) {
            CriticalityRow row{theta, rho, 0.0, 0.0, Criticality::Degenerate};
            row.mu2_reduced = mu2_reduced(theta, rho);
            row.mu2 = g_tilde_mu2(theta, rho, a, capacity);
            row.criticality = classify_mu2(row.mu2_reduced, std::abs(g_tilde(theta, rho)));
            rows.push_back(row);
        }
    }
    return rows;
}

/// Same map keyed on the queue gain b. b = 0 uses the rate-mismatch-only
/// reduction (rho* = gamma, sign from f~); b > 0 maps to rho* through the equilibrium.
inline std::vector<CriticalityRow> criticality_map_b(const std::vector<double>& thetas, const std::vector<double>& bs,
                                                     double a = 1.0, double capacity = 1.0, double gamma = 1.0) {
    std::vector<CriticalityRow> rows;
    rows.reserve(thetas.size() * bs.size());
    for (double theta : thetas) {
        for (double b : bs) {
            ModelParams p;
            p.a = a;
            p.b = b;
            p.gamma = gamma;
            p.capacity = capacity;
            const double rho = equilibrium(p).rho_star;
            if (b == 0.0) {
                CriticalityRow row{theta, rho, mu2_rate_only(theta, a, gamma * capacity), -f_tilde(theta),
                                   Criticality::Degenerate};
                row.criticality = classify_mu2(row.mu2_reduced, 1.0);
                rows.push_back(row);
            } else {
                auto queued = criticality_map({theta}, {rho}, a, capacity);
                rows.push_back(queued.front());
            }
        }
    }
    return rows;
}

} // namespace rcp
