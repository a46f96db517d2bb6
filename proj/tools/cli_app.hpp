#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rcp/rcp.hpp"

namespace rcp::cli {

enum ExitCode : int { Ok = 0, UsageError = 2, NumericalFailure = 3 };

inline const char* csv_schemas = R"(CSV schemas (header row always present):
  stability-chart    kind,a,b,stable,margin
  hopf-classify      a,b,gamma,capacity,tau1,tau2,rho_star,kappa_c,omega0,theta,alpha_prime,re_c1,im_c1,mu2,beta2,criticality
  ftilde-curve       theta,f_tilde
  mu2-curves         theta,rho_star,mu2,mu2_reduced,criticality
  bifurcation-sweep  kappa,amplitude,period,outcome,t_end
  simulate-fluid     t,R            (t,R,p when b > 0)
  simulate-packets   t_ms,queue_pkts,router_rate_pkts_per_ms,arrivals_per_ms
Every CSV is accompanied by <out>.meta holding the resolved parameters as key=value lines.
Exit codes: 0 success, 2 usage or parameter error, 3 numerical failure.)";

struct Preset {
    const char* name;
    ModelParams params;
};

inline std::vector<Preset> presets() {
    auto make = [](double a, double b, double gamma, double c, double t1, double t2) {
        ModelParams p;
        p.a = a;
        p.b = b;
        p.gamma = gamma;
        p.capacity = c;
        p.tau1 = t1;
        p.tau2 = t2;
        return p;
    };
    return {
        {"theta-super", make(2.16, 0.0222, 1.0, 100.0, 10.0, 70.0)},
        {"theta-sub", make(0.87, 0.0222, 1.0, 100.0, 10.0, 15.0)},
        {"rho-super", make(1.17, 0.736, 1.0, 100.0, 10.0, 20.0)},
        {"rho-sub", make(0.95, 0.0222, 1.0, 100.0, 10.0, 20.0)},
        {"queue-feedback-95", make(0.85, 0.005, 1.0, 125.0, 100.0, 150.0)},
        {"rate-only-95", make(1.6, 0.0, 0.95, 125.0, 100.0, 150.0)},
    };
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : path_(path), file_(path) {
        if (!file_) throw DomainError("cannot open output file " + path);
        file_ << std::setprecision(12);
    }

    template <typename... Ts>
    void row(const Ts&... values) {
        bool first = true;
        ((file_ << (first ? "" : ",") << values, first = false), ...);
        file_ << '\n';
    }

    void close() {
        file_.close();
        if (!file_) throw DomainError("failed writing " + path_);
    }

private:
    std::string path_;
    std::ofstream file_;
};

/// Empty cell for missing optional values.
inline std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream s;
    s << std::setprecision(12) << *v;
    return s.str();
}

inline std::string option_value(const CLI::Option* opt) {
    if (opt->count() == 0) return opt->get_default_str();
    std::string joined;
    for (const auto& r : opt->results()) joined += (joined.empty() ? "" : " ") + r;
    return joined;
}

/// Sidecar `<csv>.meta`: tool identity, the resolved model parameters and
/// every option of the subcommand that produced the CSV.
inline void write_meta(const std::string& csv_path, const CLI::App& sub, const ModelParams& p,
                       std::uint64_t seed, const std::string& preset,
                       const std::vector<std::pair<std::string, std::string>>& extra) {
    std::ofstream meta(csv_path + ".meta");
    if (!meta) throw DomainError("cannot open metadata file " + csv_path + ".meta");
    meta << std::setprecision(17);
    meta << "tool=rcp-analyze\nversion=" << version << "\ncommand=" << sub.get_name() << '\n';
    meta << "preset=" << preset << "\na=" << p.a << "\nb=" << p.b << "\ngamma=" << p.gamma
         << "\ncapacity=" << p.capacity << "\ntau1=" << p.tau1 << "\ntau2=" << p.tau2 << "\nkappa=" << p.kappa
         << "\nsigma-sq=" << p.sigma_sq << "\nseed=" << seed << '\n';
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
        meta << sub.get_name() << '.' << opt->get_lnames().front() << '=' << option_value(opt) << '\n';
    }
    for (const auto& [k, v] : extra) meta << k << '=' << v << '\n';
    meta << "output=" << csv_path << '\n';
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return out;
}

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stability, Hopf criticality and simulation toolkit for two-delay RCP.", "rcp-analyze"};
    app.footer(csv_schemas);
    app.set_version_flag("--version", std::string(version));
    app.set_config("--config", "", "Flat key=value file supplying defaults for any flag; flags override it");
    app.require_subcommand(1, 1);
    app.fallthrough();

    ModelParams cli_params;
    std::string preset_name;
    std::uint64_t seed = 1;
    std::string out_path;
    std::vector<std::pair<CLI::Option*, double ModelParams::*>> model_opts;
    auto model_opt = [&](const std::string& name, double ModelParams::*field, const std::string& help) {
        model_opts.emplace_back(app.add_option("--" + name, cli_params.*field, help)->capture_default_str(), field);
    };
    model_opt("a", &ModelParams::a, "Protocol gain a (> 0)");
    model_opt("b", &ModelParams::b, "Queue-feedback gain b (>= 0; 0 disables queue feedback)");
    model_opt("gamma", &ModelParams::gamma, "Target utilisation without queue feedback, in (0, 1]");
    model_opt("capacity", &ModelParams::capacity, "Link capacity C, packets/ms");
    model_opt("tau1", &ModelParams::tau1, "Round-trip delay of the first class, ms");
    model_opt("tau2", &ModelParams::tau2, "Round-trip delay of the second class, ms");
    model_opt("kappa", &ModelParams::kappa, "Bifurcation parameter kappa");
    model_opt("sigma-sq", &ModelParams::sigma_sq, "Traffic variability sigma^2");
    std::vector<std::string> preset_names;
    for (const auto& ps : presets()) preset_names.emplace_back(ps.name);
    app.add_option("--preset", preset_name, "Start from a named parameter set; explicit flags override it")
        ->check(CLI::IsMember(preset_names));
    app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    app.add_option("--out", out_path, "Output CSV path (default <subcommand>.csv)");

    auto resolve = [&]() {
        ModelParams p = cli_params;
        for (const auto& ps : presets()) {
            if (preset_name == ps.name) p = ps.params;
        }
        for (const auto& [opt, field] : model_opts) {
            if (opt->count() > 0) p.*field = cli_params.*field;
        }
        p.validate();
        return p;
    };

    // stability-chart
    auto* chart = app.add_subcommand("stability-chart", "Grid of the kappa = 1 stability condition over (a, b)");
    double a_min = 0.05, a_max = 2.0, b_min = 0.0, b_max = 2.0;
    std::size_t resolution = 41;
    chart->add_option("--a-min", a_min)->capture_default_str();
    chart->add_option("--a-max", a_max)->capture_default_str();
    chart->add_option("--b-min", b_min)->capture_default_str();
    chart->add_option("--b-max", b_max)->capture_default_str();
    chart->add_option("--resolution", resolution, "Grid points per axis")->capture_default_str();

    // hopf-classify
    auto* classify = app.add_subcommand("hopf-classify", "Hopf point, first Lyapunov quantity and criticality");

    // ftilde-curve
    auto* ftilde = app.add_subcommand("ftilde-curve", "Sign function of the rate-only controller over theta");
    std::size_t ft_points = 1000;
    ftilde->add_option("--n-points", ft_points)->capture_default_str();

    // mu2-curves
    auto* mu2c = app.add_subcommand("mu2-curves", "mu2 of the queue-feedback controller along theta or rho*");
    std::string mu2_mode = "theta-sweep";
    std::optional<double> mu2_fixed;
    std::size_t mu2_points = 200;
    mu2c->add_option("--mode", mu2_mode, "theta-sweep (fixed rho*) or rho-sweep (fixed theta)")
        ->check(CLI::IsMember({"theta-sweep", "rho-sweep"}))
        ->capture_default_str();
    mu2c->add_option("--fixed", mu2_fixed, "Fixed rho* (theta-sweep, default 0.9) or theta (rho-sweep, default pi/3)");
    mu2c->add_option("--n-points", mu2_points)->capture_default_str();

    // bifurcation-sweep
    auto* sweep = app.add_subcommand("bifurcation-sweep", "Steady oscillation amplitude of the fluid model across kappa");
    double k_min = 0.95, k_max = 1.05;
    std::size_t k_points = 11;
    SweepOptions sweep_opt;
    sweep->add_option("--kappa-min", k_min)->capture_default_str();
    sweep->add_option("--kappa-max", k_max)->capture_default_str();
    sweep->add_option("--n-points", k_points)->capture_default_str();
    sweep->add_option("--t-end", sweep_opt.t_end, "Integration horizon, ms (0: 400 (tau1 + tau2))")->capture_default_str();
    sweep->add_option("--dt", sweep_opt.dt, "Step, ms (0: min(tau1, tau2) / 50)")->capture_default_str();
    sweep->add_option("--max-extensions", sweep_opt.max_extensions, "t_end doublings for unsettled runs")
        ->capture_default_str();

    // simulate-fluid
    auto* fluid = app.add_subcommand("simulate-fluid", "Integrate the nonlinear fluid model and export R(t)");
    double f_t_end = 0.0, f_dt = 0.0, f_transient = 0.8;
    std::optional<double> f_history;
    std::size_t f_stride = 1;
    fluid->add_option("--t-end", f_t_end, "Horizon, ms (0: 100 (tau1 + tau2))")->capture_default_str();
    fluid->add_option("--dt", f_dt, "Step, ms (0: min(tau1, tau2) / 50)")->capture_default_str();
    fluid->add_option("--history", f_history, "Constant initial history (default R* (1 + 0.01))");
    fluid->add_option("--stride", f_stride, "Write every n-th step")->capture_default_str();
    fluid->add_option("--transient", f_transient, "Fraction discarded before cycle metrics")->capture_default_str();

    // simulate-packets
    auto* packets = app.add_subcommand("simulate-packets", "Packet-level discrete-event simulation of the bottleneck");
    int n_sources = 100;
    double duration = 20000.0, update_interval = 0.0, max_queue = 1e6;
    packets->add_option("--n-sources", n_sources)->capture_default_str();
    packets->add_option("--duration", duration, "Simulated time, ms")->capture_default_str();
    packets->add_option("--update-interval", update_interval, "Router update period, ms (0: (tau1 + tau2) / 2)")
        ->capture_default_str();
    packets->add_option("--max-queue", max_queue, "Overflow abort threshold, packets")->capture_default_str();

    for (auto* sub : {chart, classify, ftilde, mu2c, sweep, fluid, packets}) sub->configurable();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? Ok : UsageError;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        const std::string path = out_path.empty() ? sub->get_name() + ".csv" : out_path;
        out << std::setprecision(10);

        if (sub == chart) {
            detail::require(resolution >= 2, "resolution must be >= 2");
            detail::require(a_min > 0.0 && a_max > a_min, "invalid a range");
            detail::require(b_min >= 0.0 && b_max > b_min, "invalid b range");
            CsvWriter csv(path);
            csv.row("kind", "a", "b", "stable", "margin");
            const auto as = linspace(a_min, a_max, resolution);
            const auto bs = linspace(b_min, b_max, resolution);
            std::size_t n_stable = 0;
            for (double b : bs) {
                for (double a : as) {
                    const StabilityVerdict v = chart_condition(a, b);
                    n_stable += v.stable;
                    csv.row("grid", a, b, v.stable ? 1 : 0, v.margin);
                }
            }
            for (double b : bs) csv.row("boundary", chart_boundary(b), b, 1, 0.0);
            csv.close();
            out << "grid points " << as.size() * bs.size() << ", stable " << n_stable << '\n';
            write_meta(path, *sub, cli_params, seed, preset_name, {});
        } else if (sub == classify) {
            const ModelParams p = resolve();
            const HopfAnalysis h = analyze_hopf(p);
            const NormalForm& nf = h.normal_form;
            CsvWriter csv(path);
            csv.row("a", "b", "gamma", "capacity", "tau1", "tau2", "rho_star", "kappa_c", "omega0", "theta",
                    "alpha_prime", "re_c1", "im_c1", "mu2", "beta2", "criticality");
            csv.row(p.a, p.b, p.gamma, p.capacity, p.tau1, p.tau2, h.equilibrium.rho_star, h.hopf.kappa_c,
                    h.hopf.omega0, h.hopf.theta, h.hopf.alpha_prime, nf.c1_0.real(), nf.c1_0.imag(), nf.mu2,
                    nf.beta2, to_string(nf.criticality));
            csv.close();
            out << "kappa_c=" << h.hopf.kappa_c << " omega0=" << h.hopf.omega0 << " theta=" << h.hopf.theta
                << " alpha_prime=" << h.hopf.alpha_prime << " mu2=" << nf.mu2 << " beta2=" << nf.beta2
                << " criticality=" << to_string(nf.criticality) << '\n';
            write_meta(path, *sub, p, seed, preset_name, {});
        } else if (sub == ftilde) {
            detail::require(ft_points >= 2, "n-points must be >= 2");
            CsvWriter csv(path);
            csv.row("theta", "f_tilde");
            for (double t : linspace(0.001 * std::numbers::pi, 0.999 * std::numbers::pi, ft_points)) {
                csv.row(t, f_tilde(t));
            }
            csv.close();
            out << "f_tilde(pi/2)=" << f_tilde(std::numbers::pi / 2.0) << '\n';
            write_meta(path, *sub, cli_params, seed, preset_name, {});
        } else if (sub == mu2c) {
            detail::require(mu2_points >= 2, "n-points must be >= 2");
            const ModelParams p = resolve();
            std::vector<CriticalityRow> rows;
            if (mu2_mode == "theta-sweep") {
                const double rho = mu2_fixed.value_or(0.9);
                rows = criticality_map(linspace(0.01 * std::numbers::pi, 0.99 * std::numbers::pi, mu2_points), {rho},
                                       p.a, p.capacity);
            } else {
                const double theta = mu2_fixed.value_or(std::numbers::pi / 3.0);
                rows = criticality_map({theta}, linspace(0.01, 0.99, mu2_points), p.a, p.capacity);
            }
            CsvWriter csv(path);
            csv.row("theta", "rho_star", "mu2", "mu2_reduced", "criticality");
            std::size_t super = 0;
            for (const auto& r : rows) {
                super += r.criticality == Criticality::Supercritical;
                csv.row(r.theta, r.rho_star, r.mu2, r.mu2_reduced, to_string(r.criticality));
            }
            csv.close();
            out << rows.size() << " points, " << super << " supercritical\n";
            write_meta(path, *sub, p, seed, preset_name, {{"mode", mu2_mode}});
        } else if (sub == sweep) {
            const ModelParams p = resolve();
            const auto points = amplitude_sweep(p, k_min, k_max, k_points, sweep_opt);
            CsvWriter csv(path);
            csv.row("kappa", "amplitude", "period", "outcome", "t_end");
            for (const auto& pt : points) {
                csv.row(pt.kappa, pt.amplitude, cell(pt.period), to_string(pt.outcome), pt.t_end_used);
            }
            csv.close();
            out << "kappa_c=" << critical_kappa(p).kappa_c << ", " << points.size() << " points\n";
            write_meta(path, *sub, p, seed, preset_name, {});
        } else if (sub == fluid) {
            const ModelParams p = resolve();
            SimConfig cfg;
            cfg.params = p;
            cfg.t_end = f_t_end > 0.0 ? f_t_end : 100.0 * p.delay_sum();
            cfg.dt = f_dt;
            cfg.history = f_history;
            cfg.record_stride = f_stride;
            cfg.transient_fraction = f_transient;
            const TraceSeries tr = integrate(cfg);
            CsvWriter csv(path);
            const bool queued = !tr.queue.empty();
            if (queued) csv.row("t", "R", "p");
            else csv.row("t", "R");
            for (std::size_t i = 0; i < tr.times.size(); ++i) {
                if (queued) csv.row(tr.times[i], tr.rates[i], tr.queue[i]);
                else csv.row(tr.times[i], tr.rates[i]);
            }
            csv.close();
            out << "outcome=" << to_string(tr.outcome) << " amplitude=" << tr.amplitude
                << " period=" << cell(tr.period) << " escape_time=" << cell(tr.escape_time)
                << " saturated=" << (tr.saturated ? 1 : 0) << '\n';
            write_meta(path, *sub, p, seed, preset_name,
                       {{"outcome", to_string(tr.outcome)}, {"saturated", tr.saturated ? "1" : "0"}});
        } else if (sub == packets) {
            NetworkConfig cfg;
            cfg.protocol = resolve();
            cfg.n_sources = n_sources;
            cfg.duration = duration;
            cfg.update_interval = update_interval;
            cfg.max_queue = max_queue;
            cfg.seed = seed;
            const PacketRun r = rcp::run(cfg);
            CsvWriter csv(path);
            csv.row("t_ms", "queue_pkts", "router_rate_pkts_per_ms", "arrivals_per_ms");
            for (const auto& s : r.samples) csv.row(s.t, s.queue, s.router_rate, s.arrivals_per_ms);
            csv.close();
            out << "utilization=" << r.stats.mean_utilization << " arrived=" << r.stats.arrived
                << " departed=" << r.stats.departed << " rate_clamps=" << r.stats.rate_clamps
                << " overflow=" << (r.stats.overflow ? 1 : 0) << '\n';
            write_meta(path, *sub, cfg.protocol, seed, preset_name,
                       {{"outcome", r.stats.overflow ? "overflow" : "completed"},
                        {"rate_clamps", std::to_string(r.stats.rate_clamps)}});
        }
        return Ok;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return UsageError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return NumericalFailure;
    }
}

} // namespace rcp::cli
