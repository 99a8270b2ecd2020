// Batch front-end: one binary, subcommand per analysis, deterministic CSV
// outputs plus a JSON run manifest per invocation.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmwg/flux.hpp"
#include "mmwg/model.hpp"
#include "mmwg/protocols.hpp"
#include "mmwg/rb.hpp"
#include "mmwg/readout.hpp"
#include "mmwg/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmwg;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string utc_timestamp() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    int threads = 0;  // 0 = unset, fall back to env then 1
    std::optional<std::uint64_t> seed;
    std::string format = "csv";
};

int effective_threads(const GlobalOpts& g) {
    if (g.threads > 0) return g.threads;
    if (const char* env = std::getenv("MMWG_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

struct ManifestBuilder {
    json j;
    std::vector<std::string> files;

    ManifestBuilder(const std::string& subcommand, std::uint64_t cfg_hash,
                    std::uint64_t seed) {
        j["subcommand"] = subcommand;
        j["config_hash"] = cfg_hash;
        j["seed"] = seed;
        j["tool_version"] = kToolVersion;
        j["start"] = utc_timestamp();
        j["status"] = "ok";
    }

    void add_file(const std::string& path) { files.push_back(path); }

    void write(const std::string& dir) {
        j["end"] = utc_timestamp();
        j["files"] = files;
        std::ofstream out(dir + "/manifest.json");
        out << j.dump(2) << "\n";
    }
};

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw DomainError("grid needs at least one point");
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<size_t>(i)] =
            n == 1 ? lo : lo + (hi - lo) * i / static_cast<double>(n - 1);
    return v;
}

// Emits rows either as the canonical CSV or, on request, as a JSON array of
// row objects next to it. Returns the file actually written.
std::string emit_table(const GlobalOpts& g, const std::string& stem,
                       const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows) {
    if (g.format == "json") {
        json arr = json::array();
        for (const auto& r : rows) {
            json o;
            for (size_t c = 0; c < header.size(); ++c)
                o[header[c]] = r[c];
            arr.push_back(o);
        }
        const std::string path = g.out_dir + "/" + stem + ".json";
        std::ofstream out(path);
        out << arr.dump(2) << "\n";
        return path;
    }
    const std::string path = g.out_dir + "/" + stem + ".csv";
    write_csv(path, header, rows);
    return path;
}

DeviceConfig load_device(const GlobalOpts& g) {
    if (g.config_path.empty())
        throw ConfigError("this subcommand requires --config");
    DeviceConfig cfg = load_config(g.config_path);
    if (g.seed) cfg.rng_seed = *g.seed;
    const auto report = validate(cfg);
    if (!report.ok())
        throw ConfigError("config invalid: " + report.violations[0].path +
                          ": " + report.violations[0].message);
    return cfg;
}

// ---------------------------------------------------------------- sweep-reset

struct SweepArgs {
    double fmod_lo = 0.1, fmod_hi = 0.4;
    int fmod_n = 2;
    double phia_lo = 0.05, phia_hi = 0.35;
    int phia_n = 2;
    double tau = 104.0;
    std::vector<int> prepared = {1};
    FluxPulse pulse;
};

int cmd_sweep_reset(const GlobalOpts& g, const SweepArgs& a) {
    const DeviceConfig cfg = load_device(g);
    auto pulse = a.pulse;
    pulse.tau_pulse = a.tau;
    const auto fmod = linspace(a.fmod_lo, a.fmod_hi, a.fmod_n);
    const auto phia = linspace(a.phia_lo, a.phia_hi, a.phia_n);
    const auto res = sweep_reset(cfg, pulse, fmod, phia, a.tau, a.prepared,
                                 effective_threads(g));
    save_sweep_result(res, g.out_dir);
    return 0;
}

// ------------------------------------------------------- lru-scan / lru-trace

struct LruArgs {
    double fmod_lo = 0.17, fmod_hi = 0.19;
    int fmod_n = 2;
    double phia_lo = 0.11, phia_hi = 0.15;
    int phia_n = 2;
    double tau_max = 100.0, dtau = 1.0;
    std::string backend = "analytic";
    LossyModeParams lossy;
    FluxPulse pulse;
    // single-point trace
    double f_mod = 0.179, phi_a = 0.13;
};

LruBackend parse_backend(const std::string& s) {
    if (s == "analytic") return LruBackend::Analytic;
    if (s == "full") return LruBackend::FullDynamics;
    throw ConfigError("backend must be 'analytic' or 'full'");
}

int cmd_lru_scan(const GlobalOpts& g, const LruArgs& a) {
    const DeviceConfig cfg = load_device(g);
    if (a.fmod_n < 1 || a.phia_n < 1) throw ConfigError("empty grid");
    const auto fmod = linspace(a.fmod_lo, a.fmod_hi, a.fmod_n);
    const auto phia = linspace(a.phia_lo, a.phia_hi, a.phia_n);
    const auto res =
        lru_scan(cfg, a.pulse, fmod, phia, a.lossy, parse_backend(a.backend),
                 a.tau_max, a.dtau, effective_threads(g));

    ManifestBuilder mf("lru-scan", config_hash(cfg), cfg.rng_seed);
    std::vector<std::vector<double>> rows;
    json point_status = json::array();
    for (size_t ip = 0; ip < phia.size(); ++ip)
        for (size_t im = 0; im < fmod.size(); ++im) {
            const auto& pt = res.points[ip * fmod.size() + im];
            rows.push_back({fmod[im], phia[ip],
                            pt.has_minimum ? pt.tau_lru : -1.0, pt.p_f_min,
                            pt.residual_pe});
            json ps;
            ps["f_mod_ghz"] = fmod[im];
            ps["phi_a_phi0"] = phia[ip];
            ps["status"] = pt.status;
            ps["has_minimum"] = pt.has_minimum;
            if (pt.has_minimum) ps["tau_lru_ns"] = pt.tau_lru;
            point_status.push_back(ps);
        }
    mf.add_file(emit_table(
        g, "lru_scan",
        {"f_mod_ghz", "phi_a_phi0", "tau_lru_ns", "p_f_min", "residual_pe"},
        rows));
    mf.j["points"] = point_status;
    mf.write(g.out_dir);
    return 0;
}

int cmd_lru_trace(const GlobalOpts& g, const LruArgs& a) {
    const DeviceConfig cfg = load_device(g);
    FluxPulse pulse = a.pulse;
    pulse.f_mod = a.f_mod;
    pulse.phi_amplitude = a.phi_a;

    std::vector<std::vector<double>> rows;
    if (parse_backend(a.backend) == LruBackend::Analytic) {
        FluxPulse probe = pulse;
        probe.tau_pulse = 1000.0;  // steady-state sideband weights
        const auto spec = sideband_spectrum(cfg.transmon, probe);
        const cplx xi = spec.xi(-2);
        const double f_sb =
            spec.f_avg + cfg.transmon.anharmonicity_eta - 2.0 * a.f_mod;
        for (double t = 0.0; t <= a.tau_max + 0.5 * a.dtau; t += a.dtau) {
            const double pf = lru_analytic_pf(a.lossy, xi, f_sb, t);
            const double pe = damped_rabi(
                a.lossy.g_l * std::abs(xi),
                (spec.f_avg - 2.0 * a.f_mod) - a.lossy.f_l, a.lossy.kappa_l, t);
            rows.push_back({t, 1.0 - pe - pf, pe, pf});
        }
    } else {
        std::vector<double> taus;
        for (double t = a.dtau; t <= a.tau_max + 0.5 * a.dtau; t += a.dtau)
            taus.push_back(t);
        const auto err_f = simulate_reset_trace(cfg, pulse, 2, taus);
        const auto err_e = simulate_reset_trace(cfg, pulse, 1, taus);
        for (size_t i = 0; i < taus.size(); ++i)
            rows.push_back({taus[i], 1.0 - err_e[i], err_e[i], err_f[i]});
    }

    ManifestBuilder mf("lru-trace", config_hash(cfg), cfg.rng_seed);
    mf.add_file(emit_table(g, "lru_trace", {"t_ns", "p_g", "p_e", "p_f"}, rows));

    std::vector<double> pf_col;
    for (const auto& r : rows) pf_col.push_back(r[3]);
    for (size_t i = 1; i + 1 < pf_col.size(); ++i)
        if (pf_col[i] < pf_col[i - 1] && pf_col[i] <= pf_col[i + 1]) {
            mf.j["tau_lru_ns"] = rows[i][0];
            mf.j["p_f_min"] = pf_col[i];
            break;
        }
    mf.write(g.out_dir);
    return 0;
}

// ------------------------------------------------------------------------ lzs

struct LzsArgs {
    double g = 0.0236, p0 = 0.9;
    std::vector<double> sigmas = {0.0, 1.0, 2.0, 4.0, 8.0, 15.0};
    double tau = 200.0, buffer = 80.0, phi_a = 0.3, f_cross = 7.1;
};

int cmd_lzs(const GlobalOpts& g, const LzsArgs& a) {
    const DeviceConfig cfg = load_device(g);
    std::vector<std::vector<double>> rows;
    for (double sigma : a.sigmas) {
        FluxPulse pulse;
        pulse.phi_amplitude = a.phi_a;
        pulse.f_mod = 0.0;
        pulse.tau_pulse = a.tau;
        pulse.tau_buffer = a.buffer;
        pulse.sigma_filter = std::max(sigma, 1e-3);
        const double slope = crossing_slope(cfg.transmon, pulse, a.f_cross);
        rows.push_back({sigma, slope, lzs_survival(a.g, slope, a.p0)});
    }
    ManifestBuilder mf("lzs", config_hash(cfg), cfg.rng_seed);
    mf.add_file(
        emit_table(g, "lzs", {"sigma_ns", "slope_ghz_per_ns", "p_r"}, rows));
    mf.write(g.out_dir);
    return 0;
}

// ------------------------------------------------------------------------- rb

struct RbArgs {
    std::string primitive = "reference";
    std::vector<int> depths = {1, 5, 10, 20, 40, 80};
    int sequences = 30;
    int shots = 0;
    double t_gate = 36.0;
    double residual_f = 0.00285, tau_lru = 44.0;
    double p_leak = 0.03;
    CoherenceSet coh{12.0, 7.3, 3.3, 3.7};
    double t1_ef = 4.7;
    bool ideal = false;
};

int cmd_rb(const GlobalOpts& g, const RbArgs& a) {
    RBPrimitive prim;
    if (a.primitive == "reference") prim = RBPrimitive::Reference;
    else if (a.primitive == "lru") prim = RBPrimitive::Lru;
    else if (a.primitive == "leak-inject") prim = RBPrimitive::LeakInject;
    else if (a.primitive == "leak-inject-lru") prim = RBPrimitive::LeakInjectLru;
    else throw ConfigError("unknown primitive '" + a.primitive + "'");

    std::uint64_t seed = g.seed.value_or(1);
    RBChannelSet ch;
    if (!a.ideal) {
        ch.clifford_noise =
            decoherence_channel(a.t_gate, a.coh.t1_idle, a.coh.tphi_idle, a.t1_ef);
        ch.lru = lru_channel(a.residual_f, a.tau_lru, a.coh);
        ch.leak = leakage_injection_channel(a.p_leak);
    }
    const auto curves = run_rb(prim, a.depths, a.sequences, ch, seed, a.shots,
                               effective_threads(g));

    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < curves.n_cliffords.size(); ++i)
        rows.push_back({static_cast<double>(curves.n_cliffords[i]),
                        curves.p_g[i], curves.p_e[i], curves.p_f[i]});

    ManifestBuilder mf("rb", 0, seed);
    mf.add_file(emit_table(g, "rb", {"n_cliffords", "p_g", "p_e", "p_f"}, rows));
    if (curves.n_cliffords.size() >= 4) {
        try {
            const auto fit = fit_leakage_rb(curves);
            mf.j["fit"] = {{"lambda_1", fit.lambda_1},
                           {"lambda_L", fit.lambda_L},
                           {"l_inf", fit.l_inf},
                           {"p_f0", fit.p_f0},
                           {"residual_rms", fit.residual_rms}};
        } catch (const FitDiverged&) {
            mf.j["fit"] = "diverged";
        }
    }
    mf.write(g.out_dir);
    return 0;
}

// -------------------------------------------------------------- readout-calib

struct ReadoutArgs {
    int shots = 20000;
    double herald_target = 0.999;
};

CloudSpec reference_cloud() {
    CloudSpec spec;
    spec.means[0] = Eigen::Vector4d::Zero();
    spec.means[1] = Eigen::Vector4d(4.025348, 0.0, 0.0, 0.0);
    spec.means[2] = Eigen::Vector4d(3.335679, 3.055594, 0.0, 0.0);
    spec.covariance = Eigen::Matrix4d::Identity();
    return spec;
}

int cmd_readout_calib(const GlobalOpts& g, const ReadoutArgs& a) {
    const std::uint64_t seed = g.seed.value_or(1);
    const auto cloud = synthesize_shots(reference_cloud(),
                                        {a.shots, a.shots, a.shots}, seed);
    const auto lda = linear_discriminant(cloud);
    const auto conf = estimate_confusion(cloud, lda);
    const auto rule = herald_threshold(a.herald_target);
    const auto herald = herald_evaluate(lda, cloud, rule);

    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 3; ++i)
        rows.push_back({conf.m(i, 0), conf.m(i, 1), conf.m(i, 2)});

    ManifestBuilder mf("readout-calib", 0, seed);
    mf.add_file(emit_table(g, "confusion", {"from_g", "from_e", "from_f"}, rows));
    mf.j["assignment_fidelity"] = assignment_fidelity(conf);
    mf.j["herald_target"] = a.herald_target;
    mf.j["herald_acceptance"] = herald.acceptance_fraction;
    mf.j["herald_error"] = herald.post_selection_error;
    mf.write(g.out_dir);
    return 0;
}

// ------------------------------------------------------------ microwave-reset

struct MicrowaveArgs {
    double j = 0.1, g = 0.25, eta = -0.25, delta = -0.4;
    double omega = 0.1470782;
    int n_cells = 50;
};

int cmd_microwave_reset(const GlobalOpts& g, const MicrowaveArgs& a) {
    const auto est = microwave_reset_estimate(a.j, a.g, a.eta, a.delta,
                                              a.omega, a.n_cells);
    char line[96];
    std::snprintf(line, sizeof(line), "Gamma = %.6g MHz, FSR = %.6g MHz\n",
                  est.gamma * 1e3, est.fsr * 1e3);
    std::cout << line;
    ManifestBuilder mf("microwave-reset", 0, g.seed.value_or(0));
    mf.add_file(emit_table(g, "microwave_reset",
                           {"g_tilde_ghz", "gamma_ghz", "fsr_ghz"},
                           {{est.g_tilde, est.gamma, est.fsr}}));
    mf.write(g.out_dir);
    return 0;
}

void add_pulse_flags(CLI::App* cmd, FluxPulse& pulse) {
    cmd->add_option("--tau-buffer", pulse.tau_buffer, "edge buffer, ns");
    cmd->add_option("--sigma-filter", pulse.sigma_filter,
                    "Gaussian edge filter, ns");
    cmd->add_option("--dt-sample", pulse.dt_sample, "waveform step, ns");
    cmd->add_option("--phi-bias", pulse.phi_bias, "static flux bias, Phi0");
}

void add_lossy_flags(CLI::App* cmd, LossyModeParams& p) {
    cmd->add_option("--gl", p.g_l, "lossy-mode coupling, GHz");
    cmd->add_option("--fl", p.f_l, "lossy-mode frequency, GHz");
    cmd->add_option("--kappal", p.kappa_l, "lossy-mode linewidth, GHz");
    cmd->add_option("--pss", p.p_ss, "steady-state floor");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dissipative-bath qubit reset and leakage-removal toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "device config JSON");
    app.add_option("--out", g.out_dir, "output directory")->required();
    app.add_option("--threads", g.threads,
                   "worker threads (default: MMWG_THREADS env or 1)");
    std::uint64_t seed_opt = 0;
    auto* seed_flag =
        app.add_option("--seed", seed_opt, "seed override");
    app.add_option("--format", g.format, "numeric output format")
        ->check(CLI::IsMember({"csv", "json"}));

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand(
        "sweep-reset", "reset-error surface over (f_mod, phi_amplitude); "
                       "columns: f_mod_ghz,phi_a_phi0,error");
    c_sweep->add_option("--fmod-min", sweep.fmod_lo, "GHz");
    c_sweep->add_option("--fmod-max", sweep.fmod_hi, "GHz");
    c_sweep->add_option("--fmod-n", sweep.fmod_n, "grid points");
    c_sweep->add_option("--phia-min", sweep.phia_lo, "Phi0");
    c_sweep->add_option("--phia-max", sweep.phia_hi, "Phi0");
    c_sweep->add_option("--phia-n", sweep.phia_n, "grid points");
    c_sweep->add_option("--tau", sweep.tau, "pulse length, ns");
    c_sweep->add_option("--prepared", sweep.prepared,
                        "initial levels (0=g,1=e,2=f)");
    add_pulse_flags(c_sweep, sweep.pulse);

    LruArgs lru;
    auto* c_scan = app.add_subcommand(
        "lru-scan", "leakage-removal duration / residual over a grid; columns: "
                    "f_mod_ghz,phi_a_phi0,tau_lru_ns,p_f_min,residual_pe");
    c_scan->add_option("--fmod-min", lru.fmod_lo, "GHz");
    c_scan->add_option("--fmod-max", lru.fmod_hi, "GHz");
    c_scan->add_option("--fmod-n", lru.fmod_n, "grid points");
    c_scan->add_option("--phia-min", lru.phia_lo, "Phi0");
    c_scan->add_option("--phia-max", lru.phia_hi, "Phi0");
    c_scan->add_option("--phia-n", lru.phia_n, "grid points");
    c_scan->add_option("--tau-max", lru.tau_max, "ns");
    c_scan->add_option("--dtau", lru.dtau, "ns");
    c_scan->add_option("--backend", lru.backend, "analytic | full");
    add_lossy_flags(c_scan, lru.lossy);
    add_pulse_flags(c_scan, lru.pulse);

    auto* c_trace = app.add_subcommand(
        "lru-trace", "P_g/P_e/P_f vs on-time at one pulse setting; columns: "
                     "t_ns,p_g,p_e,p_f");
    c_trace->add_option("--f-mod", lru.f_mod, "GHz");
    c_trace->add_option("--phi-a", lru.phi_a, "Phi0");
    c_trace->add_option("--tau-max", lru.tau_max, "ns");
    c_trace->add_option("--dtau", lru.dtau, "ns");
    c_trace->add_option("--backend", lru.backend, "analytic | full");
    add_lossy_flags(c_trace, lru.lossy);
    add_pulse_flags(c_trace, lru.pulse);

    LzsArgs lzs;
    auto* c_lzs = app.add_subcommand(
        "lzs", "shelving survival vs pulse edge width; columns: "
               "sigma_ns,slope_ghz_per_ns,p_r");
    c_lzs->add_option("--g", lzs.g, "crossing coupling, GHz");
    c_lzs->add_option("--p0", lzs.p0, "initial population");
    c_lzs->add_option("--sigma", lzs.sigmas, "edge widths, ns");
    c_lzs->add_option("--tau", lzs.tau, "pulse length, ns");
    c_lzs->add_option("--buffer", lzs.buffer, "edge buffer, ns");
    c_lzs->add_option("--phi-a", lzs.phi_a, "pulse amplitude, Phi0");
    c_lzs->add_option("--f-cross", lzs.f_cross, "crossing frequency, GHz");

    RbArgs rb;
    auto* c_rb = app.add_subcommand(
        "rb", "qutrit randomized benchmarking with leakage; columns: "
              "n_cliffords,p_g,p_e,p_f");
    c_rb->add_option("--primitive", rb.primitive,
                     "reference | lru | leak-inject | leak-inject-lru");
    c_rb->add_option("--depths", rb.depths, "sequence lengths");
    c_rb->add_option("--sequences", rb.sequences, "random sequences per depth");
    c_rb->add_option("--shots", rb.shots, "shots per point (0 = exact)");
    c_rb->add_option("--t-gate", rb.t_gate, "Clifford duration, ns");
    c_rb->add_option("--residual-f", rb.residual_f, "LRU residual");
    c_rb->add_option("--tau-lru", rb.tau_lru, "LRU duration, ns");
    c_rb->add_option("--p-leak", rb.p_leak, "injected leakage per Clifford");
    c_rb->add_flag("--ideal", rb.ideal, "disable all noise channels");

    ReadoutArgs ro;
    auto* c_ro = app.add_subcommand(
        "readout-calib", "three-state discrimination calibration; columns: "
                         "from_g,from_e,from_f (assignment probabilities)");
    c_ro->add_option("--shots", ro.shots, "shots per prepared state");
    c_ro->add_option("--herald-target", ro.herald_target,
                     "ground-state posterior threshold");

    MicrowaveArgs mw;
    auto* c_mw = app.add_subcommand(
        "microwave-reset", "driven-reset rate estimate; columns: "
                           "g_tilde_ghz,gamma_ghz,fsr_ghz");
    c_mw->add_option("--j", mw.j, "hopping, GHz");
    c_mw->add_option("--g", mw.g, "atom-chain coupling, GHz");
    c_mw->add_option("--eta", mw.eta, "anharmonicity, GHz");
    c_mw->add_option("--delta", mw.delta, "detuning, GHz");
    c_mw->add_option("--omega", mw.omega, "drive amplitude, GHz");
    c_mw->add_option("--n-cells", mw.n_cells, "chain length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }
    if (*seed_flag) g.seed = seed_opt;

    try {
        fs::create_directories(g.out_dir);
        if (*c_sweep) return cmd_sweep_reset(g, sweep);
        if (*c_scan) return cmd_lru_scan(g, lru);
        if (*c_trace) return cmd_lru_trace(g, lru);
        if (*c_lzs) return cmd_lzs(g, lzs);
        if (*c_rb) return cmd_rb(g, rb);
        if (*c_ro) return cmd_readout_calib(g, ro);
        if (*c_mw) return cmd_microwave_reset(g, mw);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
