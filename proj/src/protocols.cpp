#include "mmwg/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mmwg/fit.hpp"
#include "mmwg/util.hpp"

namespace mmwg {

namespace {

double thermal_floor(const DeviceConfig& config, const FluxPulse& pulse) {
    const double f_idle = tuning_curve(config.transmon, pulse.phi_bias);
    return thermal_population(f_idle, config.thermal_temperature);
}

std::string utc_timestamp() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Drive waveform: qubit frequency shift relative to f_ge_max.
Waveform drive_from_pulse(const DeviceConfig& config, const FluxPulse& pulse) {
    Waveform drive = instantaneous_frequency(config.transmon,
                                             synthesize_pulse(pulse));
    for (double& s : drive.samples) s -= config.transmon.f_ge_max;
    return drive;
}

}  // namespace

std::vector<double> simulate_reset_trace(const DeviceConfig& config,
                                         const FluxPulse& pulse, int prepared,
                                         const std::vector<double>& tau_grid,
                                         double tol) {
    if (prepared < 0 || prepared >= config.transmon.levels_d)
        throw DomainError("simulate_reset_trace: prepared level outside ladder");
    const auto preport = validate(pulse);
    if (!preport.ok())
        throw ConfigError("simulate_reset_trace: invalid pulse (" +
                          preport.violations.front().path + ")");
    const int n_exc = prepared == 2 ? 2 : 1;
    const auto method = prepared == 2 ? EvolveMethod::SectorCascade
                                      : EvolveMethod::NonHermitianVector;
    const auto sys = assemble(config, n_exc);
    const auto init = QuantumState::atom_level(sys, prepared);
    const double floor = thermal_floor(config, pulse);

    std::vector<double> errors;
    errors.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        if (tau < 2.0 * pulse.tau_buffer)
            throw DomainError("simulate_reset_trace: tau below 2*tau_buffer");
        FluxPulse p = pulse;
        p.tau_pulse = tau;
        const auto r =
            evolve(sys, drive_from_pulse(config, p), init, method, tol, 64);
        // Ground population is the atom marginal: photons still draining
        // through the chain do not count against the reset.
        const double err = r.p_e.back() + r.p_f.back() + floor;
        errors.push_back(std::clamp(err, 0.0, 1.0));
    }
    return errors;
}

SweepResult sweep_reset(const DeviceConfig& config, const FluxPulse& pulse,
                        const std::vector<double>& f_mod_grid,
                        const std::vector<double>& phi_a_grid,
                        double tau_pulse,
                        const std::vector<int>& prepared_states,
                        int n_threads, double tol) {
    if (f_mod_grid.empty() || phi_a_grid.empty() || prepared_states.empty())
        throw DomainError("sweep_reset: grids must be nonempty");
    const auto t_start = std::chrono::steady_clock::now();

    SweepResult res;
    res.axis_f_mod = f_mod_grid;
    res.axis_phi_a = phi_a_grid;
    res.config_hash = config_hash(config);
    res.seed = config.rng_seed;
    res.timestamp = utc_timestamp();
    const size_t n_points = f_mod_grid.size() * phi_a_grid.size();
    res.status.assign(n_points, "ok");
    static const char* names[] = {"g", "e", "f"};
    for (int s : prepared_states) {
        if (s < 0 || s > 2) throw DomainError("sweep_reset: prepared state");
        res.prepared_states.push_back(names[s]);
        res.values.emplace_back(n_points, 1.0);
    }

    parallel_for(n_points, n_threads, [&](size_t idx) {
        const size_t i_phi = idx / f_mod_grid.size();
        const size_t i_f = idx % f_mod_grid.size();
        FluxPulse p = pulse;
        p.tau_pulse = tau_pulse;
        p.f_mod = f_mod_grid[i_f];
        p.phi_amplitude = phi_a_grid[i_phi];
        try {
            for (size_t k = 0; k < prepared_states.size(); ++k)
                res.values[k][idx] = simulate_reset_trace(
                    config, p, prepared_states[k], {tau_pulse}, tol)[0];
        } catch (const std::exception& e) {
            res.status[idx] = e.what();
        }
    });

    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    return res;
}

std::optional<double> tau_epsilon(const std::vector<double>& tau_grid,
                                  const std::vector<double>& errors,
                                  double epsilon) {
    if (tau_grid.size() != errors.size())
        throw DomainError("tau_epsilon: grid/trace size mismatch");
    std::optional<double> result;
    // walk backwards: the answer is the start of the final below-epsilon run
    for (size_t i = tau_grid.size(); i-- > 0;) {
        if (errors[i] < epsilon)
            result = tau_grid[i];
        else
            break;
    }
    return result;
}

double lru_analytic_pf(const LossyModeParams& params, cplx xi, double f_sb_ghz,
                       double t_ns) {
    if (t_ns < 0.0) throw DomainError("lru_analytic_pf: t must be >= 0");
    const double delta = two_pi * (f_sb_ghz - params.f_l);
    const double g_sb = two_pi * std::sqrt(2.0) * params.g_l * std::abs(xi);
    const double kappa = two_pi * params.kappa_l;
    const double gamma_ef = two_pi * params.gamma_ef;

    const cplx b = cplx((kappa + gamma_ef) / 2.0, delta);
    const cplx c = cplx(g_sb * g_sb + kappa * gamma_ef / 4.0,
                        delta * gamma_ef / 2.0);
    const cplx disc = std::sqrt(b * b - 4.0 * c);
    const cplx ap = (-b + disc) / 2.0;
    const cplx am = (-b - disc) / 2.0;

    // Amplitude solution of x'' + b x' + c x = 0 with x(0) = 1 and
    // x'(0) = -gamma_ef/2 (the bare |f> decay slope); reduces to the
    // symmetric two-root form when gamma_ef = 0.
    const cplx slope0 = cplx(-gamma_ef / 2.0, 0.0);
    cplx amp;
    if (std::abs(am - ap) < 1e-12) {  // degenerate-root limit
        const cplx a = (ap + am) / 2.0;
        amp = std::exp(a * t_ns) * (1.0 + (slope0 - a) * t_ns);
    } else {
        amp = ((slope0 - am) * std::exp(ap * t_ns) +
               (ap - slope0) * std::exp(am * t_ns)) /
              (ap - am);
    }
    return (1.0 - params.p_ss) * std::norm(amp) + params.p_ss;
}

LossyModeFit fit_lossy_mode(const std::vector<LruTrace>& traces,
                            const TransmonParams& transmon,
                            const FluxPulse& pulse_template, double gamma_ef,
                            std::uint64_t seed) {
    if (traces.empty())
        throw DomainError("fit_lossy_mode: need at least one trace");
    size_t n_points = 0;
    struct Prepared {
        cplx xi;
        double f_sb;
        const LruTrace* trace;
    };
    std::vector<Prepared> prep;
    for (const auto& tr : traces) {
        if (tr.t.size() < 10 || tr.t.size() != tr.p_f.size())
            throw DomainError("fit_lossy_mode: traces need >= 10 (t, p_f) points");
        FluxPulse p = pulse_template;
        p.phi_amplitude = tr.phi_a;
        p.f_mod = tr.f_mod;
        const auto spec = sideband_spectrum(transmon, p);
        // m = -2 sideband of the e-f transition
        prep.push_back({spec.xi(-2),
                        spec.f_avg + transmon.anharmonicity_eta - 2.0 * tr.f_mod,
                        &tr});
        n_points += tr.t.size();
    }
    double f_center = 0.0;
    for (const auto& p : prep) f_center += p.f_sb;
    f_center /= static_cast<double>(prep.size());

    auto rms = [&](const std::vector<double>& x) {
        LossyModeParams lm;
        lm.g_l = x[0];
        lm.f_l = x[1];
        lm.kappa_l = x[2];
        lm.p_ss = x[3];
        lm.gamma_ef = gamma_ef;
        double ss = 0.0;
        for (const auto& p : prep)
            for (size_t i = 0; i < p.trace->t.size(); ++i) {
                const double d = lru_analytic_pf(lm, p.xi, p.f_sb,
                                                 p.trace->t[i]) -
                                 p.trace->p_f[i];
                ss += d * d;
            }
        return std::sqrt(ss / static_cast<double>(n_points));
    };

    const std::vector<std::pair<double, double>> bounds = {
        {1e-4, 0.2},                      // g_l
        {f_center - 0.3, f_center + 0.3}, // f_l near the sideband comb
        {1e-4, 0.1},                      // kappa_l
        {0.0, 0.02},                      // p_ss
    };
    const auto fit = minimize(rms, bounds, 8, seed);
    if (fit.objective > 0.05)
        throw FitDiverged("fit_lossy_mode: residual RMS above 0.05");
    LossyModeFit out;
    out.params.g_l = fit.params[0];
    out.params.f_l = fit.params[1];
    out.params.kappa_l = fit.params[2];
    out.params.p_ss = fit.params[3];
    out.params.gamma_ef = gamma_ef;
    out.residual_rms = fit.objective;
    return out;
}

namespace {

// First interior local minimum of a sampled trace; nullopt if monotone.
std::optional<size_t> first_local_min(const std::vector<double>& y) {
    for (size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] < y[i - 1] && y[i] <= y[i + 1]) return i;
    return std::nullopt;
}

}  // namespace

LruScanResult lru_scan(const DeviceConfig& config, const FluxPulse& pulse,
                       const std::vector<double>& f_mod_grid,
                       const std::vector<double>& phi_a_grid,
                       const LossyModeParams& lossy, LruBackend backend,
                       double tau_max, double dtau, int n_threads) {
    if (f_mod_grid.empty() || phi_a_grid.empty())
        throw DomainError("lru_scan: grids must be nonempty");
    LruScanResult res;
    res.axis_f_mod = f_mod_grid;
    res.axis_phi_a = phi_a_grid;
    res.points.assign(f_mod_grid.size() * phi_a_grid.size(), {});

    const size_t n_tau =
        static_cast<size_t>(std::floor(tau_max / dtau)) + 1;

    parallel_for(res.points.size(), n_threads, [&](size_t idx) {
        auto& pt = res.points[idx];
        const double f_mod = f_mod_grid[idx % f_mod_grid.size()];
        const double phi_a = phi_a_grid[idx / f_mod_grid.size()];
        try {
            FluxPulse p = pulse;
            p.f_mod = f_mod;
            p.phi_amplitude = phi_a;

            std::vector<double> taus(n_tau), pf(n_tau);
            for (size_t i = 0; i < n_tau; ++i)
                taus[i] = static_cast<double>(i) * dtau;

            if (backend == LruBackend::Analytic) {
                const auto spec = sideband_spectrum(config.transmon, p);
                const cplx xi = spec.xi(-2);
                const double f_sb = spec.f_avg +
                                    config.transmon.anharmonicity_eta -
                                    2.0 * f_mod;
                for (size_t i = 0; i < n_tau; ++i)
                    pf[i] = lru_analytic_pf(lossy, xi, f_sb, taus[i]);
                const auto imin = first_local_min(pf);
                if (!imin) return;  // marked absent
                pt.has_minimum = true;
                pt.tau_lru = taus[*imin];
                pt.p_f_min = pf[*imin];
                // prepared-e survival: g-e m=-2 sideband against the same mode
                pt.residual_pe = damped_rabi(
                    lossy.g_l * std::abs(xi),
                    (spec.f_avg - 2.0 * f_mod) - lossy.f_l, lossy.kappa_l,
                    pt.tau_lru);
            } else {
                // One flat-top evolution recorded on the tau grid stands in
                // for the per-tau endpoint sweep.
                p.tau_pulse = tau_max + 2.0 * p.tau_buffer;
                const auto sys = assemble(config, 2);
                const auto r = evolve(sys, drive_from_pulse(config, p),
                                      QuantumState::atom_level(sys, 2),
                                      EvolveMethod::SectorCascade, 1e-7,
                                      static_cast<int>(n_tau));
                for (size_t i = 0; i < n_tau; ++i) pf[i] = r.p_f[i];
                const auto imin = first_local_min(pf);
                if (!imin) return;
                pt.has_minimum = true;
                pt.tau_lru = r.times[*imin];
                pt.p_f_min = pf[*imin];
                FluxPulse pe = p;
                pe.tau_pulse = std::max(pt.tau_lru, 2.0 * p.tau_buffer);
                const auto sys1 = assemble(config, 1);
                const auto re = evolve(sys1, drive_from_pulse(config, pe),
                                       QuantumState::atom_level(sys1, 1),
                                       EvolveMethod::NonHermitianVector, 1e-7,
                                       64);
                pt.residual_pe = re.p_e.back();
            }
        } catch (const std::exception& e) {
            pt.status = e.what();
        }
    });
    return res;
}

double t1_under_modulation(const SidebandSpectrum& spectrum,
                           const WaveguideParams& wg, double gamma_0_ghz) {
    double in_band = 0.0;
    for (int m = -spectrum.max_order; m <= spectrum.max_order; ++m) {
        const double f = spectrum.f_avg + static_cast<double>(m) * spectrum.f_mod;
        if (f >= wg.band_lo() && f <= wg.band_hi())
            in_band += std::norm(spectrum.xi(m));
    }
    const double gamma_tot = gamma_0_ghz + wg.gamma_1d * in_band;
    if (gamma_tot <= 0.0)
        throw DomainError("t1_under_modulation: nonpositive total rate");
    return 1.0 / (two_pi * gamma_tot) / 1000.0;  // ns -> us
}

double tphi_from_t2(double t1_us, double t2_star_us) {
    if (t1_us <= 0.0 || t2_star_us <= 0.0)
        throw DomainError("tphi_from_t2: times must be positive");
    if (t2_star_us >= 2.0 * t1_us)
        throw DomainError("tphi_from_t2: T2* must be below 2*T1");
    return 1.0 / (1.0 / t2_star_us - 1.0 / (2.0 * t1_us));
}

double lru_infidelity(double tau_lru_ns, double tau_buffer_total_ns,
                      const CoherenceSet& coh) {
    if (tau_lru_ns < tau_buffer_total_ns)
        throw DomainError("lru_infidelity: tau_lru below total buffer time");
    const double idle = (tau_buffer_total_ns / 3.0) *
                        (1.0 / (coh.t1_idle * 1000.0) +
                         1.0 / (coh.tphi_idle * 1000.0));
    const double mod = ((tau_lru_ns - tau_buffer_total_ns) / 3.0) *
                       (1.0 / (coh.t1_mod * 1000.0) +
                        1.0 / (coh.tphi_mod * 1000.0));
    return idle + mod;
}

double lzs_survival(double g_ghz, double slope_ghz_per_ns, double p0) {
    if (slope_ghz_per_ns <= 0.0)
        throw DomainError("lzs_survival: slope must be > 0");
    // Gamma = (2 pi g)^2 / (2 pi * slope): one 2 pi survives.
    const double big_gamma = two_pi * g_ghz * g_ghz / slope_ghz_per_ns;
    const double p_dia = std::exp(-two_pi * big_gamma);
    return p0 * (1.0 - p_dia) * (1.0 - p_dia);
}

double crossing_slope(const TransmonParams& transmon, const FluxPulse& pulse,
                      double f_cross_ghz) {
    FluxPulse p = pulse;
    p.f_mod = 0.0;                       // direct-flux pulse
    p.dt_sample = pulse.dt_sample / 10.0;  // refine near the edge
    const auto freq = instantaneous_frequency(transmon, synthesize_pulse(p));

    // Search the rising edge (first half of the pulse) for the crossing.
    const size_t n_half = freq.samples.size() / 2;
    for (size_t i = 1; i < n_half; ++i) {
        const double a = freq.samples[i - 1] - f_cross_ghz;
        const double b = freq.samples[i] - f_cross_ghz;
        if (a == 0.0 || a * b < 0.0) {
            if (i + 1 >= freq.samples.size())
                break;
            // central difference; for a sigma = 0 step this is the
            // discretization-bounded sentinel |df| / (2 dt)
            return std::abs(freq.samples[i + 1] - freq.samples[i - 1]) /
                   (2.0 * freq.dt);
        }
    }
    throw NoCrossing("crossing_slope: pulse edge does not traverse f_cross");
}

double damped_rabi(double g_ghz, double delta_ghz, double kappa_ghz,
                   double t_ns) {
    LossyModeParams lm;
    lm.g_l = g_ghz;
    lm.f_l = 0.0;
    lm.kappa_l = kappa_ghz;
    lm.p_ss = 0.0;
    lm.gamma_ef = 0.0;
    // xi = 1/sqrt(2) cancels the sqrt(2) ladder factor: g_sb = g exactly.
    return lru_analytic_pf(lm, cplx(1.0 / std::sqrt(2.0), 0.0), delta_ghz,
                           t_ns);
}

MicrowaveResetEstimate microwave_reset_estimate(double j_ghz, double g_ghz,
                                                double eta_ghz,
                                                double delta_ghz,
                                                double omega_drive_ghz,
                                                int n_cells) {
    if (j_ghz <= 0.0 || n_cells < 2)
        throw DomainError("microwave_reset_estimate: need J > 0 and N >= 2");
    if (std::abs(delta_ghz) < 1e-12 || std::abs(delta_ghz + eta_ghz) < 1e-12)
        throw SingularDetuning("microwave_reset_estimate: Delta and "
                               "Delta + eta must be nonzero");
    MicrowaveResetEstimate out;
    out.g_tilde = (1.0 / std::sqrt(2.0)) * eta_ghz * omega_drive_ghz * g_ghz /
                  (delta_ghz * (delta_ghz + eta_ghz));
    out.gamma = out.g_tilde * out.g_tilde / j_ghz;
    out.fsr = 4.0 * j_ghz / static_cast<double>(n_cells);
    return out;
}

void save_sweep_result(const SweepResult& result, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<std::vector<double>> axes;
    for (size_t i = 0; i < result.axis_f_mod.size(); ++i)
        axes.push_back({0.0, static_cast<double>(i), result.axis_f_mod[i]});
    for (size_t i = 0; i < result.axis_phi_a.size(); ++i)
        axes.push_back({1.0, static_cast<double>(i), result.axis_phi_a[i]});
    for (size_t i = 0; i < result.axis_tau.size(); ++i)
        axes.push_back({2.0, static_cast<double>(i), result.axis_tau[i]});
    write_csv(dir + "/axes.csv", {"axis_id", "index", "value"}, axes);

    nlohmann::json manifest;
    manifest["config_hash"] = result.config_hash;
    manifest["seed"] = result.seed;
    manifest["timestamp"] = result.timestamp;
    manifest["wall_seconds"] = result.wall_seconds;
    manifest["axes"] = {{"0", "f_mod_ghz"}, {"1", "phi_a_phi0"}, {"2", "tau_ns"}};
    manifest["files"] = nlohmann::json::array();
    manifest["files"].push_back("axes.csv");

    for (size_t k = 0; k < result.prepared_states.size(); ++k) {
        std::vector<std::vector<double>> rows;
        for (size_t ip = 0; ip < result.axis_phi_a.size(); ++ip)
            for (size_t jf = 0; jf < result.axis_f_mod.size(); ++jf) {
                const size_t idx = ip * result.axis_f_mod.size() + jf;
                rows.push_back({result.axis_f_mod[jf], result.axis_phi_a[ip],
                                result.values[k][idx]});
            }
        const std::string name = "values_" + result.prepared_states[k] + ".csv";
        write_csv(dir + "/" + name, {"f_mod_ghz", "phi_a_phi0", "error"}, rows);
        manifest["files"].push_back(name);
    }

    int n_failed = 0;
    for (const auto& s : result.status)
        if (s != "ok") ++n_failed;
    manifest["points_failed"] = n_failed;
    manifest["points_total"] = result.status.size();

    std::ofstream mf(dir + "/manifest.json");
    if (!mf) throw DomainError("cannot write manifest in " + dir);
    mf << manifest.dump(2) << "\n";
}

}  // namespace mmwg
