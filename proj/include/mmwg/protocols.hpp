#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmwg/common.hpp"
#include "mmwg/dynamics.hpp"
#include "mmwg/flux.hpp"
#include "mmwg/model.hpp"

namespace mmwg {

// Gridded reset-error / population surfaces. Value grids are row-major with
// phi_a as the slow axis: values[state][i_phi * n_fmod + i_fmod].
struct SweepResult {
    std::vector<double> axis_f_mod;   // GHz
    std::vector<double> axis_phi_a;   // Phi0
    std::vector<double> axis_tau;     // ns, may be empty
    std::vector<std::string> prepared_states;
    std::vector<std::vector<double>> values;  // one grid per prepared state
    std::vector<std::string> status;          // per grid point, "ok" or reason
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string timestamp;
    double wall_seconds = 0.0;
};

// Writes axes.csv, values_<state>.csv and manifest.json into dir.
void save_sweep_result(const SweepResult& result, const std::string& dir);

struct LossyModeParams {
    double g_l = 0.0467;      // GHz, bare coupling to the lossy mode
    double f_l = 6.93;        // GHz
    double kappa_l = 0.0176;  // GHz
    double p_ss = 0.0015;     // steady-state floor
    double gamma_ef = 0.0;    // GHz, bare f-state relaxation (1/(2 pi T1_ef))
};

struct CoherenceSet {
    double t1_idle = 12.0;   // us
    double tphi_idle = 7.3;  // us
    double t1_mod = 3.3;     // us
    double tphi_mod = 3.7;   // us
};

// Reset error 1 - P_g at the end of a tau_pulse-long pulse, for each tau in
// the grid, plus the analytic thermal floor. prepared is the atom level
// (0 = g, 1 = e, 2 = f; the f case runs the two-excitation cascade).
std::vector<double> simulate_reset_trace(const DeviceConfig& config,
                                         const FluxPulse& pulse, int prepared,
                                         const std::vector<double>& tau_grid,
                                         double tol = 1e-7);

SweepResult sweep_reset(const DeviceConfig& config, const FluxPulse& pulse,
                        const std::vector<double>& f_mod_grid,
                        const std::vector<double>& phi_a_grid,
                        double tau_pulse,
                        const std::vector<int>& prepared_states,
                        int n_threads = 1, double tol = 1e-7);

// Smallest grid tau such that every error at tau' >= tau is < epsilon;
// nullopt if the tail is not uniformly below epsilon.
std::optional<double> tau_epsilon(const std::vector<double>& tau_grid,
                                  const std::vector<double>& errors,
                                  double epsilon);

// Closed-form |f> population of the single-lossy-mode model: qubit e-f
// sideband of amplitude xi at frequency f_sb against a mode at f_l with
// linewidth kappa_l. P_f(0) = 1.
double lru_analytic_pf(const LossyModeParams& params, cplx xi, double f_sb_ghz,
                       double t_ns);

struct LruTrace {
    double f_mod = 0.0;   // GHz
    double phi_a = 0.0;   // Phi0
    std::vector<double> t;    // ns
    std::vector<double> p_f;
};

struct LossyModeFit {
    LossyModeParams params;
    double residual_rms = 0.0;
};

// Least-squares fit of (g_l, f_l, kappa_l, p_ss) to one or more P_f traces;
// gamma_ef is held fixed. Deterministic multistart simplex.
LossyModeFit fit_lossy_mode(const std::vector<LruTrace>& traces,
                            const TransmonParams& transmon,
                            const FluxPulse& pulse_template, double gamma_ef,
                            std::uint64_t seed = 12345);

struct LruScanPoint {
    bool has_minimum = false;
    double tau_lru = 0.0;      // ns, valid when has_minimum
    double p_f_min = 1.0;
    double residual_pe = 1.0;  // prepared-e survival at tau_lru
    std::string status = "ok";
};

enum class LruBackend { Analytic, FullDynamics };

struct LruScanResult {
    std::vector<double> axis_f_mod;
    std::vector<double> axis_phi_a;
    std::vector<LruScanPoint> points;  // row-major, phi_a slow
};

// Per grid point: first local minimum of the prepared-f P_f(tau) trace
// (tau_LRU, absent if the trace is monotone) and the prepared-e survival at
// that duration. The analytic backend uses the single-lossy-mode closed form
// with the m = -2 sideband; the full backend runs the dynamics.
LruScanResult lru_scan(const DeviceConfig& config, const FluxPulse& pulse,
                       const std::vector<double>& f_mod_grid,
                       const std::vector<double>& phi_a_grid,
                       const LossyModeParams& lossy, LruBackend backend,
                       double tau_max = 100.0, double dtau = 1.0,
                       int n_threads = 1);

// Sideband-sum relaxation: 1 / (gamma_0 + Gamma_1D * sum of in-band
// |xi_m|^2), returned in us.
double t1_under_modulation(const SidebandSpectrum& spectrum,
                           const WaveguideParams& wg, double gamma_0_ghz);

// T_phi from (T2*)^-1 = (2 T1)^-1 + T_phi^-1, all us.
double tphi_from_t2(double t1_us, double t2_star_us);

// Segmented coherence-limit infidelity: buffers at idle coherence, on-time
// at modulated coherence.
double lru_infidelity(double tau_lru_ns, double tau_buffer_total_ns,
                      const CoherenceSet& coh);

// Two-passage Landau-Zener shelving survival P_R = p0 (1 - P_dia)^2.
double lzs_survival(double g_ghz, double slope_ghz_per_ns, double p0);

// |df/dt| where the rising edge of a direct (unmodulated) flux pulse sweeps
// the transition through f_cross.
double crossing_slope(const TransmonParams& transmon, const FluxPulse& pulse,
                      double f_cross_ghz);

// Damped-Rabi survival probability; specialization of lru_analytic_pf with
// gamma_ef = 0, p_ss = 0.
double damped_rabi(double g_ghz, double delta_ghz, double kappa_ghz,
                   double t_ns);

struct MicrowaveResetEstimate {
    double g_tilde;  // GHz
    double gamma;    // GHz
    double fsr;      // GHz
};

MicrowaveResetEstimate microwave_reset_estimate(double j_ghz, double g_ghz,
                                                double eta_ghz,
                                                double delta_ghz,
                                                double omega_drive_ghz,
                                                int n_cells);

}  // namespace mmwg
