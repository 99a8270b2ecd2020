#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmwg/common.hpp"

namespace mmwg {

// Flux-tunable transmon, parameterized by its two sweet-spot frequencies.
// The SQUID asymmetry is implicit in (f_ge_max, f_ge_min).
struct TransmonParams {
    double f_ge_max = 7.63;          // GHz, upper sweet-spot g-e transition
    double f_ge_min = 3.78;          // GHz, lower sweet-spot
    double anharmonicity_eta = -0.179;  // GHz, negative
    int levels_d = 3;                // atom ladder truncation
    double t1_idle_ge = 12.0;        // us
    double t1_idle_ef = 4.7;         // us
    double tphi_idle = 7.3;          // us
};

// Coupled-resonator chain with damped end cells. gamma_1d is the calibrated
// in-band emission rate used by the sideband-sum relaxation model; it is an
// input, not derived from the chain microscopics.
struct WaveguideParams {
    int n_cells = 52;
    double f_cell = 6.0;             // GHz
    double hopping_J = 0.5;          // GHz
    int coupling_site_x0 = 26;       // 1-based cell index
    double g_uc = 0.1;               // GHz, atom-unit-cell coupling
    double kappa_left = 0.1;         // GHz
    double kappa_right = 0.1;        // GHz
    double gamma_1d = 0.07;          // GHz

    double band_lo() const { return f_cell - 2.0 * hopping_J; }
    double band_hi() const { return f_cell + 2.0 * hopping_J; }
};

// Parametric flux modulation pulse. phi_bias = 0 is the upper sweet spot,
// 0.5 the lower one. With f_mod = 0 the same shape describes the direct-flux
// square pulse (the envelope replaces the sine).
struct FluxPulse {
    double phi_amplitude = 0.0;      // Phi0
    double f_mod = 0.0;              // GHz
    double tau_pulse = 104.0;        // ns
    double tau_buffer = 2.0;         // ns
    double sigma_filter = 1.0;       // ns
    double dt_sample = 0.01;         // ns
    double phi_bias = 0.0;           // Phi0
};

// Optional lumped readout resonator, coupled to the atom and one chain cell.
struct ReadoutResonatorParams {
    bool enabled = false;
    double f_r = 7.3;                // GHz
    double g_qr = 0.05;              // GHz
    double g_wr = 0.05;              // GHz
};

struct DeviceConfig {
    TransmonParams transmon;
    WaveguideParams waveguide;
    ReadoutResonatorParams readout_resonator;
    double thermal_temperature = 43.0;  // mK
    std::uint64_t rng_seed = 1;
};

struct Violation {
    std::string path;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Pure, deterministic. An empty report guarantees every downstream
// constructor accepts the config.
ValidationReport validate(const DeviceConfig& config);
ValidationReport validate(const FluxPulse& pulse);

// JSON config ingestion. Unknown keys anywhere in the document are errors.
DeviceConfig load_config(const std::string& path);
DeviceConfig parse_config(const std::string& json_text);

// Stable content hash of a config, invariant under key reordering in the
// source file (hashes a canonical serialization).
std::uint64_t config_hash(const DeviceConfig& config);

std::string canonical_json(const DeviceConfig& config);

}  // namespace mmwg
