#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "mmwg/common.hpp"
#include "mmwg/model.hpp"

namespace mmwg {

// Uniformly sampled real-valued signal: flux in Phi0 or frequency in GHz,
// depending on provenance.
struct Waveform {
    double t0 = 0.0;   // ns
    double dt = 0.0;   // ns
    std::vector<double> samples;

    double duration() const { return dt * static_cast<double>(samples.size() - 1); }
    // Linear interpolation, clamped to the end samples.
    double at(double t) const;
};

// Fourier decomposition of the phase-modulated transition. coefficients are
// indexed m in [-max_order, max_order]; xi(m) multiplies exp(+i*2pi*m*f_mod*t).
struct SidebandSpectrum {
    double f_avg = 0.0;   // GHz, time-averaged transition frequency
    double f_mod = 0.0;   // GHz
    int max_order = 12;
    std::vector<cplx> coefficients;  // size 2*max_order+1, index m+max_order

    cplx xi(int m) const { return coefficients[static_cast<size_t>(m + max_order)]; }
    double power_sum() const;
};

// f_ge(Phi) for an asymmetric-SQUID transmon, smooth with period 1, maxima
// at integer flux and minima at half-integer flux.
double tuning_curve(const TransmonParams& transmon, double phi);

// Phi(t) = phi_bias + phi_amplitude * E(t) * sin(2 pi f_mod t), with E a unit
// square of length tau_pulse - 2 tau_buffer convolved with a Gaussian kernel
// (truncated at +-5 sigma, renormalized). f_mod = 0 gives the direct-flux
// square pulse: the sine factor is replaced by 1.
Waveform synthesize_pulse(const FluxPulse& pulse);

// The filtered envelope E(t) alone, in [0, 1].
Waveform synthesize_envelope(const FluxPulse& pulse);

Waveform instantaneous_frequency(const TransmonParams& transmon,
                                 const Waveform& flux);

// Steady-state sideband amplitudes of the flat-top modulation. Throws
// SidebandTruncation if the retained coefficients capture less than
// 1 - 1e-6 of the total power.
SidebandSpectrum sideband_spectrum(const TransmonParams& transmon,
                                   const FluxPulse& pulse, int max_order = 12);

// Sideband frequencies f_avg + (j-1)*eta + m*f_mod of the |j-1>-|j>
// transition, for every retained order m.
std::vector<std::pair<int, double>> transition_sideband_frequencies(
    const SidebandSpectrum& spectrum, const TransmonParams& transmon,
    int transition_j);

}  // namespace mmwg
