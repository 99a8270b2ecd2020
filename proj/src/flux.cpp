#include "mmwg/flux.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmwg {

double Waveform::at(double t) const {
    if (samples.empty()) return 0.0;
    const double x = (t - t0) / dt;
    if (x <= 0.0) return samples.front();
    const auto n = samples.size();
    if (x >= static_cast<double>(n - 1)) return samples.back();
    const auto i = static_cast<size_t>(x);
    const double frac = x - static_cast<double>(i);
    return samples[i] * (1.0 - frac) + samples[i + 1] * frac;
}

double SidebandSpectrum::power_sum() const {
    double s = 0.0;
    for (const auto& c : coefficients) s += std::norm(c);
    return s;
}

double tuning_curve(const TransmonParams& t, double phi) {
    // Period 1 in Phi0; reduce to the principal cell.
    phi -= std::round(phi);
    const double ec = -t.anharmonicity_eta;
    const double d = std::pow((t.f_ge_min + ec) / (t.f_ge_max + ec), 2);
    const double c = std::cos(M_PI * phi);
    const double s = std::sin(M_PI * phi);
    return (t.f_ge_max + ec) * std::pow(c * c + d * d * s * s, 0.25) - ec;
}

namespace {

// Filtered envelope evaluated by discrete convolution of the continuous unit
// square with a Gaussian kernel truncated at +-5 sigma and renormalized to
// unit sum. Bit-reproducible for identical inputs.
double envelope_value(const FluxPulse& p, double t) {
    const double lo = p.tau_buffer;
    const double hi = p.tau_pulse - p.tau_buffer;
    auto square = [&](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; };
    if (p.sigma_filter <= 0.0) return square(t);

    const double dk = std::min(p.dt_sample, p.sigma_filter / 10.0);
    const long k_max = std::lround(std::ceil(5.0 * p.sigma_filter / dk));
    double wsum = 0.0, acc = 0.0;
    for (long j = -k_max; j <= k_max; ++j) {
        const double x = static_cast<double>(j) * dk;
        const double w = std::exp(-0.5 * x * x / (p.sigma_filter * p.sigma_filter));
        wsum += w;
        acc += w * square(t - x);
    }
    return acc / wsum;
}

}  // namespace

Waveform synthesize_envelope(const FluxPulse& p) {
    Waveform w;
    w.t0 = 0.0;
    w.dt = p.dt_sample;
    const auto n = static_cast<size_t>(std::lround(p.tau_pulse / p.dt_sample)) + 1;
    w.samples.resize(n);
    if (p.sigma_filter <= 0.0) {
        for (size_t i = 0; i < n; ++i)
            w.samples[i] = envelope_value(p, static_cast<double>(i) * p.dt_sample);
        return w;
    }

    // The square input is an indicator, so each output sample is a kernel
    // partial sum; precompute the prefix sums once instead of re-walking the
    // kernel per sample.
    const double lo = p.tau_buffer;
    const double hi = p.tau_pulse - p.tau_buffer;
    const double dk = std::min(p.dt_sample, p.sigma_filter / 10.0);
    const long k_max = std::lround(std::ceil(5.0 * p.sigma_filter / dk));
    std::vector<double> prefix(static_cast<size_t>(2 * k_max + 2), 0.0);
    double wsum = 0.0;
    for (long j = -k_max; j <= k_max; ++j) {
        const double x = static_cast<double>(j) * dk;
        const double wk =
            std::exp(-0.5 * x * x / (p.sigma_filter * p.sigma_filter));
        wsum += wk;
        prefix[static_cast<size_t>(j + k_max + 1)] =
            prefix[static_cast<size_t>(j + k_max)] + wk;
    }
    // kernel offset x = j*dk contributes when t - x lands in [lo, hi]; the
    // boundary test evaluates t - j*dk directly so edge taps come and go
    // consistently as t advances across the sample grid
    auto inside = [&](double t, long j) {
        const double v = t - static_cast<double>(j) * dk;
        return v >= lo && v <= hi;
    };
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * p.dt_sample;
        long j_lo = std::max(
            -k_max, static_cast<long>(std::llround(std::ceil((t - hi) / dk))));
        long j_hi = std::min(
            k_max, static_cast<long>(std::llround(std::floor((t - lo) / dk))));
        while (j_lo - 1 >= -k_max && inside(t, j_lo - 1)) --j_lo;
        while (j_lo <= k_max && !inside(t, j_lo)) ++j_lo;
        while (j_hi + 1 <= k_max && inside(t, j_hi + 1)) ++j_hi;
        while (j_hi >= -k_max && !inside(t, j_hi)) --j_hi;
        w.samples[i] =
            j_hi < j_lo
                ? 0.0
                : (prefix[static_cast<size_t>(j_hi + k_max + 1)] -
                   prefix[static_cast<size_t>(j_lo + k_max)]) /
                      wsum;
    }
    return w;
}

Waveform synthesize_pulse(const FluxPulse& p) {
    Waveform w = synthesize_envelope(p);
    for (size_t i = 0; i < w.samples.size(); ++i) {
        const double t = static_cast<double>(i) * w.dt;
        const double carrier =
            p.f_mod == 0.0 ? 1.0 : std::sin(two_pi * p.f_mod * t);
        w.samples[i] = p.phi_bias + p.phi_amplitude * w.samples[i] * carrier;
    }
    return w;
}

Waveform instantaneous_frequency(const TransmonParams& t, const Waveform& flux) {
    Waveform out = flux;
    for (auto& s : out.samples) s = tuning_curve(t, s);
    return out;
}

SidebandSpectrum sideband_spectrum(const TransmonParams& transmon,
                                   const FluxPulse& pulse, int max_order) {
    if (pulse.phi_amplitude < 0.0)
        throw DomainError("sideband_spectrum requires phi_amplitude >= 0");
    if (pulse.f_mod <= 0.0)
        throw DomainError("sideband_spectrum requires f_mod > 0");

    SidebandSpectrum trivial;
    if (pulse.phi_amplitude == 0.0) {  // exact limit: unmodulated carrier
        trivial.f_avg = tuning_curve(transmon, pulse.phi_bias);
        trivial.f_mod = pulse.f_mod;
        trivial.max_order = max_order;
        trivial.coefficients.assign(static_cast<size_t>(2 * max_order + 1), 0.0);
        trivial.coefficients[static_cast<size_t>(max_order)] = 1.0;
        return trivial;
    }

    // Flat-top periodic modulation over one period; envelope edges are not
    // part of the steady-state spectrum.
    constexpr size_t n = 32768;
    const double period = 1.0 / pulse.f_mod;
    const double dt = period / static_cast<double>(n);

    std::vector<double> freq(n);
    for (size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double phi =
            pulse.phi_bias + pulse.phi_amplitude * std::sin(two_pi * pulse.f_mod * t);
        freq[k] = tuning_curve(transmon, phi);
    }
    const double f_avg =
        std::accumulate(freq.begin(), freq.end(), 0.0) / static_cast<double>(n);

    // phase(t) = integral of 2 pi (f(t') - f_avg) dt', trapezoid on the grid
    // (periodic, so the running integral closes to zero at t = period).
    std::vector<double> phase(n);
    phase[0] = 0.0;
    for (size_t k = 1; k < n; ++k)
        phase[k] = phase[k - 1] +
                   two_pi * 0.5 * ((freq[k - 1] - f_avg) + (freq[k] - f_avg)) * dt;

    SidebandSpectrum spec;
    spec.f_avg = f_avg;
    spec.f_mod = pulse.f_mod;
    spec.max_order = max_order;
    spec.coefficients.resize(static_cast<size_t>(2 * max_order + 1));
    for (int m = -max_order; m <= max_order; ++m) {
        cplx acc = 0.0;
        for (size_t k = 0; k < n; ++k) {
            const double ang =
                phase[k] - two_pi * static_cast<double>(m) * static_cast<double>(k) /
                               static_cast<double>(n);
            acc += cplx(std::cos(ang), std::sin(ang));
        }
        spec.coefficients[static_cast<size_t>(m + max_order)] =
            acc / static_cast<double>(n);
    }

    if (spec.power_sum() < 1.0 - 1e-6)
        throw SidebandTruncation(
            "sideband power below 1 - 1e-6 at requested max_order; increase it");
    return spec;
}

std::vector<std::pair<int, double>> transition_sideband_frequencies(
    const SidebandSpectrum& spectrum, const TransmonParams& transmon,
    int transition_j) {
    if (transition_j < 1 || transition_j >= transmon.levels_d)
        throw DomainError("transition_j outside the atom ladder");
    std::vector<std::pair<int, double>> out;
    out.reserve(spectrum.coefficients.size());
    const double center =
        spectrum.f_avg +
        static_cast<double>(transition_j - 1) * transmon.anharmonicity_eta;
    for (int m = -spectrum.max_order; m <= spectrum.max_order; ++m)
        out.emplace_back(m, center + static_cast<double>(m) * spectrum.f_mod);
    return out;
}

}  // namespace mmwg
