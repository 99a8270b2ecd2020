#pragma once

#include <complex>
#include <stdexcept>
#include <string>

// Unit conventions used throughout:
//   frequencies  : ordinary frequencies in GHz (the "/2pi" values)
//   times        : ns (coherence times in config files are us and converted
//                  at the point of use)
//   rates        : GHz, same /2pi convention as frequencies; exponential
//                  decay of a population at rate r is exp(-2*pi*r*t)
//   flux         : units of the flux quantum Phi0
//   temperature  : mK
// Angular quantities (rad/ns) appear only inside Hamiltonian assembly and
// closed-form expressions; hbar = 1.

namespace mmwg {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// h * (1 GHz) / kB, in mK.
inline constexpr double hf_over_kb_mk_per_ghz = 47.992430733662;

using cplx = std::complex<double>;

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SidebandTruncation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ToleranceNotMet : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FrameAliasing : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutOfBand : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoCrossing : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularDetuning : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FitDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mmwg
