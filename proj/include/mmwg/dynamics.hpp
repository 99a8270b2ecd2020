#pragma once

#include <vector>

#include "mmwg/common.hpp"
#include "mmwg/flux.hpp"
#include "mmwg/hilbert.hpp"

namespace mmwg {

enum class EvolveMethod {
    NonHermitianVector,  // exact when jumps land in unmonitored vacuum (n_exc = 1)
    LindbladRK,          // full density matrix, fixed-step RK4 with halving check
    SectorCascade,       // pure top sector + density matrices per lower sector
};

struct QuantumState {
    enum class Rep { Vector, DensityMatrix };
    Rep representation = Rep::Vector;
    std::vector<cplx> amplitudes;  // vector, or row-major dim x dim matrix
    std::string basis_tag;

    static QuantumState basis_vector(const SystemOperators& sys,
                                     const BasisIndex& state);
    // Atom level j, waveguide vacuum.
    static QuantumState atom_level(const SystemOperators& sys, int level);
};

struct EvolutionResult {
    std::vector<double> times;  // ns
    std::vector<double> p_g;    // atom in g, waveguide empty
    std::vector<double> p_e;    // atom level 1, any photons
    std::vector<double> p_f;    // atom level 2, any photons
    std::vector<double> n_wg;   // expected photon number in the waveguide
    std::vector<double> leaked; // cumulative jump flux out of the system
    QuantumState final_state;

    double p_atom_ground_final() const;  // atom marginal, any photons
};

// Integrates the driven open system. The drive waveform is the qubit
// frequency shift in GHz relative to the static atom frequency baked into
// sys.h_static; it enters as 2*pi*drive(t) * h_qubit_detune. Evolution is
// performed in the frame rotating at total-excitation multiples of the band
// center, so only detunings are resolved.
EvolutionResult evolve(const SystemOperators& sys, const Waveform& drive,
                       const QuantumState& initial, EvolveMethod method,
                       double tol = 1e-8, int n_record = 512);

// Two-level Boltzmann occupation 1/(1 + exp(h f / kB T)).
double thermal_population(double f_ghz, double temperature_mk);

// Exact inverse of thermal_population; requires 0 < p_e < 0.5.
double temperature_from_population(double f_ghz, double p_e);

}  // namespace mmwg
