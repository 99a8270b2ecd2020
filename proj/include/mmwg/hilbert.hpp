#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "mmwg/common.hpp"
#include "mmwg/model.hpp"

namespace mmwg {

// One basis state of the excitation-truncated space. photon_occupations is
// sparse: (mode index, occupation) pairs sorted by mode index, zeros omitted.
struct BasisIndex {
    int atom_level = 0;
    std::vector<std::pair<int, int>> photon_occupations;
    int total_excitations = 0;

    int occupation(int mode) const;
    bool operator==(const BasisIndex& other) const {
        return atom_level == other.atom_level &&
               photon_occupations == other.photon_occupations;
    }
};

// Coordinate-format sparse matrix. Hamiltonians stored here are in angular
// units (rad/ns); collapse-operator matrices are dimensionless, with rates
// carried separately in GHz.
struct SparseOperator {
    int dim = 0;
    struct Entry {
        int row, col;
        cplx value;
    };
    std::vector<Entry> entries;

    // y += alpha * A * x
    void apply(const cplx* x, cplx* y, cplx alpha = 1.0) const;
    std::vector<std::vector<cplx>> dense() const;
    double max_hermiticity_defect() const;
};

struct SystemOperators {
    SparseOperator h_static;        // angular, rotating-frame-agnostic
    SparseOperator h_qubit_detune;  // diagonal, sum_j j |j><j| in the basis
    std::vector<std::pair<SparseOperator, double>> collapse_ops;  // (op, rate GHz)
    std::vector<BasisIndex> basis;
    int n_modes = 0;  // chain cells (+1 if the readout resonator is enabled)
    int levels_d = 2;
};

// All states with total excitations <= n_exc, in deterministic order:
// lexicographic by (total_excitations, atom_level, occupation pattern).
std::vector<BasisIndex> enumerate_basis(int d, int n_modes, int n_exc,
                                        std::size_t capacity = 2000000);

std::size_t index_of(const std::vector<BasisIndex>& basis, const BasisIndex& s);

// Sparse Hamiltonian and collapse operators for atom + open chain
// (+ optional readout resonator): Duffing ladder, nearest-neighbor hopping,
// exchange coupling sqrt(j)*g_uc at the coupling site, photon loss on the
// two end cells.
SystemOperators assemble(const DeviceConfig& config, int n_exc);

struct ChainMode {
    double frequency;              // GHz
    std::vector<double> amplitude; // orthonormal mode vector over cells
};

// Open-chain eigenmodes f_k = f_cell + 2J cos(k pi/(N+1)), sorted ascending.
std::vector<ChainMode> chain_eigenmodes(const WaveguideParams& wg);

// Band-center free spectral range estimate, 4J/N.
double free_spectral_range(const WaveguideParams& wg);

// Energy decay rate (returned /2pi, in GHz) of an LC cell capacitively
// loaded by an external resistance: kappa = omega0^2 * Z * Cc^2 / Ctot.
double taper_kappa(double f0_ghz, double c_coupling_ff, double c_total_ff,
                   double z_env_ohm);

// Round trip time 2N / |d omega/dk| at frequency f inside the passband.
double round_trip_time(const WaveguideParams& wg, double f_ghz);

}  // namespace mmwg
