#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mmwg/common.hpp"
#include "mmwg/protocols.hpp"

namespace mmwg {

using Matrix3c = Eigen::Matrix3cd;
using Matrix9c = Eigen::Matrix<cplx, 9, 9>;

// CPTP map on qutrit density matrices, stored as the column-stacked 9x9
// superoperator: vec(E(rho)) = s * vec(rho).
struct QutritChannel {
    Matrix9c s = Matrix9c::Identity();

    Eigen::Matrix3cd apply(const Eigen::Matrix3cd& rho) const;
    QutritChannel then(const QutritChannel& next) const;  // next o this
};

QutritChannel channel_from_unitary(const Matrix3c& u);
QutritChannel channel_from_kraus(const std::vector<Matrix3c>& kraus);

struct CptpReport {
    double trace_deviation = 0.0;   // max |(S^dag vec I - vec I)|
    double min_choi_eigenvalue = 0.0;
    bool ok(double trace_tol = 1e-10, double choi_tol = -1e-10) const {
        return trace_deviation < trace_tol && min_choi_eigenvalue > choi_tol;
    }
};

CptpReport check_cptp(const QutritChannel& c);

// The 24 single-qubit Cliffords on the g-e block, identity on |f>. Closed
// under multiplication up to global phase; element 0 is the identity.
std::vector<Matrix3c> clifford_set();

// Index of the set element equal to u up to global phase; -1 if none.
int find_clifford(const std::vector<Matrix3c>& set, const Matrix3c& u);

// Amplitude damping e->g (1/t1) and f->e (1/t1_ef) plus pure dephasing of
// both neighboring coherences (1/tphi) over t_gate.
QutritChannel decoherence_channel(double t_gate_ns, double t1_us,
                                  double tphi_us, double t1_ef_us);

// Coherent partial e<->f rotation with sin^2(theta/2) = p_leak.
QutritChannel leakage_injection_channel(double p_leak);

// f-population routed to e with survival residual_f, with modulated-frame
// decoherence on the g-e block over the operation duration.
QutritChannel lru_channel(double residual_f, double tau_lru_ns,
                          const CoherenceSet& coh_mod);

enum class RBPrimitive { Reference, Lru, LeakInject, LeakInjectLru };

struct RBCurves {
    std::vector<int> n_cliffords;
    std::vector<double> p_g, p_e, p_f;  // sequence-averaged populations
    int n_sequences = 0;
    int n_shots = 0;  // 0 = exact populations, no shot sampling
    std::uint64_t seed = 0;
};

// Per-Clifford noise plus the optional interleaved primitive channels.
struct RBChannelSet {
    QutritChannel clifford_noise;  // applied with every Clifford
    QutritChannel lru;
    QutritChannel leak;
};

RBCurves run_rb(RBPrimitive primitive, const std::vector<int>& depths,
                int n_sequences, const RBChannelSet& channels,
                std::uint64_t seed, int n_shots = 0, int n_threads = 1);

struct LeakageRBFit {
    double a = 0.0, b = 0.0, c = 0.0;
    double lambda_1 = 1.0;  // depolarizing decay of the g-e block
    double lambda_L = 1.0;  // leakage decay
    double l_inf = 0.0;     // steady-state leakage
    double p_f0 = 0.0;
    double residual_rms = 0.0;
};

// P_f(n) = l_inf (1 - lambda_L^n) + P_f(0) lambda_L^n, then
// P_g(n) = a + b lambda_1^n + c lambda_L^n with lambda_L held fixed.
LeakageRBFit fit_leakage_rb(const RBCurves& curves);

// r = (1 - lambda_1^int / lambda_1^ref) (d - 1) / d with d = 2.
double irb_infidelity(const LeakageRBFit& ref_fit,
                      const LeakageRBFit& interleaved_fit);

}  // namespace mmwg
