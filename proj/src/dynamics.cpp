#include "mmwg/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

namespace mmwg {

QuantumState QuantumState::basis_vector(const SystemOperators& sys,
                                        const BasisIndex& state) {
    QuantumState q;
    q.representation = Rep::Vector;
    q.amplitudes.assign(sys.basis.size(), 0.0);
    q.amplitudes[index_of(sys.basis, state)] = 1.0;
    return q;
}

QuantumState QuantumState::atom_level(const SystemOperators& sys, int level) {
    BasisIndex s;
    s.atom_level = level;
    s.total_excitations = level;
    return basis_vector(sys, s);
}

double EvolutionResult::p_atom_ground_final() const {
    return p_g.empty() ? 0.0 : p_g.back() + leaked.back();
}

namespace {

using State = std::vector<cplx>;
using Deriv = std::function<void(double, const State&, State&)>;

// Dormand-Prince 5(4) with max-abs local error control.
void integrate_adaptive(const Deriv& f, State& y, double t0, double t1,
                        double tol, double dt_max,
                        const std::function<void(double, const State&)>& record,
                        const std::vector<double>& record_times) {
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const size_t n = y.size();
    State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y5(n);
    double t = t0;
    double dt = std::min(dt_max, (t1 - t0) / 10.0);
    size_t next_rec = 0;
    while (next_rec < record_times.size() && record_times[next_rec] <= t0 + 1e-12) {
        record(record_times[next_rec], y);
        ++next_rec;
    }

    int rejects_in_a_row = 0;
    while (t < t1 - 1e-12) {
        double target = t1;
        if (next_rec < record_times.size())
            target = std::min(target, record_times[next_rec]);
        double h = std::min(dt, target - t);

        f(t, y, k1);
        for (size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        f(t + c2 * h, ytmp, k2);
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, ytmp, k3);
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, ytmp, k4);
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] +
                                  a54 * k4[i]);
        f(t + c5 * h, ytmp, k5);
        for (size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                                  a64 * k4[i] + a65 * k5[i]);
        f(t + h, ytmp, k6);
        for (size_t i = 0; i < n; ++i)
            y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                                b5 * k5[i] + b6 * k6[i]);
        f(t + h, y5, k7);

        double err = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const cplx e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            err = std::max(err, std::abs(e));
        }
        // tol is a whole-interval budget; each step gets a share
        // proportional to its length so the accumulated error stays ~tol.
        const double tol_step = tol * h / (t1 - t0);

        if (err <= tol_step || h <= 1e-9) {
            t += h;
            y.swap(y5);
            rejects_in_a_row = 0;
            while (next_rec < record_times.size() &&
                   record_times[next_rec] <= t + 1e-12) {
                record(record_times[next_rec], y);
                ++next_rec;
            }
        } else {
            if (++rejects_in_a_row > 60)
                throw ToleranceNotMet("step size collapsed during integration");
        }
        const double fac =
            err > 0.0 ? 0.9 * std::pow(tol_step / err, 0.2) : 5.0;
        dt = std::min(dt_max, h * std::clamp(fac, 0.2, 5.0));
    }
    while (next_rec < record_times.size()) {
        record(record_times[next_rec], y);
        ++next_rec;
    }
}

// L^dag L as a sparse operator (entries grouped by row of L).
SparseOperator dagger_product(const SparseOperator& l) {
    std::map<int, std::vector<std::pair<int, cplx>>> by_row;
    for (const auto& e : l.entries) by_row[e.row].push_back({e.col, e.value});
    SparseOperator out;
    out.dim = l.dim;
    std::map<std::pair<int, int>, cplx> acc;
    for (const auto& [row, cols] : by_row)
        for (const auto& [c1, v1] : cols)
            for (const auto& [c2, v2] : cols)
                acc[{c1, c2}] += std::conj(v1) * v2;
    for (const auto& [rc, v] : acc) out.entries.push_back({rc.first, rc.second, v});
    return out;
}

struct FrameInfo {
    std::vector<double> detune;     // angular diagonal in the rotating frame
    std::vector<double> qubit_diag; // h_qubit_detune diagonal (level index j)
    std::vector<SparseOperator::Entry> offdiag;
    double omega_ref = 0.0;
};

FrameInfo build_frame(const SystemOperators& sys) {
    FrameInfo fr;
    const int dim = static_cast<int>(sys.basis.size());
    fr.detune.assign(static_cast<size_t>(dim), 0.0);
    fr.qubit_diag.assign(static_cast<size_t>(dim), 0.0);
    std::vector<double> hdiag(static_cast<size_t>(dim), 0.0);
    for (const auto& e : sys.h_static.entries) {
        if (e.row == e.col)
            hdiag[static_cast<size_t>(e.row)] += e.value.real();
        else
            fr.offdiag.push_back(e);
    }
    for (const auto& e : sys.h_qubit_detune.entries)
        if (e.row == e.col)
            fr.qubit_diag[static_cast<size_t>(e.row)] = e.value.real();

    // Reference: energy of the first pure single-photon state (band center).
    for (int i = 0; i < dim; ++i) {
        if (sys.basis[static_cast<size_t>(i)].total_excitations == 1 &&
            sys.basis[static_cast<size_t>(i)].atom_level == 0) {
            fr.omega_ref = hdiag[static_cast<size_t>(i)];
            break;
        }
    }
    for (int i = 0; i < dim; ++i)
        fr.detune[static_cast<size_t>(i)] =
            hdiag[static_cast<size_t>(i)] -
            fr.omega_ref *
                static_cast<double>(sys.basis[static_cast<size_t>(i)].total_excitations);
    return fr;
}

void check_drive_sampling(const FrameInfo& fr, const SystemOperators& sys,
                          const Waveform& drive) {
    if (drive.samples.size() < 3) return;  // constant/step drives are exempt
    const auto [mn, mx] =
        std::minmax_element(drive.samples.begin(), drive.samples.end());
    if (*mx - *mn < 1e-12) return;
    double det_max = 0.0;
    for (double d : fr.detune) det_max = std::max(det_max, std::abs(d));
    const double drive_max =
        std::max(std::abs(*mn), std::abs(*mx)) *
        static_cast<double>(sys.levels_d - 1);
    const double f_fast = det_max / two_pi + drive_max;
    if (f_fast > 0.0 && drive.dt > 1.0 / (20.0 * f_fast))
        throw FrameAliasing("drive undersampled for the fastest rotating term");
}

struct Recorder {
    const SystemOperators* sys;
    EvolutionResult* res;

    void push(double t, double pg_vac, double pe, double pf, double nwg,
              double lk) const {
        res->times.push_back(t);
        res->p_g.push_back(pg_vac);
        res->p_e.push_back(pe);
        res->p_f.push_back(pf);
        res->n_wg.push_back(nwg);
        res->leaked.push_back(lk);
    }
};

}  // namespace

double thermal_population(double f_ghz, double temperature_mk) {
    if (f_ghz <= 0.0) throw DomainError("thermal_population: f must be > 0");
    if (temperature_mk < 0.0)
        throw DomainError("thermal_population: temperature must be >= 0");
    if (temperature_mk == 0.0) return 0.0;
    const double x = f_ghz * hf_over_kb_mk_per_ghz / temperature_mk;
    return 1.0 / (1.0 + std::exp(x));
}

double temperature_from_population(double f_ghz, double p_e) {
    if (!(p_e > 0.0 && p_e < 0.5))
        throw DomainError("temperature_from_population: p_e must be in (0, 0.5)");
    return f_ghz * hf_over_kb_mk_per_ghz / std::log(1.0 / p_e - 1.0);
}

EvolutionResult evolve(const SystemOperators& sys, const Waveform& drive,
                       const QuantumState& initial, EvolveMethod method,
                       double tol, int n_record) {
    const int dim = static_cast<int>(sys.basis.size());
    const FrameInfo fr = build_frame(sys);
    check_drive_sampling(fr, sys, drive);

    const double t_end = drive.duration();
    std::vector<double> rec_times(static_cast<size_t>(n_record));
    for (int k = 0; k < n_record; ++k)
        rec_times[static_cast<size_t>(k)] =
            t_end * static_cast<double>(k) / static_cast<double>(n_record - 1);

    // Pre-scaled collapse data: rate enters as 2*pi*kappa.
    struct Collapse {
        const SparseOperator* op;
        SparseOperator ldl;
        double rate_ang;
    };
    std::vector<Collapse> collapses;
    for (const auto& [op, rate] : sys.collapse_ops)
        collapses.push_back({&op, dagger_product(op), two_pi * rate});

    EvolutionResult res;
    Recorder recorder{&sys, &res};

    auto classify = [&](auto&& population_of) {
        double pg = 0.0, pe = 0.0, pf = 0.0, nwg = 0.0, norm = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double p = population_of(i);
            norm += p;
            const auto& b = sys.basis[static_cast<size_t>(i)];
            if (b.atom_level == 0 && b.photon_occupations.empty()) pg += p;
            if (b.atom_level == 1) pe += p;
            if (b.atom_level == 2) pf += p;
            for (const auto& [m, n] : b.photon_occupations)
                nwg += p * static_cast<double>(n);
        }
        return std::array<double, 5>{pg, pe, pf, nwg, 1.0 - norm};
    };

    if (method == EvolveMethod::NonHermitianVector) {
        if (initial.representation != QuantumState::Rep::Vector)
            throw DomainError("NonHermitianVector requires a vector state");
        State y = initial.amplitudes;

        // Full interaction picture: the static diagonal is absorbed into
        // per-entry phase factors exp(i (D_r - D_c) t), so a decoupled state
        // has an identically zero derivative.
        std::vector<double> dphase(fr.offdiag.size());
        for (size_t k = 0; k < fr.offdiag.size(); ++k)
            dphase[k] = fr.detune[static_cast<size_t>(fr.offdiag[k].row)] -
                        fr.detune[static_cast<size_t>(fr.offdiag[k].col)];

        Deriv f = [&](double t, const State& x, State& out) {
            const double d = two_pi * drive.at(t);
            for (int i = 0; i < dim; ++i) {
                const size_t ui = static_cast<size_t>(i);
                out[ui] = cplx(0.0, -1.0) * d * fr.qubit_diag[ui] * x[ui];
            }
            for (size_t k = 0; k < fr.offdiag.size(); ++k) {
                const auto& e = fr.offdiag[k];
                const double ang = dphase[k] * t;
                const cplx rot(std::cos(ang), std::sin(ang));
                out[static_cast<size_t>(e.row)] +=
                    cplx(0.0, -1.0) * rot * e.value *
                    x[static_cast<size_t>(e.col)];
            }
            for (const auto& c : collapses)
                for (const auto& e : c.ldl.entries) {
                    const double ang =
                        (fr.detune[static_cast<size_t>(e.row)] -
                         fr.detune[static_cast<size_t>(e.col)]) * t;
                    const cplx rot(std::cos(ang), std::sin(ang));
                    out[static_cast<size_t>(e.row)] -=
                        0.5 * c.rate_ang * rot * e.value *
                        x[static_cast<size_t>(e.col)];
                }
        };
        auto record = [&](double t, const State& x) {
            auto [pg, pe, pf, nwg, lk] = classify(
                [&](int i) { return std::norm(x[static_cast<size_t>(i)]); });
            recorder.push(t, pg, pe, pf, nwg, lk);
        };
        integrate_adaptive(f, y, 0.0, t_end, tol, 0.05, record, rec_times);
        res.final_state.representation = QuantumState::Rep::Vector;
        res.final_state.amplitudes = y;
        return res;
    }

    if (method == EvolveMethod::LindbladRK) {
        // Full master equation on a flattened row-major density matrix.
        State y;
        if (initial.representation == QuantumState::Rep::Vector) {
            y.assign(static_cast<size_t>(dim) * static_cast<size_t>(dim), 0.0);
            for (int r = 0; r < dim; ++r)
                for (int c = 0; c < dim; ++c)
                    y[static_cast<size_t>(r) * static_cast<size_t>(dim) +
                      static_cast<size_t>(c)] =
                        initial.amplitudes[static_cast<size_t>(r)] *
                        std::conj(initial.amplitudes[static_cast<size_t>(c)]);
        } else {
            y = initial.amplitudes;
        }
        auto at = [dim](State& m, int r, int c) -> cplx& {
            return m[static_cast<size_t>(r) * static_cast<size_t>(dim) +
                     static_cast<size_t>(c)];
        };
        auto cat = [dim](const State& m, int r, int c) -> const cplx& {
            return m[static_cast<size_t>(r) * static_cast<size_t>(dim) +
                     static_cast<size_t>(c)];
        };

        Deriv f = [&, dim](double t, const State& x, State& out) {
            const double d = two_pi * drive.at(t);
            // -i [H(t), rho] with H = diag(detune + d*j) + offdiag
            for (int r = 0; r < dim; ++r) {
                const double hr = fr.detune[static_cast<size_t>(r)] +
                                  d * fr.qubit_diag[static_cast<size_t>(r)];
                for (int c = 0; c < dim; ++c) {
                    const double hc = fr.detune[static_cast<size_t>(c)] +
                                      d * fr.qubit_diag[static_cast<size_t>(c)];
                    at(out, r, c) = cplx(0.0, -(hr - hc)) * cat(x, r, c);
                }
            }
            for (const auto& e : fr.offdiag) {
                for (int c = 0; c < dim; ++c) {
                    at(out, e.row, c) +=
                        cplx(0.0, -1.0) * e.value * cat(x, e.col, c);
                    at(out, c, e.row) +=
                        cplx(0.0, 1.0) * std::conj(e.value) * cat(x, c, e.col);
                }
            }
            for (const auto& cdat : collapses) {
                for (const auto& e1 : cdat.op->entries)
                    for (const auto& e2 : cdat.op->entries)
                        at(out, e1.row, e2.row) += cdat.rate_ang * e1.value *
                                                   std::conj(e2.value) *
                                                   cat(x, e1.col, e2.col);
                for (const auto& e : cdat.ldl.entries) {
                    for (int c = 0; c < dim; ++c) {
                        at(out, e.row, c) -=
                            0.5 * cdat.rate_ang * e.value * cat(x, e.col, c);
                        at(out, c, e.row) -= 0.5 * cdat.rate_ang *
                                             std::conj(e.value) * cat(x, c, e.col);
                    }
                }
            }
        };
        auto record = [&](double t, const State& x) {
            auto [pg, pe, pf, nwg, lk] = classify(
                [&](int i) { return cat(x, i, i).real(); });
            recorder.push(t, pg, pe, pf, nwg, lk);
        };
        integrate_adaptive(f, y, 0.0, t_end, tol, 0.05, record, rec_times);
        res.final_state.representation = QuantumState::Rep::DensityMatrix;
        res.final_state.amplitudes = y;
        return res;
    }

    // SectorCascade: the initial state must be a pure vector supported on its
    // highest excitation sector. That sector stays pure under non-Hermitian
    // evolution; each lower sector carries a density matrix fed by jump flux
    // from above. Exact for excitation-conserving H with lowering collapses.
    if (initial.representation != QuantumState::Rep::Vector)
        throw DomainError("SectorCascade requires a vector initial state");

    int top = 0;
    for (int i = 0; i < dim; ++i)
        if (std::norm(initial.amplitudes[static_cast<size_t>(i)]) > 1e-14)
            top = std::max(top,
                           sys.basis[static_cast<size_t>(i)].total_excitations);

    // Sector bookkeeping.
    std::vector<int> sector_of(static_cast<size_t>(dim));
    std::vector<std::vector<int>> members(static_cast<size_t>(top) + 1);
    std::vector<int> local(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const int s = sys.basis[static_cast<size_t>(i)].total_excitations;
        if (s > top) continue;  // unreachable from the top sector
        sector_of[static_cast<size_t>(i)] = s;
        local[static_cast<size_t>(i)] =
            static_cast<int>(members[static_cast<size_t>(s)].size());
        members[static_cast<size_t>(s)].push_back(i);
    }
    std::vector<size_t> offset(static_cast<size_t>(top) + 2, 0);
    // layout: [psi_top | rho_{top-1} | ... | rho_0], each rho row-major
    size_t total_len = members[static_cast<size_t>(top)].size();
    offset[static_cast<size_t>(top)] = 0;
    for (int s = top - 1; s >= 0; --s) {
        offset[static_cast<size_t>(s)] = total_len;
        total_len += members[static_cast<size_t>(s)].size() *
                     members[static_cast<size_t>(s)].size();
    }

    State y(total_len, 0.0);
    for (int i = 0; i < dim; ++i) {
        if (sys.basis[static_cast<size_t>(i)].total_excitations == top)
            y[static_cast<size_t>(local[static_cast<size_t>(i)])] =
                initial.amplitudes[static_cast<size_t>(i)];
    }

    // Split operators by sector.
    struct SectorOps {
        std::vector<SparseOperator::Entry> offdiag;  // local indices
        std::vector<double> detune, qdiag, kdiag_half;  // kdiag: sum rate*L^dag L
        std::vector<SparseOperator::Entry> kdl_offdiag;  // rate-scaled off-diag of sum L^dag L
    };
    std::vector<SectorOps> sops(static_cast<size_t>(top) + 1);
    for (int s = 0; s <= top; ++s) {
        const auto& mem = members[static_cast<size_t>(s)];
        auto& so = sops[static_cast<size_t>(s)];
        so.detune.resize(mem.size());
        so.qdiag.resize(mem.size());
        so.kdiag_half.assign(mem.size(), 0.0);
        for (size_t k = 0; k < mem.size(); ++k) {
            so.detune[k] = fr.detune[static_cast<size_t>(mem[k])];
            so.qdiag[k] = fr.qubit_diag[static_cast<size_t>(mem[k])];
        }
    }
    for (const auto& e : fr.offdiag) {
        const int s = sector_of[static_cast<size_t>(e.row)];
        sops[static_cast<size_t>(s)].offdiag.push_back(
            {local[static_cast<size_t>(e.row)], local[static_cast<size_t>(e.col)],
             e.value});
    }
    for (const auto& c : collapses) {
        for (const auto& e : c.ldl.entries) {
            const int s = sector_of[static_cast<size_t>(e.row)];
            auto& so = sops[static_cast<size_t>(s)];
            if (e.row == e.col)
                so.kdiag_half[static_cast<size_t>(local[static_cast<size_t>(e.row)])] +=
                    0.5 * c.rate_ang * e.value.real();
            else
                so.kdl_offdiag.push_back({local[static_cast<size_t>(e.row)],
                                          local[static_cast<size_t>(e.col)],
                                          0.5 * c.rate_ang * e.value});
        }
    }
    // Jump entries from sector s+1 to s, in local indices.
    struct Jump {
        int row_local, col_local;
        cplx value;
        double rate_ang;
        int op_index;
    };
    std::vector<std::vector<Jump>> jumps_into(static_cast<size_t>(top));
    for (size_t ci = 0; ci < collapses.size(); ++ci)
        for (const auto& e : collapses[ci].op->entries) {
            const int s_from = sector_of[static_cast<size_t>(e.col)];
            if (s_from >= 1 && s_from <= top)
                jumps_into[static_cast<size_t>(s_from - 1)].push_back(
                    {local[static_cast<size_t>(e.row)],
                     local[static_cast<size_t>(e.col)], e.value,
                     collapses[ci].rate_ang, static_cast<int>(ci)});
        }

    Deriv f = [&](double t, const State& x, State& out) {
        const double d = two_pi * drive.at(t);
        // top sector: non-Hermitian vector
        {
            const auto& so = sops[static_cast<size_t>(top)];
            const size_t n = members[static_cast<size_t>(top)].size();
            for (size_t i = 0; i < n; ++i)
                out[i] = (cplx(0.0, -1.0) * (so.detune[i] + d * so.qdiag[i]) -
                          so.kdiag_half[i]) *
                         x[i];
            for (const auto& e : so.offdiag)
                out[static_cast<size_t>(e.row)] +=
                    cplx(0.0, -1.0) * e.value * x[static_cast<size_t>(e.col)];
            for (const auto& e : so.kdl_offdiag)
                out[static_cast<size_t>(e.row)] -=
                    e.value * x[static_cast<size_t>(e.col)];
        }
        // lower sectors: Lindblad blocks with feed from above
        for (int s = top - 1; s >= 0; --s) {
            const auto& so = sops[static_cast<size_t>(s)];
            const size_t n = members[static_cast<size_t>(s)].size();
            const size_t off = offset[static_cast<size_t>(s)];
            auto idx = [&](size_t r, size_t c) { return off + r * n + c; };

            for (size_t r = 0; r < n; ++r) {
                const cplx hr = cplx(so.kdiag_half[r],
                                     so.detune[r] + d * so.qdiag[r]);
                for (size_t c = 0; c < n; ++c) {
                    const cplx hc = cplx(so.kdiag_half[c],
                                         so.detune[c] + d * so.qdiag[c]);
                    out[idx(r, c)] = -(hr + std::conj(hc)) * x[idx(r, c)];
                }
            }
            for (const auto& e : so.offdiag) {
                const size_t er = static_cast<size_t>(e.row),
                             ec = static_cast<size_t>(e.col);
                for (size_t c = 0; c < n; ++c) {
                    out[idx(er, c)] += cplx(0.0, -1.0) * e.value * x[idx(ec, c)];
                    out[idx(c, er)] +=
                        cplx(0.0, 1.0) * std::conj(e.value) * x[idx(c, ec)];
                }
            }
            for (const auto& e : so.kdl_offdiag) {
                const size_t er = static_cast<size_t>(e.row),
                             ec = static_cast<size_t>(e.col);
                for (size_t c = 0; c < n; ++c) {
                    out[idx(er, c)] -= e.value * x[idx(ec, c)];
                    out[idx(c, er)] -= std::conj(e.value) * x[idx(c, ec)];
                }
            }
            // feed: sum over jumps L rho_{s+1} L^dag
            const auto& feeds = jumps_into[static_cast<size_t>(s)];
            if (s == top - 1) {
                for (const auto& j1 : feeds)
                    for (const auto& j2 : feeds) {
                        if (j1.op_index != j2.op_index) continue;
                        out[idx(static_cast<size_t>(j1.row_local),
                                static_cast<size_t>(j2.row_local))] +=
                            j1.rate_ang * j1.value * std::conj(j2.value) *
                            x[static_cast<size_t>(j1.col_local)] *
                            std::conj(x[static_cast<size_t>(j2.col_local)]);
                    }
            } else {
                const size_t off_up = offset[static_cast<size_t>(s + 1)];
                const size_t n_up = members[static_cast<size_t>(s + 1)].size();
                for (const auto& j1 : feeds)
                    for (const auto& j2 : feeds) {
                        if (j1.op_index != j2.op_index) continue;
                        out[idx(static_cast<size_t>(j1.row_local),
                                static_cast<size_t>(j2.row_local))] +=
                            j1.rate_ang * j1.value * std::conj(j2.value) *
                            x[off_up + static_cast<size_t>(j1.col_local) * n_up +
                              static_cast<size_t>(j2.col_local)];
                    }
            }
        }
    };

    auto population_of = [&](const State& x, int i) -> double {
        const int s = sector_of[static_cast<size_t>(i)];
        const int li = local[static_cast<size_t>(i)];
        if (s == top) return std::norm(x[static_cast<size_t>(li)]);
        const size_t n = members[static_cast<size_t>(s)].size();
        return x[offset[static_cast<size_t>(s)] +
                 static_cast<size_t>(li) * n + static_cast<size_t>(li)]
            .real();
    };
    auto record = [&](double t, const State& x) {
        auto [pg, pe, pf, nwg, lk] =
            classify([&](int i) { return population_of(x, i); });
        recorder.push(t, pg, pe, pf, nwg, lk);
    };
    integrate_adaptive(f, y, 0.0, t_end, tol, 0.05, record, rec_times);

    // Expose the final state as populations on the diagonal of a full
    // density matrix (inter-sector coherences are identically zero here).
    res.final_state.representation = QuantumState::Rep::DensityMatrix;
    res.final_state.amplitudes.assign(
        static_cast<size_t>(dim) * static_cast<size_t>(dim), 0.0);
    for (int i = 0; i < dim; ++i)
        res.final_state.amplitudes[static_cast<size_t>(i) *
                                       static_cast<size_t>(dim) +
                                   static_cast<size_t>(i)] =
            population_of(y, i);
    return res;
}

}  // namespace mmwg
