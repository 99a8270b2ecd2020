#include "mmwg/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mmwg {

int BasisIndex::occupation(int mode) const {
    for (const auto& [m, n] : photon_occupations)
        if (m == mode) return n;
    return 0;
}

void SparseOperator::apply(const cplx* x, cplx* y, cplx alpha) const {
    for (const auto& e : entries) y[e.row] += alpha * e.value * x[e.col];
}

std::vector<std::vector<cplx>> SparseOperator::dense() const {
    std::vector<std::vector<cplx>> m(static_cast<size_t>(dim),
                                     std::vector<cplx>(static_cast<size_t>(dim)));
    for (const auto& e : entries)
        m[static_cast<size_t>(e.row)][static_cast<size_t>(e.col)] += e.value;
    return m;
}

double SparseOperator::max_hermiticity_defect() const {
    const auto m = dense();
    double worst = 0.0;
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            worst = std::max(worst,
                             std::abs(m[static_cast<size_t>(r)][static_cast<size_t>(c)] -
                                      std::conj(m[static_cast<size_t>(c)][static_cast<size_t>(r)])));
    return worst;
}

namespace {

void enumerate_photons(int n_modes, int remaining, int first_mode,
                       std::vector<std::pair<int, int>>& partial,
                       BasisIndex& proto, std::vector<BasisIndex>& out,
                       std::size_t capacity) {
    if (remaining == 0) {
        BasisIndex s = proto;
        s.photon_occupations = partial;
        out.push_back(std::move(s));
        if (out.size() > capacity)
            throw CapacityError("basis enumeration exceeds configured capacity");
        return;
    }
    if (first_mode >= n_modes) return;
    // Occupation of first_mode descending keeps the order lexicographic by
    // the first differing mode.
    for (int n = remaining; n >= 0; --n) {
        if (n > 0) partial.emplace_back(first_mode, n);
        enumerate_photons(n_modes, remaining - n, first_mode + 1, partial, proto,
                          out, capacity);
        if (n > 0) partial.pop_back();
    }
}

}  // namespace

std::vector<BasisIndex> enumerate_basis(int d, int n_modes, int n_exc,
                                        std::size_t capacity) {
    if (d < 2 || n_modes < 1 || n_exc < 0)
        throw DomainError("enumerate_basis: d >= 2, n_modes >= 1, n_exc >= 0");
    std::vector<BasisIndex> out;
    for (int total = 0; total <= n_exc; ++total) {
        for (int a = 0; a <= std::min(d - 1, total); ++a) {
            BasisIndex proto;
            proto.atom_level = a;
            proto.total_excitations = total;
            std::vector<std::pair<int, int>> partial;
            enumerate_photons(n_modes, total - a, 0, partial, proto, out,
                              capacity);
        }
    }
    return out;
}

std::size_t index_of(const std::vector<BasisIndex>& basis, const BasisIndex& s) {
    for (std::size_t i = 0; i < basis.size(); ++i)
        if (basis[i] == s) return i;
    throw DomainError("state not in basis");
}

SystemOperators assemble(const DeviceConfig& config, int n_exc) {
    const auto report = validate(config);
    if (!report.ok())
        throw ConfigError("assemble: invalid config (" +
                          report.violations.front().path + ")");
    const auto& t = config.transmon;
    const auto& w = config.waveguide;
    const bool rr = config.readout_resonator.enabled;
    const int n_modes = w.n_cells + (rr ? 1 : 0);
    const int rr_mode = w.n_cells;  // appended after the chain cells

    SystemOperators sys;
    sys.basis = enumerate_basis(t.levels_d, n_modes, n_exc);
    sys.n_modes = n_modes;
    sys.levels_d = t.levels_d;
    const int dim = static_cast<int>(sys.basis.size());

    std::map<std::pair<int, std::vector<std::pair<int, int>>>, int> lookup;
    for (int i = 0; i < dim; ++i)
        lookup[{sys.basis[i].atom_level, sys.basis[i].photon_occupations}] = i;
    auto find = [&](int a, const std::vector<std::pair<int, int>>& ph) {
        auto it = lookup.find({a, ph});
        return it == lookup.end() ? -1 : it->second;
    };
    auto with_photon_delta = [](std::vector<std::pair<int, int>> ph, int mode,
                                int delta) {
        for (auto it = ph.begin(); it != ph.end(); ++it) {
            if (it->first == mode) {
                it->second += delta;
                if (it->second == 0) ph.erase(it);
                return ph;
            }
            if (it->first > mode) {
                ph.insert(it, {mode, delta});
                return ph;
            }
        }
        ph.emplace_back(mode, delta);
        return ph;
    };

    auto mode_frequency = [&](int m) {
        return (rr && m == rr_mode) ? config.readout_resonator.f_r : w.f_cell;
    };

    SparseOperator h;
    h.dim = dim;
    SparseOperator hdet;
    hdet.dim = dim;
    SparseOperator c_left, c_right;
    c_left.dim = c_right.dim = dim;

    for (int i = 0; i < dim; ++i) {
        const auto& s = sys.basis[i];
        const int j = s.atom_level;

        // Diagonal: Duffing ladder + photon energies, angular units.
        double diag = static_cast<double>(j) * t.f_ge_max +
                      0.5 * t.anharmonicity_eta * static_cast<double>(j * (j - 1));
        for (const auto& [m, n] : s.photon_occupations)
            diag += static_cast<double>(n) * mode_frequency(m);
        if (diag != 0.0) h.entries.push_back({i, i, two_pi * diag});
        if (j != 0) hdet.entries.push_back({i, i, static_cast<double>(j)});

        // Chain hopping J (b_x b_{x+1}^dag + h.c.); emit b_{x+1}^dag b_x and
        // its conjugate from the state where cell x is occupied.
        for (const auto& [m, n] : s.photon_occupations) {
            if (m < w.n_cells - 1) {
                const auto ph = with_photon_delta(
                    with_photon_delta(s.photon_occupations, m, -1), m + 1, +1);
                const int k = find(j, ph);
                if (k >= 0) {
                    const double amp =
                        std::sqrt(static_cast<double>(n) *
                                  static_cast<double>(s.occupation(m + 1) + 1));
                    h.entries.push_back({k, i, two_pi * w.hopping_J * amp});
                    h.entries.push_back({i, k, two_pi * w.hopping_J * amp});
                }
            }
        }

        // Atom-chain exchange at the coupling site, matrix element sqrt(j).
        if (j >= 1 && w.g_uc > 0.0) {
            const int x0 = w.coupling_site_x0 - 1;
            const auto ph = with_photon_delta(s.photon_occupations, x0, +1);
            const int k = find(j - 1, ph);
            if (k >= 0) {
                const double amp = std::sqrt(static_cast<double>(j)) *
                                   std::sqrt(static_cast<double>(s.occupation(x0) + 1));
                h.entries.push_back({k, i, two_pi * w.g_uc * amp});
                h.entries.push_back({i, k, two_pi * w.g_uc * amp});
            }
        }
        // Readout resonator: exchange with the atom and with the coupling cell.
        if (rr) {
            if (j >= 1 && config.readout_resonator.g_qr > 0.0) {
                const auto ph = with_photon_delta(s.photon_occupations, rr_mode, +1);
                const int k = find(j - 1, ph);
                if (k >= 0) {
                    const double amp =
                        std::sqrt(static_cast<double>(j)) *
                        std::sqrt(static_cast<double>(s.occupation(rr_mode) + 1));
                    h.entries.push_back({k, i, two_pi * config.readout_resonator.g_qr * amp});
                    h.entries.push_back({i, k, two_pi * config.readout_resonator.g_qr * amp});
                }
            }
            const int x0 = w.coupling_site_x0 - 1;
            const int n_x0 = s.occupation(x0);
            if (n_x0 > 0 && config.readout_resonator.g_wr > 0.0) {
                const auto ph = with_photon_delta(
                    with_photon_delta(s.photon_occupations, x0, -1), rr_mode, +1);
                const int k = find(j, ph);
                if (k >= 0) {
                    const double amp =
                        std::sqrt(static_cast<double>(n_x0)) *
                        std::sqrt(static_cast<double>(s.occupation(rr_mode) + 1));
                    h.entries.push_back({k, i, two_pi * config.readout_resonator.g_wr * amp});
                    h.entries.push_back({i, k, two_pi * config.readout_resonator.g_wr * amp});
                }
            }
        }

        // Photon annihilation on the two taper cells.
        for (int end = 0; end < 2; ++end) {
            const int cell = end == 0 ? 0 : w.n_cells - 1;
            const int n = s.occupation(cell);
            if (n > 0) {
                const auto ph = with_photon_delta(s.photon_occupations, cell, -1);
                const int k = find(j, ph);
                if (k >= 0) {
                    auto& op = end == 0 ? c_left : c_right;
                    op.entries.push_back({k, i, std::sqrt(static_cast<double>(n))});
                }
            }
        }
    }

    sys.h_static = std::move(h);
    sys.h_qubit_detune = std::move(hdet);
    if (w.kappa_left > 0.0)
        sys.collapse_ops.emplace_back(std::move(c_left), w.kappa_left);
    if (w.kappa_right > 0.0)
        sys.collapse_ops.emplace_back(std::move(c_right), w.kappa_right);
    return sys;
}

std::vector<ChainMode> chain_eigenmodes(const WaveguideParams& wg) {
    const int n = wg.n_cells;
    std::vector<ChainMode> modes;
    modes.reserve(static_cast<size_t>(n));
    const double norm = std::sqrt(2.0 / static_cast<double>(n + 1));
    for (int k = n; k >= 1; --k) {  // descending k gives ascending frequency
        ChainMode m;
        m.frequency = wg.f_cell + 2.0 * wg.hopping_J *
                                      std::cos(static_cast<double>(k) * M_PI /
                                               static_cast<double>(n + 1));
        m.amplitude.resize(static_cast<size_t>(n));
        for (int x = 1; x <= n; ++x)
            m.amplitude[static_cast<size_t>(x - 1)] =
                norm * std::sin(static_cast<double>(k) * M_PI *
                                static_cast<double>(x) / static_cast<double>(n + 1));
        modes.push_back(std::move(m));
    }
    return modes;
}

double free_spectral_range(const WaveguideParams& wg) {
    if (wg.n_cells < 2) throw DomainError("free_spectral_range: N >= 2");
    return 4.0 * wg.hopping_J / static_cast<double>(wg.n_cells);
}

double taper_kappa(double f0_ghz, double c_coupling_ff, double c_total_ff,
                   double z_env_ohm) {
    if (!(c_total_ff > c_coupling_ff && c_coupling_ff > 0.0))
        throw DomainError("taper_kappa requires c_total > c_coupling > 0");
    const double omega = two_pi * f0_ghz * 1e9;  // rad/s
    const double cc = c_coupling_ff * 1e-15;
    const double ct = c_total_ff * 1e-15;
    const double kappa_si = omega * omega * z_env_ohm * cc * cc / ct;  // 1/s
    return kappa_si / (two_pi * 1e9);  // GHz, /2pi convention
}

double round_trip_time(const WaveguideParams& wg, double f_ghz) {
    const double c = (f_ghz - wg.f_cell) / (2.0 * wg.hopping_J);
    if (!(c > -1.0 && c < 1.0))
        throw OutOfBand("round_trip_time: frequency outside passband");
    const double k = std::acos(c);
    const double v_g = two_pi * 2.0 * wg.hopping_J * std::sin(k);  // rad GHz / cell
    return 2.0 * static_cast<double>(wg.n_cells) / v_g;
}

}  // namespace mmwg
