#include "mmwg/rb.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "mmwg/util.hpp"

namespace mmwg {

namespace {

using Eigen::Matrix3cd;
using Vec9 = Eigen::Matrix<cplx, 9, 1>;

Vec9 vectorize(const Matrix3cd& rho) {
    return Eigen::Map<const Vec9>(rho.data());
}

Matrix3cd unvectorize(const Vec9& v) {
    return Eigen::Map<const Matrix3cd>(v.data());
}

// vec(A rho B) = (B^T kron A) vec(rho), column-stacking convention.
Matrix9c sandwich_superop(const Matrix3cd& a, const Matrix3cd& b) {
    Matrix9c s;
    const Matrix3cd bt = b.transpose();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            s.block<3, 3>(3 * i, 3 * j) = bt(i, j) * a;
    return s;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

Matrix3cd QutritChannel::apply(const Matrix3cd& rho) const {
    return unvectorize(s * vectorize(rho));
}

QutritChannel QutritChannel::then(const QutritChannel& next) const {
    return QutritChannel{next.s * s};
}

QutritChannel channel_from_unitary(const Matrix3c& u) {
    return QutritChannel{sandwich_superop(u, u.adjoint())};
}

QutritChannel channel_from_kraus(const std::vector<Matrix3c>& kraus) {
    if (kraus.empty()) throw DomainError("channel_from_kraus: empty Kraus set");
    QutritChannel c;
    c.s.setZero();
    for (const auto& k : kraus) c.s += sandwich_superop(k, k.adjoint());
    return c;
}

CptpReport check_cptp(const QutritChannel& c) {
    CptpReport r;
    const Vec9 vec_id = vectorize(Matrix3cd::Identity());
    r.trace_deviation = (c.s.adjoint() * vec_id - vec_id).cwiseAbs().maxCoeff();

    // Choi matrix: C_{(3i+a),(3j+b)} = S(a+3b, i+3j)
    Matrix9c choi;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    choi(3 * i + a, 3 * j + b) = c.s(a + 3 * b, i + 3 * j);
    const Matrix9c herm = 0.5 * (choi + choi.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix9c> es(herm);
    r.min_choi_eigenvalue = es.eigenvalues().minCoeff();
    return r;
}

namespace {

// canonical phase: first nonzero entry of the g-e block made real positive
Matrix3cd phase_normalized(const Matrix3cd& u) {
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
            if (std::abs(u(i, j)) > 1e-9) {
                // rephase the g-e block only; |f> stays untouched
                Matrix3cd v = u;
                v.topLeftCorner<2, 2>() *= std::abs(u(i, j)) / u(i, j);
                return v;
            }
    return u;
}

bool same_up_to_phase(const Matrix3cd& a, const Matrix3cd& b) {
    return (phase_normalized(a) - phase_normalized(b)).cwiseAbs().maxCoeff() <
           1e-9;
}

}  // namespace

std::vector<Matrix3c> clifford_set() {
    Matrix3cd h = Matrix3cd::Identity();
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    h(0, 0) = inv_sqrt2;
    h(0, 1) = inv_sqrt2;
    h(1, 0) = inv_sqrt2;
    h(1, 1) = -inv_sqrt2;
    Matrix3cd p = Matrix3cd::Identity();
    p(1, 1) = cplx(0.0, 1.0);

    std::vector<Matrix3cd> set = {Matrix3cd::Identity()};
    // breadth-first closure under the two generators
    for (size_t i = 0; i < set.size(); ++i) {
        for (const auto& g : {h, p}) {
            const Matrix3cd cand = g * set[i];
            bool known = false;
            for (const auto& e : set)
                if (same_up_to_phase(cand, e)) {
                    known = true;
                    break;
                }
            if (!known) set.push_back(phase_normalized(cand));
        }
    }
    if (set.size() != 24)
        throw DomainError("clifford_set: closure did not yield 24 elements");
    return set;
}

int find_clifford(const std::vector<Matrix3c>& set, const Matrix3c& u) {
    for (size_t i = 0; i < set.size(); ++i)
        if (same_up_to_phase(set[i], u)) return static_cast<int>(i);
    return -1;
}

QutritChannel decoherence_channel(double t_gate_ns, double t1_us,
                                  double tphi_us, double t1_ef_us) {
    if (t_gate_ns < 0.0 || t1_us <= 0.0 || tphi_us <= 0.0 || t1_ef_us <= 0.0)
        throw DomainError("decoherence_channel: need positive times");
    const double g1 = 1e-3 / t1_us;     // 1/ns
    const double gef = 1e-3 / t1_ef_us;
    const double gphi = 1e-3 / tphi_us;

    std::vector<Matrix3cd> jumps;
    Matrix3cd l = Matrix3cd::Zero();
    l(0, 1) = std::sqrt(g1);  // e -> g
    jumps.push_back(l);
    l.setZero();
    l(1, 2) = std::sqrt(gef);  // f -> e
    jumps.push_back(l);
    l.setZero();  // dephases both neighboring coherences at gphi
    l(1, 1) = std::sqrt(2.0 * gphi);
    l(2, 2) = 2.0 * std::sqrt(2.0 * gphi);
    jumps.push_back(l);

    Matrix9c lind = Matrix9c::Zero();
    const Matrix3cd id = Matrix3cd::Identity();
    for (const auto& k : jumps) {
        const Matrix3cd kk = k.adjoint() * k;
        lind += sandwich_superop(k, k.adjoint());
        lind -= 0.5 * sandwich_superop(kk, id);
        lind -= 0.5 * sandwich_superop(id, kk);
    }
    Eigen::MatrixXcd gen = lind * t_gate_ns;
    QutritChannel c;
    c.s = gen.exp();
    return c;
}

QutritChannel leakage_injection_channel(double p_leak) {
    if (p_leak < 0.0 || p_leak > 1.0)
        throw DomainError("leakage_injection_channel: p_leak outside [0, 1]");
    const double theta = 2.0 * std::asin(std::sqrt(p_leak));
    Matrix3cd u = Matrix3cd::Identity();
    u(1, 1) = std::cos(theta / 2.0);
    u(2, 2) = std::cos(theta / 2.0);
    u(1, 2) = cplx(0.0, -std::sin(theta / 2.0));
    u(2, 1) = cplx(0.0, -std::sin(theta / 2.0));
    return channel_from_unitary(u);
}

QutritChannel lru_channel(double residual_f, double tau_lru_ns,
                          const CoherenceSet& coh_mod) {
    if (residual_f < 0.0 || residual_f > 1.0)
        throw DomainError("lru_channel: residual_f outside [0, 1]");
    // f relaxation during the operation is carried by the transfer itself
    const QutritChannel dec =
        decoherence_channel(tau_lru_ns, coh_mod.t1_mod, coh_mod.tphi_mod, 1e9);
    Matrix3cd k0 = Matrix3cd::Identity();
    k0(2, 2) = std::sqrt(residual_f);
    Matrix3cd k1 = Matrix3cd::Zero();
    k1(1, 2) = std::sqrt(1.0 - residual_f);  // f -> e
    const QutritChannel transfer = channel_from_kraus({k0, k1});
    return dec.then(transfer);
}

RBCurves run_rb(RBPrimitive primitive, const std::vector<int>& depths,
                int n_sequences, const RBChannelSet& channels,
                std::uint64_t seed, int n_shots, int n_threads) {
    if (depths.empty() || n_sequences < 1)
        throw DomainError("run_rb: need depths and at least one sequence");
    const auto cliffords = clifford_set();

    // per-Clifford step map: primitive o noise o unitary
    std::vector<Matrix9c> step(cliffords.size());
    for (size_t i = 0; i < cliffords.size(); ++i) {
        QutritChannel c = channel_from_unitary(cliffords[i])
                              .then(channels.clifford_noise);
        if (primitive == RBPrimitive::LeakInject ||
            primitive == RBPrimitive::LeakInjectLru)
            c = c.then(channels.leak);
        if (primitive == RBPrimitive::Lru ||
            primitive == RBPrimitive::LeakInjectLru)
            c = c.then(channels.lru);
        step[i] = c.s;
    }

    const size_t n_tasks = depths.size() * static_cast<size_t>(n_sequences);
    std::vector<std::array<double, 3>> task_pops(n_tasks);

    parallel_for(n_tasks, n_threads, [&](size_t task) {
        const size_t d_idx = task / static_cast<size_t>(n_sequences);
        const int depth = depths[d_idx];
        std::mt19937_64 rng(splitmix(seed) ^ splitmix(task + 1));
        std::uniform_int_distribution<size_t> pick(0, cliffords.size() - 1);

        Matrix3cd rho = Matrix3cd::Zero();
        rho(0, 0) = 1.0;
        Vec9 v = vectorize(rho);
        Matrix3cd ideal = Matrix3cd::Identity();
        for (int n = 0; n < depth; ++n) {
            const size_t idx = pick(rng);
            v = step[idx] * v;
            ideal = cliffords[idx] * ideal;
        }
        // recovery inverts the ideal g-e product; leakage is untouched
        const QutritChannel rec =
            channel_from_unitary(ideal.adjoint()).then(channels.clifford_noise);
        v = rec.s * v;
        rho = unvectorize(v);
        std::array<double, 3> pops = {std::max(rho(0, 0).real(), 0.0),
                                      std::max(rho(1, 1).real(), 0.0),
                                      std::max(rho(2, 2).real(), 0.0)};
        if (n_shots > 0) {
            // multinomial sampling of the three outcomes
            std::array<int, 3> counts = {0, 0, 0};
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double total = pops[0] + pops[1] + pops[2];
            for (int shot = 0; shot < n_shots; ++shot) {
                double x = u(rng) * total;
                int outcome = 2;
                if (x < pops[0])
                    outcome = 0;
                else if (x < pops[0] + pops[1])
                    outcome = 1;
                ++counts[static_cast<size_t>(outcome)];
            }
            for (int k = 0; k < 3; ++k)
                pops[static_cast<size_t>(k)] =
                    static_cast<double>(counts[static_cast<size_t>(k)]) /
                    static_cast<double>(n_shots);
        }
        task_pops[task] = pops;
    });

    RBCurves curves;
    curves.n_cliffords = depths;
    curves.n_sequences = n_sequences;
    curves.n_shots = n_shots;
    curves.seed = seed;
    for (size_t d = 0; d < depths.size(); ++d) {
        std::array<double, 3> mean = {0.0, 0.0, 0.0};
        for (int s = 0; s < n_sequences; ++s) {
            const auto& p =
                task_pops[d * static_cast<size_t>(n_sequences) +
                          static_cast<size_t>(s)];
            for (int k = 0; k < 3; ++k)
                mean[static_cast<size_t>(k)] += p[static_cast<size_t>(k)];
        }
        for (double& m : mean) m /= static_cast<double>(n_sequences);
        curves.p_g.push_back(mean[0]);
        curves.p_e.push_back(mean[1]);
        curves.p_f.push_back(mean[2]);
    }
    return curves;
}

namespace {

// least-squares coefficients for y ~ sum_k coef_k basis_k(n), returning SSE
double linear_fit(const std::vector<std::vector<double>>& basis,
                  const std::vector<double>& y, std::vector<double>& coef) {
    const auto rows = static_cast<Eigen::Index>(y.size());
    const auto cols = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        b(i) = y[static_cast<size_t>(i)];
        for (Eigen::Index j = 0; j < cols; ++j)
            a(i, j) = basis[static_cast<size_t>(j)][static_cast<size_t>(i)];
    }
    const Eigen::VectorXd x =
        a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
    coef.assign(x.data(), x.data() + cols);
    return (a * x - b).squaredNorm();
}

// 1D scan plus golden-section refinement of f over [lo, hi]
double minimize_1d(const std::function<double(double)>& f, double lo,
                   double hi) {
    double best_x = lo, best_f = f(lo);
    const int n_scan = 400;
    for (int i = 1; i <= n_scan; ++i) {
        const double x = lo + (hi - lo) * i / n_scan;
        const double v = f(x);
        if (v < best_f) {
            best_f = v;
            best_x = x;
        }
    }
    double a = std::max(lo, best_x - (hi - lo) / n_scan);
    double b = std::min(hi, best_x + (hi - lo) / n_scan);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

LeakageRBFit fit_leakage_rb(const RBCurves& curves) {
    const size_t n_pts = curves.n_cliffords.size();
    if (n_pts < 4) throw DomainError("fit_leakage_rb: need at least 4 depths");

    std::vector<double> ones(n_pts, 1.0);
    auto powers = [&](double lambda) {
        std::vector<double> p(n_pts);
        for (size_t i = 0; i < n_pts; ++i)
            p[i] = std::pow(lambda,
                            static_cast<double>(curves.n_cliffords[i]));
        return p;
    };

    LeakageRBFit fit;
    std::vector<double> coef;

    // leakage curve: P_f = l_inf + (P_f0 - l_inf) lambda_L^n
    auto sse_f = [&](double lambda) {
        std::vector<double> c;
        return linear_fit({ones, powers(lambda)}, curves.p_f, c);
    };
    fit.lambda_L = minimize_1d(sse_f, 1e-6, 1.0);
    const double sse_pf =
        linear_fit({ones, powers(fit.lambda_L)}, curves.p_f, coef);
    fit.l_inf = coef[0];
    fit.p_f0 = coef[0] + coef[1];

    // survival curve with lambda_L held fixed
    const auto pow_l = powers(fit.lambda_L);
    auto sse_g = [&](double lambda) {
        std::vector<double> c;
        return linear_fit({ones, powers(lambda), pow_l}, curves.p_g, c);
    };
    fit.lambda_1 = minimize_1d(sse_g, 1e-6, 1.0);
    const double sse_pg =
        linear_fit({ones, powers(fit.lambda_1), pow_l}, curves.p_g, coef);
    fit.a = coef[0];
    fit.b = coef[1];
    fit.c = coef[2];

    fit.residual_rms =
        std::sqrt((sse_pf + sse_pg) / (2.0 * static_cast<double>(n_pts)));
    if (fit.residual_rms > 0.05)
        throw FitDiverged("fit_leakage_rb: residual RMS above 0.05");
    return fit;
}

double irb_infidelity(const LeakageRBFit& ref_fit,
                      const LeakageRBFit& interleaved_fit) {
    if (ref_fit.lambda_1 <= 0.0 || interleaved_fit.lambda_1 <= 0.0)
        throw DomainError("irb_infidelity: decay constants must be positive");
    return (1.0 - interleaved_fit.lambda_1 / ref_fit.lambda_1) * 0.5;
}

}  // namespace mmwg
