#include "mmwg/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mmwg {

namespace {

using Vec = std::vector<double>;

void clamp_to_box(Vec& x, const std::vector<std::pair<double, double>>& b) {
    for (size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], b[i].first, b[i].second);
}

FitResult nelder_mead(const Objective& f, Vec start,
                      const std::vector<std::pair<double, double>>& bounds,
                      int max_iter, double ftol) {
    const size_t n = start.size();
    int evals = 0;
    auto eval = [&](Vec& x) {
        clamp_to_box(x, bounds);
        ++evals;
        return f(x);
    };

    std::vector<Vec> simplex(n + 1, start);
    std::vector<double> fx(n + 1);
    for (size_t i = 0; i < n; ++i) {
        const double span = bounds[i].second - bounds[i].first;
        simplex[i + 1][i] += 0.05 * span;
    }
    for (size_t i = 0; i <= n; ++i) fx[i] = eval(simplex[i]);

    for (int it = 0; it < max_iter; ++it) {
        // order best..worst
        std::vector<size_t> ord(n + 1);
        for (size_t i = 0; i <= n; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(),
                  [&](size_t a, size_t b) { return fx[a] < fx[b]; });
        const size_t best = ord[0], worst = ord[n], second = ord[n - 1];
        if (std::abs(fx[worst] - fx[best]) <=
            ftol * (std::abs(fx[best]) + ftol))
            break;

        Vec centroid(n, 0.0);
        for (size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double alpha) {
            Vec x(n);
            for (size_t d = 0; d < n; ++d)
                x[d] = centroid[d] + alpha * (centroid[d] - simplex[worst][d]);
            return x;
        };

        Vec xr = blend(1.0);
        const double fr = eval(xr);
        if (fr < fx[best]) {
            Vec xe = blend(2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                fx[worst] = fe;
            } else {
                simplex[worst] = xr;
                fx[worst] = fr;
            }
        } else if (fr < fx[second]) {
            simplex[worst] = xr;
            fx[worst] = fr;
        } else {
            Vec xc = blend(fr < fx[worst] ? 0.5 : -0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, fx[worst])) {
                simplex[worst] = xc;
                fx[worst] = fc;
            } else {  // shrink toward the best vertex
                for (size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (size_t d = 0; d < n; ++d)
                        simplex[i][d] =
                            simplex[best][d] +
                            0.5 * (simplex[i][d] - simplex[best][d]);
                    fx[i] = eval(simplex[i]);
                }
            }
        }
    }

    size_t best = 0;
    for (size_t i = 1; i <= n; ++i)
        if (fx[i] < fx[best]) best = i;
    return {simplex[best], fx[best], evals};
}

}  // namespace

FitResult minimize(const Objective& f,
                   const std::vector<std::pair<double, double>>& bounds,
                   int n_starts, std::uint64_t seed, int max_iter,
                   double ftol) {
    if (bounds.empty() || n_starts < 1)
        throw DomainError("minimize: need bounds and at least one start");
    const size_t n = bounds.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    FitResult best;
    best.objective = std::numeric_limits<double>::infinity();
    int total_evals = 0;
    for (int s = 0; s < n_starts; ++s) {
        Vec start(n);
        for (size_t i = 0; i < n; ++i) {
            const double frac = s == 0 ? 0.5 : u(rng);
            start[i] = bounds[i].first +
                       frac * (bounds[i].second - bounds[i].first);
        }
        FitResult r = nelder_mead(f, std::move(start), bounds, max_iter, ftol);
        total_evals += r.evaluations;
        if (r.objective < best.objective) best = r;
    }
    best.evaluations = total_evals;
    return best;
}

}  // namespace mmwg
