#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mmwg/common.hpp"

namespace mmwg {

struct FitResult {
    std::vector<double> params;
    double objective = 0.0;  // value of the objective at params
    int evaluations = 0;
};

// Objective to minimize (typically a residual RMS).
using Objective = std::function<double(const std::vector<double>&)>;

// Derivative-free bounded Nelder-Mead with deterministic multistart: one
// start at the box center plus (n_starts - 1) uniform draws seeded from
// `seed`. Iterates are clamped to the box.
FitResult minimize(const Objective& f,
                   const std::vector<std::pair<double, double>>& bounds,
                   int n_starts = 8, std::uint64_t seed = 12345,
                   int max_iter = 4000, double ftol = 1e-14);

}  // namespace mmwg
