#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmwg/common.hpp"

namespace mmwg {

// Fixed "%.12g" formatting so output bytes are reproducible across runs.
std::string format_number(double v);

// Writes header + rows; every row must match the header width.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Runs fn(i) for i in [0, n) on up to n_threads workers. Each index owns its
// output slot, so results are deterministic regardless of scheduling.
void parallel_for(std::size_t n, int n_threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace mmwg
