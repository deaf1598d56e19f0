#pragma once

#include <cstdint>
#include <vector>

namespace mtfl {

/// Per-component sign payload; entries are -1, 0 or +1.
using SignVector = std::vector<std::int8_t>;

/// Componentwise sign with sign(0) = 0.
SignVector sign_vec(const std::vector<double>& v);

/// Euclidean projection onto the probability simplex (sort-threshold, exact).
std::vector<double> project_simplex(const std::vector<double>& v);

/// (z - project_simplex(z - mu*g)) / mu. Throws if mu <= 0.
std::vector<double> projected_gradient(const std::vector<double>& z,
                                       const std::vector<double>& g, double mu);

}  // namespace mtfl
