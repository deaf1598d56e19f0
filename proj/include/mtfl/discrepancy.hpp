#pragma once

#include <cstdint>
#include <vector>

#include "mtfl/data.hpp"
#include "mtfl/nn.hpp"

namespace mtfl {

/// Symmetric, zero-diagonal matrix of pairwise discrepancy estimates.
struct DiscrepancyMatrix {
    int n = 0;
    std::vector<double> values;  // n x n row-major

    DiscrepancyMatrix() = default;
    explicit DiscrepancyMatrix(int n_) : n(n_), values(static_cast<std::size_t>(n_) * n_, 0.0) {}

    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
    void validate(double bound_M) const;
};

struct DdeConfig {
    int iterations = 50;
    double eta = 0.05;
    std::uint64_t init_seed = 0;
};

/// Ascent subgradient of |L_k(w) - L_j(w)|: sign(L_k - L_j) * (grad_k - grad_j),
/// zero when the losses tie exactly. Evaluated on every sample of each shard:
/// discrepancy estimation runs before training, on the devices' full local data.
std::vector<double> subgrad_delta(const ModelParams& w, const DeviceShard& shard_k,
                                  const DeviceShard& shard_j, const LossSpec& loss);

/// Pairwise discrepancy estimation: for each unordered device pair, seeded
/// Gaussian init then `iterations` subgradient-ascent steps on |L_j - L_k|,
/// recording the running maximum of the loss gap over all iterates.
DiscrepancyMatrix dde_run(const FederationData& data, const DdeConfig& cfg,
                          const std::vector<int>& layer_sizes, Activation act,
                          const LossSpec& loss);

}  // namespace mtfl
