#pragma once

#include <cstdint>
#include <random>

#include "mtfl/simplex.hpp"

namespace mtfl {

enum class ChannelMode { perfect, rayleigh, bitflip };

struct ChannelConfig {
    ChannelMode mode = ChannelMode::perfect;
    double snr_linear = 1.0;    // P_k / (B sigma^2)
    double bandwidth_B = 1.0;   // channel uses per transmission
    int payload_bits_d = 0;     // 0: use the sign vector length
    double flip_p = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Result of one uplink transmission. `signs` is meaningful only when delivered.
struct ChannelOutcome {
    bool delivered = false;
    SignVector signs;
};

double snr_db_to_linear(double snr_db);

/// Rayleigh outage probability 1 - exp(-(2^(d/B) - 1) / SNR).
/// Throws for non-rayleigh modes.
double outage_prob(const ChannelConfig& cfg);

/// Applies the configured impairment to one sign report. Rayleigh draws
/// |h|^2 ~ Exp(1) from `rng` and delivers iff d <= B log2(1 + |h|^2 SNR);
/// bitflip independently negates each nonzero component with probability flip_p.
ChannelOutcome transmit(const SignVector& signs, const ChannelConfig& cfg, std::mt19937_64& rng);

}  // namespace mtfl
