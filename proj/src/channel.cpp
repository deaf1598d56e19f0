#include "mtfl/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace mtfl {

void ChannelConfig::validate() const {
    if (mode == ChannelMode::rayleigh) {
        if (snr_linear <= 0.0) throw std::invalid_argument("channel: snr_linear must be positive");
        if (bandwidth_B <= 0.0) throw std::invalid_argument("channel: bandwidth must be positive");
        if (payload_bits_d < 0) throw std::invalid_argument("channel: payload bits must be >= 0");
    }
    if (mode == ChannelMode::bitflip && (flip_p < 0.0 || flip_p > 1.0))
        throw std::invalid_argument("channel: flip_p must be in [0,1]");
}

double snr_db_to_linear(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

double outage_prob(const ChannelConfig& cfg) {
    if (cfg.mode != ChannelMode::rayleigh)
        throw std::logic_error("outage_prob is defined for the rayleigh mode only");
    cfg.validate();
    const double d = cfg.payload_bits_d;
    return 1.0 - std::exp(-(std::exp2(d / cfg.bandwidth_B) - 1.0) / cfg.snr_linear);
}

ChannelOutcome transmit(const SignVector& signs, const ChannelConfig& cfg, std::mt19937_64& rng) {
    ChannelOutcome out;
    switch (cfg.mode) {
        case ChannelMode::perfect:
            out.delivered = true;
            out.signs = signs;
            break;
        case ChannelMode::rayleigh: {
            std::exponential_distribution<double> exp1(1.0);
            const double gain = exp1(rng);  // |h|^2 for a CN(0,1) coefficient
            const double d = cfg.payload_bits_d > 0 ? cfg.payload_bits_d
                                                    : static_cast<double>(signs.size());
            const double capacity = cfg.bandwidth_B * std::log2(1.0 + gain * cfg.snr_linear);
            out.delivered = d <= capacity;
            if (out.delivered) out.signs = signs;
            break;
        }
        case ChannelMode::bitflip: {
            out.delivered = true;
            out.signs = signs;
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (auto& s : out.signs)
                if (s != 0 && u(rng) < cfg.flip_p) s = -s;
            break;
        }
    }
    return out;
}

}  // namespace mtfl
