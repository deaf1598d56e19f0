#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mtfl/channel.hpp"
#include "mtfl/data.hpp"
#include "mtfl/discrepancy.hpp"
#include "mtfl/nn.hpp"
#include "mtfl/objective.hpp"

namespace mtfl {

enum class Schedule { constant, one_over_sqrtT };

struct TrainConfig {
    int rounds_T = 300;
    double eta = 0.02;
    double mu = 0.02;
    int batch_size = 20;
    int local_epochs = 5;  // fedavg only
    std::uint64_t seed = 0;
    Schedule lr_schedule = Schedule::constant;
    bool track_delta = false;
    std::vector<int> hidden = {32};
    Activation activation = Activation::relu;

    double eta_t() const;
    double mu_t() const;
    void validate() const;
};

struct FederationState {
    std::vector<ModelParams> W;
    ImportanceMatrix alpha;
    int round = 0;
};

struct RoundMetrics {
    std::vector<double> train_acc;
    std::vector<double> test_acc;
    double objective = 0.0;
    double w_drift = 0.0;      // mean_k ||w^{t+1} - w^t||_2^2
    double alpha_drift = 0.0;  // mean_k ||alpha^{t+1} - alpha^t||_2^2
    std::vector<double> delta_k;
    int outages = 0;
    std::uint64_t comm_bits = 0;  // uplink sign bits this round

    double mean_train_acc() const;
    double mean_test_acc() const;
    double mean_delta() const;
};

/// One RNG pair per device: batch selection and channel fading/flips.
struct DeviceRng {
    std::mt19937_64 batch;
    std::mt19937_64 channel;
};

std::vector<DeviceRng> make_device_rngs(std::uint64_t seed, int n);

/// Batch of training-row indices. Uses the whole training set when batch_size
/// covers it; samples with replacement when batch_size exceeds it.
std::vector<int> draw_batch(const DeviceShard& shard, int batch_size, std::mt19937_64& rng);

std::vector<int> model_layer_sizes(const FederationData& data, const TrainConfig& cfg);

/// Per-device models seeded from cfg.seed, alpha rows uniform.
FederationState make_initial_state(const FederationData& data, const TrainConfig& cfg);

/// One personalised-training round: every device reports sign gradients of all
/// N models on a fresh batch, the aggregator forms the signed updates, then
/// the alpha rows take a projected gradient step at the updated weights.
RoundMetrics mtfeel_round(FederationState& state, const FederationData& data,
                          const DiscrepancyMatrix& dhat, const TrainConfig& cfg,
                          const PenaltyConfig& pen_cfg, const ChannelConfig& channel,
                          const LossSpec& loss, std::vector<DeviceRng>& rngs);

struct TrainResult {
    FederationState state;
    std::vector<RoundMetrics> metrics;
};

TrainResult mtfeel_train(const FederationData& data, const DiscrepancyMatrix& dhat,
                         const TrainConfig& cfg, const PenaltyConfig& pen_cfg,
                         const ChannelConfig& channel, const LossSpec& loss);

/// Continues from a caller-prepared state (e.g. a shared init across devices).
TrainResult mtfeel_train_from(FederationState state, const FederationData& data,
                              const DiscrepancyMatrix& dhat, const TrainConfig& cfg,
                              const PenaltyConfig& pen_cfg, const ChannelConfig& channel,
                              const LossSpec& loss);

enum class BaselineKind { local, fedsgd, sign_fedsgd, fedavg };

/// W holds N models for `local` and a single shared model otherwise.
RoundMetrics baseline_round(BaselineKind kind, std::vector<ModelParams>& W,
                            const FederationData& data, const TrainConfig& cfg,
                            const ChannelConfig& channel, const LossSpec& loss,
                            std::vector<DeviceRng>& rngs);

struct BaselineResult {
    std::vector<ModelParams> W;
    std::vector<RoundMetrics> metrics;
};

BaselineResult baseline_train(BaselineKind kind, const FederationData& data,
                              const TrainConfig& cfg, const ChannelConfig& channel,
                              const LossSpec& loss);
BaselineResult baseline_train_from(BaselineKind kind, std::vector<ModelParams> W,
                                   const FederationData& data, const TrainConfig& cfg,
                                   const ChannelConfig& channel, const LossSpec& loss);

/// Convergence diagnostic for device k:
/// lambda_k^2 sum_m alpha_next[m] * ||g_km||_1 + (1 - beta/(2 sqrt(T))) ||pg||_2^2.
double delta_k_diagnostic(double lambda_k, const std::vector<double>& alpha_next_row,
                          const std::vector<double>& grad_l1_norms,
                          const std::vector<double>& projected_grad, double beta, int T);

}  // namespace mtfl
