#include "mtfl/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "mtfl/rng.hpp"
#include "mtfl/simplex.hpp"

namespace mtfl {

namespace {

void parallel_for(int n, const std::function<void(int)>& body) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int nthreads = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(n)));
    if (nthreads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < nthreads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
}

double squared_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void check_finite(const std::vector<double>& v, int round, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("numerical divergence in ") + what +
                                     " at round " + std::to_string(round));
}

// Negates real-valued payload components with probability flip_p; drops the
// whole payload on rayleigh outage. Used by the full-gradient baselines.
bool impair_real(std::vector<double>& payload, const ChannelConfig& cfg, std::mt19937_64& rng) {
    switch (cfg.mode) {
        case ChannelMode::perfect:
            return true;
        case ChannelMode::rayleigh: {
            std::exponential_distribution<double> exp1(1.0);
            const double gain = exp1(rng);
            const double d = cfg.payload_bits_d > 0 ? cfg.payload_bits_d
                                                    : static_cast<double>(payload.size());
            return d <= cfg.bandwidth_B * std::log2(1.0 + gain * cfg.snr_linear);
        }
        case ChannelMode::bitflip: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (auto& x : payload)
                if (u(rng) < cfg.flip_p) x = -x;
            return true;
        }
    }
    return true;
}

void fill_accuracy(RoundMetrics& rm, const std::vector<ModelParams>& per_device_model,
                   const FederationData& data) {
    const int n = data.device_count();
    rm.train_acc.resize(n);
    rm.test_acc.resize(n);
    for (int k = 0; k < n; ++k) {
        rm.train_acc[k] = accuracy(per_device_model[k], data.shards[k],
                                   data.shards[k].train_indices());
        rm.test_acc[k] = accuracy(per_device_model[k], data.shards[k],
                                  data.shards[k].test_indices());
    }
}

}  // namespace

double TrainConfig::eta_t() const {
    return lr_schedule == Schedule::one_over_sqrtT ? 1.0 / std::sqrt(double(rounds_T)) : eta;
}

double TrainConfig::mu_t() const {
    return lr_schedule == Schedule::one_over_sqrtT ? 1.0 / std::sqrt(double(rounds_T)) : mu;
}

void TrainConfig::validate() const {
    if (rounds_T < 1) throw std::invalid_argument("train: rounds_T must be >= 1");
    if (eta <= 0.0 || mu <= 0.0) throw std::invalid_argument("train: eta and mu must be positive");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (local_epochs < 1) throw std::invalid_argument("train: local_epochs must be >= 1");
}

double RoundMetrics::mean_train_acc() const {
    return std::accumulate(train_acc.begin(), train_acc.end(), 0.0) / train_acc.size();
}
double RoundMetrics::mean_test_acc() const {
    return std::accumulate(test_acc.begin(), test_acc.end(), 0.0) / test_acc.size();
}
double RoundMetrics::mean_delta() const {
    if (delta_k.empty()) return 0.0;
    return std::accumulate(delta_k.begin(), delta_k.end(), 0.0) / delta_k.size();
}

std::vector<DeviceRng> make_device_rngs(std::uint64_t seed, int n) {
    std::vector<DeviceRng> rngs(n);
    for (int m = 0; m < n; ++m) {
        rngs[m].batch.seed(mix_seed(seed, static_cast<std::uint64_t>(m), 0x6261746368ull));
        rngs[m].channel.seed(mix_seed(seed, static_cast<std::uint64_t>(m), 0x6368616eull));
    }
    return rngs;
}

std::vector<int> draw_batch(const DeviceShard& shard, int batch_size, std::mt19937_64& rng) {
    const int tc = shard.train_count;
    if (batch_size == tc) return shard.train_indices();
    std::vector<int> batch(batch_size);
    if (batch_size > tc) {
        std::uniform_int_distribution<int> pick(0, tc - 1);
        for (int i = 0; i < batch_size; ++i) batch[i] = pick(rng);
        return batch;
    }
    // partial Fisher-Yates without replacement
    std::vector<int> idx = shard.train_indices();
    for (int i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<int> pick(i, tc - 1);
        std::swap(idx[i], idx[pick(rng)]);
        batch[i] = idx[i];
    }
    return batch;
}

std::vector<int> model_layer_sizes(const FederationData& data, const TrainConfig& cfg) {
    std::vector<int> sizes;
    sizes.push_back(data.shards.front().features.cols);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(data.num_classes);
    return sizes;
}

FederationState make_initial_state(const FederationData& data, const TrainConfig& cfg) {
    const int n = data.device_count();
    FederationState st;
    st.alpha = ImportanceMatrix::uniform(n);
    const auto sizes = model_layer_sizes(data, cfg);
    st.W.reserve(n);
    for (int k = 0; k < n; ++k)
        st.W.push_back(init_model(sizes, cfg.activation,
                                  mix_seed(cfg.seed, static_cast<std::uint64_t>(k), 0x696e6974ull)));
    return st;
}

double delta_k_diagnostic(double lambda_k, const std::vector<double>& alpha_next_row,
                          const std::vector<double>& grad_l1_norms,
                          const std::vector<double>& projected_grad, double beta, int T) {
    double mass = 0.0;
    for (std::size_t m = 0; m < alpha_next_row.size(); ++m)
        mass += alpha_next_row[m] * grad_l1_norms[m];
    double pg2 = 0.0;
    for (double v : projected_grad) pg2 += v * v;
    return lambda_k * lambda_k * mass + (1.0 - beta / (2.0 * std::sqrt(double(T)))) * pg2;
}

RoundMetrics mtfeel_round(FederationState& state, const FederationData& data,
                          const DiscrepancyMatrix& dhat, const TrainConfig& cfg,
                          const PenaltyConfig& pen_cfg, const ChannelConfig& channel,
                          const LossSpec& loss, std::vector<DeviceRng>& rngs) {
    const int n = data.device_count();
    const double eta = cfg.eta_t();
    const double mu = cfg.mu_t();
    RoundMetrics rm;

    // (a) every device m reports sign(g_km) for every model k on one fresh batch
    std::vector<std::vector<SignVector>> reports(n, std::vector<SignVector>(n));
    std::atomic<int> outages{0};
    parallel_for(n, [&](int m) {
        const auto batch = draw_batch(data.shards[m], cfg.batch_size, rngs[m].batch);
        for (int k = 0; k < n; ++k) {
            const auto g = loss_gradient(state.W[k], data.shards[m], batch, loss);
            const auto outcome = transmit(sign_vec(g), channel, rngs[m].channel);
            if (outcome.delivered)
                reports[k][m] = outcome.signs;
            else
                outages.fetch_add(1);
        }
    });
    rm.outages = outages.load();
    rm.comm_bits = static_cast<std::uint64_t>(n) * n * state.W.front().values.size();

    // optional diagnostic inputs at W^t
    std::vector<std::vector<double>> g_l1(n), proj_grad(n);
    if (cfg.track_delta) {
        parallel_for(n, [&](int k) {
            g_l1[k].resize(n);
            std::vector<double> losses_t(n);
            for (int m = 0; m < n; ++m) {
                const auto idx = data.shards[m].train_indices();
                const auto g = loss_gradient(state.W[k], data.shards[m], idx, loss);
                double l1 = 0.0;
                for (double v : g) l1 += std::abs(v);
                g_l1[k][m] = l1;
                losses_t[m] = empirical_loss(state.W[k], data.shards[m], idx, loss);
            }
            const auto row_g = grad_alpha_row(k, state.alpha, dhat, losses_t, pen_cfg);
            proj_grad[k] = projected_gradient(state.alpha.rows[k], row_g, mu);
        });
    }

    // (b) signed descent on every model
    std::vector<ModelParams> newW = state.W;
    parallel_for(n, [&](int k) {
        const auto dir = signed_grad_w(k, state.W[k], state.alpha, reports[k], pen_cfg);
        for (std::size_t i = 0; i < dir.size(); ++i) newW[k].values[i] -= eta * dir[i];
        check_finite(newW[k].values, state.round, "model weights");
    });

    // (c) projected alpha step at the updated weights
    ImportanceMatrix new_alpha = state.alpha;
    std::vector<std::vector<double>> loss_mat(n, std::vector<double>(n));
    parallel_for(n, [&](int k) {
        for (int m = 0; m < n; ++m)
            loss_mat[k][m] = empirical_loss(newW[k], data.shards[m],
                                            data.shards[m].train_indices(), loss);
        const auto row_g = grad_alpha_row(k, state.alpha, dhat, loss_mat[k], pen_cfg);
        std::vector<double> stepped(n);
        for (int m = 0; m < n; ++m) stepped[m] = state.alpha.rows[k][m] - mu * row_g[m];
        new_alpha.rows[k] = project_simplex(stepped);
        check_finite(new_alpha.rows[k], state.round, "importance coefficients");
    });

    double wd = 0.0, ad = 0.0;
    for (int k = 0; k < n; ++k) {
        wd += squared_dist(newW[k].values, state.W[k].values);
        ad += squared_dist(new_alpha.rows[k], state.alpha.rows[k]);
    }
    rm.w_drift = wd / n;
    rm.alpha_drift = ad / n;

    if (cfg.track_delta) {
        rm.delta_k.resize(n);
        for (int k = 0; k < n; ++k) {
            const auto lc = lipschitz_constants(k, pen_cfg, state.W[k].dim());
            rm.delta_k[k] = delta_k_diagnostic(pen_cfg.lambda[k], new_alpha.rows[k], g_l1[k],
                                               proj_grad[k], lc.beta, cfg.rounds_T);
        }
    }

    state.W = std::move(newW);
    state.alpha = std::move(new_alpha);
    state.round += 1;

    fill_accuracy(rm, state.W, data);
    rm.objective = mtfeel_objective(state.W, state.alpha, dhat, data, pen_cfg, loss);
    return rm;
}

TrainResult mtfeel_train_from(FederationState state, const FederationData& data,
                              const DiscrepancyMatrix& dhat, const TrainConfig& cfg,
                              const PenaltyConfig& pen_cfg, const ChannelConfig& channel,
                              const LossSpec& loss) {
    cfg.validate();
    pen_cfg.validate();
    channel.validate();
    auto rngs = make_device_rngs(cfg.seed, data.device_count());
    TrainResult res;
    res.metrics.reserve(cfg.rounds_T);
    for (int t = 0; t < cfg.rounds_T; ++t)
        res.metrics.push_back(
            mtfeel_round(state, data, dhat, cfg, pen_cfg, channel, loss, rngs));
    res.state = std::move(state);
    return res;
}

TrainResult mtfeel_train(const FederationData& data, const DiscrepancyMatrix& dhat,
                         const TrainConfig& cfg, const PenaltyConfig& pen_cfg,
                         const ChannelConfig& channel, const LossSpec& loss) {
    return mtfeel_train_from(make_initial_state(data, cfg), data, dhat, cfg, pen_cfg, channel,
                             loss);
}

RoundMetrics baseline_round(BaselineKind kind, std::vector<ModelParams>& W,
                            const FederationData& data, const TrainConfig& cfg,
                            const ChannelConfig& channel, const LossSpec& loss,
                            std::vector<DeviceRng>& rngs) {
    const int n = data.device_count();
    const double eta = cfg.eta_t();
    RoundMetrics rm;
    double total_n = 0.0;
    for (const auto& s : data.shards) total_n += s.train_count;

    std::vector<ModelParams> before = W;
    switch (kind) {
        case BaselineKind::local: {
            parallel_for(n, [&](int k) {
                const auto batch = draw_batch(data.shards[k], cfg.batch_size, rngs[k].batch);
                const auto g = loss_gradient(W[k], data.shards[k], batch, loss);
                for (std::size_t i = 0; i < g.size(); ++i) W[k].values[i] -= eta * g[i];
                check_finite(W[k].values, 0, "local model");
            });
            break;
        }
        case BaselineKind::fedsgd:
        case BaselineKind::sign_fedsgd: {
            ModelParams& shared = W.front();
            std::vector<std::vector<double>> payloads(n);
            std::vector<char> delivered(n, 0);
            std::atomic<int> outages{0};
            parallel_for(n, [&](int m) {
                const auto batch = draw_batch(data.shards[m], cfg.batch_size, rngs[m].batch);
                auto g = loss_gradient(shared, data.shards[m], batch, loss);
                if (kind == BaselineKind::sign_fedsgd) {
                    const auto outcome = transmit(sign_vec(g), channel, rngs[m].channel);
                    if (outcome.delivered) {
                        payloads[m].assign(outcome.signs.begin(), outcome.signs.end());
                        delivered[m] = 1;
                    } else {
                        outages.fetch_add(1);
                    }
                } else {
                    if (impair_real(g, channel, rngs[m].channel)) {
                        payloads[m] = std::move(g);
                        delivered[m] = 1;
                    } else {
                        outages.fetch_add(1);
                    }
                }
            });
            rm.outages = outages.load();
            std::vector<double> agg(shared.values.size(), 0.0);
            for (int m = 0; m < n; ++m) {
                if (!delivered[m]) continue;
                const double w = data.shards[m].train_count / total_n;
                for (std::size_t i = 0; i < agg.size(); ++i) agg[i] += w * payloads[m][i];
            }
            for (std::size_t i = 0; i < agg.size(); ++i) shared.values[i] -= eta * agg[i];
            check_finite(shared.values, 0, "shared model");
            break;
        }
        case BaselineKind::fedavg: {
            ModelParams& shared = W.front();
            std::vector<ModelParams> locals(n, shared);
            std::vector<char> delivered(n, 0);
            std::atomic<int> outages{0};
            parallel_for(n, [&](int m) {
                for (int e = 0; e < cfg.local_epochs; ++e) {
                    const auto batch = draw_batch(data.shards[m], cfg.batch_size, rngs[m].batch);
                    const auto g = loss_gradient(locals[m], data.shards[m], batch, loss);
                    for (std::size_t i = 0; i < g.size(); ++i) locals[m].values[i] -= eta * g[i];
                }
                if (impair_real(locals[m].values, channel, rngs[m].channel))
                    delivered[m] = 1;
                else
                    outages.fetch_add(1);
            });
            rm.outages = outages.load();
            double wsum = 0.0;
            std::vector<double> avg(shared.values.size(), 0.0);
            for (int m = 0; m < n; ++m) {
                if (!delivered[m]) continue;
                const double w = data.shards[m].train_count / total_n;
                wsum += w;
                for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += w * locals[m].values[i];
            }
            if (wsum > 0.0) {
                for (std::size_t i = 0; i < avg.size(); ++i) shared.values[i] = avg[i] / wsum;
                check_finite(shared.values, 0, "averaged model");
            }
            break;
        }
    }

    std::vector<ModelParams> eval;
    if (kind == BaselineKind::local)
        eval = W;
    else
        eval.assign(n, W.front());
    fill_accuracy(rm, eval, data);

    // classical weighted objective as the reported loss
    double obj = 0.0;
    for (int k = 0; k < n; ++k)
        obj += data.shards[k].train_count / total_n *
               empirical_loss(eval[k], data.shards[k], data.shards[k].train_indices(), loss);
    rm.objective = obj;

    double wd = 0.0;
    for (std::size_t k = 0; k < W.size(); ++k) wd += squared_dist(W[k].values, before[k].values);
    rm.w_drift = wd / W.size();
    return rm;
}

BaselineResult baseline_train_from(BaselineKind kind, std::vector<ModelParams> W,
                                   const FederationData& data, const TrainConfig& cfg,
                                   const ChannelConfig& channel, const LossSpec& loss) {
    cfg.validate();
    channel.validate();
    auto rngs = make_device_rngs(cfg.seed, data.device_count());
    BaselineResult res;
    res.metrics.reserve(cfg.rounds_T);
    for (int t = 0; t < cfg.rounds_T; ++t)
        res.metrics.push_back(baseline_round(kind, W, data, cfg, channel, loss, rngs));
    res.W = std::move(W);
    return res;
}

BaselineResult baseline_train(BaselineKind kind, const FederationData& data,
                              const TrainConfig& cfg, const ChannelConfig& channel,
                              const LossSpec& loss) {
    const auto sizes = model_layer_sizes(data, cfg);
    std::vector<ModelParams> W;
    if (kind == BaselineKind::local) {
        for (int k = 0; k < data.device_count(); ++k)
            W.push_back(init_model(sizes, cfg.activation,
                                   mix_seed(cfg.seed, static_cast<std::uint64_t>(k), 0x696e6974ull)));
    } else {
        W.push_back(init_model(sizes, cfg.activation, mix_seed(cfg.seed, 0, 0x696e6974ull)));
    }
    return baseline_train_from(kind, std::move(W), data, cfg, channel, loss);
}

}  // namespace mtfl
