#include "mtfl/discrepancy.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "mtfl/rng.hpp"

namespace mtfl {

void DiscrepancyMatrix::validate(double bound_M) const {
    for (int i = 0; i < n; ++i) {
        if (at(i, i) != 0.0) throw std::logic_error("discrepancy diagonal must be zero");
        for (int j = 0; j < n; ++j) {
            const double v = at(i, j);
            if (!(v >= 0.0 && v <= bound_M)) throw std::logic_error("discrepancy entry out of [0, M]");
            if (v != at(j, i)) throw std::logic_error("discrepancy matrix must be symmetric");
        }
    }
}

namespace {

std::vector<int> all_rows(const DeviceShard& s) {
    std::vector<int> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

std::vector<double> subgrad_delta(const ModelParams& w, const DeviceShard& shard_k,
                                  const DeviceShard& shard_j, const LossSpec& loss) {
    const auto idx_k = all_rows(shard_k);
    const auto idx_j = all_rows(shard_j);
    const double lk = empirical_loss(w, shard_k, idx_k, loss);
    const double lj = empirical_loss(w, shard_j, idx_j, loss);
    if (lk == lj) return std::vector<double>(w.values.size(), 0.0);
    const double s = lk > lj ? 1.0 : -1.0;
    auto gk = loss_gradient(w, shard_k, idx_k, loss);
    const auto gj = loss_gradient(w, shard_j, idx_j, loss);
    for (std::size_t i = 0; i < gk.size(); ++i) gk[i] = s * (gk[i] - gj[i]);
    return gk;
}

namespace {

double run_pair(const DeviceShard& sj, const DeviceShard& sk, const DdeConfig& cfg,
                const std::vector<int>& layer_sizes, Activation act, const LossSpec& loss,
                std::uint64_t seed) {
    // Seeded Gaussian start, scaled per layer like the training init: a unit
    // Gaussian saturates the clipped softmax on multi-layer models and leaves
    // the ascent without usable gradients.
    ModelParams w = zero_model(layer_sizes, act);
    std::mt19937_64 rng(seed);
    std::size_t pos = 0;
    for (const auto& [in, out] : w.layer_dims) {
        std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / (in + out)));
        const std::size_t count = static_cast<std::size_t>(in + 1) * out;
        for (std::size_t i = 0; i < count; ++i) w.values[pos + i] = gauss(rng);
        pos += count;
    }

    const auto idx_j = all_rows(sj);
    const auto idx_k = all_rows(sk);
    double best = 0.0;
    for (int t = 0; t <= cfg.iterations; ++t) {
        const double gap = std::abs(empirical_loss(w, sj, idx_j, loss) -
                                    empirical_loss(w, sk, idx_k, loss));
        best = std::max(best, gap);
        if (t == cfg.iterations) break;
        const auto g = subgrad_delta(w, sj, sk, loss);
        for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] += cfg.eta * g[i];
    }
    return best;
}

}  // namespace

DiscrepancyMatrix dde_run(const FederationData& data, const DdeConfig& cfg,
                          const std::vector<int>& layer_sizes, Activation act,
                          const LossSpec& loss) {
    if (cfg.iterations < 1 || cfg.eta <= 0.0)
        throw std::invalid_argument("dde_run: iterations must be >= 1 and eta > 0");
    const int n = data.device_count();
    if (n < 2) throw std::invalid_argument("dde_run: need at least 2 devices");

    struct Pair { int j, k; };
    std::vector<Pair> pairs;
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) pairs.push_back({j, k});

    DiscrepancyMatrix d(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t p = next.fetch_add(1); p < pairs.size(); p = next.fetch_add(1)) {
            const auto [j, k] = pairs[p];
            const std::uint64_t seed = mix_seed(cfg.init_seed, static_cast<std::uint64_t>(j),
                                                static_cast<std::uint64_t>(k));
            const double est = run_pair(data.shards[j], data.shards[k], cfg, layer_sizes, act,
                                        loss, seed);
            d.at(j, k) = est;
            d.at(k, j) = est;
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t nthreads = std::min<std::size_t>(hw, pairs.size());
    std::vector<std::thread> threads;
    for (std::size_t i = 1; i < nthreads; ++i) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    d.validate(loss.bound_M);
    return d;
}

}  // namespace mtfl
