#include "mtfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mtfl {

int ModelParams::param_count(const std::vector<std::pair<int, int>>& dims) {
    int d = 0;
    for (auto [in, out] : dims) d += (in + 1) * out;
    return d;
}

std::vector<std::pair<int, int>> layer_dims_from_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("need at least input and output layer sizes");
    std::vector<std::pair<int, int>> dims;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        if (sizes[i] < 1 || sizes[i + 1] < 1) throw std::invalid_argument("layer sizes must be positive");
        dims.emplace_back(sizes[i], sizes[i + 1]);
    }
    return dims;
}

ModelParams zero_model(const std::vector<int>& layer_sizes, Activation act) {
    ModelParams p;
    p.layer_dims = layer_dims_from_sizes(layer_sizes);
    p.activation = act;
    p.values.assign(ModelParams::param_count(p.layer_dims), 0.0);
    return p;
}

ModelParams init_model(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed) {
    ModelParams p = zero_model(layer_sizes, act);
    std::mt19937_64 rng(seed);
    std::size_t off = 0;
    for (auto [in, out] : p.layer_dims) {
        const double a = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> u(-a, a);
        for (int i = 0; i < in * out; ++i) p.values[off + i] = u(rng);
        off += static_cast<std::size_t>((in + 1)) * out;  // biases stay 0
    }
    return p;
}

std::vector<int> DeviceShard::train_indices() const {
    std::vector<int> idx(train_count);
    for (int i = 0; i < train_count; ++i) idx[i] = i;
    return idx;
}

std::vector<int> DeviceShard::test_indices() const {
    std::vector<int> idx(test_count);
    for (int i = 0; i < test_count; ++i) idx[i] = train_count + i;
    return idx;
}

void DeviceShard::validate(int num_classes) const {
    if (train_count + test_count != size() || size() < 1)
        throw std::invalid_argument("shard split does not cover the sample count");
    if (features.rows != size())
        throw std::invalid_argument("feature row count does not match label count");
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw std::invalid_argument("label out of range");
}

namespace {

// Computes activations of every layer; `acts[0]` is the input, the last entry
// holds softmax probabilities. `pre` holds pre-activation values per hidden layer.
void run_layers(const ModelParams& p, const double* x, int x_len,
                std::vector<std::vector<double>>& acts, std::vector<std::vector<double>>& pre) {
    if (x_len != p.input_dim()) throw std::invalid_argument("input length does not match model input dim");
    const std::size_t L = p.layer_dims.size();
    acts.assign(L + 1, {});
    pre.assign(L, {});
    acts[0].assign(x, x + x_len);
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        auto [in, out] = p.layer_dims[l];
        std::vector<double> z(out);
        for (int o = 0; o < out; ++o) {
            double s = p.values[off + static_cast<std::size_t>(in) * out + o];  // bias
            const double* w = p.values.data() + off + static_cast<std::size_t>(o) * in;
            const double* a = acts[l].data();
            for (int i = 0; i < in; ++i) s += w[i] * a[i];
            z[o] = s;
        }
        pre[l] = z;
        if (l + 1 < L) {
            std::vector<double> h(out);
            if (p.activation == Activation::relu) {
                for (int o = 0; o < out; ++o) h[o] = z[o] > 0.0 ? z[o] : 0.0;
            } else {
                for (int o = 0; o < out; ++o) h[o] = std::tanh(z[o]);
            }
            acts[l + 1] = std::move(h);
        } else {
            // stable softmax
            double m = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            std::vector<double> e(out);
            for (int o = 0; o < out; ++o) {
                e[o] = std::exp(z[o] - m);
                sum += e[o];
            }
            for (int o = 0; o < out; ++o) e[o] /= sum;
            acts[L] = std::move(e);
        }
        off += static_cast<std::size_t>((in + 1)) * out;
    }
}

void check_subset(const std::vector<int>& subset) {
    if (subset.empty()) throw std::invalid_argument("subset must be nonempty");
}

}  // namespace

std::vector<double> forward(const ModelParams& params, const double* x, int x_len) {
    std::vector<std::vector<double>> acts, pre;
    run_layers(params, x, x_len, acts, pre);
    return acts.back();
}

std::vector<double> forward(const ModelParams& params, const std::vector<double>& x) {
    return forward(params, x.data(), static_cast<int>(x.size()));
}

double empirical_loss(const ModelParams& params, const DeviceShard& shard,
                      const std::vector<int>& subset, const LossSpec& loss) {
    check_subset(subset);
    const double M = loss.bound_M;
    double total = 0.0;
    for (int idx : subset) {
        auto probs = forward(params, shard.features.row(idx), shard.features.cols);
        double raw = -std::log(std::max(probs[shard.labels[idx]], 1e-300));
        total += std::min(raw, M);
    }
    return total / static_cast<double>(subset.size());
}

std::vector<double> loss_gradient(const ModelParams& params, const DeviceShard& shard,
                                  const std::vector<int>& subset, const LossSpec& loss) {
    check_subset(subset);
    const std::size_t L = params.layer_dims.size();
    std::vector<double> grad(params.values.size(), 0.0);
    std::vector<std::vector<double>> acts, pre;
    for (int idx : subset) {
        run_layers(params, shard.features.row(idx), shard.features.cols, acts, pre);
        const int y = shard.labels[idx];
        double raw = -std::log(std::max(acts[L][y], 1e-300));
        if (raw >= loss.bound_M) continue;  // clipped sample: zero subgradient

        // delta of the output layer: p - onehot(y)
        std::vector<double> delta = acts[L];
        delta[y] -= 1.0;

        // walk layers backwards, accumulating into grad
        std::size_t off_end = params.values.size();
        for (std::size_t l = L; l-- > 0;) {
            auto [in, out] = params.layer_dims[l];
            const std::size_t off = off_end - static_cast<std::size_t>((in + 1)) * out;
            double* gw = grad.data() + off;
            const double* a = acts[l].data();
            for (int o = 0; o < out; ++o) {
                const double d = delta[o];
                double* gr = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) gr[i] += d * a[i];
                gw[static_cast<std::size_t>(in) * out + o] += d;  // bias
            }
            if (l > 0) {
                std::vector<double> prev(in, 0.0);
                const double* w = params.values.data() + off;
                for (int o = 0; o < out; ++o) {
                    const double d = delta[o];
                    const double* wr = w + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) prev[i] += d * wr[i];
                }
                if (params.activation == Activation::relu) {
                    for (int i = 0; i < in; ++i)
                        if (pre[l - 1][i] <= 0.0) prev[i] = 0.0;
                } else {
                    for (int i = 0; i < in; ++i) {
                        double t = std::tanh(pre[l - 1][i]);
                        prev[i] *= 1.0 - t * t;
                    }
                }
                delta = std::move(prev);
            }
            off_end = off;
        }
    }
    const double inv = 1.0 / static_cast<double>(subset.size());
    for (double& g : grad) g *= inv;
    return grad;
}

double accuracy(const ModelParams& params, const DeviceShard& shard,
                const std::vector<int>& subset) {
    check_subset(subset);
    int correct = 0;
    for (int idx : subset) {
        auto probs = forward(params, shard.features.row(idx), shard.features.cols);
        int best = 0;
        for (int c = 1; c < static_cast<int>(probs.size()); ++c)
            if (probs[c] > probs[best]) best = c;  // strict: ties keep the lowest index
        if (best == shard.labels[idx]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(subset.size());
}

}  // namespace mtfl
