#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mtfl {

/// Dense row-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

enum class Activation { relu, tanh };

/// Flat parameter vector of a feed-forward classifier plus its layer shapes.
///
/// Layout: for each layer (in, out), `out*in` weights (row o holds the fan-in
/// of output unit o, index o*in + i) followed by `out` biases.
struct ModelParams {
    std::vector<double> values;
    std::vector<std::pair<int, int>> layer_dims;  // (in, out) per layer
    Activation activation = Activation::relu;

    int dim() const { return static_cast<int>(values.size()); }
    int input_dim() const { return layer_dims.front().first; }
    int output_dim() const { return layer_dims.back().second; }

    static int param_count(const std::vector<std::pair<int, int>>& dims);
};

/// Builds layer_dims from consecutive layer sizes, e.g. {784, 32, 10}.
std::vector<std::pair<int, int>> layer_dims_from_sizes(const std::vector<int>& sizes);

/// Zero-initialised model.
ModelParams zero_model(const std::vector<int>& layer_sizes, Activation act);

/// Seeded uniform init in [-a, a] with a = sqrt(6 / (in + out)) per layer.
ModelParams init_model(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed);

/// One device's labelled dataset with a train/test split. The first
/// `train_count` rows are the training samples.
struct DeviceShard {
    Matrix features;           // n_k x d_in
    std::vector<int> labels;   // length n_k, values in [0, C)
    int train_count = 0;
    int test_count = 0;

    int size() const { return static_cast<int>(labels.size()); }
    std::vector<int> train_indices() const;
    std::vector<int> test_indices() const;
    void validate(int num_classes) const;
};

/// Bounded loss: softmax cross-entropy clipped at bound_M.
struct LossSpec {
    enum class Kind { cross_entropy };
    Kind kind = Kind::cross_entropy;
    double bound_M = 10.0;
};

/// Class-probability vector for one input (softmax over the final logits).
std::vector<double> forward(const ModelParams& params, const double* x, int x_len);
std::vector<double> forward(const ModelParams& params, const std::vector<double>& x);

/// Mean clipped cross-entropy over the given sample indices. Always in [0, bound_M].
double empirical_loss(const ModelParams& params, const DeviceShard& shard,
                      const std::vector<int>& subset, const LossSpec& loss);

/// Exact gradient of empirical_loss over the subset. Samples whose raw loss
/// reaches the clip ceiling contribute zero.
std::vector<double> loss_gradient(const ModelParams& params, const DeviceShard& shard,
                                  const std::vector<int>& subset, const LossSpec& loss);

/// Fraction of argmax-correct predictions; ties break toward the lowest class index.
double accuracy(const ModelParams& params, const DeviceShard& shard,
                const std::vector<int>& subset);

}  // namespace mtfl
