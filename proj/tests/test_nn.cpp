#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "mtfl/nn.hpp"

using namespace mtfl;

namespace {

// Independent scalar re-implementation of the forward pass used as an oracle.
// Walks the flat parameter vector with its own bookkeeping.
std::vector<double> oracle_forward(const ModelParams& p, const std::vector<double>& x) {
    std::vector<double> a = x;
    std::size_t pos = 0;
    for (std::size_t l = 0; l < p.layer_dims.size(); ++l) {
        const int in = p.layer_dims[l].first;
        const int out = p.layer_dims[l].second;
        std::vector<double> z(out, 0.0);
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) z[o] += p.values[pos + o * in + i] * a[i];
        for (int o = 0; o < out; ++o) z[o] += p.values[pos + in * out + o];
        pos += (in + 1) * out;
        if (l + 1 < p.layer_dims.size()) {
            for (int o = 0; o < out; ++o) {
                if (p.activation == Activation::relu)
                    z[o] = std::max(z[o], 0.0);
                else
                    z[o] = std::tanh(z[o]);
            }
            a = z;
        } else {
            double mx = z[0];
            for (double v : z) mx = std::max(mx, v);
            double sum = 0.0;
            for (double v : z) sum += std::exp(v - mx);
            a.resize(out);
            for (int o = 0; o < out; ++o) a[o] = std::exp(z[o] - mx) / sum;
        }
    }
    return a;
}

DeviceShard random_shard(int n, int d_in, int classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> lab(0, classes - 1);
    DeviceShard s;
    s.features = Matrix(n, d_in);
    s.labels.resize(n);
    s.train_count = n;
    s.test_count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d_in; ++j) s.features.at(i, j) = g(rng);
        s.labels[i] = lab(rng);
    }
    return s;
}

std::vector<int> all_indices(int n) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

}  // namespace

TEST_CASE("forward on all-zero params is uniform") {
    auto p = zero_model({4, 3, 10}, Activation::relu);
    std::vector<double> x{0.3, -0.7, 1.1, 0.0};
    auto probs = forward(p, x);
    REQUIRE(probs.size() == 10);
    for (double v : probs) CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("forward probabilities sum to one on random inputs") {
    auto p = init_model({6, 8, 5}, Activation::tanh, 42);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(6);
        for (auto& v : x) v = g(rng);
        auto probs = forward(p, x);
        double sum = 0.0;
        for (double v : probs) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("forward matches the scalar oracle on a 2-2-2 network") {
    auto p = zero_model({2, 2, 2}, Activation::relu);
    // fixed, deliberately asymmetric weights
    p.values = {0.5, -1.0, 2.0, 0.25, 0.1, -0.3,   // layer 1: 4 weights + 2 biases
                1.5, -0.5, 0.7, 0.2, -0.1, 0.4};   // layer 2
    std::vector<double> x{0.8, -1.2};
    auto got = forward(p, x);
    auto want = oracle_forward(p, x);
    for (int i = 0; i < 2; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("forward matches oracle on random deeper nets") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto p = init_model({5, 7, 4, 3}, seed % 2 ? Activation::relu : Activation::tanh, seed);
        std::mt19937_64 rng(seed + 100);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> x(5);
        for (auto& v : x) v = g(rng);
        auto got = forward(p, x);
        auto want = oracle_forward(p, x);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
    }
}

TEST_CASE("forward rejects dimension mismatch") {
    auto p = zero_model({3, 2}, Activation::relu);
    std::vector<double> x{1.0, 2.0};
    CHECK_THROWS_AS(forward(p, x), std::invalid_argument);
}

TEST_CASE("empirical loss of zero params is ln(C)") {
    auto p = zero_model({4, 10}, Activation::relu);
    auto shard = random_shard(20, 4, 10, 3);
    LossSpec loss;
    const double v = empirical_loss(p, shard, all_indices(20), loss);
    CHECK(v == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("empirical loss clips at bound_M") {
    auto p = zero_model({4, 10}, Activation::relu);
    auto shard = random_shard(10, 4, 10, 5);
    LossSpec loss;
    loss.bound_M = 0.5;  // ln(10) > 0.5, so every sample clips
    CHECK(empirical_loss(p, shard, all_indices(10), loss) == doctest::Approx(0.5));
}

TEST_CASE("empirical loss rejects an empty subset") {
    auto p = zero_model({4, 10}, Activation::relu);
    auto shard = random_shard(5, 4, 10, 1);
    CHECK_THROWS_AS(empirical_loss(p, shard, {}, LossSpec{}), std::invalid_argument);
}

TEST_CASE("empirical loss matches a scalar-loop oracle") {
    auto p = init_model({3, 5, 4}, Activation::relu, 11);
    auto shard = random_shard(12, 3, 4, 12);
    LossSpec loss;
    loss.bound_M = 3.0;
    double want = 0.0;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> x(3);
        for (int j = 0; j < 3; ++j) x[j] = shard.features.at(i, j);
        auto probs = oracle_forward(p, x);
        want += std::min(-std::log(probs[shard.labels[i]]), loss.bound_M);
    }
    want /= 12.0;
    CHECK(empirical_loss(p, shard, all_indices(12), loss) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("gradient matches central finite differences on a 2-4-3 network") {
    auto p = init_model({2, 4, 3}, Activation::relu, 5);
    auto shard = random_shard(8, 2, 3, 6);
    LossSpec loss;
    const auto idx = all_indices(8);
    const auto grad = loss_gradient(p, shard, idx, loss);

    const double h = 1e-5;
    double num2 = 0.0, diff2 = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        ModelParams plus = p, minus = p;
        plus.values[i] += h;
        minus.values[i] -= h;
        const double fd =
            (empirical_loss(plus, shard, idx, loss) - empirical_loss(minus, shard, idx, loss)) /
            (2 * h);
        num2 += fd * fd;
        diff2 += (grad[i] - fd) * (grad[i] - fd);
    }
    CHECK(std::sqrt(diff2) <= 1e-4 * std::sqrt(num2));
}

TEST_CASE("gradient is ~zero at an interpolating minimum") {
    // bias-only model putting ~all probability mass on the true class
    auto p = zero_model({2, 3}, Activation::relu);
    p.values[2 * 3 + 1] = 50.0;  // bias of class 1
    DeviceShard shard;
    shard.features = Matrix(1, 2);
    shard.features.at(0, 0) = 0.2;
    shard.features.at(0, 1) = -0.4;
    shard.labels = {1};
    shard.train_count = 1;
    shard.test_count = 0;
    const auto grad = loss_gradient(p, shard, {0}, LossSpec{});
    double norm = 0.0;
    for (double g : grad) norm += g * g;
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("gradient is linear over disjoint subsets") {
    auto p = init_model({3, 4, 3}, Activation::tanh, 9);
    auto shard = random_shard(10, 3, 3, 21);
    LossSpec loss;  // default M=10, no clipping for random small nets
    std::vector<int> a{0, 1, 2, 3}, b{4, 5, 6, 7, 8, 9};
    const auto ga = loss_gradient(p, shard, a, loss);
    const auto gb = loss_gradient(p, shard, b, loss);
    const auto gall = loss_gradient(p, shard, all_indices(10), loss);
    for (std::size_t i = 0; i < gall.size(); ++i)
        CHECK(gall[i] == doctest::Approx((4.0 * ga[i] + 6.0 * gb[i]) / 10.0).epsilon(1e-10));
}

TEST_CASE("clipped samples contribute zero gradient") {
    auto p = zero_model({4, 10}, Activation::relu);
    auto shard = random_shard(6, 4, 10, 8);
    LossSpec loss;
    loss.bound_M = 0.5;  // everything clips at uniform output
    const auto grad = loss_gradient(p, shard, all_indices(6), loss);
    for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("accuracy is 1 when labels equal argmax and ties go to class 0") {
    auto p = zero_model({2, 4}, Activation::relu);  // uniform output: argmax tie -> class 0
    DeviceShard shard;
    shard.features = Matrix(4, 2);
    shard.labels = {0, 0, 1, 2};
    shard.train_count = 4;
    shard.test_count = 0;
    CHECK(accuracy(p, shard, {0, 1, 2, 3}) == doctest::Approx(0.5));  // class-0 frequency
    shard.labels = {0, 0, 0, 0};
    CHECK(accuracy(p, shard, {0, 1, 2, 3}) == doctest::Approx(1.0));
}

TEST_CASE("accuracy matches a hand count on 5 fixed samples") {
    auto p = zero_model({1, 2}, Activation::relu);
    p.values = {2.0, -2.0, 0.0, 0.0};  // class 0 iff x > 0, tie at x = 0 -> class 0
    DeviceShard shard;
    shard.features = Matrix(5, 1);
    shard.features.at(0, 0) = 1.0;   // pred 0
    shard.features.at(1, 0) = -1.0;  // pred 1
    shard.features.at(2, 0) = 0.0;   // tie -> pred 0
    shard.features.at(3, 0) = 2.0;   // pred 0
    shard.features.at(4, 0) = -2.0;  // pred 1
    shard.labels = {0, 1, 1, 1, 1};  // hand count: samples 0, 1, 4 correct
    shard.train_count = 5;
    shard.test_count = 0;
    CHECK(accuracy(p, shard, {0, 1, 2, 3, 4}) == doctest::Approx(3.0 / 5.0));
}

TEST_CASE("finite-difference agreement at 20 random points") {
    std::mt19937_64 rng(77);
    auto shard = random_shard(6, 3, 3, 55);
    LossSpec loss;
    const auto idx = all_indices(6);
    std::normal_distribution<double> g(0.0, 0.7);
    int checked = 0;
    for (int trial = 0; checked < 20 && trial < 200; ++trial) {
        auto p = init_model({3, 4, 3}, Activation::relu, rng());
        for (auto& v : p.values) v += g(rng) * 0.1;
        const auto grad = loss_gradient(p, shard, idx, loss);
        const double h = 1e-5;
        double num2 = 0.0, diff2 = 0.0;
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            ModelParams plus = p, minus = p;
            plus.values[i] += h;
            minus.values[i] -= h;
            const double fd = (empirical_loss(plus, shard, idx, loss) -
                               empirical_loss(minus, shard, idx, loss)) /
                              (2 * h);
            num2 += fd * fd;
            diff2 += (grad[i] - fd) * (grad[i] - fd);
        }
        if (num2 == 0.0) continue;
        CHECK(std::sqrt(diff2) <= 1e-4 * std::sqrt(num2));
        ++checked;
    }
    CHECK(checked == 20);
}
