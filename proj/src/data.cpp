#include "mtfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "mtfl/rng.hpp"

namespace mtfl {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& f, const std::string& what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("IDX: truncated file while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

int train_count_of(const CohortSpec& spec) {
    int tc = static_cast<int>(std::lround(spec.train_fraction * spec.samples_per_device));
    tc = std::clamp(tc, 1, spec.samples_per_device - 1);
    return tc;
}

void check_specs(const std::vector<CohortSpec>& specs) {
    int total = 0;
    for (const auto& s : specs) {
        if (s.device_count < 1) throw std::invalid_argument("cohort device_count must be >= 1");
        if (s.label_set.empty()) throw std::invalid_argument("cohort label_set must be nonempty");
        if (s.samples_per_device < 2)
            throw std::invalid_argument("samples_per_device must be >= 2 so both splits are nonempty");
        if (s.train_fraction <= 0.0 || s.train_fraction >= 1.0)
            throw std::invalid_argument("train_fraction must be in (0,1)");
        total += s.device_count;
    }
    if (total < 2) throw std::invalid_argument("federation needs at least 2 devices");
}

}  // namespace

void FederationData::validate() const {
    if (device_count() < 2) throw std::invalid_argument("federation needs at least 2 devices");
    if (cohort_of.size() != shards.size())
        throw std::invalid_argument("cohort map size does not match shard count");
    for (const auto& s : shards) s.validate(num_classes);
}

std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("IDX: cannot open " + images_path);
    if (read_be32(fi, "images magic") != kImagesMagic)
        throw std::runtime_error("IDX: bad magic number in " + images_path);
    const std::uint32_t count = read_be32(fi, "image count");
    const std::uint32_t rows = read_be32(fi, "image rows");
    const std::uint32_t cols = read_be32(fi, "image cols");

    Matrix features(static_cast<int>(count), static_cast<int>(rows * cols));
    std::vector<unsigned char> buf(rows * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!fi.read(reinterpret_cast<char*>(buf.data()), buf.size()))
            throw std::runtime_error("IDX: truncated image payload in " + images_path);
        double* out = features.row(static_cast<int>(i));
        for (std::size_t j = 0; j < buf.size(); ++j) out[j] = buf[j] / 255.0;
    }

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("IDX: cannot open " + labels_path);
    if (read_be32(fl, "labels magic") != kLabelsMagic)
        throw std::runtime_error("IDX: bad magic number in " + labels_path);
    const std::uint32_t lcount = read_be32(fl, "label count");
    if (lcount != count) throw std::runtime_error("IDX: image/label count mismatch");
    std::vector<int> labels(lcount);
    for (std::uint32_t i = 0; i < lcount; ++i) {
        unsigned char b;
        if (!fl.read(reinterpret_cast<char*>(&b), 1))
            throw std::runtime_error("IDX: truncated label payload in " + labels_path);
        labels[i] = b;
    }
    return {std::move(features), std::move(labels)};
}

FederationData synth_cohorts(const std::vector<CohortSpec>& specs, int d_in, std::uint64_t seed) {
    if (d_in < 1) throw std::invalid_argument("synth_cohorts: d_in must be >= 1");
    check_specs(specs);

    // One blob per (cohort, class). Means live on a lattice with spacing 4 so
    // any two distinct blobs are at least 4 apart.
    FederationData fed;
    int blob_index = 0;
    std::vector<std::vector<std::vector<double>>> blob_means(specs.size());
    int max_label = 0;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        for (int lbl : specs[c].label_set) {
            max_label = std::max(max_label, lbl);
            std::vector<double> mean(d_in, 0.0);
            mean[blob_index % d_in] = 4.0 * (1 + blob_index / d_in);
            blob_means[c].push_back(std::move(mean));
            ++blob_index;
        }
    }
    fed.num_classes = max_label + 1;

    int device = 0;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        const auto& spec = specs[c];
        const int n = spec.samples_per_device;
        const int tc = train_count_of(spec);
        for (int dev = 0; dev < spec.device_count; ++dev, ++device) {
            std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(device)));
            std::normal_distribution<double> gauss(0.0, 1.0);

            // Round-robin over the label set keeps classes balanced, then the
            // order is shuffled before the train/test split.
            std::vector<int> cls(n);
            for (int i = 0; i < n; ++i) cls[i] = i % static_cast<int>(spec.label_set.size());
            std::shuffle(cls.begin(), cls.end(), rng);

            DeviceShard shard;
            shard.features = Matrix(n, d_in);
            shard.labels.resize(n);
            shard.train_count = tc;
            shard.test_count = n - tc;
            for (int i = 0; i < n; ++i) {
                shard.labels[i] = spec.label_set[cls[i]];
                const auto& mean = blob_means[c][cls[i]];
                double* row = shard.features.row(i);
                for (int j = 0; j < d_in; ++j) row[j] = mean[j] + gauss(rng);
            }
            fed.shards.push_back(std::move(shard));
            fed.cohort_of.push_back(static_cast<int>(c));
        }
    }
    fed.validate();
    return fed;
}

FederationData partition_dataset(const Matrix& features, const std::vector<int>& labels,
                                 const std::vector<CohortSpec>& specs, std::uint64_t seed) {
    check_specs(specs);
    if (features.rows != static_cast<int>(labels.size()))
        throw std::invalid_argument("partition: feature/label count mismatch");

    FederationData fed;
    fed.num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    int device = 0;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        const auto& spec = specs[c];
        std::set<int> wanted(spec.label_set.begin(), spec.label_set.end());
        std::vector<int> pool;
        for (int i = 0; i < static_cast<int>(labels.size()); ++i)
            if (wanted.count(labels[i])) pool.push_back(i);
        if (static_cast<int>(pool.size()) < spec.samples_per_device)
            throw std::runtime_error("partition: cohort '" + spec.name +
                                     "' has too few samples for its devices");

        const int n = spec.samples_per_device;
        const int tc = train_count_of(spec);
        for (int dev = 0; dev < spec.device_count; ++dev, ++device) {
            std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(device)));
            std::vector<int> chosen = pool;
            std::shuffle(chosen.begin(), chosen.end(), rng);
            chosen.resize(n);

            DeviceShard shard;
            shard.features = Matrix(n, features.cols);
            shard.labels.resize(n);
            shard.train_count = tc;
            shard.test_count = n - tc;
            for (int i = 0; i < n; ++i) {
                const double* src = features.row(chosen[i]);
                std::copy(src, src + features.cols, shard.features.row(i));
                shard.labels[i] = labels[chosen[i]];
            }
            fed.shards.push_back(std::move(shard));
            fed.cohort_of.push_back(static_cast<int>(c));
        }
    }
    fed.validate();
    return fed;
}

}  // namespace mtfl
