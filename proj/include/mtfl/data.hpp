#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtfl/nn.hpp"

namespace mtfl {

/// One cohort of devices drawing from the same label set / distribution.
struct CohortSpec {
    std::string name;
    int device_count = 1;
    std::vector<int> label_set;
    int samples_per_device = 100;
    double train_fraction = 0.2;
};

/// All device shards plus the device -> cohort assignment.
struct FederationData {
    std::vector<DeviceShard> shards;
    std::vector<int> cohort_of;  // cohort index per device
    int num_classes = 0;

    int device_count() const { return static_cast<int>(shards.size()); }
    void validate() const;
};

/// Reads an IDX image/label file pair. Features are raw bytes scaled to [0,1],
/// one image per row. Throws std::runtime_error on bad magic numbers,
/// truncated files or image/label count mismatch.
std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path);

/// Synthetic federation: each cohort gets its own Gaussian class-blobs (unit
/// covariance, means >= 4 apart in Euclidean distance). Deterministic per seed.
FederationData synth_cohorts(const std::vector<CohortSpec>& specs, int d_in, std::uint64_t seed);

/// Partitions a labelled dataset into device shards per the cohort specs.
/// Each device samples without replacement from its cohort's label pool;
/// devices may share samples.
FederationData partition_dataset(const Matrix& features, const std::vector<int>& labels,
                                 const std::vector<CohortSpec>& specs, std::uint64_t seed);

}  // namespace mtfl
