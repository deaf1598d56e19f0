#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mtfl/channel.hpp"
#include "mtfl/data.hpp"
#include "mtfl/discrepancy.hpp"
#include "mtfl/objective.hpp"
#include "mtfl/train.hpp"

namespace mtfl {

/// Fully resolved experiment description. Parses from a JSON config file in
/// which every field is optional; unspecified fields take the defaults below.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    // data source
    bool use_idx = false;
    std::string images_path;
    std::string labels_path;
    int d_in = 16;  // synth only
    std::vector<CohortSpec> cohorts;

    std::vector<std::string> algorithms = {"mtfeel", "local", "fedsgd", "sign_fedsgd", "fedavg"};

    TrainConfig train;
    DdeConfig dde;
    double bound_M = 10.0;
    double delta = 0.05;
    double log_cover = 2.0;
    double gamma = 0.0;

    ChannelMode channel_mode = ChannelMode::perfect;
    double snr_db = 0.0;
    double bandwidth = 0.0;  // <= 0: defaults to 8x the payload bit count
    int payload_bits = 0;    // <= 0: defaults to the model dimension
    double flip_p = 0.0;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    std::string to_json_text() const;

    FederationData build_data() const;
    ChannelConfig build_channel(int model_dim) const;
    PenaltyConfig build_penalty(const FederationData& data) const;
    LossSpec build_loss() const;
};

/// Named built-in configurations (desk-cohort, paper-fig2, paper-fig4a, paper-fig4b).
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Runs every configured algorithm and writes metrics.csv, alpha_final.csv,
/// discrepancy.csv and config_resolved.json under cfg.out_dir. Returns 0 on
/// success.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// One full run per axis value; final test accuracy per algorithm per value
/// goes to sweep.csv. Axis is one of snr_db, flip_p, rounds_T.
int run_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, std::ostream& log);

/// Discrepancy estimation only; writes discrepancy.csv.
int run_dde_only(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace mtfl
