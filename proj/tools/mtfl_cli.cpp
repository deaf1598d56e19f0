// Command-line front end: run experiments, parameter sweeps or discrepancy
// estimation from a JSON config file or a built-in preset.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtfl/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string preset_name;
    std::string data_spec;
    std::string out_dir;
    std::string channel_mode;
    double snr_db = std::nan("");
    double bandwidth = std::nan("");
    double flip_p = std::nan("");
    int payload_bits = -1;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--preset", o.preset_name, "built-in preset")
        ->check(CLI::IsMember(mtfl::preset_names()));
    cmd->add_option("--data", o.data_spec, "data source: synth or idx:<images>,<labels>");
    cmd->add_option("--seed", o.seed, "override the experiment seed");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--channel", o.channel_mode, "perfect|rayleigh|bitflip")
        ->check(CLI::IsMember({"perfect", "rayleigh", "bitflip"}));
    cmd->add_option("--snr-db", o.snr_db, "uplink SNR in dB");
    cmd->add_option("--bandwidth", o.bandwidth, "channel uses per transmission");
    cmd->add_option("--flip-p", o.flip_p, "bit flip probability");
    cmd->add_option("--payload-bits", o.payload_bits, "sign payload bit count");
}

mtfl::ExperimentConfig resolve(const CommonOpts& o) {
    mtfl::ExperimentConfig cfg;
    if (!o.preset_name.empty() && !o.config_path.empty())
        throw CLI::ValidationError("--preset and --config are mutually exclusive");
    if (!o.preset_name.empty())
        cfg = mtfl::preset(o.preset_name);
    else if (!o.config_path.empty())
        cfg = mtfl::ExperimentConfig::from_file(o.config_path);

    if (!o.data_spec.empty()) {
        if (o.data_spec == "synth") {
            cfg.use_idx = false;
        } else if (o.data_spec.rfind("idx:", 0) == 0) {
            const std::string rest = o.data_spec.substr(4);
            const auto comma = rest.find(',');
            if (comma == std::string::npos)
                throw CLI::ValidationError("--data idx:<images>,<labels>");
            cfg.use_idx = true;
            cfg.images_path = rest.substr(0, comma);
            cfg.labels_path = rest.substr(comma + 1);
        } else {
            throw CLI::ValidationError("--data must be synth or idx:<images>,<labels>");
        }
    }
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.out_dir.empty()) {
        cfg.out_dir = o.out_dir;
    } else if (const char* env = std::getenv("MTFL_OUT_DIR"); env && *env && cfg.out_dir == "out") {
        cfg.out_dir = env;
    }
    if (!o.channel_mode.empty()) {
        cfg.channel_mode = o.channel_mode == "rayleigh" ? mtfl::ChannelMode::rayleigh
                           : o.channel_mode == "bitflip" ? mtfl::ChannelMode::bitflip
                                                         : mtfl::ChannelMode::perfect;
    }
    if (!std::isnan(o.snr_db)) cfg.snr_db = o.snr_db;
    if (!std::isnan(o.bandwidth)) cfg.bandwidth = o.bandwidth;
    if (!std::isnan(o.flip_p)) cfg.flip_p = o.flip_p;
    if (o.payload_bits >= 0) cfg.payload_bits = o.payload_bits;
    return cfg;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw CLI::ValidationError("--values must list at least one number");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personalised federated learning simulator over lossy uplinks"};
    app.require_subcommand(1);

    CommonOpts run_opts, sweep_opts, dde_opts;
    auto* run = app.add_subcommand("run", "run all configured algorithms once");
    add_common(run, run_opts);

    auto* sweep = app.add_subcommand("sweep", "rerun the experiment along one axis");
    add_common(sweep, sweep_opts);
    std::string axis, values_csv;
    sweep->add_option("--axis", axis, "snr_db | flip_p | rounds_T")
        ->required()
        ->check(CLI::IsMember({"snr_db", "flip_p", "rounds_T"}));
    sweep->add_option("--values", values_csv, "comma-separated axis values")->required();

    auto* dde = app.add_subcommand("dde", "estimate the pairwise discrepancy matrix only");
    add_common(dde, dde_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return mtfl::run_experiment(resolve(run_opts), std::cout);
        if (sweep->parsed())
            return mtfl::run_sweep(resolve(sweep_opts), axis, parse_values(values_csv), std::cout);
        if (dde->parsed()) return mtfl::run_dde_only(resolve(dde_opts), std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
