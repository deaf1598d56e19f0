#include "mtfl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mtfl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

ChannelMode parse_mode(const std::string& s) {
    if (s == "perfect") return ChannelMode::perfect;
    if (s == "rayleigh") return ChannelMode::rayleigh;
    if (s == "bitflip") return ChannelMode::bitflip;
    throw std::runtime_error("config: unknown channel mode '" + s + "'");
}

std::string mode_name(ChannelMode m) {
    switch (m) {
        case ChannelMode::perfect: return "perfect";
        case ChannelMode::rayleigh: return "rayleigh";
        case ChannelMode::bitflip: return "bitflip";
    }
    return "perfect";
}

BaselineKind parse_baseline(const std::string& s) {
    if (s == "local") return BaselineKind::local;
    if (s == "fedsgd") return BaselineKind::fedsgd;
    if (s == "sign_fedsgd") return BaselineKind::sign_fedsgd;
    if (s == "fedavg") return BaselineKind::fedavg;
    throw std::runtime_error("config: unknown algorithm '" + s + "'");
}

std::vector<CohortSpec> default_cohorts() {
    return {
        {"A", 3, {0, 1, 2, 3}, 100, 0.2},
        {"B", 3, {0, 1, 2, 3}, 100, 0.2},
        {"C", 3, {0, 1, 2, 3}, 100, 0.2},
    };
}

void write_matrix_csv(const std::string& path, int n,
                      const std::function<double(int, int)>& get) {
    std::ofstream f(path);
    for (int j = 0; j < n; ++j) f << (j ? "," : "") << "dev" << j;
    f << "\n";
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) f << (j ? "," : "") << fmt(get(i, j));
        f << "\n";
    }
}

struct AlgoResult {
    std::vector<RoundMetrics> metrics;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    ExperimentConfig cfg;
    cfg.cohorts = default_cohorts();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return cfg;
    const json j = json::parse(text);

    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);

    if (j.contains("data")) {
        const auto& d = j.at("data");
        const std::string type = d.value("type", "synth");
        if (type == "idx") {
            cfg.use_idx = true;
            cfg.images_path = d.at("images").get<std::string>();
            cfg.labels_path = d.at("labels").get<std::string>();
        } else if (type != "synth") {
            throw std::runtime_error("config: data.type must be synth or idx");
        }
        cfg.d_in = d.value("d_in", cfg.d_in);
    }
    if (j.contains("cohorts")) {
        cfg.cohorts.clear();
        for (const auto& c : j.at("cohorts")) {
            CohortSpec s;
            s.name = c.value("name", std::string("cohort") + std::to_string(cfg.cohorts.size()));
            s.device_count = c.value("devices", 1);
            s.label_set = c.at("labels").get<std::vector<int>>();
            s.samples_per_device = c.value("samples_per_device", 100);
            s.train_fraction = c.value("train_fraction", 0.2);
            cfg.cohorts.push_back(std::move(s));
        }
    }
    if (j.contains("algorithms")) cfg.algorithms = j.at("algorithms").get<std::vector<std::string>>();

    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.rounds_T = t.value("rounds", cfg.train.rounds_T);
        cfg.train.eta = t.value("eta", cfg.train.eta);
        cfg.train.mu = t.value("mu", cfg.train.mu);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.local_epochs = t.value("local_epochs", cfg.train.local_epochs);
        cfg.train.track_delta = t.value("track_delta", cfg.train.track_delta);
        cfg.train.hidden = t.value("hidden", cfg.train.hidden);
        const std::string sched = t.value("lr_schedule", std::string("constant"));
        if (sched == "constant")
            cfg.train.lr_schedule = Schedule::constant;
        else if (sched == "one_over_sqrtT")
            cfg.train.lr_schedule = Schedule::one_over_sqrtT;
        else
            throw std::runtime_error("config: unknown lr_schedule '" + sched + "'");
        const std::string act = t.value("activation", std::string("relu"));
        if (act == "relu")
            cfg.train.activation = Activation::relu;
        else if (act == "tanh")
            cfg.train.activation = Activation::tanh;
        else
            throw std::runtime_error("config: unknown activation '" + act + "'");
    }
    if (j.contains("penalty")) {
        const auto& p = j.at("penalty");
        cfg.bound_M = p.value("bound_M", cfg.bound_M);
        cfg.delta = p.value("delta", cfg.delta);
        cfg.log_cover = p.value("log_cover", cfg.log_cover);
        cfg.gamma = p.value("gamma", cfg.gamma);
    }
    if (j.contains("dde")) {
        const auto& d = j.at("dde");
        cfg.dde.iterations = d.value("iterations", cfg.dde.iterations);
        cfg.dde.eta = d.value("eta", cfg.dde.eta);
    }
    if (j.contains("channel")) {
        const auto& c = j.at("channel");
        cfg.channel_mode = parse_mode(c.value("mode", std::string("perfect")));
        cfg.snr_db = c.value("snr_db", cfg.snr_db);
        cfg.bandwidth = c.value("bandwidth", cfg.bandwidth);
        cfg.payload_bits = c.value("payload_bits", cfg.payload_bits);
        cfg.flip_p = c.value("flip_p", cfg.flip_p);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["data"]["type"] = use_idx ? "idx" : "synth";
    if (use_idx) {
        j["data"]["images"] = images_path;
        j["data"]["labels"] = labels_path;
    }
    j["data"]["d_in"] = d_in;
    for (const auto& c : cohorts) {
        json jc;
        jc["name"] = c.name;
        jc["devices"] = c.device_count;
        jc["labels"] = c.label_set;
        jc["samples_per_device"] = c.samples_per_device;
        jc["train_fraction"] = c.train_fraction;
        j["cohorts"].push_back(jc);
    }
    j["algorithms"] = algorithms;
    j["train"]["rounds"] = train.rounds_T;
    j["train"]["eta"] = train.eta;
    j["train"]["mu"] = train.mu;
    j["train"]["batch_size"] = train.batch_size;
    j["train"]["local_epochs"] = train.local_epochs;
    j["train"]["track_delta"] = train.track_delta;
    j["train"]["hidden"] = train.hidden;
    j["train"]["lr_schedule"] =
        train.lr_schedule == Schedule::one_over_sqrtT ? "one_over_sqrtT" : "constant";
    j["train"]["activation"] = train.activation == Activation::tanh ? "tanh" : "relu";
    j["penalty"]["bound_M"] = bound_M;
    j["penalty"]["delta"] = delta;
    j["penalty"]["log_cover"] = log_cover;
    j["penalty"]["gamma"] = gamma;
    j["dde"]["iterations"] = dde.iterations;
    j["dde"]["eta"] = dde.eta;
    j["channel"]["mode"] = mode_name(channel_mode);
    j["channel"]["snr_db"] = snr_db;
    j["channel"]["bandwidth"] = bandwidth;
    j["channel"]["payload_bits"] = payload_bits;
    j["channel"]["flip_p"] = flip_p;
    return j.dump(2);
}

FederationData ExperimentConfig::build_data() const {
    if (use_idx) {
        auto [features, labels] = load_idx(images_path, labels_path);
        return partition_dataset(features, labels, cohorts, seed);
    }
    return synth_cohorts(cohorts, d_in, seed);
}

ChannelConfig ExperimentConfig::build_channel(int model_dim) const {
    ChannelConfig ch;
    ch.mode = channel_mode;
    ch.snr_linear = snr_db_to_linear(snr_db);
    ch.payload_bits_d = payload_bits > 0 ? payload_bits : model_dim;
    ch.bandwidth_B = bandwidth > 0.0 ? bandwidth : 8.0 * ch.payload_bits_d;
    ch.flip_p = flip_p;
    ch.seed = seed;
    ch.validate();
    return ch;
}

PenaltyConfig ExperimentConfig::build_penalty(const FederationData& data) const {
    PenaltyConfig p = PenaltyConfig::defaults(data.device_count(), data);
    p.bound_M = bound_M;
    p.delta = delta;
    p.log_cover = log_cover;
    p.gamma.assign(data.device_count(), gamma);
    p.validate();
    return p;
}

LossSpec ExperimentConfig::build_loss() const {
    LossSpec l;
    l.bound_M = bound_M;
    return l;
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    if (name == "desk-cohort") {
        // three cohorts over the same ten classes, label identities rotated per
        // cohort so a shared global model cannot satisfy everyone
        std::vector<int> a(10), b(10), c(10);
        for (int i = 0; i < 10; ++i) {
            a[i] = i;
            b[i] = (i + 1) % 10;
            c[i] = (i + 2) % 10;
        }
        cfg.cohorts = {{"A", 3, a, 100, 0.2}, {"B", 3, b, 100, 0.2}, {"C", 3, c, 100, 0.2}};
        cfg.d_in = 10;
        cfg.train.rounds_T = 300;
        cfg.train.eta = 0.01;
        cfg.train.mu = 0.08;
        cfg.train.batch_size = 20;
        cfg.train.hidden = {32};
        cfg.train.activation = Activation::tanh;
        cfg.gamma = 0.08;
        cfg.dde.iterations = 30;
        return cfg;
    }
    if (name == "paper-fig2") {
        cfg.use_idx = true;
        cfg.images_path = "train-images-idx3-ubyte";
        cfg.labels_path = "train-labels-idx1-ubyte";
        cfg.cohorts = {
            {"A", 12, {0, 1, 2, 3, 4, 5}, 100, 0.2},
            {"B", 12, {6, 7, 8, 9}, 100, 0.2},
            {"C", 6, {3, 4, 5, 6, 7}, 100, 0.2},
        };
        cfg.algorithms = {"mtfeel", "local", "fedsgd", "sign_fedsgd", "fedavg"};
        cfg.train.rounds_T = 300;
        cfg.train.eta = 0.01;
        cfg.train.mu = 0.01;
        cfg.train.batch_size = 20;
        return cfg;
    }
    if (name == "paper-fig4a") {
        cfg = preset("desk-cohort");
        cfg.channel_mode = ChannelMode::rayleigh;
        cfg.snr_db = 0.0;
        return cfg;
    }
    if (name == "paper-fig4b") {
        cfg = preset("desk-cohort");
        cfg.channel_mode = ChannelMode::bitflip;
        cfg.flip_p = 0.05;
        return cfg;
    }
    throw std::runtime_error("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    return {"desk-cohort", "paper-fig2", "paper-fig4a", "paper-fig4b"};
}

namespace {

// The discrepancy estimate is a supremum over a probe class; a linear softmax
// probe keeps it sample-efficient, while an over-parameterised network can
// separate any two finite shards and drowns the cohort structure in noise.
std::vector<int> dde_probe_sizes(const FederationData& data) {
    return {data.shards.at(0).features.cols, data.num_classes};
}

AlgoResult run_algorithm(const std::string& algo, const ExperimentConfig& cfg,
                         const FederationData& data, const DiscrepancyMatrix& dhat,
                         const ChannelConfig& channel, std::ostream& log) {
    const LossSpec loss = cfg.build_loss();
    AlgoResult out;
    if (algo == "mtfeel") {
        const auto pen_cfg = cfg.build_penalty(data);
        auto res = mtfeel_train(data, dhat, cfg.train, pen_cfg, channel, loss);
        out.metrics = std::move(res.metrics);
    } else {
        auto res = baseline_train(parse_baseline(algo), data, cfg.train, channel, loss);
        out.metrics = std::move(res.metrics);
    }
    if (!out.metrics.empty())
        log << algo << ": final mean test accuracy " << out.metrics.back().mean_test_acc()
            << "\n";
    return out;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    const FederationData data = cfg.build_data();
    const LossSpec loss = cfg.build_loss();
    const auto sizes = model_layer_sizes(data, cfg.train);
    const int model_dim = ModelParams::param_count(layer_dims_from_sizes(sizes));
    const ChannelConfig channel = cfg.build_channel(model_dim);

    fs::create_directories(cfg.out_dir);

    const bool need_dde =
        std::find(cfg.algorithms.begin(), cfg.algorithms.end(), "mtfeel") != cfg.algorithms.end();
    DiscrepancyMatrix dhat(data.device_count());
    if (need_dde) {
        DdeConfig dde = cfg.dde;
        dde.init_seed = cfg.seed;
        dhat = dde_run(data, dde, dde_probe_sizes(data), cfg.train.activation, loss);
    }
    write_matrix_csv((fs::path(cfg.out_dir) / "discrepancy.csv").string(), dhat.n,
                     [&](int i, int j) { return dhat.at(i, j); });

    std::ofstream metrics((fs::path(cfg.out_dir) / "metrics.csv").string());
    metrics << "round,algorithm,mean_train_acc,mean_test_acc,objective,w_drift,alpha_drift,"
               "mean_delta_k,outages\n";

    for (const auto& algo : cfg.algorithms) {
        if (algo == "mtfeel") {
            const auto pen_cfg = cfg.build_penalty(data);
            auto res = mtfeel_train(data, dhat, cfg.train, pen_cfg, channel, loss);
            for (std::size_t t = 0; t < res.metrics.size(); ++t) {
                const auto& m = res.metrics[t];
                metrics << t << ",mtfeel," << fmt(m.mean_train_acc()) << ","
                        << fmt(m.mean_test_acc()) << "," << fmt(m.objective) << ","
                        << fmt(m.w_drift) << "," << fmt(m.alpha_drift) << ","
                        << fmt(m.mean_delta()) << "," << m.outages << "\n";
            }
            write_matrix_csv((fs::path(cfg.out_dir) / "alpha_final.csv").string(),
                             res.state.alpha.n,
                             [&](int i, int j) { return res.state.alpha.rows[i][j]; });
            log << "mtfeel: final mean test accuracy " << res.metrics.back().mean_test_acc()
                << "\n";
        } else {
            auto res = baseline_train(parse_baseline(algo), data, cfg.train, channel, loss);
            for (std::size_t t = 0; t < res.metrics.size(); ++t) {
                const auto& m = res.metrics[t];
                metrics << t << "," << algo << "," << fmt(m.mean_train_acc()) << ","
                        << fmt(m.mean_test_acc()) << "," << fmt(m.objective) << ","
                        << fmt(m.w_drift) << "," << fmt(m.alpha_drift) << ","
                        << fmt(m.mean_delta()) << "," << m.outages << "\n";
            }
            log << algo << ": final mean test accuracy " << res.metrics.back().mean_test_acc()
                << "\n";
        }
    }

    std::ofstream snap((fs::path(cfg.out_dir) / "config_resolved.json").string());
    snap << cfg.to_json_text() << "\n";
    return 0;
}

int run_sweep(const ExperimentConfig& cfg, const std::string& axis,
              const std::vector<double>& values, std::ostream& log) {
    if (axis != "snr_db" && axis != "flip_p" && axis != "rounds_T")
        throw std::runtime_error("sweep: axis must be snr_db, flip_p or rounds_T");
    for (double v : values)
        if (!std::isfinite(v)) throw std::runtime_error("sweep: axis values must be finite");

    const FederationData data = cfg.build_data();
    const LossSpec loss = cfg.build_loss();
    const auto sizes = model_layer_sizes(data, cfg.train);
    const int model_dim = ModelParams::param_count(layer_dims_from_sizes(sizes));

    const bool need_dde =
        std::find(cfg.algorithms.begin(), cfg.algorithms.end(), "mtfeel") != cfg.algorithms.end();
    DiscrepancyMatrix dhat(data.device_count());
    if (need_dde) {
        DdeConfig dde = cfg.dde;
        dde.init_seed = cfg.seed;
        dhat = dde_run(data, dde, dde_probe_sizes(data), cfg.train.activation, loss);
    }

    fs::create_directories(cfg.out_dir);
    std::ofstream sweep((fs::path(cfg.out_dir) / "sweep.csv").string());
    sweep << "axis,value,algorithm,final_test_acc\n";

    for (double v : values) {
        ExperimentConfig point = cfg;
        if (axis == "snr_db")
            point.snr_db = v;
        else if (axis == "flip_p")
            point.flip_p = v;
        else
            point.train.rounds_T = static_cast<int>(v);
        const ChannelConfig channel = point.build_channel(model_dim);
        log << axis << " = " << v << "\n";
        for (const auto& algo : point.algorithms) {
            const auto res = run_algorithm(algo, point, data, dhat, channel, log);
            sweep << axis << "," << fmt(v) << "," << algo << ","
                  << fmt(res.metrics.back().mean_test_acc()) << "\n";
        }
    }
    return 0;
}

int run_dde_only(const ExperimentConfig& cfg, std::ostream& log) {
    const FederationData data = cfg.build_data();
    DdeConfig dde = cfg.dde;
    dde.init_seed = cfg.seed;
    const auto dhat =
        dde_run(data, dde, dde_probe_sizes(data), cfg.train.activation, cfg.build_loss());
    fs::create_directories(cfg.out_dir);
    write_matrix_csv((fs::path(cfg.out_dir) / "discrepancy.csv").string(), dhat.n,
                     [&](int i, int j) { return dhat.at(i, j); });
    log << "wrote discrepancy matrix for " << dhat.n << " devices\n";
    return 0;
}

}  // namespace mtfl
