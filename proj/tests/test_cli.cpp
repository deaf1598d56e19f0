#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

namespace fs = std::filesystem;

namespace {

const std::string kCli = MTFL_CLI_PATH;

int run_cli(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// two devices, two short cohorts: fast enough for repeated CLI invocations
std::string tiny_config(int rounds, const std::string& extra = "") {
    std::ostringstream os;
    os << "{\n"
       << "  \"cohorts\": [\n"
       << "    {\"name\": \"a\", \"devices\": 1, \"labels\": [0, 1], \"samples_per_device\": 30,"
          " \"train_fraction\": 0.5},\n"
       << "    {\"name\": \"b\", \"devices\": 1, \"labels\": [2, 3], \"samples_per_device\": 30,"
          " \"train_fraction\": 0.5}\n"
       << "  ],\n"
       << "  \"data\": {\"d_in\": 4},\n"
       << "  \"train\": {\"rounds\": " << rounds << ", \"batch_size\": 5, \"hidden\": [4]},\n"
       << "  \"dde\": {\"iterations\": 5}\n"
       << (extra.empty() ? "" : ",\n" + extra + "\n") << "}\n";
    return os.str();
}

fs::path write_config(const TempDir& dir, const std::string& text) {
    const fs::path p = dir.path / "config.json";
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("cli requires a subcommand and rejects unknown flags") {
    CHECK(run_cli("") != 0);
    CHECK(run_cli("run --no-such-flag") != 0);
    CHECK(run_cli("frobnicate") != 0);
    CHECK(run_cli("run --preset no-such-preset") != 0);
}

TEST_CASE("run writes the expected artifacts") {
    TempDir dir("mtfl_cli_run");
    const auto cfg = write_config(dir, tiny_config(4));
    const auto out = dir.path / "out";
    REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out.string()) == 0);

    REQUIRE(fs::exists(out / "metrics.csv"));
    REQUIRE(fs::exists(out / "alpha_final.csv"));
    REQUIRE(fs::exists(out / "discrepancy.csv"));
    REQUIRE(fs::exists(out / "config_resolved.json"));

    const std::string metrics = slurp(out / "metrics.csv");
    CHECK(metrics.rfind("round,algorithm,mean_train_acc,mean_test_acc,objective,w_drift,"
                        "alpha_drift,mean_delta_k,outages\n", 0) == 0);
    // header + 4 rounds x 5 algorithms
    CHECK(count_lines(metrics) == 1 + 4 * 5);

    const std::string alpha = slurp(out / "alpha_final.csv");
    CHECK(count_lines(alpha) == 3);  // header + one row per device
}

TEST_CASE("run with the same seed is reproducible") {
    TempDir dir("mtfl_cli_repro");
    const auto cfg = write_config(dir, tiny_config(3));
    const auto out1 = dir.path / "o1";
    const auto out2 = dir.path / "o2";
    REQUIRE(run_cli("run --config " + cfg.string() + " --seed 11 --out " + out1.string()) == 0);
    REQUIRE(run_cli("run --config " + cfg.string() + " --seed 11 --out " + out2.string()) == 0);
    CHECK(slurp(out1 / "metrics.csv") == slurp(out2 / "metrics.csv"));
    CHECK(slurp(out1 / "alpha_final.csv") == slurp(out2 / "alpha_final.csv"));

    const auto out3 = dir.path / "o3";
    REQUIRE(run_cli("run --config " + cfg.string() + " --seed 12 --out " + out3.string()) == 0);
    CHECK(slurp(out1 / "metrics.csv") != slurp(out3 / "metrics.csv"));
}

TEST_CASE("invalid configs exit nonzero") {
    TempDir dir("mtfl_cli_bad");
    const auto bad_json = write_config(dir, "{ not json");
    CHECK(run_cli("run --config " + bad_json.string()) != 0);

    const auto bad_mode =
        write_config(dir, tiny_config(2, "  \"channel\": {\"mode\": \"carrier-pigeon\"}"));
    CHECK(run_cli("run --config " + bad_mode.string()) != 0);

    CHECK(run_cli("run --config /tmp/no_such_config_file.json") != 0);
    // --preset and --config together are rejected
    const auto ok = write_config(dir, tiny_config(2));
    CHECK(run_cli("run --preset desk-cohort --config " + ok.string()) != 0);
}

TEST_CASE("channel flags override the config") {
    TempDir dir("mtfl_cli_chan");
    const auto cfg = write_config(dir, tiny_config(3));
    const auto out = dir.path / "out";
    REQUIRE(run_cli("run --config " + cfg.string() + " --channel rayleigh --snr-db -20 --out " +
                    out.string()) == 0);
    const std::string resolved = slurp(out / "config_resolved.json");
    CHECK(resolved.find("\"rayleigh\"") != std::string::npos);
    CHECK(resolved.find("-20") != std::string::npos);
    // at -20 dB nearly every report is lost
    const std::string metrics = slurp(out / "metrics.csv");
    CHECK(metrics.find("mtfeel") != std::string::npos);
}

TEST_CASE("sweep writes one row per value per algorithm") {
    TempDir dir("mtfl_cli_sweep");
    const auto cfg = write_config(
        dir, tiny_config(3, "  \"algorithms\": [\"mtfeel\", \"local\"]"));
    const auto out = dir.path / "out";
    REQUIRE(run_cli("sweep --config " + cfg.string() + " --axis rounds_T --values 2,4 --out " +
                    out.string()) == 0);
    const std::string sweep = slurp(out / "sweep.csv");
    CHECK(sweep.rfind("axis,value,algorithm,final_test_acc\n", 0) == 0);
    CHECK(count_lines(sweep) == 1 + 2 * 2);
    CHECK(run_cli("sweep --config " + cfg.string() + " --axis rounds_T") != 0);  // missing values
    CHECK(run_cli("sweep --config " + cfg.string() + " --axis bogus --values 1") != 0);
}

TEST_CASE("dde subcommand writes only the discrepancy matrix") {
    TempDir dir("mtfl_cli_dde");
    const auto cfg = write_config(dir, tiny_config(2));
    const auto out = dir.path / "out";
    REQUIRE(run_cli("dde --config " + cfg.string() + " --out " + out.string()) == 0);
    REQUIRE(fs::exists(out / "discrepancy.csv"));
    CHECK(!fs::exists(out / "metrics.csv"));
    const std::string d = slurp(out / "discrepancy.csv");
    CHECK(count_lines(d) == 3);  // header + 2 device rows
}

TEST_CASE("empty config file runs with all defaults") {
    TempDir dir("mtfl_cli_empty");
    const auto cfg = write_config(dir, "");
    const auto out = dir.path / "out";
    // keep the default scenario short via a sweep over a tiny round count
    REQUIRE(run_cli("sweep --config " + cfg.string() + " --axis rounds_T --values 2 --out " +
                    out.string()) == 0);
    CHECK(fs::exists(out / "sweep.csv"));
}

TEST_CASE("MTFL_OUT_DIR is used when --out is absent") {
    TempDir dir("mtfl_cli_env");
    const auto cfg = write_config(dir, tiny_config(2));
    const auto out = dir.path / "envout";
    const std::string cmd = "MTFL_OUT_DIR=" + out.string() + " " + kCli + " dde --config " +
                            cfg.string() + " > /dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(fs::exists(out / "discrepancy.csv"));
}
