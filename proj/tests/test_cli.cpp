#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(MEVIT_BIN) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("unknown model label exits with usage error") {
    CHECK(run("simulate --model deit-xxl") == 1);
}

TEST_CASE("simulate writes reports and passes the audit") {
    fs::path out = fresh_dir("mevit_cli_sim");
    CHECK(run("simulate --model deit-t --psys 32 --out " + out.string()) == 0);
    for (const auto& f : {"summary.txt", "mode_breakdown.csv", "bandwidth_breakdown.csv",
                          "trace.log", "dram.log"})
        CHECK(fs::exists(out / f));
    std::string summary = slurp(out / "summary.txt");
    CHECK(summary.find("# manifest") != std::string::npos);
    CHECK(summary.find("audit.single_load = pass") != std::string::npos);
}

TEST_CASE("simulate runs are byte-identical") {
    fs::path a = fresh_dir("mevit_cli_a");
    fs::path b = fresh_dir("mevit_cli_b");
    REQUIRE(run("simulate --model deit-t --psys 16 --out " + a.string()) == 0);
    REQUIRE(run("simulate --model deit-t --psys 16 --out " + b.string()) == 0);
    for (const auto& f : {"summary.txt", "trace.log", "dram.log", "mode_breakdown.csv"})
        CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("trace log is line-delimited with parseable cycle stamps") {
    fs::path out = fresh_dir("mevit_cli_trace");
    REQUIRE(run("simulate --model deit-t --psys 32 --out " + out.string()) == 0);
    std::ifstream f(out / "trace.log");
    std::string line;
    std::getline(f, line);  // header
    CHECK(line.rfind("# cycle_start", 0) == 0);
    int checked = 0;
    std::uint64_t max_end = 0;
    while (std::getline(f, line) && checked < 5000) {
        std::istringstream ss(line);
        std::uint64_t c0, c1;
        std::string kind, mode;
        REQUIRE(bool(ss >> c0 >> c1 >> kind >> mode));
        REQUIRE(c1 >= c0);
        max_end = std::max(max_end, c1);
        ++checked;
    }
    CHECK(checked == 5000);
    CHECK(max_end > 0);
}

TEST_CASE("fault injection trips the audit gate") {
    fs::path out = fresh_dir("mevit_cli_fault");
    CHECK(run("simulate --model deit-t --inject-fault-single-load --out " + out.string()) == 2);
    std::string summary = slurp(out / "summary.txt");
    CHECK(summary.find("audit.single_load = fail") != std::string::npos);
}

TEST_CASE("verify quick mode passes; injected packing fault is caught") {
    CHECK(run("verify --quick") == 0);
    CHECK(run("verify --quick --inject-fault packing") == 2);
}

TEST_CASE("sweep outputs parse back") {
    fs::path out = fresh_dir("mevit_cli_sweep");
    REQUIRE(run("sweep efficiency --model deit-b --p-lo 8 --p-hi 40 --out " + out.string()) == 0);
    std::ifstream f(out / "efficiency.csv");
    REQUIRE(f.good());
    std::string line;
    int rows = 0;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("psys", 0) == 0) continue;
        auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        int p = std::stoi(line.substr(0, comma));
        double eff = std::stod(line.substr(comma + 1));
        CHECK(p >= 8);
        CHECK(p <= 40);
        CHECK(eff > 0.0);
        CHECK(eff <= 1.0);
        ++rows;
    }
    CHECK(rows == 33);
    CHECK(fs::exists(out / "efficiency_peaks.txt"));

    REQUIRE(run("sweep multi-pe --model deit-b --k-lo 1 --k-hi 6 --policy baseline --out " +
                out.string()) == 0);
    CHECK(fs::exists(out / "multi_pe.csv"));
    REQUIRE(run("sweep roofline --out " + out.string()) == 0);
    CHECK(fs::exists(out / "roofline.csv"));
}

TEST_CASE("invalid sweep range exits with usage error") {
    CHECK(run("sweep efficiency --p-lo 2 --p-hi 300") == 1);
}

TEST_CASE("traffic and bram commands succeed") {
    fs::path out = fresh_dir("mevit_cli_traffic");
    CHECK(run("traffic --model deit-s --psys 16 --out " + out.string()) == 0);
    CHECK(fs::exists(out / "traffic.csv"));
    CHECK(run("bram --model vit-b") == 0);
}

TEST_CASE("model config files feed the simulate command") {
    fs::path out = fresh_dir("mevit_cli_cfg");
    std::ofstream cfg(out / "model.cfg");
    cfg << "name = custom-tiny\n"
        << "image_size = 224\npatch_size = 16\nmodel_dim = 192\n"
        << "num_heads = 3\nnum_layers = 4\nmlp_ratio = 4\n";
    cfg.close();
    CHECK(run("simulate --model-config " + (out / "model.cfg").string() + " --out " +
              out.string()) == 0);
    std::string summary = slurp(out / "summary.txt");
    CHECK(summary.find("model = custom-tiny") != std::string::npos);
    CHECK(summary.find("num_layers = 4") != std::string::npos);
}

TEST_CASE("MEVIT_OUT_DIR provides the default output directory") {
    fs::path out = fresh_dir("mevit_cli_env");
    std::string cmd = "MEVIT_OUT_DIR=" + out.string() + " " + MEVIT_BIN +
                      " simulate --model deit-t > /dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(fs::exists(out / "summary.txt"));
}
