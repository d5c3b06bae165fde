#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = VOCSCAN_CLI_PATH;

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("vocscan_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli.string() + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Tiny study: 3 compounds, 40 channels, 1200 scans.
void pipeline(const fs::path& dir, int workers) {
    const auto log = dir / "log.txt";
    const std::string o = "-q -o " + dir.string() + " -j " + std::to_string(workers) + " ";
    const std::string m = " -m " + (dir / "manifest.json").string();
    REQUIRE(run(o + "gen --vocs 3 --train 4 --test 2 --rows 1200 --channels 40 --background 3", log) == 0);
    REQUIRE(run(o + "augment" + m, log) == 0);
    REQUIRE(run(o + "train" + m + " --dataset " + (dir / "augmented.json").string() + " --epochs 2", log) == 0);
    REQUIRE(run(o + "detect" + m + " --model " + (dir / "model.json").string() + " --chromatogram", log) == 0);
    REQUIRE(run(o + "eval" + m, log) == 0);
}

}  // namespace

TEST_CASE("cli pipeline smoke run writes a complete report") {
    const auto dir = scratch("smoke");
    pipeline(dir, 1);
    for (const char* f : {"manifest.json", "templates.json", "model.json", "report.json", "report.txt",
                          "detections/S005.csv", "detections/S005.all.csv", "detections/timing.csv",
                          "chromatograms/S006.csv"})
        CHECK_MESSAGE(fs::exists(dir / f), f);

    const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
    for (const char* k : {"tp", "ttp", "fp", "ttn", "fn"}) CHECK(report.at("protocol1").contains(k));
    CHECK(report.at("samples").size() == 2);

    const auto timing = slurp(dir / "detections" / "timing.csv");
    CHECK(timing.rfind("sample_id,windows,seconds\nS005,1121,", 0) == 0);

    REQUIRE(run("-q -o " + dir.string() + " report " + (dir / "report.json").string(), dir / "log.txt") == 0);
    CHECK(fs::exists(dir / "summary.txt"));
}

TEST_CASE("cli pipeline is reproducible across runs and worker counts") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    pipeline(a, 1);
    pipeline(b, 2);
    CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
    for (const char* id : {"S005", "S006"}) {
        CHECK(slurp(a / "detections" / (std::string(id) + ".csv")) ==
              slurp(b / "detections" / (std::string(id) + ".csv")));
        CHECK(slurp(a / "detections" / (std::string(id) + ".all.csv")) ==
              slurp(b / "detections" / (std::string(id) + ".all.csv")));
    }
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
}

TEST_CASE("cli scan dumps labels and honours the output directory variable") {
    const auto dir = scratch("scan");
    const auto log = dir / "log.txt";
    REQUIRE(run("-q -o " + dir.string() + " gen --vocs 2 --train 2 --test 1 --rows 800 --channels 20 --presence 1", log) == 0);
    const auto m = (dir / "manifest.json").string();
    REQUIRE(run("-q -o " + dir.string() + " train --kind centroid --no-augment -m " + m, log) == 0);

    const auto env_dir = dir / "from_env";
    const std::string cmd = "VOCSCAN_OUTPUT_DIR=" + env_dir.string() + " " + kCli.string() +
                            " -q scan -m " + m + " --model " + (dir / "model.json").string() + " > " +
                            log.string() + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const auto dump = slurp(env_dir / "scans" / "S003.csv");
    CHECK(dump.rfind("index,rt,label,confidence\n0,", 0) == 0);
    CHECK(fs::exists(env_dir / "scans" / "timing.csv"));
}

TEST_CASE("cli reports errors with a nonzero exit status") {
    const auto dir = scratch("errors");
    const auto log = dir / "log.txt";

    CHECK(run("eval", log) != 0);
    CHECK(run("detect -m " + (dir / "missing.json").string() + " --model x", log) != 0);

    {
        std::ofstream bad(dir / "manifest.json");
        bad << "{ not json";
    }
    CHECK(run("-o " + dir.string() + " extract -m " + (dir / "manifest.json").string(), log) == 3);
    CHECK(slurp(log).find("vocscan: error [parse]") != std::string::npos);

    REQUIRE(run("-q -o " + dir.string() + " gen --vocs 2 --train 2 --test 1 --rows 800 --channels 20 --presence 1", log) == 0);
    CHECK(run("-o " + dir.string() + " detect -m " + (dir / "manifest.json").string() + " --model " +
                  (dir / "manifest.json").string(),
              log) == 3);
    CHECK(run("-o " + dir.string() + " eval --sample S999 -m " + (dir / "manifest.json").string(), log) == 3);
    CHECK(slurp(log).find("S999") != std::string::npos);
}
