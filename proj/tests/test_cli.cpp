#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "hsps/cli.hpp"
#include "hsps/error.hpp"
#include "hsps/pairsim.hpp"
#include "support.hpp"

using namespace hsps;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hsps_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// A small simulation scenario; the caller appends extra sections.
fs::path write_scenario(const fs::path& dir, const std::string& extra = "", bool with_seed = true) {
    std::ofstream out(dir / "s.scn");
    out << "[general]\n";
    if (with_seed) out << "seed = 17\n";
    out << "materials_dir = " << test::materials_dir().string() << "\n\n"
        << "[coupling.idler]\nwavelength_nm = 1550\na_mfd_x_um = 8.9\na_mfd_y_um = 6.8\n"
        << "b_mfd_x_um = 6.4\nb_mfd_y_um = 6.4\n\n"
        << "[coupling.signal]\nwavelength_nm = 810\na_mfd_x_um = 5.7\na_mfd_y_um = 3.9\n"
        << "b_mfd_x_um = 3.4\nb_mfd_y_um = 3.4\n\n"
        << "[source]\nmu = 0.1\nstatistics = thermal\nrepetition_rate_hz = 10e6\n\n"
        << "[channel]\nsignal_transmission = 0.3\nidler_transmission = 0.2\n"
        << "detector_efficiency = 0.65 0.85 0.85\ndark_count_prob = 1e-4\n\n"
        << "[simulate]\nn_pulses = 200000\n\n"
        << "[coincidence]\nwindow_ps = 5000\nshifts = 1 2\n\n"
        << extra;
    return dir / "s.scn";
}

int run(const std::string& cmd, cli::RunOptions o, std::string* err_text = nullptr) {
    std::ostringstream log, err;
    const int rc = cli::run(cmd, o, log, err);
    if (err_text) *err_text = err.str();
    return rc;
}

cli::RunOptions options(const fs::path& scenario, const fs::path& out) {
    cli::RunOptions o;
    o.scenario = scenario;
    o.out_dir = out;
    o.deterministic = true;
    return o;
}

// Value of `column` in the data row whose first cell is `key`.
std::string cell(const std::string& csv, const std::string& key, int column) {
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::string c;
        std::vector<std::string> cells;
        while (std::getline(row, c, ',')) cells.push_back(c);
        if (!cells.empty() && cells[0] == key) return cells.at(column);
    }
    return {};
}

}  // namespace

TEST_CASE("coupling command reproduces the mode table efficiencies") {
    const auto dir = scratch("coupling");
    REQUIRE(run("coupling", options(write_scenario(dir), dir / "out")) == cli::kExitOk);
    const auto csv = slurp(dir / "out" / "coupling.csv");
    CHECK(csv.find("# hsps ") == 0);
    CHECK(csv.find("# scenario_hash: ") != std::string::npos);
    CHECK(csv.find("# generated:") == std::string::npos);
    CHECK(csv.find("0.95") != std::string::npos);
    CHECK(csv.find("0.87") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "summary.txt"));
}

TEST_CASE("unknown keys abort with a configuration error") {
    const auto dir = scratch("unknown");
    auto o = options(write_scenario(dir), dir / "out");
    o.overrides = {"channel.splitter_ration=0.4"};
    std::string err;
    CHECK(run("simulate", o, &err) == cli::kExitConfig);
    CHECK(err.find("splitter_ration") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out" / "stream.bin"));

    std::ofstream(dir / "bad.scn") << "[channel]\nsignal_transmision = 0.3\n";
    CHECK(run("simulate", options(dir / "bad.scn", dir / "out"), &err) == cli::kExitConfig);
    CHECK(err.find("bad.scn:2") != std::string::npos);
}

TEST_CASE("stochastic commands need a seed") {
    const auto dir = scratch("seedless");
    std::string err;
    CHECK(run("simulate", options(write_scenario(dir, "", false), dir / "out"), &err) == cli::kExitConfig);
    CHECK(err.find("seed") != std::string::npos);
    auto o = options(dir / "s.scn", dir / "out");
    o.seed = 3;
    CHECK(run("simulate", o) == cli::kExitOk);
}

TEST_CASE("deterministic runs are byte identical") {
    const auto dir = scratch("determinism");
    const auto scn = write_scenario(dir);
    for (const char* sub : {"a", "b"}) {
        REQUIRE(run("simulate", options(scn, dir / sub)) == cli::kExitOk);
        REQUIRE(run("analyze", options(scn, dir / sub)) == cli::kExitOk);
    }
    for (const char* f : {"stream.bin", "counts.csv", "metrics.csv", "click_probabilities.csv"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("analyzing an empty stream warns and succeeds") {
    const auto dir = scratch("empty");
    auto o = options(write_scenario(dir), dir / "out");
    o.overrides = {"source.mu=0", "channel.dark_count_prob=0"};
    REQUIRE(run("simulate", o) == cli::kExitOk);
    std::ostringstream log, err;
    CHECK(cli::run("analyze", o, log, err) == cli::kExitOk);
    CHECK(log.str().find("empty stream") != std::string::npos);
}

TEST_CASE("a sweep point equals simulate plus analyze with the derived seed") {
    const auto dir = scratch("sweep");
    const auto scn = write_scenario(dir, "[sweep]\nmu = 0.1\nn_pulses = 200000\n");
    REQUIRE(run("sweep", options(scn, dir / "sweep")) == cli::kExitOk);
    auto o = options(scn, dir / "single");
    o.seed = derive_seed(17, 0);
    REQUIRE(run("simulate", o) == cli::kExitOk);
    REQUIRE(run("analyze", o) == cli::kExitOk);

    const auto counts = slurp(dir / "single" / "counts.csv");
    const auto sweep = slurp(dir / "sweep" / "sweep.csv");
    const auto coincidences = std::stoull(cell(counts, "s_i1", 1)) + std::stoull(cell(counts, "s_i2", 1));
    CHECK(std::to_string(coincidences) == cell(sweep, "nan", 7));
    CHECK(cell(counts, "s_i1_i2", 1) == cell(sweep, "nan", 8));
    CHECK(std::to_string(o.seed.value()) == cell(sweep, "nan", 3));
}

TEST_CASE("the shipped scenario parses and its quick commands run") {
    const auto dir = scratch("shipped");
    auto o = options(fs::path(HSPS_SCENARIO_DIR) / "hsps_module.scn", dir);
    for (const char* cmd : {"phasematch", "coupling", "budget", "coating"}) {
        CAPTURE(cmd);
        CHECK(run(cmd, o) == cli::kExitOk);
    }
    CHECK(slurp(dir / "phasematch.csv").find("fundamental,00/00/00,80,810,1550.07") != std::string::npos);
}

TEST_CASE("scenario overrides split at the last dot") {
    std::istringstream in("[combo.a]\nweight = 1\n");
    auto sc = cli::Scenario::parse(in, "mem", ".");
    sc.set("combo.a.weight=0.5");
    CHECK(sc.real("combo.a", "weight") == 0.5);
    CHECK_THROWS_AS(sc.set("combo.a.colour=1"), ConfigError);
    CHECK_THROWS_AS(sc.set("novalue"), ConfigError);
    std::istringstream dup("[source]\nmu = 1\nmu = 2\n");
    CHECK_THROWS_AS(cli::Scenario::parse(dup, "dup", "."), ConfigError);
}

TEST_CASE("the executable maps failures onto exit codes") {
    const std::string tool = HSPS_TOOL;
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    CHECK(status(tool + " --version") == 0);
    CHECK(status(tool + " frobnicate --scenario x.scn") == 2);
    CHECK(status(tool + " coupling --scenario /nonexistent.scn") == 2);
    const auto dir = scratch("tool");
    const auto scn = write_scenario(dir);
    CHECK(status(tool + " coupling --deterministic --scenario " + scn.string() + " --out " + (dir / "o").string()) ==
          0);
    CHECK(status(tool + " simulate --scenario " + scn.string() + " --seed abc") == 2);
}
