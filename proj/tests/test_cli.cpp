// Exercises the installed command-line surface end to end. The binary path
// comes from the RAMSEG_CLI environment variable (set by CMake).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ramseg/checkpoint.hpp"
#include "ramseg/config.hpp"
#include "ramseg/model.hpp"

namespace fs = std::filesystem;
using namespace ramseg;

namespace {

std::string cli_path() {
    const char* p = std::getenv("RAMSEG_CLI");
    REQUIRE_MESSAGE(p != nullptr, "RAMSEG_CLI must point at the ramseg binary");
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int ret = std::system(cmd.c_str());
    return WEXITSTATUS(ret);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

bool dirs_identical(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    for (const fs::path& r : rel) {
        if (!fs::exists(b / r)) return false;
        if (slurp(a / r) != slurp(b / r)) return false;
    }
    return true;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("gen-data rerun produces a byte-identical directory tree") {
    TempDir tmp("ramseg_cli_gen");
    const std::string base = "gen-data --domains 3 --per-domain 6 --seed 5 --size 32 --out ";
    CHECK(run_cli(base + (tmp.path / "a").string()) == 0);
    CHECK(run_cli(base + (tmp.path / "b").string()) == 0);
    CHECK(dirs_identical(tmp.path / "a", tmp.path / "b"));
    CHECK(dirs_identical(tmp.path / "b", tmp.path / "a"));
}

TEST_CASE("augment writes outputs and a spread report") {
    TempDir tmp("ramseg_cli_aug");
    REQUIRE(run_cli("gen-data --domains 3 --per-domain 6 --seed 5 --size 32 --out " +
                    (tmp.path / "d").string()) == 0);
    CHECK(run_cli("augment --data " + (tmp.path / "d").string() + " --out " +
                  (tmp.path / "aug").string() + " --beta 0.2 --seed 3") == 0);
    const std::string report = slurp(tmp.path / "aug" / "spread_report.csv");
    CHECK(report.rfind("pool,spread", 0) == 0);
    CHECK(fs::exists(tmp.path / "aug" / "manifest.txt"));
    CHECK(fs::exists(tmp.path / "aug" / "domain0" / "img_000.pgm"));

    std::istringstream is(report);
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    const double before = std::stod(line.substr(line.find(',') + 1));
    std::getline(is, line);
    const double after = std::stod(line.substr(line.find(',') + 1));
    CHECK(after < before);
}

TEST_CASE("eval on an untrained checkpoint reports a finite dice in [0,100]") {
    TempDir tmp("ramseg_cli_eval0");
    REQUIRE(run_cli("gen-data --domains 3 --per-domain 6 --seed 5 --size 32 --out " +
                    (tmp.path / "d").string()) == 0);

    // Zero training steps: serialize a freshly initialized model.
    RunConfig cfg;
    cfg.data.domains = 3;
    cfg.data.per_domain = 6;
    cfg.data.seed = 5;
    cfg.data.image_size = 32;
    cfg.model.num_domains = 3;
    SegNet model(cfg.model, cfg.train.seed);
    std::vector<TensorRef> entries = model.parameters();
    const std::vector<TensorRef> bufs = model.buffers();
    entries.insert(entries.end(), bufs.begin(), bufs.end());
    fs::create_directories(tmp.path / "run");
    save_checkpoint(tmp.path / "run" / "checkpoint_final.bin", entries);
    std::ofstream(tmp.path / "run" / "config.ini") << canonical_config_text(cfg);

    CHECK(run_cli("eval --checkpoint " + (tmp.path / "run" / "checkpoint_final.bin").string() +
                  " --data " + (tmp.path / "d").string() + " --domain 2 --out " +
                  (tmp.path / "rep").string()) == 0);
    const std::string csv = slurp(tmp.path / "rep" / "report.csv");
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);   // header
    bool saw_mean = false;
    while (std::getline(is, line)) {
        if (line.find(",mean,") == std::string::npos) continue;
        saw_mean = true;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        const double dice = std::stod(cells.at(4));
        CHECK(dice >= 0.0);
        CHECK(dice <= 100.0);
    }
    CHECK(saw_mean);
}

TEST_CASE("full pipeline: gen-data, train, eval, report") {
    TempDir tmp("ramseg_cli_pipe");
    REQUIRE(run_cli("gen-data --domains 3 --per-domain 6 --seed 5 --size 32 --out " +
                    (tmp.path / "d").string()) == 0);
    CHECK(run_cli("train --data " + (tmp.path / "d").string() + " --holdout 2 --out " +
                  (tmp.path / "run").string() + " --epochs 2 --batch 4 --seed 1") == 0);
    CHECK(fs::exists(tmp.path / "run" / "config.ini"));
    CHECK(fs::exists(tmp.path / "run" / "log.csv"));
    CHECK(fs::exists(tmp.path / "run" / "checkpoint_final.bin"));

    const std::string log = slurp(tmp.path / "run" / "log.csv");
    CHECK(log.rfind("epoch,lr,seg_orig,seg_aug,rec,consist,total", 0) == 0);

    CHECK(run_cli("eval --checkpoint " + (tmp.path / "run" / "checkpoint_final.bin").string() +
                  " --data " + (tmp.path / "d").string() + " --domain 2 --out " +
                  (tmp.path / "rep").string()) == 0);
    CHECK(fs::exists(tmp.path / "rep" / "report.csv"));
    CHECK(fs::exists(tmp.path / "rep" / "report.txt"));

    CHECK(run_cli("report --inputs " + (tmp.path / "run" / "log.csv").string() + " --out " +
                  (tmp.path / "merged").string()) == 0);
    CHECK(fs::exists(tmp.path / "merged" / "losses.dat"));
}

TEST_CASE("ablate emits the component grid CSVs") {
    TempDir tmp("ramseg_cli_ablate");
    REQUIRE(run_cli("gen-data --domains 3 --per-domain 6 --seed 5 --size 32 --out " +
                    (tmp.path / "d").string()) == 0);
    CHECK(run_cli("ablate --data " + (tmp.path / "d").string() + " --holdout 2 --seeds 1" +
                  " --epochs 2 --out " + (tmp.path / "ab").string()) == 0);
    const std::string csv = slurp(tmp.path / "ab" / "ablation.csv");
    CHECK(csv.rfind("ram_aug,dsir,consistency,seed,holdout,dice_pct,asd", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);   // header + 5 variants x 1 seed
    CHECK(fs::exists(tmp.path / "ab" / "ablation_summary.csv"));

    CHECK(run_cli("report --inputs " + (tmp.path / "ab" / "ablation.csv").string() + " --out " +
                  (tmp.path / "merged").string()) == 0);
    CHECK(fs::exists(tmp.path / "merged" / "ablation_merged.csv"));
}

TEST_CASE("train is byte-reproducible through the CLI") {
    TempDir tmp("ramseg_cli_repro");
    REQUIRE(run_cli("gen-data --domains 3 --per-domain 6 --seed 5 --size 32 --out " +
                    (tmp.path / "d").string()) == 0);
    const std::string train = "train --data " + (tmp.path / "d").string() +
                              " --holdout 0 --epochs 2 --batch 4 --seed 9 --out ";
    REQUIRE(run_cli(train + (tmp.path / "r1").string()) == 0);
    REQUIRE(run_cli(train + (tmp.path / "r2").string()) == 0);
    CHECK(slurp(tmp.path / "r1" / "checkpoint_final.bin") ==
          slurp(tmp.path / "r2" / "checkpoint_final.bin"));
    CHECK(slurp(tmp.path / "r1" / "log.csv") == slurp(tmp.path / "r2" / "log.csv"));
}

TEST_CASE("usage and runtime failures map to exit codes 1 and 2") {
    CHECK(run_cli("definitely-not-a-subcommand") == 1);
    CHECK(run_cli("gen-data") == 1);   // missing required --out
    CHECK(run_cli("--help") == 0);
    TempDir tmp("ramseg_cli_err");
    CHECK(run_cli("train --data " + (tmp.path / "missing").string() + " --holdout 0 --out " +
                  (tmp.path / "r").string()) == 2);
}
