#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "voxseq/ordering.hpp"

using namespace voxseq;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string out_path = "/tmp/voxseq_cli_out.txt";
    const std::string cmd = std::string(VOXSEQ_CLI_PATH) + " " + args + " > " + out_path + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream f(out_path);
    std::stringstream ss;
    ss << f.rdbuf();
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, ss.str()};
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("order writes a VORD file matching the library construction") {
    const RunResult r = run_cli("order --scheme hp-hilbert2d --dims 2x2x2 --out /tmp/cli_o.vord");
    REQUIRE(r.exit_code == 0);
    const Ordering o = read_ordering("/tmp/cli_o.vord");
    CHECK(o.seq_to_linear == std::vector<uint64_t>({0, 4, 2, 6, 3, 7, 1, 5}));
    std::remove("/tmp/cli_o.vord");
}

TEST_CASE("order on a singleton grid writes a single zero entry") {
    const RunResult r = run_cli("order --scheme raster-xyz --dims 1x1x1 --out /tmp/cli_s.vord");
    REQUIRE(r.exit_code == 0);
    const Ordering o = read_ordering("/tmp/cli_s.vord");
    CHECK(o.seq_to_linear == std::vector<uint64_t>{0});
    std::remove("/tmp/cli_s.vord");
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("order --scheme raster-xyz --out /tmp/x.vord").exit_code == 2);  // missing dims
    CHECK(run_cli("order --scheme peano --dims 2x2x2 --out /tmp/x.vord").exit_code == 2);
    CHECK(run_cli("locality --dims 4x4x4 --schemes nope").exit_code == 2);
    CHECK(run_cli("bench --lengths 10,asdf,30 --repeats 1").exit_code == 2);
    CHECK(run_cli("bench --lengths 1024,2048 --repeats 1").exit_code == 2);  // < 3 lengths
    CHECK(run_cli("nonsense").exit_code == 2);
}

TEST_CASE("locality emits CSV rows and mirrors them into --csv byte-identically") {
    const RunResult r = run_cli(
        "locality --dims 16x16x8 --schemes hp-hilbert2d,hp-morton2d --csv /tmp/cli_loc.csv");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.rfind("scheme,w,h,d,mean,max,p50,p95,pairs\n", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
    CHECK(read_file("/tmp/cli_loc.csv") == r.out);
    std::remove("/tmp/cli_loc.csv");

    const RunResult tiny = run_cli("locality --dims 2x2x1 --schemes raster-xyz");
    CHECK(tiny.out.find("raster-xyz,2,2,1,1.500000,2,1,2,4") != std::string::npos);
}

TEST_CASE("bench with repeats=1 reports zero stddev") {
    const RunResult r = run_cli("bench --lengths 512,1024,2048 --channels 4 --repeats 1");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("\"stddev_ns\":0.0") != std::string::npos);
    CHECK(r.out.find("\"slope\":") != std::string::npos);
}

TEST_CASE("train-toy writes log and params; eval reproduces the final mIoU") {
    const RunResult r = run_cli(
        "train-toy --steps 12 --dims 6x6x4 --channels 8 --groups 2 --eval-every 6 --eval-scenes 3 "
        "--log /tmp/cli_train.jsonl --params /tmp/cli_model.vprm");
    REQUIRE(r.exit_code == 0);
    const std::string log = read_file("/tmp/cli_train.jsonl");
    CHECK(std::count(log.begin(), log.end(), '\n') == 12);

    // Final line carries the held-out mIoU; eval must reproduce it exactly.
    const size_t miou_pos = log.rfind("\"miou\":");
    REQUIRE(miou_pos != std::string::npos);
    std::string tail = log.substr(miou_pos + 7);
    const double logged = std::stod(tail);

    const RunResult ev = run_cli("eval --params /tmp/cli_model.vprm --seeds 1000001:3");
    REQUIRE(ev.exit_code == 0);
    const size_t pos = ev.out.find("\"miou\":");
    REQUIRE(pos != std::string::npos);
    const double evaluated = std::stod(ev.out.substr(pos + 7));
    CHECK(evaluated == logged);
    std::remove("/tmp/cli_train.jsonl");
    std::remove("/tmp/cli_model.vprm");
}

TEST_CASE("train-toy under different schemes records per-scheme results") {
    const RunResult a = run_cli(
        "train-toy --steps 6 --dims 6x6x4 --channels 8 --groups 2 --eval-every 6 --eval-scenes 2 "
        "--scheme raster-xyz --log /tmp/cli_a.jsonl --params /tmp/cli_a.vprm");
    const RunResult b = run_cli(
        "train-toy --steps 6 --dims 6x6x4 --channels 8 --groups 2 --eval-every 6 --eval-scenes 2 "
        "--scheme hp-hilbert2d --log /tmp/cli_b.jsonl --params /tmp/cli_b.vprm");
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    CHECK(a.out.find("\"miou\"") != std::string::npos);
    CHECK(b.out.find("\"miou\"") != std::string::npos);
    for (const char* p : {"/tmp/cli_a.jsonl", "/tmp/cli_a.vprm", "/tmp/cli_b.jsonl", "/tmp/cli_b.vprm"})
        std::remove(p);
}

TEST_CASE("training divergence exits with code 3") {
    const RunResult r = run_cli(
        "train-toy --steps 40 --lr 1e9 --dims 6x6x4 --channels 8 --groups 2 --eval-scenes 0 "
        "--log /tmp/cli_div.jsonl --params /tmp/cli_div.vprm");
    CHECK(r.exit_code == 3);
    std::remove("/tmp/cli_div.jsonl");
    std::remove("/tmp/cli_div.vprm");
}
