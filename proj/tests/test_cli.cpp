// End-to-end checks of the command-line binary: the generate -> assess-risk
// -> attack -> plot chain, the full `run`, and the error contract (nonzero
// exit, single-line diagnostic).

#include <cstdlib>
#include <string>

#include "doctest.h"
#include "fedshield/dataset.hpp"
#include "fedshield/risk.hpp"
#include "helpers.hpp"

using testutil::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const TempDir& tmp, const std::string& args) {
    const std::string out_file = tmp.file("cli-stdout.txt");
    const std::string err_file = tmp.file("cli-stderr.txt");
    const std::string cmd = std::string(FEDSHIELD_CLI_PATH) + " " + args + " >" + out_file +
                            " 2>" + err_file;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testutil::read_file(out_file);
    r.err = testutil::read_file(err_file);
    return r;
}

const char* kTinyConfig =
    "seed = 11\n"
    "data.n_per_class = 15\n"
    "data.d = 4\n"
    "partition.k = 2\n"
    "attack.malicious_count = 1\n"
    "attack.reference_steps = 60\n"
    "svm.epochs = 120\n"
    "fed.rounds = 2\n";

}  // namespace

TEST_CASE("cli: generate/assess-risk/attack/plot chain") {
    TempDir tmp;
    testutil::write_file(tmp.file("cfg.txt"), kTinyConfig);

    auto gen = run_cli(tmp, "generate --config " + tmp.file("cfg.txt") + " --out " + tmp.file("g"));
    REQUIRE(gen.exit_code == 0);
    const auto data = fedshield::load_csv(tmp.file("g/dataset.csv"));
    CHECK(data.size() == 60);
    CHECK(data.dim == 4);

    auto risk = run_cli(tmp, "assess-risk " + tmp.file("g/dataset.csv") + " --config " +
                                 tmp.file("cfg.txt") + " --out " + tmp.file("r"));
    REQUIRE(risk.exit_code == 0);
    const auto annotated = fedshield::load_annotated_csv(tmp.file("r/annotated.csv"));
    CHECK(annotated.stripped() == data);

    auto atk = run_cli(tmp, "attack " + tmp.file("r/annotated.csv") + " --config " +
                                tmp.file("cfg.txt") + " --out " + tmp.file("a"));
    REQUIRE(atk.exit_code == 0);
    const auto poisoned = fedshield::load_csv(tmp.file("a/poisoned.csv"));
    REQUIRE(poisoned.size() == data.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (poisoned.samples[i].label != data.samples[i].label) ++changed;
    CHECK(changed == 12);  // ceil(0.2 * 60)
    const auto manifest = testutil::read_file(tmp.file("a/poison_manifest.csv"));
    CHECK(testutil::count_substr(manifest, "\n") == 13);  // header + 12 records

    auto run = run_cli(tmp, "run --config " + tmp.file("cfg.txt") + " --out " + tmp.file("run"));
    REQUIRE_MESSAGE(run.exit_code == 0, run.err);
    CHECK(testutil::read_file(tmp.file("run/summary.csv")).rfind("arm,", 0) == 0);

    auto plot = run_cli(tmp, "plot " + tmp.file("run/telemetry_clean-fedavg.csv") + " " +
                                 tmp.file("run/telemetry_poisoned-defense.csv") + " --out " +
                                 tmp.file("p"));
    REQUIRE(plot.exit_code == 0);
    const auto svg = testutil::read_file(tmp.file("p/accuracy.svg"));
    CHECK(testutil::count_substr(svg, "<polyline") == 2);
}

TEST_CASE("cli: --seed overrides the config seed") {
    TempDir tmp;
    testutil::write_file(tmp.file("cfg.txt"), kTinyConfig);
    auto a = run_cli(tmp, "generate --config " + tmp.file("cfg.txt") + " --seed 1 --out " +
                              tmp.file("s1"));
    auto b = run_cli(tmp, "generate --config " + tmp.file("cfg.txt") + " --seed 1 --out " +
                              tmp.file("s2"));
    auto c = run_cli(tmp, "generate --config " + tmp.file("cfg.txt") + " --seed 2 --out " +
                              tmp.file("s3"));
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    REQUIRE(c.exit_code == 0);
    CHECK(testutil::read_file(tmp.file("s1/dataset.csv")) ==
          testutil::read_file(tmp.file("s2/dataset.csv")));
    CHECK(testutil::read_file(tmp.file("s1/dataset.csv")) !=
          testutil::read_file(tmp.file("s3/dataset.csv")));
}

TEST_CASE("cli: errors exit nonzero with a single-line diagnostic") {
    TempDir tmp;
    SUBCASE("bad config value") {
        testutil::write_file(tmp.file("bad.txt"), "fed.e_min = -0.1\n");
        const auto r = run_cli(tmp, "run --config " + tmp.file("bad.txt"));
        CHECK(r.exit_code != 0);
        CHECK(r.err.rfind("error:", 0) == 0);
        CHECK(testutil::count_substr(r.err, "\n") == 1);
        CHECK(r.err.find("e_min") != std::string::npos);
    }
    SUBCASE("missing input file") {
        const auto r = run_cli(tmp, "assess-risk " + tmp.file("nope.csv"));
        CHECK(r.exit_code != 0);
        CHECK(testutil::count_substr(r.err, "\n") == 1);
    }
    SUBCASE("no subcommand") {
        const auto r = run_cli(tmp, "");
        CHECK(r.exit_code != 0);
    }
    SUBCASE("malformed csv names the line") {
        testutil::write_file(tmp.file("ragged.csv"), "f1,f2,label\n1,2,1\n1,2\n");
        const auto r = run_cli(tmp, "assess-risk " + tmp.file("ragged.csv"));
        CHECK(r.exit_code != 0);
        CHECK(r.err.find("line 3") != std::string::npos);
    }
}

TEST_CASE("cli: help exits zero") {
    TempDir tmp;
    CHECK(run_cli(tmp, "--help").exit_code == 0);
    CHECK(run_cli(tmp, "run --help").exit_code == 0);
}
