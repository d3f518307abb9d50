#include <algorithm>
#include <chrono>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "fedshield/experiment.hpp"
#include "helpers.hpp"

using namespace fedshield;
using testutil::TempDir;

namespace {

// Small, fast experiment; individual tests override what they need.
ExperimentConfig tiny_config(const std::string& out_dir) {
    ExperimentConfig cfg;
    cfg.master_seed = 5;
    cfg.out_dir = out_dir;
    cfg.data.synthetic = {15, 4, 4, 4.0, 1.0, 0};
    cfg.partition.num_nodes = 2;
    cfg.malicious_count = 1;
    cfg.fed.rounds = 2;
    cfg.svm.epochs = 120;
    cfg.reference_steps = 60;
    return cfg;
}

std::set<std::string> dir_listing(const std::filesystem::path& dir) {
    std::set<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        names.insert(entry.path().filename().string());
    return names;
}

}  // namespace

TEST_CASE("parse_config: minimal file resolves to the documented defaults") {
    const auto cfg = parse_config_text("seed = 1\n");
    CHECK(cfg.master_seed == 1);
    CHECK(cfg.out_dir == "out");
    CHECK(cfg.arms.size() == 4);
    CHECK(cfg.data.source == DataSource::Synthetic);
    CHECK(cfg.data.synthetic.n_per_class == 125);
    CHECK(cfg.data.synthetic.dim == 16);
    CHECK(cfg.data.synthetic.num_classes == 4);
    CHECK(cfg.data.synthetic.class_separation == 4.0);
    CHECK(cfg.data.synthetic.noise_sigma == 1.0);
    CHECK(cfg.data.test_fraction == 0.2);
    CHECK(cfg.partition.num_nodes == 10);
    CHECK(cfg.partition.scheme == PartitionScheme::Iid);
    CHECK(resolved_malicious_nodes(cfg) == std::vector<std::size_t>{1, 2, 3});
    CHECK(resolved_budget_fraction(cfg) == 0.2);
    CHECK(cfg.explainer_repeats == 5);
    CHECK(cfg.fed.rounds == 30);
    CHECK(cfg.fed.e_min == 0.025);
    CHECK(cfg.fed.r_min == 0.2);
    CHECK(cfg.fed.r_init == 1.0);
    CHECK(cfg.fed.reputation_rule == ReputationRule::Corrected);
    CHECK(cfg.fed.train.local_steps == 1);
}

TEST_CASE("parse_config: comments, blank lines and spacing are tolerated") {
    const auto cfg = parse_config_text(
        "# a comment\n\n  seed = 9   # trailing comment\n\tfed.rounds=3\n");
    CHECK(cfg.master_seed == 9);
    CHECK(cfg.fed.rounds == 3);
}

TEST_CASE("parse_config: constraint violations name the offending key") {
    CHECK_THROWS_WITH_AS(parse_config_text("fed.e_min = -0.1\n"), doctest::Contains("e_min"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("fed.r_min = 2.0\n"), doctest::Contains("r_min"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("data.test_fraction = 1.5\n"),
                         doctest::Contains("test_fraction"), std::invalid_argument);
}

TEST_CASE("parse_config: reputation rule enum") {
    CHECK(parse_config_text("fed.reputation_rule = literal\n").fed.reputation_rule ==
          ReputationRule::Literal);
    CHECK(parse_config_text("fed.reputation_rule = corrected\n").fed.reputation_rule ==
          ReputationRule::Corrected);
    CHECK_THROWS_WITH_AS(parse_config_text("fed.reputation_rule = bogus\n"),
                         doctest::Contains("reputation_rule"), std::runtime_error);
}

TEST_CASE("parse_config: unknown, duplicate and malformed keys rejected") {
    CHECK_THROWS_WITH_AS(parse_config_text("frobnicate = 1\n"),
                         doctest::Contains("unknown key 'frobnicate'"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config_text("seed = 1\nseed = 2\n"),
                         doctest::Contains("duplicate key"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config_text("just some words\n"),
                         doctest::Contains("expected 'key = value'"), std::runtime_error);
}

TEST_CASE("parse_config: budget and malicious-set exclusivity") {
    CHECK_THROWS_WITH_AS(
        parse_config_text("attack.budget_count = 3\nattack.budget_fraction = 0.5\n"),
        doctest::Contains("not both"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        parse_config_text("attack.malicious_count = 2\nattack.malicious_nodes = 1,2\n"),
        doctest::Contains("not both"), std::invalid_argument);
    const auto cfg = parse_config_text("attack.budget_count = 4\n");
    CHECK(cfg.budget_count == 4);
}

TEST_CASE("parse_config: malicious ids validated against the node count") {
    CHECK_THROWS_WITH_AS(parse_config_text("partition.k = 4\nattack.malicious_nodes = 1,5\n"),
                         doctest::Contains("outside 1..partition.k"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config_text("attack.malicious_nodes = 2,2\n"),
                         doctest::Contains("duplicates"), std::invalid_argument);
    // Default malicious count adapts to tiny federations.
    const auto cfg = parse_config_text("partition.k = 2\n");
    CHECK(resolved_malicious_nodes(cfg) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("render_config: parse(render(cfg)) reproduces the configuration") {
    auto cfg = tiny_config("some-out");
    cfg.arms = {Arm::PoisonedDefense, Arm::CleanFedavg};
    cfg.partition.scheme = PartitionScheme::LabelSkewed;
    cfg.partition.beta = 0.125;
    cfg.fed.reputation_rule = ReputationRule::Literal;
    cfg.budget_count = 3;
    const auto text = render_config(cfg);
    const auto back = parse_config_text(text);
    CHECK(render_config(back) == text);
    CHECK(back.master_seed == cfg.master_seed);
    CHECK(back.arms == cfg.arms);
    CHECK(back.partition.scheme == cfg.partition.scheme);
    CHECK(back.budget_count == cfg.budget_count);
    CHECK(resolved_malicious_nodes(back) == resolved_malicious_nodes(cfg));
}

TEST_CASE("run_experiment: single clean arm, one round, two nodes") {
    TempDir tmp;
    auto cfg = tiny_config(tmp.file("run"));
    cfg.arms = {Arm::CleanFedavg};
    cfg.fed.rounds = 1;
    const auto result = run_experiment(cfg);
    REQUIRE(result.arms.size() == 1);

    const auto summary = testutil::read_file(tmp.file("run/summary.csv"));
    const auto summary_lines = split(summary, '\n');
    REQUIRE(summary_lines.size() == 3);  // header + 1 row + trailing piece
    CHECK(summary_lines[1].rfind("clean-fedavg,", 0) == 0);

    const auto telemetry = testutil::read_file(tmp.file("run/telemetry_clean-fedavg.csv"));
    CHECK(split(telemetry, '\n').size() == 1 + 2 + 1);  // header + 2 node rows + tail

    CHECK(dir_listing(result.out_dir) ==
          std::set<std::string>{"telemetry_clean-fedavg.csv", "summary.csv", "accuracy.svg",
                                "config_resolved.txt"});
}

TEST_CASE("run_experiment: full arm grid writes exactly the documented files") {
    TempDir tmp;
    auto cfg = tiny_config(tmp.file("grid"));
    const auto result = run_experiment(cfg);
    REQUIRE(result.arms.size() == 4);
    CHECK(dir_listing(result.out_dir) ==
          std::set<std::string>{
              "telemetry_clean-fedavg.csv", "telemetry_poisoned-fedavg.csv",
              "telemetry_poisoned-defense.csv", "telemetry_clean-defense.csv",
              "audit_poisoned-defense.log", "audit_clean-defense.log", "poison_manifest.csv",
              "summary.csv", "accuracy.svg", "config_resolved.txt"});
    // The resolved config copy itself parses back.
    const auto back = parse_config(tmp.file("grid/config_resolved.txt"));
    CHECK(back.master_seed == cfg.master_seed);
}

TEST_CASE("run_experiment: reruns are byte-identical") {
    TempDir tmp;
    auto cfg1 = tiny_config(tmp.file("a"));
    auto cfg2 = tiny_config(tmp.file("b"));
    run_experiment(cfg1);
    run_experiment(cfg2);
    for (const auto* name :
         {"summary.csv", "telemetry_poisoned-defense.csv", "poison_manifest.csv",
          "accuracy.svg", "audit_poisoned-defense.log"}) {
        CHECK(testutil::read_file(tmp.file(std::string("a/") + name)) ==
              testutil::read_file(tmp.file(std::string("b/") + name)));
    }
}

TEST_CASE("run_experiment: both poisoned arms share one poison pass") {
    TempDir tmp;
    auto only_fedavg = tiny_config(tmp.file("pf"));
    only_fedavg.arms = {Arm::PoisonedFedavg};
    auto only_defense = tiny_config(tmp.file("pd"));
    only_defense.arms = {Arm::PoisonedDefense};
    run_experiment(only_fedavg);
    run_experiment(only_defense);
    CHECK(testutil::read_file(tmp.file("pf/poison_manifest.csv")) ==
          testutil::read_file(tmp.file("pd/poison_manifest.csv")));
}

TEST_CASE("run_experiment: default-scale four-arm run fits the time budget") {
    TempDir tmp;
    ExperimentConfig cfg;  // stock defaults: K=10, T=30, four arms
    cfg.master_seed = 3;
    cfg.out_dir = tmp.file("full");
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_experiment(cfg);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 60.0);
    REQUIRE(result.arms.size() == 4);
    for (const auto& arm : result.arms) CHECK(arm.final_accuracy > 0.5);
    CHECK(dir_listing(result.out_dir).size() == 10);
}

TEST_CASE("run_experiment: refuses a non-empty output directory") {
    TempDir tmp;
    auto cfg = tiny_config(tmp.file("occupied"));
    std::filesystem::create_directories(tmp.file("occupied"));
    testutil::write_file(tmp.file("occupied/stale.txt"), "old");
    CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("not empty"), std::runtime_error);
}

TEST_CASE("emit_plot: one polyline per arm with one point per round") {
    TempDir tmp;
    // Two synthetic telemetry files, 10 rounds each, 2 node rows per round.
    for (const auto* arm : {"alpha", "beta"}) {
        std::string text =
            "round,node,contribution,reputation,in_group,evicted,global_accuracy,global_loss\n";
        for (int r = 1; r <= 10; ++r) {
            for (int n = 1; n <= 2; ++n) {
                text += std::to_string(r) + "," + std::to_string(n) + ",0.1,1,1,0,0." +
                        std::to_string(50 + r) + ",1.0\n";
            }
        }
        testutil::write_file(tmp.file(std::string("telemetry_") + arm + ".csv"), text);
    }
    emit_plot({tmp.file("telemetry_alpha.csv"), tmp.file("telemetry_beta.csv")},
              tmp.file("plot.svg"));
    const auto svg = testutil::read_file(tmp.file("plot.svg"));
    CHECK(testutil::count_substr(svg, "<polyline") == 2);
    CHECK(svg.find(">alpha<") != std::string::npos);
    CHECK(svg.find(">beta<") != std::string::npos);

    // Every data point stays inside the plot's y bounds.
    std::size_t pos = 0;
    while ((pos = svg.find("points=\"", pos)) != std::string::npos) {
        pos += 8;
        const auto end = svg.find('"', pos);
        const auto pts = split(svg.substr(pos, end - pos), ' ');
        CHECK(pts.size() == 10);
        for (const auto& pt : pts) {
            const auto xy = split(pt, ',');
            REQUIRE(xy.size() == 2);
            const double y = *parse_double_strict(xy[1]);
            CHECK(y >= 30.0);
            CHECK(y <= 390.0);
        }
        pos = end;
    }

    // Deterministic bytes on a second render.
    emit_plot({tmp.file("telemetry_alpha.csv"), tmp.file("telemetry_beta.csv")},
              tmp.file("plot2.svg"));
    CHECK(svg == testutil::read_file(tmp.file("plot2.svg")));
}

TEST_CASE("emit_plot: malformed telemetry rejected") {
    TempDir tmp;
    testutil::write_file(tmp.file("bad.csv"), "round,node\n1,1\n");
    CHECK_THROWS_AS(emit_plot({tmp.file("bad.csv")}, tmp.file("x.svg")), std::runtime_error);
    CHECK_THROWS_AS(emit_plot({}, tmp.file("x.svg")), std::invalid_argument);
}

TEST_CASE("run_experiment: inner failures carry the arm name") {
    TempDir tmp;
    auto cfg = tiny_config(tmp.file("ctx"));
    cfg.fed.rounds = 40;
    cfg.fed.e_min = 0.9;  // unreachable bar: the defense arm evicts everyone
    cfg.arms = {Arm::CleanDefense};
    CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("arm clean-defense"),
                         std::runtime_error);
}

TEST_CASE("read_accuracy_series: strips the telemetry_ prefix and dedupes rounds") {
    TempDir tmp;
    testutil::write_file(
        tmp.file("telemetry_poisoned-defense.csv"),
        "round,node,contribution,reputation,in_group,evicted,global_accuracy,global_loss\n"
        "1,1,0.5,1,1,0,0.25,1.0\n1,2,0.5,1,1,0,0.25,1.0\n2,1,0.5,1,1,0,0.5,0.9\n");
    const auto series = read_accuracy_series(tmp.file("telemetry_poisoned-defense.csv"));
    CHECK(series.name == "poisoned-defense");
    REQUIRE(series.points.size() == 2);
    CHECK(series.points[0] == std::pair<std::size_t, double>{1, 0.25});
    CHECK(series.points[1] == std::pair<std::size_t, double>{2, 0.5});
}
