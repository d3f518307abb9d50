// Command-line front end for the federated poisoning/defense simulator.
//
// Subcommands:
//   generate    synthetic dataset -> CSV
//   assess-risk dataset CSV -> risk-annotated CSV
//   attack      annotated CSV -> poisoned CSV + poison manifest
//   run         full multi-arm experiment from a config file
//   plot        telemetry CSVs -> accuracy.svg
//
// Exit status is 0 on success; any failure prints a single-line diagnostic
// to stderr and exits nonzero.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedshield/attack.hpp"
#include "fedshield/dataset.hpp"
#include "fedshield/experiment.hpp"
#include "fedshield/fedrep.hpp"
#include "fedshield/risk.hpp"
#include "fedshield/xai.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fedshield;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

CommonOpts add_common(CLI::App* sub) {
    CommonOpts opts;
    sub->add_option("--config", opts.config_path, "experiment config file (key = value lines)")
        ->check(CLI::ExistingFile);
    opts.seed_opt = sub->add_option("--seed", opts.seed, "override the config's master seed");
    opts.out_opt = sub->add_option("--out", opts.out_dir, "output directory");
    return opts;
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? ExperimentConfig{} : parse_config(opts.config_path);
    if (opts.seed_opt->count()) {
        cfg.master_seed = opts.seed;
        cfg.fed.master_seed = opts.seed;
    }
    if (opts.out_opt->count()) cfg.out_dir = opts.out_dir;
    validate(cfg);
    return cfg;
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

int cmd_generate(const CommonOpts& opts) {
    auto cfg = resolve_config(opts);
    SyntheticSpec spec = cfg.data.synthetic;
    spec.seed = derive_seed(cfg.master_seed, seed_stream::data);
    const auto data = generate_synthetic(spec);
    const auto out = ensure_dir(cfg.out_dir) / "dataset.csv";
    save_csv(out.string(), data);
    std::cout << out.string() << '\n';
    return 0;
}

int cmd_assess_risk(const CommonOpts& opts, const std::string& input) {
    auto cfg = resolve_config(opts);
    const auto data = load_csv(input);
    const auto annotated = assess_risk(data, RiskConfig{cfg.svm, cfg.risk_max_levels});
    const auto out = ensure_dir(cfg.out_dir) / "annotated.csv";
    save_annotated_csv(out.string(), annotated);
    std::cout << out.string() << '\n';
    return 0;
}

int cmd_attack(const CommonOpts& opts, const std::string& input) {
    auto cfg = resolve_config(opts);
    const auto annotated = load_annotated_csv(input);

    AttackPlan plan = build_attack_plan(cfg);
    plan.flags.assign(1, true);  // the input file is treated as one compromised node
    const auto reference =
        train_linear(annotated.stripped(), plan.reference_train, plan.reference_steps);
    const auto report = permutation_importance(reference, annotated.stripped(),
                                               plan.explainer_repeats,
                                               derive_seed(plan.explainer_seed, 1));
    const auto poisoned = poison_node(annotated, plan, 0, report);

    const auto dir = ensure_dir(cfg.out_dir);
    save_csv((dir / "poisoned.csv").string(), poisoned.data);
    write_poison_manifest((dir / "poison_manifest.csv").string(),
                          FederationPoison{{poisoned.data}, {poisoned.records}});
    std::cout << (dir / "poisoned.csv").string() << '\n';
    std::cout << (dir / "poison_manifest.csv").string() << '\n';
    return 0;
}

int cmd_run(const CommonOpts& opts) {
    const auto cfg = resolve_config(opts);
    const auto result = run_experiment(cfg);
    std::cout << (result.out_dir / "summary.csv").string() << '\n';
    return 0;
}

int cmd_plot(const CommonOpts& opts, const std::vector<std::string>& telemetry) {
    auto cfg = resolve_config(opts);
    const auto out = ensure_dir(cfg.out_dir) / "accuracy.svg";
    emit_plot(telemetry, out.string());
    std::cout << out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated data-poisoning attack/defense simulator"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset CSV");
    auto gen_opts = add_common(gen);

    auto* risk = app.add_subcommand("assess-risk", "annotate a dataset CSV with risk ranks");
    auto risk_opts = add_common(risk);
    std::string risk_input;
    risk->add_option("input", risk_input, "dataset CSV")->required()->check(CLI::ExistingFile);

    auto* atk = app.add_subcommand("attack", "poison a risk-annotated CSV");
    auto atk_opts = add_common(atk);
    std::string atk_input;
    atk->add_option("input", atk_input, "risk-annotated CSV")->required()->check(CLI::ExistingFile);

    auto* run = app.add_subcommand("run", "run the configured experiment arms");
    auto run_opts = add_common(run);

    auto* plot = app.add_subcommand("plot", "render an accuracy chart from telemetry CSVs");
    auto plot_opts = add_common(plot);
    std::vector<std::string> plot_inputs;
    plot->add_option("telemetry", plot_inputs, "telemetry CSV files")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_generate(gen_opts);
        if (risk->parsed()) return cmd_assess_risk(risk_opts, risk_input);
        if (atk->parsed()) return cmd_attack(atk_opts, atk_input);
        if (run->parsed()) return cmd_run(run_opts);
        if (plot->parsed()) return cmd_plot(plot_opts, plot_inputs);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
