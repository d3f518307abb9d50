#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedshield/attack.hpp"
#include "fedshield/dataset.hpp"
#include "fedshield/fedrep.hpp"
#include "fedshield/risk.hpp"
#include "fedshield/xai.hpp"

namespace fedshield {

/// The four experiment arms: attack on/off crossed with defense on/off.
enum class Arm { CleanFedavg, PoisonedFedavg, PoisonedDefense, CleanDefense };

inline constexpr Arm kAllArms[] = {Arm::CleanFedavg, Arm::PoisonedFedavg, Arm::PoisonedDefense,
                                   Arm::CleanDefense};

inline const char* arm_name(Arm a) {
    switch (a) {
        case Arm::CleanFedavg: return "clean-fedavg";
        case Arm::PoisonedFedavg: return "poisoned-fedavg";
        case Arm::PoisonedDefense: return "poisoned-defense";
        case Arm::CleanDefense: return "clean-defense";
    }
    return "?";
}

inline std::optional<Arm> parse_arm(const std::string& name) {
    for (Arm a : kAllArms)
        if (name == arm_name(a)) return a;
    return std::nullopt;
}

inline bool arm_poisoned(Arm a) { return a == Arm::PoisonedFedavg || a == Arm::PoisonedDefense; }
inline bool arm_defended(Arm a) { return a == Arm::PoisonedDefense || a == Arm::CleanDefense; }

enum class DataSource { Synthetic, Csv };

struct DataConfig {
    DataSource source = DataSource::Synthetic;
    std::string csv_path;
    SyntheticSpec synthetic{125, 16, 4, 4.0, 1.0, 0};  // seed filled from master per run
    double test_fraction = 0.2;
};

struct PartitionConfig {
    std::size_t num_nodes = 10;
    PartitionScheme scheme = PartitionScheme::Iid;
    double beta = 0.5;
};

/// Fully resolved experiment description. parse_config() fills one from a
/// flat `key = value` file; every field has a documented default.
struct ExperimentConfig {
    std::uint64_t master_seed = 7;
    std::string out_dir = "out";
    std::vector<Arm> arms{Arm::CleanFedavg, Arm::PoisonedFedavg, Arm::PoisonedDefense,
                          Arm::CleanDefense};
    DataConfig data;
    PartitionConfig partition;
    std::optional<std::vector<std::size_t>> malicious_nodes;  // explicit 1-based ids
    std::optional<std::size_t> malicious_count;               // or: flag nodes 1..count
    std::optional<std::size_t> budget_count;
    std::optional<double> budget_fraction;                    // default mode, 0.20
    std::size_t explainer_repeats = 5;
    std::size_t reference_steps = 150;
    SvmConfig svm;
    int risk_max_levels = 0;
    FedConfig fed;
};

/// 1-based ids of the nodes the attack plan flags. Defaults to the first
/// min(3, K) nodes when neither attack.malicious_* key is set.
inline std::vector<std::size_t> resolved_malicious_nodes(const ExperimentConfig& cfg) {
    if (cfg.malicious_nodes) return *cfg.malicious_nodes;
    const std::size_t count =
        cfg.malicious_count ? *cfg.malicious_count : std::min<std::size_t>(3, cfg.partition.num_nodes);
    std::vector<std::size_t> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = i + 1;
    return ids;
}

inline double resolved_budget_fraction(const ExperimentConfig& cfg) {
    return cfg.budget_fraction ? *cfg.budget_fraction : 0.2;
}

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.arms.empty()) throw std::invalid_argument("config: arms must name at least one arm");
    std::set<Arm> seen_arms(cfg.arms.begin(), cfg.arms.end());
    if (seen_arms.size() != cfg.arms.size())
        throw std::invalid_argument("config: arms contains duplicates");
    if (cfg.data.source == DataSource::Csv && cfg.data.csv_path.empty())
        throw std::invalid_argument("config: data.csv_path required when data.source = csv");
    if (cfg.data.source == DataSource::Synthetic) {
        SyntheticSpec spec = cfg.data.synthetic;
        spec.seed = 0;
        validate(spec);  // reports n_per_class/d/classes/separation/sigma violations
    }
    if (!(cfg.data.test_fraction > 0.0 && cfg.data.test_fraction < 1.0))
        throw std::invalid_argument("config: data.test_fraction must be in (0,1)");
    if (cfg.partition.num_nodes < 1)
        throw std::invalid_argument("config: partition.k must be >= 1");
    if (!(cfg.partition.beta > 0.0))
        throw std::invalid_argument("config: partition.beta must be > 0");
    if (cfg.malicious_nodes && cfg.malicious_count)
        throw std::invalid_argument(
            "config: set attack.malicious_nodes or attack.malicious_count, not both");
    const auto malicious = resolved_malicious_nodes(cfg);
    std::set<std::size_t> unique_ids(malicious.begin(), malicious.end());
    if (unique_ids.size() != malicious.size())
        throw std::invalid_argument("config: attack.malicious_nodes contains duplicates");
    for (auto id : malicious)
        if (id < 1 || id > cfg.partition.num_nodes)
            throw std::invalid_argument("config: malicious node id " + std::to_string(id) +
                                        " outside 1..partition.k");
    if (cfg.budget_count && cfg.budget_fraction)
        throw std::invalid_argument(
            "config: set attack.budget_count or attack.budget_fraction, not both");
    if (cfg.budget_fraction && !(*cfg.budget_fraction >= 0.0 && *cfg.budget_fraction <= 1.0))
        throw std::invalid_argument("config: attack.budget_fraction must be in [0,1]");
    if (cfg.explainer_repeats < 1)
        throw std::invalid_argument("config: attack.explainer_repeats must be >= 1");
    if (cfg.svm.epochs < 1) throw std::invalid_argument("config: svm.epochs must be >= 1");
    if (!(cfg.svm.learning_rate > 0.0))
        throw std::invalid_argument("config: svm.learning_rate must be > 0");
    if (cfg.svm.reg_lambda < 0.0) throw std::invalid_argument("config: svm.lambda must be >= 0");
    if (cfg.svm.support_tol < 0.0)
        throw std::invalid_argument("config: svm.support_tol must be >= 0");
    if (cfg.risk_max_levels < 0)
        throw std::invalid_argument("config: risk.max_levels must be >= 0");
    if (!(cfg.fed.train.learning_rate > 0.0))
        throw std::invalid_argument("config: fed.learning_rate must be > 0");
    if (cfg.fed.train.reg_weight < 0.0)
        throw std::invalid_argument("config: fed.reg_weight must be >= 0");
    if (cfg.fed.train.local_steps < 1)
        throw std::invalid_argument("config: fed.local_steps must be >= 1");
    if (!(cfg.fed.e_min > 0.0 && cfg.fed.e_min <= 1.0))
        throw std::invalid_argument("config: fed.e_min must be in (0,1]");
    if (cfg.fed.r_min < 0.0) throw std::invalid_argument("config: fed.r_min must be >= 0");
    if (!(cfg.fed.r_init > 0.0)) throw std::invalid_argument("config: fed.r_init must be > 0");
    if (!(cfg.fed.r_min < cfg.fed.r_init))
        throw std::invalid_argument("config: fed.r_min must be < fed.r_init");
}

// --- config file parsing ---------------------------------------------------
//
// Flat `key = value` lines; '#' starts a comment; dotted keys group options.
// Unknown keys, duplicate keys and malformed values are hard errors.

namespace detail {

struct ConfigParser {
    std::map<std::string, std::string> values;

    void insert(const std::string& key, const std::string& value, std::size_t line_no) {
        if (values.count(key))
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": duplicate key '" + key + "'");
        values[key] = value;
    }

    std::optional<std::string> take(const std::string& key) {
        auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        std::string v = it->second;
        values.erase(it);
        return v;
    }

    double take_double(const std::string& key, double fallback) {
        auto raw = take(key);
        if (!raw) return fallback;
        auto v = parse_double_strict(*raw);
        if (!v) throw std::runtime_error("config: key '" + key + "' expects a number, got '" +
                                         *raw + "'");
        return *v;
    }

    std::size_t take_size(const std::string& key, std::size_t fallback) {
        auto raw = take(key);
        if (!raw) return fallback;
        auto v = parse_u64_strict(*raw);
        if (!v) throw std::runtime_error("config: key '" + key +
                                         "' expects a non-negative integer, got '" + *raw + "'");
        return static_cast<std::size_t>(*v);
    }

    void finish() const {
        if (!values.empty())
            throw std::runtime_error("config: unknown key '" + values.begin()->first + "'");
    }
};

inline ConfigParser tokenize_config(const std::string& text) {
    ConfigParser p;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        p.insert(key, value, line_no);
    }
    return p;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    auto p = detail::tokenize_config(text);

    if (auto v = p.take("seed")) {
        auto s = parse_u64_strict(*v);
        if (!s) throw std::runtime_error("config: key 'seed' expects an unsigned integer");
        cfg.master_seed = *s;
    }
    if (auto v = p.take("out")) cfg.out_dir = *v;
    if (auto v = p.take("arms")) {
        cfg.arms.clear();
        for (const auto& tok : split(*v, ',')) {
            const auto name = trim(tok);
            const auto arm = parse_arm(name);
            if (!arm) throw std::runtime_error("config: unknown arm '" + name + "'");
            cfg.arms.push_back(*arm);
        }
    }
    if (auto v = p.take("data.source")) {
        if (*v == "synthetic") cfg.data.source = DataSource::Synthetic;
        else if (*v == "csv") cfg.data.source = DataSource::Csv;
        else throw std::runtime_error("config: data.source must be 'synthetic' or 'csv', got '" +
                                      *v + "'");
    }
    if (auto v = p.take("data.csv_path")) cfg.data.csv_path = *v;
    cfg.data.synthetic.n_per_class = p.take_size("data.n_per_class", cfg.data.synthetic.n_per_class);
    cfg.data.synthetic.dim = p.take_size("data.d", cfg.data.synthetic.dim);
    cfg.data.synthetic.num_classes =
        static_cast<int>(p.take_size("data.classes", static_cast<std::size_t>(cfg.data.synthetic.num_classes)));
    cfg.data.synthetic.class_separation =
        p.take_double("data.separation", cfg.data.synthetic.class_separation);
    cfg.data.synthetic.noise_sigma = p.take_double("data.sigma", cfg.data.synthetic.noise_sigma);
    cfg.data.test_fraction = p.take_double("data.test_fraction", cfg.data.test_fraction);

    cfg.partition.num_nodes = p.take_size("partition.k", cfg.partition.num_nodes);
    if (auto v = p.take("partition.scheme")) {
        if (*v == "iid") cfg.partition.scheme = PartitionScheme::Iid;
        else if (*v == "label-skewed") cfg.partition.scheme = PartitionScheme::LabelSkewed;
        else throw std::runtime_error(
                "config: partition.scheme must be 'iid' or 'label-skewed', got '" + *v + "'");
    }
    cfg.partition.beta = p.take_double("partition.beta", cfg.partition.beta);

    if (auto v = p.take("attack.malicious_count")) {
        auto n = parse_u64_strict(*v);
        if (!n) throw std::runtime_error("config: attack.malicious_count expects an integer");
        cfg.malicious_count = static_cast<std::size_t>(*n);
    }
    if (auto v = p.take("attack.malicious_nodes")) {
        std::vector<std::size_t> ids;
        if (!trim(*v).empty()) {
            for (const auto& tok : split(*v, ',')) {
                auto id = parse_u64_strict(trim(tok));
                if (!id)
                    throw std::runtime_error(
                        "config: attack.malicious_nodes expects comma-separated node ids");
                ids.push_back(static_cast<std::size_t>(*id));
            }
        }
        cfg.malicious_nodes = std::move(ids);
    }
    if (auto v = p.take("attack.budget_count")) {
        auto n = parse_u64_strict(*v);
        if (!n) throw std::runtime_error("config: attack.budget_count expects an integer");
        cfg.budget_count = static_cast<std::size_t>(*n);
    }
    if (auto v = p.take("attack.budget_fraction")) {
        auto f = parse_double_strict(*v);
        if (!f) throw std::runtime_error("config: attack.budget_fraction expects a number");
        cfg.budget_fraction = *f;
    }
    cfg.explainer_repeats = p.take_size("attack.explainer_repeats", cfg.explainer_repeats);
    cfg.reference_steps = p.take_size("attack.reference_steps", cfg.reference_steps);

    cfg.svm.epochs = p.take_size("svm.epochs", cfg.svm.epochs);
    cfg.svm.learning_rate = p.take_double("svm.learning_rate", cfg.svm.learning_rate);
    cfg.svm.reg_lambda = p.take_double("svm.lambda", cfg.svm.reg_lambda);
    cfg.svm.support_tol = p.take_double("svm.support_tol", cfg.svm.support_tol);
    cfg.risk_max_levels = static_cast<int>(
        p.take_size("risk.max_levels", static_cast<std::size_t>(cfg.risk_max_levels)));

    cfg.fed.rounds = p.take_size("fed.rounds", cfg.fed.rounds);
    cfg.fed.train.learning_rate = p.take_double("fed.learning_rate", cfg.fed.train.learning_rate);
    cfg.fed.train.reg_weight = p.take_double("fed.reg_weight", cfg.fed.train.reg_weight);
    cfg.fed.train.local_steps = p.take_size("fed.local_steps", cfg.fed.train.local_steps);
    cfg.fed.e_min = p.take_double("fed.e_min", cfg.fed.e_min);
    cfg.fed.r_min = p.take_double("fed.r_min", cfg.fed.r_min);
    cfg.fed.r_init = p.take_double("fed.r_init", cfg.fed.r_init);
    if (auto v = p.take("fed.reputation_rule")) {
        if (*v == "corrected") cfg.fed.reputation_rule = ReputationRule::Corrected;
        else if (*v == "literal") cfg.fed.reputation_rule = ReputationRule::Literal;
        else throw std::runtime_error(
                "config: fed.reputation_rule must be 'corrected' or 'literal', got '" + *v + "'");
    }
    p.finish();

    cfg.fed.master_seed = cfg.master_seed;
    validate(cfg);
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

/// Renders the fully resolved configuration; parse_config_text() on the
/// result reproduces the same configuration.
inline std::string render_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "# resolved experiment configuration\n";
    out << "seed = " << cfg.master_seed << '\n';
    out << "out = " << cfg.out_dir << '\n';
    out << "arms = ";
    for (std::size_t i = 0; i < cfg.arms.size(); ++i)
        out << (i ? "," : "") << arm_name(cfg.arms[i]);
    out << '\n';
    out << "data.source = " << (cfg.data.source == DataSource::Csv ? "csv" : "synthetic") << '\n';
    if (!cfg.data.csv_path.empty()) out << "data.csv_path = " << cfg.data.csv_path << '\n';
    out << "data.n_per_class = " << cfg.data.synthetic.n_per_class << '\n';
    out << "data.d = " << cfg.data.synthetic.dim << '\n';
    out << "data.classes = " << cfg.data.synthetic.num_classes << '\n';
    out << "data.separation = " << fmt_double(cfg.data.synthetic.class_separation) << '\n';
    out << "data.sigma = " << fmt_double(cfg.data.synthetic.noise_sigma) << '\n';
    out << "data.test_fraction = " << fmt_double(cfg.data.test_fraction) << '\n';
    out << "partition.k = " << cfg.partition.num_nodes << '\n';
    out << "partition.scheme = " << to_string(cfg.partition.scheme) << '\n';
    out << "partition.beta = " << fmt_double(cfg.partition.beta) << '\n';
    const auto malicious = resolved_malicious_nodes(cfg);
    out << "attack.malicious_nodes = ";
    for (std::size_t i = 0; i < malicious.size(); ++i) out << (i ? "," : "") << malicious[i];
    out << '\n';
    if (cfg.budget_count) {
        out << "attack.budget_count = " << *cfg.budget_count << '\n';
    } else {
        out << "attack.budget_fraction = " << fmt_double(resolved_budget_fraction(cfg)) << '\n';
    }
    out << "attack.explainer_repeats = " << cfg.explainer_repeats << '\n';
    out << "attack.reference_steps = " << cfg.reference_steps << '\n';
    out << "svm.epochs = " << cfg.svm.epochs << '\n';
    out << "svm.learning_rate = " << fmt_double(cfg.svm.learning_rate) << '\n';
    out << "svm.lambda = " << fmt_double(cfg.svm.reg_lambda) << '\n';
    out << "svm.support_tol = " << fmt_double(cfg.svm.support_tol) << '\n';
    out << "risk.max_levels = " << cfg.risk_max_levels << '\n';
    out << "fed.rounds = " << cfg.fed.rounds << '\n';
    out << "fed.learning_rate = " << fmt_double(cfg.fed.train.learning_rate) << '\n';
    out << "fed.reg_weight = " << fmt_double(cfg.fed.train.reg_weight) << '\n';
    out << "fed.local_steps = " << cfg.fed.train.local_steps << '\n';
    out << "fed.e_min = " << fmt_double(cfg.fed.e_min) << '\n';
    out << "fed.r_min = " << fmt_double(cfg.fed.r_min) << '\n';
    out << "fed.r_init = " << fmt_double(cfg.fed.r_init) << '\n';
    out << "fed.reputation_rule = " << to_string(cfg.fed.reputation_rule) << '\n';
    return out.str();
}

// --- experiment staging ------------------------------------------------

/// Everything the arms share: the split, the node partition, the attack plan
/// and the poisoned node datasets. Built once per run so the defense
/// comparison is paired rather than confounded by fresh randomness.
struct StagedExperiment {
    Dataset train;
    Dataset test;
    std::vector<Dataset> node_data;  // clean partition
    AttackPlan plan;
    FederationPoison poison;         // empty unless any poisoned arm is requested
    bool poison_built = false;
};

inline AttackPlan build_attack_plan(const ExperimentConfig& cfg) {
    AttackPlan plan;
    plan.flags.assign(cfg.partition.num_nodes, false);
    for (auto id : resolved_malicious_nodes(cfg)) plan.flags[id - 1] = true;
    if (cfg.budget_count) plan.budget_count = *cfg.budget_count;
    else plan.budget_fraction = resolved_budget_fraction(cfg);
    plan.explainer_seed = derive_seed(cfg.master_seed, seed_stream::explainer);
    plan.explainer_repeats = cfg.explainer_repeats;
    plan.reference_train = cfg.fed.train;
    plan.reference_steps = cfg.reference_steps;
    plan.risk = RiskConfig{cfg.svm, cfg.risk_max_levels};
    return plan;
}

inline StagedExperiment stage_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    StagedExperiment staged;
    Dataset full;
    if (cfg.data.source == DataSource::Synthetic) {
        SyntheticSpec spec = cfg.data.synthetic;
        spec.seed = derive_seed(cfg.master_seed, seed_stream::data);
        full = generate_synthetic(spec);
    } else {
        full = load_csv(cfg.data.csv_path);
    }
    auto [train, test] =
        train_test_split(full, cfg.data.test_fraction, derive_seed(cfg.master_seed, seed_stream::split));
    staged.train = std::move(train);
    staged.test = std::move(test);
    staged.node_data = partition(staged.train, cfg.partition.num_nodes, cfg.partition.scheme,
                                 cfg.partition.beta, derive_seed(cfg.master_seed, seed_stream::partition));
    staged.plan = build_attack_plan(cfg);

    const bool needs_poison =
        std::any_of(cfg.arms.begin(), cfg.arms.end(), [](Arm a) { return arm_poisoned(a); });
    if (needs_poison) {
        std::vector<RiskAnnotatedDataset> annotated;
        std::vector<ImportanceReport> reports;
        annotated.reserve(staged.node_data.size());
        reports.reserve(staged.node_data.size());
        for (std::size_t k = 0; k < staged.node_data.size(); ++k) {
            annotated.push_back(assess_risk(staged.node_data[k], staged.plan.risk));
            const auto reference = train_linear(staged.node_data[k], staged.plan.reference_train,
                                                staged.plan.reference_steps);
            reports.push_back(permutation_importance(reference, staged.node_data[k],
                                                     staged.plan.explainer_repeats,
                                                     derive_seed(staged.plan.explainer_seed, k + 1)));
        }
        staged.poison = poison_federation(annotated, staged.plan, reports);
        staged.poison_built = true;
    }
    return staged;
}

struct ArmResult {
    Arm arm = Arm::CleanFedavg;
    std::vector<RoundRecord> history;
    double final_accuracy = 0.0;
    // (node id, eviction round) for each planned-malicious node; nullopt = never evicted
    std::vector<std::pair<std::size_t, std::optional<std::size_t>>> evictions;
};

struct ExperimentResult {
    std::filesystem::path out_dir;
    std::vector<ArmResult> arms;
};

namespace detail {

inline ArmResult run_arm(const ExperimentConfig& cfg, const StagedExperiment& staged, Arm arm,
                         std::ostream* audit) {
    const bool poisoned = arm_poisoned(arm);
    std::vector<NodeState> nodes;
    nodes.reserve(staged.node_data.size());
    for (std::size_t k = 0; k < staged.node_data.size(); ++k) {
        NodeState node;
        node.node_id = k + 1;
        node.data = poisoned ? staged.poison.datasets[k] : staged.node_data[k];
        node.local_model = LinearModel::zeros(staged.train.dim, staged.train.num_classes);
        node.reputation = cfg.fed.r_init;
        node.malicious = poisoned && staged.plan.flags[k];
        nodes.push_back(std::move(node));
    }
    FedConfig fed = cfg.fed;
    fed.defense_enabled = arm_defended(arm);

    ArmResult result;
    result.arm = arm;
    auto run = run_rounds(std::move(nodes), staged.test, fed, audit);
    result.final_accuracy = accuracy(run.global, staged.test);
    result.history = std::move(run.history);
    for (auto id : resolved_malicious_nodes(cfg)) {
        std::optional<std::size_t> evicted_round;
        for (const auto& rec : result.history) {
            for (const auto& entry : rec.nodes) {
                if (entry.node_id == id && entry.evicted) {
                    evicted_round = rec.round;
                    break;
                }
            }
            if (evicted_round) break;
        }
        result.evictions.emplace_back(id, evicted_round);
    }
    return result;
}

inline std::string eviction_cell(const ArmResult& arm) {
    std::string cell;
    for (std::size_t i = 0; i < arm.evictions.size(); ++i) {
        if (i) cell += ';';
        cell += std::to_string(arm.evictions[i].first) + ':';
        cell += arm.evictions[i].second ? std::to_string(*arm.evictions[i].second)
                                        : std::string("never");
    }
    return cell;
}

}  // namespace detail

inline void write_summary_csv(const std::string& path, const std::vector<ArmResult>& arms) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "arm,final_accuracy,evictions\n";
    for (const auto& arm : arms) {
        out << arm_name(arm.arm) << ',' << fmt_double(arm.final_accuracy) << ','
            << detail::eviction_cell(arm) << '\n';
    }
}

// --- accuracy plot ----------------------------------------------------

struct PlotSeries {
    std::string name;
    std::vector<std::pair<std::size_t, double>> points;  // (round, accuracy)
};

/// Self-contained SVG line chart: x = round, y = global test accuracy in
/// [0,1]. Data series are the only <polyline> elements; axes use <line>.
inline std::string render_accuracy_plot(const std::vector<PlotSeries>& series) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    const double x0 = 60, x1 = 560, y_top = 30, y_bottom = 390;
    std::size_t round_min = SIZE_MAX, round_max = 0;
    for (const auto& s : series) {
        for (const auto& [r, a] : s.points) {
            round_min = std::min(round_min, r);
            round_max = std::max(round_max, r);
        }
    }
    if (round_min == SIZE_MAX) {
        round_min = 1;
        round_max = 1;
    }
    const double span = std::max<double>(1.0, static_cast<double>(round_max - round_min));
    auto px = [&](std::size_t round) {
        return x0 + (x1 - x0) * (static_cast<double>(round - round_min)) / span;
    };
    auto py = [&](double acc) { return y_bottom - acc * (y_bottom - y_top); };
    auto coord = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"440\" "
           "viewBox=\"0 0 720 440\">\n";
    svg << "<rect width=\"720\" height=\"440\" fill=\"white\"/>\n";
    svg << "<text x=\"60\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
           "global test accuracy by round</text>\n";
    svg << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(y_bottom) << "\" x2=\"" << coord(x1)
        << "\" y2=\"" << coord(y_bottom) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << coord(x0) << "\" y1=\"" << coord(y_top) << "\" x2=\"" << coord(x0)
        << "\" y2=\"" << coord(y_bottom) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double a = 0.25 * i;
        svg << "<line x1=\"" << coord(x0 - 4) << "\" y1=\"" << coord(py(a)) << "\" x2=\""
            << coord(x0) << "\" y2=\"" << coord(py(a)) << "\" stroke=\"black\"/>\n";
        char label[16];
        std::snprintf(label, sizeof(label), "%.2f", a);
        svg << "<text x=\"" << coord(x0 - 8) << "\" y=\"" << coord(py(a) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << label
            << "</text>\n";
    }
    const std::size_t x_step = std::max<std::size_t>(1, (round_max - round_min + 4) / 5);
    for (std::size_t r = round_min; r <= round_max; r += x_step) {
        svg << "<line x1=\"" << coord(px(r)) << "\" y1=\"" << coord(y_bottom) << "\" x2=\""
            << coord(px(r)) << "\" y2=\"" << coord(y_bottom + 4) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << coord(px(r)) << "\" y=\"" << coord(y_bottom + 18)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << r
            << "</text>\n";
    }
    svg << "<text x=\"" << coord((x0 + x1) / 2) << "\" y=\"" << coord(y_bottom + 36)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">round</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].points.size(); ++i) {
            if (i) svg << ' ';
            svg << coord(px(series[s].points[i].first)) << ','
                << coord(py(series[s].points[i].second));
        }
        svg << "\"/>\n";
        const double ly = y_top + 18.0 * static_cast<double>(s);
        svg << "<rect x=\"575\" y=\"" << coord(ly) << "\" width=\"12\" height=\"12\" fill=\""
            << color << "\"/>\n";
        svg << "<text x=\"592\" y=\"" << coord(ly + 10)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].name << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

/// Reads (round, global_accuracy) out of a round-telemetry CSV; duplicate
/// node rows per round collapse to the first.
inline PlotSeries read_accuracy_series(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty telemetry file");
    const auto header = split(lines[0], ',');
    std::size_t round_col = SIZE_MAX, acc_col = SIZE_MAX;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == "round") round_col = i;
        if (trim(header[i]) == "global_accuracy") acc_col = i;
    }
    if (round_col == SIZE_MAX || acc_col == SIZE_MAX)
        throw std::runtime_error(path + ": telemetry needs 'round' and 'global_accuracy' columns");

    PlotSeries series;
    std::string name = std::filesystem::path(path).stem().string();
    if (name.rfind("telemetry_", 0) == 0) name = name.substr(10);
    series.name = name;
    std::set<std::size_t> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != header.size())
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": malformed telemetry row");
        const auto round = parse_u64_strict(trim(cells[round_col]));
        const auto acc = parse_double_strict(trim(cells[acc_col]));
        if (!round || !acc)
            throw std::runtime_error(path + " line " + std::to_string(i + 1) +
                                     ": malformed telemetry row");
        if (seen.insert(static_cast<std::size_t>(*round)).second)
            series.points.emplace_back(static_cast<std::size_t>(*round), *acc);
    }
    std::sort(series.points.begin(), series.points.end());
    return series;
}

inline void emit_plot(const std::vector<std::string>& telemetry_paths,
                      const std::string& out_path) {
    if (telemetry_paths.empty()) throw std::invalid_argument("emit_plot: no telemetry files");
    std::vector<PlotSeries> series;
    series.reserve(telemetry_paths.size());
    for (const auto& p : telemetry_paths) series.push_back(read_accuracy_series(p));
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + out_path);
    out << render_accuracy_plot(series);
}

// --- full run ------------------------------------------------------------

/// Runs every configured arm off one shared staging pass and writes, into a
/// fresh output directory: telemetry_<arm>.csv per arm, audit_<arm>.log per
/// defense arm, poison_manifest.csv when a poisoned arm ran, summary.csv,
/// accuracy.svg and config_resolved.txt. Identical configs produce
/// byte-identical outputs.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    validate(cfg);
    const fs::path out(cfg.out_dir);
    if (fs::exists(out)) {
        if (!fs::is_directory(out))
            throw std::runtime_error("output path exists and is not a directory: " + cfg.out_dir);
        if (!fs::is_empty(out))
            throw std::runtime_error("output directory not empty: " + cfg.out_dir);
    } else {
        fs::create_directories(out);
    }

    const auto staged = stage_experiment(cfg);
    if (staged.poison_built)
        write_poison_manifest((out / "poison_manifest.csv").string(), staged.poison);

    ExperimentResult result;
    result.out_dir = out;
    std::vector<PlotSeries> series;
    for (Arm arm : kAllArms) {
        if (std::find(cfg.arms.begin(), cfg.arms.end(), arm) == cfg.arms.end()) continue;
        std::ofstream audit;
        std::ostream* sink = nullptr;
        if (arm_defended(arm)) {
            audit.open(out / (std::string("audit_") + arm_name(arm) + ".log"), std::ios::binary);
            if (!audit) throw std::runtime_error("cannot write audit log");
            sink = &audit;
        }
        ArmResult armres;
        try {
            armres = detail::run_arm(cfg, staged, arm, sink);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("arm ") + arm_name(arm) + ": " + e.what());
        }
        write_telemetry_csv((out / (std::string("telemetry_") + arm_name(arm) + ".csv")).string(),
                            armres.history);
        PlotSeries s;
        s.name = arm_name(arm);
        for (const auto& rec : armres.history) s.points.emplace_back(rec.round, rec.global_accuracy);
        series.push_back(std::move(s));
        result.arms.push_back(std::move(armres));
    }
    write_summary_csv((out / "summary.csv").string(), result.arms);
    {
        std::ofstream plot(out / "accuracy.svg", std::ios::binary);
        if (!plot) throw std::runtime_error("cannot write plot file");
        plot << render_accuracy_plot(series);
    }
    {
        std::ofstream conf(out / "config_resolved.txt", std::ios::binary);
        if (!conf) throw std::runtime_error("cannot write resolved config");
        conf << render_config(cfg);
    }
    return result;
}

}  // namespace fedshield
