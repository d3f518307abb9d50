#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedshield/risk.hpp"
#include "fedshield/xai.hpp"

namespace fedshield {

/// Attacker configuration for a K-node federation: which nodes are
/// compromised and how many samples each compromised node may corrupt.
/// Exactly one of budget_count / budget_fraction must be set; a fraction
/// resolves to ceil(fraction * node size).
struct AttackPlan {
    std::vector<bool> flags;                      // size K, true = compromised
    std::optional<std::size_t> budget_count;
    std::optional<double> budget_fraction;
    std::uint64_t explainer_seed = 0;
    std::size_t explainer_repeats = 5;
    TrainConfig reference_train;                  // attacker's local surrogate model
    std::size_t reference_steps = 150;
    RiskConfig risk;
};

inline void validate(const AttackPlan& plan) {
    if (plan.budget_count.has_value() == plan.budget_fraction.has_value())
        throw std::invalid_argument("AttackPlan: exactly one of budget_count/budget_fraction");
    if (plan.budget_fraction && !(*plan.budget_fraction >= 0.0 && *plan.budget_fraction <= 1.0))
        throw std::invalid_argument("AttackPlan: budget_fraction must be in [0,1]");
}

/// Resolved per-node budget, clamped to the node size. The small slack keeps
/// fraction*n from ceiling up when it is an integer up to rounding noise.
inline std::size_t resolve_budget(const AttackPlan& plan, std::size_t node_size) {
    validate(plan);
    std::size_t alpha;
    if (plan.budget_count) {
        alpha = *plan.budget_count;
    } else {
        alpha = static_cast<std::size_t>(
            std::ceil(*plan.budget_fraction * static_cast<double>(node_size) - 1e-9));
    }
    return std::min(alpha, node_size);
}

/// Cyclic label flip: y -> y+1, C -> 1. Never a fixed point, so every
/// attacked label actually changes.
inline int flip_label(int label, int num_classes) {
    if (num_classes < 1) throw std::invalid_argument("flip_label: num_classes must be >= 1");
    if (label < 1 || label > num_classes)
        throw std::invalid_argument("flip_label: label " + std::to_string(label) +
                                    " outside {1.." + std::to_string(num_classes) + "}");
    return (label % num_classes) + 1;
}

/// Exchanges two feature values (1-based indices). Self-swap is the identity.
inline std::vector<double> swap_features(std::vector<double> x, int f_a, int f_b) {
    const auto dim = static_cast<int>(x.size());
    if (f_a < 1 || f_a > dim || f_b < 1 || f_b > dim)
        throw std::invalid_argument("swap_features: feature index out of range");
    std::swap(x[static_cast<std::size_t>(f_a - 1)], x[static_cast<std::size_t>(f_b - 1)]);
    return x;
}

/// One attacked sample: where it sat in the node dataset and what changed.
struct PoisonRecord {
    std::size_t sample_index = 0;  // 0-based row within the node dataset
    int old_label = 0;
    int new_label = 0;
    int f_max = 0;  // 1-based feature pair that was exchanged
    int f_min = 0;
};

struct PoisonedNode {
    Dataset data;
    std::vector<PoisonRecord> records;
};

/// Corrupts one node. Unflagged nodes come back rank-stripped but otherwise
/// untouched. Flagged nodes have their `alpha` highest-risk samples (smallest
/// rank, then lowest index) label-flipped and feature-swapped between the
/// report's most and least important features. Sample order is preserved.
inline PoisonedNode poison_node(const RiskAnnotatedDataset& annotated, const AttackPlan& plan,
                                std::size_t node_index, const ImportanceReport& report) {
    if (node_index >= plan.flags.size())
        throw std::invalid_argument("poison_node: node_index outside the plan");
    if (report.importance.size() != annotated.data.dim)
        throw std::invalid_argument("poison_node: importance report dimension mismatch");

    PoisonedNode out{annotated.stripped(), {}};
    if (!plan.flags[node_index]) return out;

    const std::size_t alpha = resolve_budget(plan, annotated.size());
    if (alpha == 0) return out;

    std::vector<std::size_t> order(annotated.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (annotated.risk_rank[a] != annotated.risk_rank[b])
            return annotated.risk_rank[a] < annotated.risk_rank[b];
        return a < b;
    });
    order.resize(alpha);
    std::sort(order.begin(), order.end());

    const auto [f_max, f_min] = extreme_features(report);
    for (auto i : order) {
        Sample& s = out.data.samples[i];
        PoisonRecord rec;
        rec.sample_index = i;
        rec.old_label = s.label;
        s.label = flip_label(s.label, out.data.num_classes);
        s.features = swap_features(std::move(s.features), f_max, f_min);
        rec.new_label = s.label;
        rec.f_max = f_max;
        rec.f_min = f_min;
        out.records.push_back(rec);
    }
    return out;
}

struct FederationPoison {
    std::vector<Dataset> datasets;
    std::vector<std::vector<PoisonRecord>> records;  // per node
};

/// Applies poison_node independently to every node.
inline FederationPoison poison_federation(const std::vector<RiskAnnotatedDataset>& nodes,
                                          const AttackPlan& plan,
                                          const std::vector<ImportanceReport>& reports) {
    if (nodes.size() != plan.flags.size() || nodes.size() != reports.size())
        throw std::invalid_argument("poison_federation: nodes/plan/reports length mismatch");
    FederationPoison out;
    out.datasets.reserve(nodes.size());
    out.records.reserve(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        auto poisoned = poison_node(nodes[k], plan, k, reports[k]);
        out.datasets.push_back(std::move(poisoned.data));
        out.records.push_back(std::move(poisoned.records));
    }
    return out;
}

/// Ground-truth manifest for detector-side evaluation:
/// node,sample_index,old_label,new_label,f_max,f_min (nodes are 1-based).
inline void write_poison_manifest(const std::string& path, const FederationPoison& poison) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "node,sample_index,old_label,new_label,f_max,f_min\n";
    for (std::size_t k = 0; k < poison.records.size(); ++k) {
        for (const auto& rec : poison.records[k]) {
            out << (k + 1) << ',' << rec.sample_index << ',' << rec.old_label << ','
                << rec.new_label << ',' << rec.f_max << ',' << rec.f_min << '\n';
        }
    }
}

}  // namespace fedshield
