#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedshield/dataset.hpp"
#include "fedshield/model.hpp"

namespace fedshield {

/// One federation participant. `malicious` is the ground-truth attack flag,
/// carried for telemetry and reporting only; nothing on the aggregation or
/// reputation path reads it. `alive = false` is absorbing: an evicted node
/// never rejoins.
struct NodeState {
    std::size_t node_id = 0;  // 1-based
    Dataset data;
    LinearModel local_model;
    double reputation = 1.0;
    bool malicious = false;
    bool alive = true;
};

/// How sub-threshold contributions update reputation. `Literal` follows the
/// piecewise rule exactly as given, including its sign anomaly: a negative
/// contribution *raises* reputation (r - r*e/e_min with e <= 0), which the
/// clamp then caps at r_init. `Corrected` (default) decreases it instead,
/// proportionally to how negative the contribution is.
enum class ReputationRule { Corrected, Literal };

inline const char* to_string(ReputationRule r) {
    return r == ReputationRule::Corrected ? "corrected" : "literal";
}

struct FedConfig {
    std::size_t rounds = 30;
    TrainConfig train;
    double e_min = 0.025;
    double r_min = 0.2;
    double r_init = 1.0;
    ReputationRule reputation_rule = ReputationRule::Corrected;
    bool defense_enabled = true;
    std::uint64_t master_seed = 0;
};

inline void validate(const FedConfig& cfg) {
    validate(cfg.train);
    if (!(cfg.e_min > 0.0 && cfg.e_min <= 1.0))
        throw std::invalid_argument("FedConfig: e_min must be in (0,1]");
    if (cfg.r_min < 0.0) throw std::invalid_argument("FedConfig: r_min must be >= 0");
    if (!(cfg.r_init > 0.0)) throw std::invalid_argument("FedConfig: r_init must be > 0");
    if (!(cfg.r_min < cfg.r_init)) throw std::invalid_argument("FedConfig: r_min must be < r_init");
}

/// Telemetry for one node in one round.
struct NodeRoundEntry {
    std::size_t node_id = 0;
    double contribution = 0.0;
    double reputation = 0.0;  // after this round's update
    bool in_group = false;
    bool evicted = false;  // evicted in this round
};

/// Telemetry for one aggregation round. Only nodes alive at round start
/// appear; an evicted node shows up once with evicted=true and never again.
struct RoundRecord {
    std::size_t round = 0;  // 1-based
    std::vector<NodeRoundEntry> nodes;
    double global_accuracy = 0.0;
    double global_loss = 0.0;
    bool empty_group = false;  // defense round with no qualifying node; model carried over
};

/// Local model refresh: local_steps full-batch steps starting from the
/// broadcast global model on the node's own data.
inline LinearModel local_update(const LinearModel& global, const NodeState& node,
                                const TrainConfig& cfg) {
    if (!node.alive) throw std::invalid_argument("local_update: node is evicted");
    if (node.data.empty()) throw std::invalid_argument("local_update: node has no data");
    LinearModel m = global;
    for (std::size_t s = 0; s < cfg.local_steps; ++s) m = sgd_step(m, node.data, cfg);
    return m;
}

/// Relative local-loss improvement, (L_before - L_after) / L_before.
/// Positive when the update helped on the node's own data; at most 1.
inline double contribution_from_losses(double loss_before, double loss_after) {
    if (!(loss_before > 0.0))
        throw std::runtime_error("contribution: degenerate zero loss before update");
    return (loss_before - loss_after) / loss_before;
}

inline double contribution(const NodeState& node, const LinearModel& before,
                           const LinearModel& after) {
    if (before == after) return 0.0;
    return contribution_from_losses(mean_loss(before, node.data), mean_loss(after, node.data));
}

/// Reputation rule output before the [0, r_init] clamp. Exposed so audit
/// trails can record the raw value the clamp hides.
inline double raw_reputation_update(double r, double e, double e_min, ReputationRule rule) {
    if (r < 0.0) throw std::invalid_argument("reputation update: negative reputation");
    if (!(e_min > 0.0)) throw std::invalid_argument("reputation update: e_min must be > 0");
    if (e > e_min) return r;                          // group-qualified, untouched
    if (e > 0.0) return r * (e_min - e) / e_min;      // shared sub-threshold decay
    if (rule == ReputationRule::Literal) return r - r * e / e_min;
    return r * std::max(0.0, 1.0 + e / e_min);        // corrected: decrease with |e|
}

inline double update_reputation(double r, double e, double e_min, double r_init,
                                ReputationRule rule) {
    return std::clamp(raw_reputation_update(r, e, e_min, rule), 0.0, r_init);
}

struct GroupSelection {
    std::vector<std::size_t> group;    // node ids with e > e_min
    std::vector<std::size_t> evicted;  // node ids dropped this round
};

/// Splits contributions at e_min: qualifiers join the aggregation group with
/// reputation untouched, the rest get the reputation rule applied and are
/// evicted (alive=false, permanently) once reputation falls below r_min.
/// `contributions` is parallel to `nodes`; entries for dead nodes are
/// ignored. Audit lines go to `audit` when provided.
inline GroupSelection select_group(std::vector<NodeState>& nodes,
                                   const std::vector<double>& contributions, const FedConfig& cfg,
                                   std::size_t round, std::ostream* audit = nullptr) {
    if (contributions.size() != nodes.size())
        throw std::invalid_argument("select_group: contributions/nodes length mismatch");
    GroupSelection sel;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        NodeState& node = nodes[k];
        if (!node.alive) continue;
        const double e = contributions[k];
        if (e > cfg.e_min) {
            sel.group.push_back(node.node_id);
            continue;
        }
        const double r_old = node.reputation;
        const double r_raw = raw_reputation_update(r_old, e, cfg.e_min, cfg.reputation_rule);
        node.reputation = std::clamp(r_raw, 0.0, cfg.r_init);
        if (audit) {
            *audit << "t=" << round << " node=" << node.node_id << " e=" << fmt_double(e)
                   << " r_old=" << fmt_double(r_old) << " r_new=" << fmt_double(r_raw)
                   << " rule=" << to_string(cfg.reputation_rule) << '\n';
        }
        if (node.reputation < cfg.r_min) {
            node.alive = false;
            sel.evicted.push_back(node.node_id);
        }
    }
    return sel;
}

/// Reputation-weighted average: w = sum_k (r_k / sum r) * w_k.
inline LinearModel aggregate_reputation(const std::vector<const LinearModel*>& models,
                                        const std::vector<double>& reputations) {
    if (models.empty() || models.size() != reputations.size())
        throw std::invalid_argument("aggregate_reputation: empty group or length mismatch");
    double total = 0.0;
    for (double r : reputations) total += r;
    if (!(total > 0.0)) throw std::invalid_argument("aggregate_reputation: zero total reputation");
    LinearModel out = LinearModel::zeros(models[0]->dim, models[0]->num_classes);
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (models[k]->weights.size() != out.weights.size())
            throw std::invalid_argument("aggregate_reputation: model shape mismatch");
        const double mu = reputations[k] / total;
        for (std::size_t i = 0; i < out.weights.size(); ++i)
            out.weights[i] += mu * models[k]->weights[i];
        for (std::size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += mu * models[k]->bias[i];
    }
    return out;
}

/// Dataset-size-weighted average: w = sum_k (S_k / S) * w_k.
inline LinearModel aggregate_fedavg(const std::vector<const LinearModel*>& models,
                                    const std::vector<std::size_t>& sizes) {
    if (models.empty() || models.size() != sizes.size())
        throw std::invalid_argument("aggregate_fedavg: no models or length mismatch");
    std::size_t total = 0;
    for (auto s : sizes) total += s;
    if (total == 0) throw std::invalid_argument("aggregate_fedavg: zero total size");
    LinearModel out = LinearModel::zeros(models[0]->dim, models[0]->num_classes);
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (models[k]->weights.size() != out.weights.size())
            throw std::invalid_argument("aggregate_fedavg: model shape mismatch");
        const double mu = static_cast<double>(sizes[k]) / static_cast<double>(total);
        for (std::size_t i = 0; i < out.weights.size(); ++i)
            out.weights[i] += mu * models[k]->weights[i];
        for (std::size_t i = 0; i < out.bias.size(); ++i) out.bias[i] += mu * models[k]->bias[i];
    }
    return out;
}

/// Size-weighted mean of per-dataset mean losses; identical to the mean loss
/// over the pooled samples.
inline double global_loss(const LinearModel& model, const std::vector<const Dataset*>& datasets) {
    std::size_t total = 0;
    for (const auto* d : datasets) total += d->size();
    if (total == 0) throw std::invalid_argument("global_loss: no samples");
    double acc = 0.0;
    for (const auto* d : datasets) {
        if (d->empty()) continue;
        acc += (static_cast<double>(d->size()) / static_cast<double>(total)) * mean_loss(model, *d);
    }
    return acc;
}

/// Round-by-round federation simulator. One step() = local updates on every
/// alive node, contribution scoring, then either reputation-gated
/// aggregation (defense on) or plain size-weighted averaging (defense off),
/// and finally telemetry against the held-out test set. Fully deterministic:
/// local training is full-batch and nothing here draws random numbers.
class Federation {
public:
    Federation(std::vector<NodeState> nodes, Dataset test_set, FedConfig cfg)
        : nodes_(std::move(nodes)), test_(std::move(test_set)), cfg_(cfg) {
        validate(cfg_);
        if (nodes_.empty()) throw std::invalid_argument("Federation: need at least one node");
        if (test_.empty()) throw std::invalid_argument("Federation: empty test set");
        const auto& first = nodes_.front().data;
        for (const auto& node : nodes_) {
            if (node.data.dim != first.dim || node.data.num_classes != first.num_classes ||
                test_.dim != first.dim) {
                throw std::invalid_argument("Federation: node/test dataset shape mismatch");
            }
        }
        global_ = LinearModel::zeros(first.dim, first.num_classes);
    }

    /// Routes reputation-change audit lines to `out` (not owned).
    void set_audit_sink(std::ostream* out) { audit_ = out; }

    const LinearModel& global() const { return global_; }
    std::size_t rounds_run() const { return round_; }
    const std::vector<NodeState>& nodes() const { return nodes_; }
    std::vector<NodeState>& nodes() { return nodes_; }

    RoundRecord step() {
        ++round_;
        std::vector<std::size_t> active;
        for (std::size_t k = 0; k < nodes_.size(); ++k)
            if (nodes_[k].alive) active.push_back(k);
        if (active.empty())
            throw std::runtime_error("federation: no alive nodes at round " +
                                     std::to_string(round_));

        std::vector<LinearModel> updated(nodes_.size());
        std::vector<double> contrib(nodes_.size(), 0.0);
        for (auto k : active) {
            updated[k] = local_update(global_, nodes_[k], cfg_.train);
            contrib[k] = contribution(nodes_[k], global_, updated[k]);
        }

        RoundRecord rec;
        rec.round = round_;
        GroupSelection sel;
        if (cfg_.defense_enabled) {
            sel = select_group(nodes_, contrib, cfg_, round_, audit_);
            double group_reputation = 0.0;
            std::vector<const LinearModel*> models;
            std::vector<double> reputations;
            for (auto k : active) {
                if (std::find(sel.group.begin(), sel.group.end(), nodes_[k].node_id) ==
                    sel.group.end())
                    continue;
                models.push_back(&updated[k]);
                reputations.push_back(nodes_[k].reputation);
                group_reputation += nodes_[k].reputation;
            }
            if (models.empty() || !(group_reputation > 0.0)) {
                rec.empty_group = true;  // carry the previous global model
            } else {
                global_ = aggregate_reputation(models, reputations);
            }
        } else {
            std::vector<const LinearModel*> models;
            std::vector<std::size_t> sizes;
            for (auto k : active) {
                models.push_back(&updated[k]);
                sizes.push_back(nodes_[k].data.size());
            }
            global_ = aggregate_fedavg(models, sizes);
            for (auto k : active) sel.group.push_back(nodes_[k].node_id);
        }

        for (auto k : active) {
            nodes_[k].local_model = updated[k];
            NodeRoundEntry entry;
            entry.node_id = nodes_[k].node_id;
            entry.contribution = contrib[k];
            entry.reputation = nodes_[k].reputation;
            entry.in_group = std::find(sel.group.begin(), sel.group.end(), nodes_[k].node_id) !=
                             sel.group.end();
            entry.evicted = std::find(sel.evicted.begin(), sel.evicted.end(),
                                      nodes_[k].node_id) != sel.evicted.end();
            rec.nodes.push_back(entry);
        }

        rec.global_accuracy = accuracy(global_, test_);
        std::vector<const Dataset*> alive_data;
        for (const auto& node : nodes_)
            if (node.alive) alive_data.push_back(&node.data);
        rec.global_loss = alive_data.empty() ? 0.0 : global_loss(global_, alive_data);
        return rec;
    }

private:
    std::vector<NodeState> nodes_;
    Dataset test_;
    FedConfig cfg_;
    LinearModel global_;
    std::size_t round_ = 0;
    std::ostream* audit_ = nullptr;
};

struct FedResult {
    std::vector<RoundRecord> history;
    LinearModel global;
    std::vector<NodeState> nodes;  // final states, evicted ones included
};

inline FedResult run_rounds(std::vector<NodeState> nodes, const Dataset& test_set,
                            const FedConfig& cfg, std::ostream* audit = nullptr) {
    Federation fed(std::move(nodes), test_set, cfg);
    fed.set_audit_sink(audit);
    FedResult result;
    result.history.reserve(cfg.rounds);
    for (std::size_t t = 0; t < cfg.rounds; ++t) result.history.push_back(fed.step());
    result.global = fed.global();
    result.nodes = fed.nodes();
    return result;
}

/// Round telemetry CSV; global columns repeat on every node row.
inline void write_telemetry_csv(const std::string& path, const std::vector<RoundRecord>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "round,node,contribution,reputation,in_group,evicted,global_accuracy,global_loss\n";
    for (const auto& rec : history) {
        for (const auto& e : rec.nodes) {
            out << rec.round << ',' << e.node_id << ',' << fmt_double(e.contribution) << ','
                << fmt_double(e.reputation) << ',' << (e.in_group ? 1 : 0) << ','
                << (e.evicted ? 1 : 0) << ',' << fmt_double(rec.global_accuracy) << ','
                << fmt_double(rec.global_loss) << '\n';
        }
    }
}

}  // namespace fedshield
