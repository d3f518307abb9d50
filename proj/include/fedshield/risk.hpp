#pragma once

#include <cstddef>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedshield/dataset.hpp"
#include "fedshield/model.hpp"

namespace fedshield {

/// A dataset plus one risk rank per sample. Rank 1 is the highest risk
/// (peeled first); ranks always cover a contiguous 1..J. Stripping the ranks
/// recovers the input dataset exactly, order included.
struct RiskAnnotatedDataset {
    Dataset data;
    std::vector<int> risk_rank;  // parallel to data.samples

    const Dataset& stripped() const { return data; }
    std::size_t size() const { return data.size(); }
};

struct RiskConfig {
    SvmConfig svm;
    int max_levels = 0;  // 0 = unlimited; otherwise ranks >= max_levels collapse to max_levels
};

/// Iterative support-vector peeling. Each round trains one-vs-rest hinge
/// separators on the remaining pool, marks the union of their support sets
/// with the current rank, removes it, and repeats. A pool that is empty or
/// single-class ends the loop; leftover samples take the last (lowest-risk)
/// rank. Deterministic: the trainer is full-batch and uses no RNG.
inline RiskAnnotatedDataset assess_risk(const Dataset& data, const RiskConfig& cfg = {}) {
    if (data.empty()) throw std::invalid_argument("assess_risk: empty dataset");
    std::vector<int> ranks(data.size(), 0);
    std::vector<std::size_t> pool(data.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    int rank = 0;
    while (!pool.empty()) {
        ++rank;
        std::set<int> classes;
        for (auto i : pool) classes.insert(data.samples[i].label);
        if (classes.size() < 2) {
            for (auto i : pool) ranks[i] = rank;
            break;
        }
        BinaryProblem prob;
        prob.points.reserve(pool.size());
        prob.labels.resize(pool.size());
        for (auto i : pool) prob.points.push_back(data.samples[i].features);

        std::set<std::size_t> peel;  // positions within `pool`
        for (int cls : classes) {
            for (std::size_t i = 0; i < pool.size(); ++i)
                prob.labels[i] = data.samples[pool[i]].label == cls ? 1 : -1;
            const auto sep = train_binary_svm(prob, cfg.svm);
            for (auto i : support_indices(sep, prob, cfg.svm.support_tol)) peel.insert(i);
        }
        std::vector<std::size_t> rest;
        rest.reserve(pool.size() - peel.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (peel.count(i)) {
                ranks[pool[i]] = rank;
            } else {
                rest.push_back(pool[i]);
            }
        }
        pool = std::move(rest);
    }

    if (cfg.max_levels > 0) {
        for (auto& r : ranks)
            if (r > cfg.max_levels) r = cfg.max_levels;
    }
    return RiskAnnotatedDataset{data, std::move(ranks)};
}

/// CSV export: dataset schema plus a trailing risk_rank column.
inline void save_annotated_csv(const std::string& path, const RiskAnnotatedDataset& annotated) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (std::size_t j = 0; j < annotated.data.dim; ++j) out << 'f' << (j + 1) << ',';
    out << "label,risk_rank\n";
    for (std::size_t i = 0; i < annotated.size(); ++i) {
        const auto& s = annotated.data.samples[i];
        for (std::size_t j = 0; j < annotated.data.dim; ++j) out << fmt_double(s.features[j]) << ',';
        out << s.label << ',' << annotated.risk_rank[i] << '\n';
    }
}

inline RiskAnnotatedDataset load_annotated_csv(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty() || (lines.size() == 1 && trim(lines[0]).empty()))
        throw std::runtime_error(path + ": empty file");
    const std::size_t dim = detail::header_dim(lines[0], {"label", "risk_rank"}, path);
    RiskAnnotatedDataset out;
    out.data.dim = dim;
    std::vector<double> features;
    std::vector<long long> extras;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty() && i + 1 == lines.size()) break;
        detail::parse_feature_row(lines[i], i + 1, dim, 2, features, extras);
        if (extras[0] < 1)
            throw std::runtime_error("csv line " + std::to_string(i + 1) + ": invalid label " +
                                     std::to_string(extras[0]) + " (labels are 1-based)");
        if (extras[1] < 1)
            throw std::runtime_error("csv line " + std::to_string(i + 1) + ": invalid risk_rank " +
                                     std::to_string(extras[1]) + " (ranks start at 1)");
        out.data.num_classes = std::max(out.data.num_classes, static_cast<int>(extras[0]));
        out.data.samples.push_back(Sample{features, static_cast<int>(extras[0])});
        out.risk_rank.push_back(static_cast<int>(extras[1]));
    }
    if (out.data.samples.empty()) throw std::runtime_error(path + ": no data rows");
    return out;
}

}  // namespace fedshield
