#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedshield/dataset.hpp"
#include "fedshield/model.hpp"
#include "fedshield/rng.hpp"

namespace fedshield {

/// Per-feature accuracy drop under column permutation.
struct ImportanceReport {
    std::vector<double> importance;  // length dim
    double baseline_accuracy = 0.0;
    std::size_t repeats = 0;
    std::uint64_t seed = 0;
};

/// importance[j] = mean over repeats of (baseline accuracy - accuracy with
/// column j permuted). The permutation stream is keyed by (seed, column,
/// repeat), so results do not depend on evaluation order. A constant or
/// model-ignored column scores exactly 0.
inline ImportanceReport permutation_importance(const LinearModel& model, const Dataset& data,
                                               std::size_t repeats, std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("permutation_importance: empty dataset");
    if (repeats < 1) throw std::invalid_argument("permutation_importance: repeats must be >= 1");
    detail::check_dims(model, data.dim);

    ImportanceReport report;
    report.repeats = repeats;
    report.seed = seed;
    report.baseline_accuracy = accuracy(model, data);
    report.importance.assign(data.dim, 0.0);

    Dataset permuted = data;
    for (std::size_t j = 0; j < data.dim; ++j) {
        double drop_total = 0.0;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            Rng rng(derive_seed(seed, j, rep));
            const auto perm = rng.permutation(data.size());
            for (std::size_t i = 0; i < data.size(); ++i)
                permuted.samples[i].features[j] = data.samples[perm[i]].features[j];
            drop_total += report.baseline_accuracy - accuracy(model, permuted);
        }
        for (std::size_t i = 0; i < data.size(); ++i)  // restore column j
            permuted.samples[i].features[j] = data.samples[i].features[j];
        report.importance[j] = drop_total / static_cast<double>(repeats);
    }
    return report;
}

/// Most and least important features as 1-based indices.
struct ExtremeFeatures {
    int most_important = 0;
    int least_important = 0;
};

/// Argmax/argmin of the importance vector, lowest index on ties. The two
/// coincide only when every importance is equal.
inline ExtremeFeatures extreme_features(const ImportanceReport& report) {
    if (report.importance.empty())
        throw std::invalid_argument("extreme_features: empty importance vector");
    std::size_t hi = 0;
    std::size_t lo = 0;
    for (std::size_t j = 1; j < report.importance.size(); ++j) {
        if (report.importance[j] > report.importance[hi]) hi = j;
        if (report.importance[j] < report.importance[lo]) lo = j;
    }
    return ExtremeFeatures{static_cast<int>(hi + 1), static_cast<int>(lo + 1)};
}

/// CSV export: `# baseline=<v>` comment, then feature,importance rows.
inline void save_importance_csv(const std::string& path, const ImportanceReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "# baseline=" << fmt_double(report.baseline_accuracy) << '\n';
    out << "feature,importance\n";
    for (std::size_t j = 0; j < report.importance.size(); ++j)
        out << (j + 1) << ',' << fmt_double(report.importance[j]) << '\n';
}

}  // namespace fedshield
