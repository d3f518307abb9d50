#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedshield/rng.hpp"
#include "fedshield/util.hpp"

namespace fedshield {

/// One labeled feature vector. Labels are 1-based class ids in {1..C}.
struct Sample {
    std::vector<double> features;
    int label = 0;

    bool operator==(const Sample&) const = default;
};

/// Ordered collection of samples sharing a feature count and label alphabet.
/// Sample order is stable and meaningful: indices act as identities.
struct Dataset {
    std::vector<Sample> samples;
    std::size_t dim = 0;
    int num_classes = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    bool operator==(const Dataset&) const = default;
};

/// Parameters for the Gaussian-blob generator. Class c is centered at
/// class_separation along the ((c-1) mod dim)-th axis.
struct SyntheticSpec {
    std::size_t n_per_class = 25;
    std::size_t dim = 4;
    int num_classes = 4;
    double class_separation = 3.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
};

inline void validate(const SyntheticSpec& spec) {
    if (spec.n_per_class < 1) throw std::invalid_argument("SyntheticSpec: n_per_class must be >= 1");
    if (spec.dim < 2) throw std::invalid_argument("SyntheticSpec: dim must be >= 2");
    if (spec.num_classes < 2) throw std::invalid_argument("SyntheticSpec: num_classes must be >= 2");
    if (!(spec.class_separation > 0.0))
        throw std::invalid_argument("SyntheticSpec: class_separation must be > 0");
    if (!(spec.noise_sigma > 0.0)) throw std::invalid_argument("SyntheticSpec: noise_sigma must be > 0");
}

/// Draws num_classes * n_per_class samples, class-major, fully determined by
/// spec.seed.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    Dataset out;
    out.dim = spec.dim;
    out.num_classes = spec.num_classes;
    out.samples.reserve(spec.n_per_class * static_cast<std::size_t>(spec.num_classes));
    Rng rng(spec.seed);
    for (int c = 1; c <= spec.num_classes; ++c) {
        const std::size_t axis = static_cast<std::size_t>(c - 1) % spec.dim;
        for (std::size_t i = 0; i < spec.n_per_class; ++i) {
            Sample s;
            s.label = c;
            s.features.resize(spec.dim);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                const double mean = (j == axis) ? spec.class_separation : 0.0;
                s.features[j] = rng.normal(mean, spec.noise_sigma);
            }
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

namespace detail {

inline std::string strip_eol(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

/// Parses one CSV data row of `dim` features followed by extra integer
/// columns (label and, optionally, a risk rank). `line_no` is the 1-based
/// file line, header included.
inline void parse_feature_row(const std::string& line, std::size_t line_no, std::size_t dim,
                              std::size_t extra_cols, std::vector<double>& features,
                              std::vector<long long>& extras) {
    const auto cells = split(line, ',');
    const std::size_t expected = dim + extra_cols;
    if (cells.size() != expected) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(expected) + " fields, got " +
                                 std::to_string(cells.size()));
    }
    features.clear();
    features.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const auto v = parse_double_strict(trim(cells[j]));
        if (!v) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": field " +
                                     std::to_string(j + 1) + " is not a finite number: '" +
                                     trim(cells[j]) + "'");
        }
        features.push_back(*v);
    }
    extras.clear();
    for (std::size_t j = dim; j < expected; ++j) {
        const auto v = parse_int_strict(trim(cells[j]));
        if (!v) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": field " +
                                     std::to_string(j + 1) + " is not an integer: '" +
                                     trim(cells[j]) + "'");
        }
        extras.push_back(*v);
    }
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(strip_eol(line));
    return lines;
}

/// Validates a dataset-style header and returns the feature count. The last
/// `trailing` names must match exactly; feature column names are free-form so
/// user-exported tables load as-is.
inline std::size_t header_dim(const std::string& header, const std::vector<std::string>& trailing,
                              const std::string& path) {
    auto cells = split(header, ',');
    if (!cells.empty() && cells[0].size() >= 3 && cells[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        cells[0] = cells[0].substr(3);  // UTF-8 BOM
    if (cells.size() < trailing.size() + 1)
        throw std::runtime_error(path + ": header must name at least one feature column");
    for (std::size_t i = 0; i < trailing.size(); ++i) {
        const auto got = trim(cells[cells.size() - trailing.size() + i]);
        if (got != trailing[i])
            throw std::runtime_error(path + ": header column '" + got + "' should be '" +
                                     trailing[i] + "'");
    }
    return cells.size() - trailing.size();
}

}  // namespace detail

/// Loads the `f1,...,fd,label` schema. Feature count comes from the header,
/// class count from the largest label seen.
inline Dataset load_csv(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty() || (lines.size() == 1 && trim(lines[0]).empty()))
        throw std::runtime_error(path + ": empty file");
    const std::size_t dim = detail::header_dim(lines[0], {"label"}, path);
    Dataset out;
    out.dim = dim;
    std::vector<double> features;
    std::vector<long long> extras;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty() && i + 1 == lines.size()) break;  // trailing newline
        detail::parse_feature_row(lines[i], i + 1, dim, 1, features, extras);
        const long long label = extras[0];
        if (label < 1) {
            throw std::runtime_error("csv line " + std::to_string(i + 1) + ": invalid label " +
                                     std::to_string(label) + " (labels are 1-based)");
        }
        out.num_classes = std::max(out.num_classes, static_cast<int>(label));
        out.samples.push_back(Sample{features, static_cast<int>(label)});
    }
    if (out.samples.empty()) throw std::runtime_error(path + ": no data rows");
    return out;
}

inline void save_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (std::size_t j = 0; j < data.dim; ++j) out << 'f' << (j + 1) << ',';
    out << "label\n";
    for (const auto& s : data.samples) {
        for (std::size_t j = 0; j < data.dim; ++j) out << fmt_double(s.features[j]) << ',';
        out << s.label << '\n';
    }
}

/// Per-class stratified split into (train, test). Within each class the
/// membership is shuffled; each output keeps samples in original order.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                                    std::uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("train_test_split: empty dataset");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("train_test_split: test_fraction must be in (0,1)");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.samples[i].label].push_back(i);

    Rng rng(seed);
    std::vector<bool> in_test(data.size(), false);
    std::size_t test_total = 0;
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        const auto want = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < want && i < idx.size(); ++i) in_test[idx[i]] = true;
        test_total += std::min(want, idx.size());
    }
    if (test_total == 0 || test_total == data.size())
        throw std::invalid_argument("train_test_split: test_fraction produces an empty side");

    Dataset train{ {}, data.dim, data.num_classes};
    Dataset test{ {}, data.dim, data.num_classes};
    for (std::size_t i = 0; i < data.size(); ++i)
        (in_test[i] ? test : train).samples.push_back(data.samples[i]);
    return {std::move(train), std::move(test)};
}

enum class PartitionScheme { Iid, LabelSkewed };

inline const char* to_string(PartitionScheme s) {
    return s == PartitionScheme::Iid ? "iid" : "label-skewed";
}

/// Splits a dataset across num_nodes federation nodes. `Iid` deals a global
/// shuffle round-robin; `LabelSkewed` draws, per class, node shares from a
/// symmetric Dirichlet with concentration beta (smaller beta = more skew).
/// Every node ends up non-empty and the node datasets partition the input.
inline std::vector<Dataset> partition(const Dataset& data, std::size_t num_nodes,
                                      PartitionScheme scheme, double beta, std::uint64_t seed) {
    if (num_nodes < 1) throw std::invalid_argument("partition: need at least one node");
    if (data.size() < num_nodes)
        throw std::invalid_argument("partition: more nodes than samples (" +
                                    std::to_string(num_nodes) + " > " +
                                    std::to_string(data.size()) + ")");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> assigned(num_nodes);

    if (scheme == PartitionScheme::Iid) {
        const auto perm = rng.permutation(data.size());
        for (std::size_t i = 0; i < perm.size(); ++i) assigned[i % num_nodes].push_back(perm[i]);
    } else {
        if (!(beta > 0.0)) throw std::invalid_argument("partition: beta must be > 0");
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < data.size(); ++i) by_class[data.samples[i].label].push_back(i);
        for (auto& [label, idx] : by_class) {
            rng.shuffle(idx);
            const auto shares = rng.dirichlet(num_nodes, beta);
            // Largest-remainder rounding so class counts add up exactly.
            std::vector<std::size_t> counts(num_nodes);
            std::vector<std::pair<double, std::size_t>> rema(num_nodes);
            std::size_t used = 0;
            for (std::size_t k = 0; k < num_nodes; ++k) {
                const double exact = shares[k] * static_cast<double>(idx.size());
                counts[k] = static_cast<std::size_t>(std::floor(exact));
                used += counts[k];
                rema[k] = {exact - std::floor(exact), k};
            }
            std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t r = 0; used < idx.size(); ++r, ++used) counts[rema[r].second]++;
            std::size_t pos = 0;
            for (std::size_t k = 0; k < num_nodes; ++k)
                for (std::size_t i = 0; i < counts[k]; ++i) assigned[k].push_back(idx[pos++]);
        }
        // Skewed draws can starve a node; move singles from the largest node.
        for (std::size_t k = 0; k < num_nodes; ++k) {
            while (assigned[k].empty()) {
                std::size_t donor = 0;
                for (std::size_t m = 1; m < num_nodes; ++m)
                    if (assigned[m].size() > assigned[donor].size()) donor = m;
                if (assigned[donor].size() <= 1)
                    throw std::runtime_error("partition: cannot make every node non-empty");
                assigned[k].push_back(assigned[donor].back());
                assigned[donor].pop_back();
            }
        }
    }

    std::vector<Dataset> nodes;
    nodes.reserve(num_nodes);
    for (std::size_t k = 0; k < num_nodes; ++k) {
        Dataset node{ {}, data.dim, data.num_classes};
        node.samples.reserve(assigned[k].size());
        for (auto i : assigned[k]) node.samples.push_back(data.samples[i]);
        nodes.push_back(std::move(node));
    }
    return nodes;
}

}  // namespace fedshield
