#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedshield/dataset.hpp"
#include "fedshield/util.hpp"

namespace fedshield {

/// C-class linear classifier: logits = W x + b, probabilities via softmax.
struct LinearModel {
    std::size_t dim = 0;
    int num_classes = 0;
    std::vector<double> weights;  // num_classes x dim, row-major
    std::vector<double> bias;     // num_classes

    static LinearModel zeros(std::size_t dim, int num_classes) {
        LinearModel m;
        m.dim = dim;
        m.num_classes = num_classes;
        m.weights.assign(static_cast<std::size_t>(num_classes) * dim, 0.0);
        m.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
        return m;
    }

    double weight(int c, std::size_t j) const { return weights[static_cast<std::size_t>(c) * dim + j]; }
    double& weight(int c, std::size_t j) { return weights[static_cast<std::size_t>(c) * dim + j]; }

    bool operator==(const LinearModel&) const = default;
};

struct Prediction {
    int label = 0;                       // 1-based; ties go to the lowest class
    std::vector<double> probabilities;   // sums to 1
};

namespace detail {

inline void check_dims(const LinearModel& m, std::size_t x_dim) {
    if (m.dim != x_dim) {
        throw std::invalid_argument("model/input dimension mismatch: model d=" +
                                    std::to_string(m.dim) + ", x d=" + std::to_string(x_dim));
    }
}

inline std::vector<double> logits(const LinearModel& m, const std::vector<double>& x) {
    std::vector<double> z(static_cast<std::size_t>(m.num_classes), 0.0);
    for (int c = 0; c < m.num_classes; ++c) {
        double acc = m.bias[static_cast<std::size_t>(c)];
        const double* row = m.weights.data() + static_cast<std::size_t>(c) * m.dim;
        for (std::size_t j = 0; j < m.dim; ++j) acc += row[j] * x[j];
        z[static_cast<std::size_t>(c)] = acc;
    }
    return z;
}

inline std::vector<double> softmax(std::vector<double> z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        total += v;
    }
    for (auto& v : z) v /= total;
    return z;
}

}  // namespace detail

inline Prediction predict(const LinearModel& m, const std::vector<double>& x) {
    detail::check_dims(m, x.size());
    auto z = detail::logits(m, x);
    int best = 0;
    for (int c = 1; c < m.num_classes; ++c)
        if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(best)]) best = c;
    return Prediction{best + 1, detail::softmax(std::move(z))};
}

// Probabilities are floored at 1e-12 inside the loss so it stays finite even
// for wildly confident wrong models.
inline constexpr double kProbFloor = 1e-12;

/// Mean cross-entropy of the true labels.
inline double mean_loss(const LinearModel& m, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("mean_loss: empty dataset");
    detail::check_dims(m, data.dim);
    double total = 0.0;
    for (const auto& s : data.samples) {
        const auto p = detail::softmax(detail::logits(m, s.features));
        total += -std::log(std::max(p[static_cast<std::size_t>(s.label - 1)], kProbFloor));
    }
    return total / static_cast<double>(data.size());
}

inline double accuracy(const LinearModel& m, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
    detail::check_dims(m, data.dim);
    std::size_t hits = 0;
    for (const auto& s : data.samples)
        if (predict(m, s.features).label == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Full-batch training step parameters. reg_weight is the L2 coefficient on
/// the weight matrix; the bias is not regularized.
struct TrainConfig {
    double learning_rate = 0.03;
    double reg_weight = 0.01;
    std::size_t local_steps = 1;
};

inline void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (cfg.reg_weight < 0.0) throw std::invalid_argument("TrainConfig: reg_weight must be >= 0");
    if (cfg.local_steps < 1) throw std::invalid_argument("TrainConfig: local_steps must be >= 1");
}

struct ModelGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Gradient of the summed (not mean) cross-entropy over the dataset.
inline ModelGradient loss_gradient(const LinearModel& m, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("loss_gradient: empty dataset");
    ModelGradient g{std::vector<double>(m.weights.size(), 0.0),
                    std::vector<double>(m.bias.size(), 0.0)};
    for (const auto& s : data.samples) {
        detail::check_dims(m, s.features.size());
        auto p = detail::softmax(detail::logits(m, s.features));
        p[static_cast<std::size_t>(s.label - 1)] -= 1.0;  // dL/dlogits
        for (int c = 0; c < m.num_classes; ++c) {
            const double gc = p[static_cast<std::size_t>(c)];
            double* row = g.weights.data() + static_cast<std::size_t>(c) * m.dim;
            for (std::size_t j = 0; j < m.dim; ++j) row[j] += gc * s.features[j];
            g.bias[static_cast<std::size_t>(c)] += gc;
        }
    }
    return g;
}

/// One full-batch step:
///   W' = W - (lr/n) * (reg_weight * W + sum_i dF_i/dW),  b' = b - (lr/n) * sum_i dF_i/db.
/// Value in, value out; the input model is untouched.
inline LinearModel sgd_step(const LinearModel& m, const Dataset& data, const TrainConfig& cfg) {
    validate(cfg);
    if (data.empty()) throw std::invalid_argument("sgd_step: empty dataset");
    const auto g = loss_gradient(m, data);
    const double scale = cfg.learning_rate / static_cast<double>(data.size());
    LinearModel out = m;
    for (std::size_t i = 0; i < out.weights.size(); ++i)
        out.weights[i] -= scale * (cfg.reg_weight * m.weights[i] + g.weights[i]);
    for (std::size_t i = 0; i < out.bias.size(); ++i) out.bias[i] -= scale * g.bias[i];
    return out;
}

/// Convenience trainer: `steps` full-batch steps from the zero model.
inline LinearModel train_linear(const Dataset& data, const TrainConfig& cfg, std::size_t steps) {
    LinearModel m = LinearModel::zeros(data.dim, data.num_classes);
    for (std::size_t t = 0; t < steps; ++t) m = sgd_step(m, data, cfg);
    return m;
}

// --- binary hinge-loss SVM ---------------------------------------------

/// Linear separator w.x + b for a +1/-1 problem.
struct SvmSeparator {
    std::vector<double> w;
    double b = 0.0;
};

struct SvmConfig {
    std::size_t epochs = 300;
    double learning_rate = 0.2;
    double reg_lambda = 0.01;
    double support_tol = 1e-3;
};

/// Feature vectors with +1/-1 labels, the input shape for the hinge trainer.
struct BinaryProblem {
    std::vector<std::vector<double>> points;
    std::vector<int> labels;  // each +1 or -1

    std::size_t size() const { return points.size(); }
};

/// Relabels `positive_class` as +1 and everything else as -1.
inline BinaryProblem one_vs_rest(const Dataset& data, int positive_class) {
    BinaryProblem p;
    p.points.reserve(data.size());
    p.labels.reserve(data.size());
    for (const auto& s : data.samples) {
        p.points.push_back(s.features);
        p.labels.push_back(s.label == positive_class ? 1 : -1);
    }
    return p;
}

inline double functional_margin(const SvmSeparator& sep, const std::vector<double>& x, int y) {
    double v = sep.b;
    for (std::size_t j = 0; j < sep.w.size(); ++j) v += sep.w[j] * x[j];
    return y * v;
}

/// (lambda/2)||w||^2 + mean hinge loss.
inline double hinge_objective(const SvmSeparator& sep, const BinaryProblem& p, double reg_lambda) {
    double loss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        loss += std::max(0.0, 1.0 - functional_margin(sep, p.points[i], p.labels[i]));
    loss /= static_cast<double>(p.size());
    double wnorm2 = 0.0;
    for (double v : sep.w) wnorm2 += v * v;
    return 0.5 * reg_lambda * wnorm2 + loss;
}

struct SvmGradient {
    std::vector<double> w;
    double b = 0.0;
};

/// Subgradient of hinge_objective; points with margin exactly 1 contribute 0.
inline SvmGradient hinge_subgradient(const SvmSeparator& sep, const BinaryProblem& p,
                                     double reg_lambda) {
    SvmGradient g{std::vector<double>(sep.w.size(), 0.0), 0.0};
    const double inv_n = 1.0 / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (functional_margin(sep, p.points[i], p.labels[i]) < 1.0) {
            const double yi = p.labels[i];
            for (std::size_t j = 0; j < g.w.size(); ++j) g.w[j] -= inv_n * yi * p.points[i][j];
            g.b -= inv_n * yi;
        }
    }
    for (std::size_t j = 0; j < g.w.size(); ++j) g.w[j] += reg_lambda * sep.w[j];
    return g;
}

/// Full-batch subgradient descent from the zero separator, returning the
/// best iterate seen. The zero separator is iterate 0, so the result never
/// scores worse than it.
inline SvmSeparator train_binary_svm(const BinaryProblem& p, const SvmConfig& cfg) {
    if (p.size() == 0) throw std::invalid_argument("train_binary_svm: empty problem");
    const bool has_pos = std::find(p.labels.begin(), p.labels.end(), 1) != p.labels.end();
    const bool has_neg = std::find(p.labels.begin(), p.labels.end(), -1) != p.labels.end();
    if (!has_pos || !has_neg) throw std::invalid_argument("train_binary_svm: single-class input");

    SvmSeparator cur{std::vector<double>(p.points[0].size(), 0.0), 0.0};
    SvmSeparator best = cur;
    double best_obj = hinge_objective(cur, p, cfg.reg_lambda);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto g = hinge_subgradient(cur, p, cfg.reg_lambda);
        for (std::size_t j = 0; j < cur.w.size(); ++j) cur.w[j] -= cfg.learning_rate * g.w[j];
        cur.b -= cfg.learning_rate * g.b;
        const double obj = hinge_objective(cur, p, cfg.reg_lambda);
        if (obj < best_obj) {
            best_obj = obj;
            best = cur;
        }
    }
    return best;
}

/// Indices of on-or-inside-margin points: y_i (w.x_i + b) <= 1 + tol.
/// Never empty on non-empty data; if the margin test selects nothing, the
/// single point closest to the hyperplane (smallest |w.x + b|, lowest index
/// on ties) is returned so iterative peeling always makes progress.
inline std::vector<std::size_t> support_indices(const SvmSeparator& sep, const BinaryProblem& p,
                                                double tol) {
    if (tol < 0.0) throw std::invalid_argument("support_indices: tol must be >= 0");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (functional_margin(sep, p.points[i], p.labels[i]) <= 1.0 + tol) out.push_back(i);
    if (out.empty() && p.size() > 0) {
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double dist = std::abs(functional_margin(sep, p.points[i], 1));  // |w.x + b|
            if (dist < best) {
                best = dist;
                arg = i;
            }
        }
        out.push_back(arg);
    }
    return out;
}

// --- serialization -------------------------------------------------------
//
// Text format: one line "dims C d", then C lines of d weights, then one line
// of C biases. 17 significant digits, so round trips are value-exact.

inline std::string serialize_model(const LinearModel& m) {
    std::ostringstream out;
    out << "dims " << m.num_classes << ' ' << m.dim << '\n';
    for (int c = 0; c < m.num_classes; ++c) {
        for (std::size_t j = 0; j < m.dim; ++j) {
            if (j) out << ' ';
            out << fmt_double(m.weight(c, j));
        }
        out << '\n';
    }
    for (int c = 0; c < m.num_classes; ++c) {
        if (c) out << ' ';
        out << fmt_double(m.bias[static_cast<std::size_t>(c)]);
    }
    out << '\n';
    return out.str();
}

inline LinearModel parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string tag;
    int num_classes = 0;
    long long dim = 0;
    if (!(in >> tag >> num_classes >> dim) || tag != "dims" || num_classes < 1 || dim < 1)
        throw std::runtime_error("model parse: bad 'dims C d' line");
    LinearModel m = LinearModel::zeros(static_cast<std::size_t>(dim), num_classes);
    for (auto& v : m.weights)
        if (!(in >> v)) throw std::runtime_error("model parse: truncated weight matrix");
    for (auto& v : m.bias)
        if (!(in >> v)) throw std::runtime_error("model parse: truncated bias line");
    return m;
}

inline void save_model(const std::string& path, const LinearModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << serialize_model(m);
}

inline LinearModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace fedshield
