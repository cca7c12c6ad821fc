#pragma once

// Exemplar SVMs, score calibration and the one-vs-all action classifier.

#include "trajlet/common.hpp"
#include "trajlet/hinge_solver.hpp"
#include "trajlet/trajectorylet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace trajlet {

/// Linear scoring function w^T x + b together with where it came from.
struct Detector {
    Vector weight;
    double bias = 0.0;
    int source_class = 0;
    std::string source_instance = "-";
    int source_frame = -1;
    bool normalized = false;
    /// Training diagnostics, not persisted.
    double objective = 0.0;
    bool converged = true;
};

struct EsvmParams {
    double lambda_pos = 10.0;
    double lambda_neg = 0.01;
    long max_iterations = 200000;
    /// Relative duality gap at which training stops.
    double convergence_tolerance = 1e-6;

    void validate() const {
        if (!(lambda_neg > 0.0 && lambda_pos > lambda_neg)) {
            throw invalid_argument("exemplar SVM weights must satisfy lambda_pos > lambda_neg > 0");
        }
        if (max_iterations < 1 || !(convergence_tolerance > 0.0)) {
            throw invalid_argument("exemplar SVM needs a positive iteration budget and tolerance");
        }
    }

    [[nodiscard]] solver::HingeOptions solver_options() const {
        solver::HingeOptions opts;
        opts.max_iterations = max_iterations;
        opts.tolerance = convergence_tolerance;
        return opts;
    }
};

inline double score(const Detector &det, const Eigen::Ref<const Vector> &x) {
    if (det.weight.size() != x.size()) {
        throw dimension_error("detector has dimension " + std::to_string(det.weight.size()) + ", input has " +
                              std::to_string(x.size()));
    }
    return det.weight.dot(x) + det.bias;
}

inline double score(const Detector &det, const Trajectorylet &x) { return score(det, x.values); }

/// Rescales (w, b) by 1/||w|| so the score is the signed distance to the hyperplane.
inline Detector unit_normalize(Detector det) {
    const double norm = det.weight.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw invalid_argument("cannot normalize a detector with a zero weight vector");
    }
    det.weight /= norm;
    det.bias /= norm;
    det.normalized = true;
    return det;
}

/// ||w||^2 + lambda_pos h(w^T x_E + b) + lambda_neg sum_N h(-w^T x - b), h(z) = max(0, 1 - z).
inline double esvm_objective(const Vector &w, double b, const Vector &exemplar, std::span<const Vector> negatives,
                             const EsvmParams &params) {
    double obj = w.squaredNorm() + params.lambda_pos * std::max(0.0, 1.0 - (w.dot(exemplar) + b));
    for (const auto &x : negatives) {
        obj += params.lambda_neg * std::max(0.0, 1.0 + w.dot(x) + b);
    }
    return obj;
}

/// Kernel for one exemplar against a subset of pool rows. Uses the pool's Gram
/// matrix when one is supplied, so each column costs O(#negatives).
class ExemplarKernel {
  public:
    ExemplarKernel(const Vector &exemplar, const RowMatrix &pool_rows, std::span<const Eigen::Index> negatives,
                   const Matrix *pool_gram = nullptr)
        : rows_(pool_rows), negatives_(negatives.begin(), negatives.end()), gram_(pool_gram) {
        const auto m = static_cast<Eigen::Index>(negatives_.size());
        exemplar_dots_.resize(m + 1);
        exemplar_dots_[0] = exemplar.squaredNorm();
        for (Eigen::Index k = 0; k < m; ++k) {
            exemplar_dots_[k + 1] = rows_.row(negatives_[static_cast<std::size_t>(k)]).dot(exemplar);
        }
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return exemplar_dots_.size(); }

    [[nodiscard]] double diagonal(Eigen::Index i) const {
        if (i == 0) {
            return exemplar_dots_[0];
        }
        const auto idx = negatives_[static_cast<std::size_t>(i - 1)];
        return gram_ != nullptr ? (*gram_)(idx, idx) : rows_.row(idx).squaredNorm();
    }

    void column(Eigen::Index i, double *out) const {
        const auto m = negatives_.size();
        if (i == 0) {
            std::copy(exemplar_dots_.data(), exemplar_dots_.data() + exemplar_dots_.size(), out);
            return;
        }
        out[0] = exemplar_dots_[i];
        const auto idx = negatives_[static_cast<std::size_t>(i - 1)];
        if (gram_ != nullptr) {
            const double *col = gram_->col(idx).data();
            for (std::size_t k = 0; k < m; ++k) {
                out[k + 1] = col[negatives_[k]];
            }
        } else {
            const auto row = rows_.row(idx);
            for (std::size_t k = 0; k < m; ++k) {
                out[k + 1] = rows_.row(negatives_[k]).dot(row);
            }
        }
    }

  private:
    const RowMatrix &rows_;
    std::vector<Eigen::Index> negatives_;
    const Matrix *gram_;
    Vector exemplar_dots_;
};

namespace detail {

inline Detector esvm_from_solution(const solver::HingeSolution &sol, const Vector &exemplar, const RowMatrix &rows,
                                   std::span<const Eigen::Index> negatives, const std::vector<double> &y) {
    Detector det;
    det.weight = sol.beta[0] * exemplar;
    for (std::size_t k = 0; k < negatives.size(); ++k) {
        const double coef = sol.beta[k + 1] * y[k + 1];
        if (coef != 0.0) {
            det.weight.noalias() += coef * rows.row(negatives[k]).transpose();
        }
    }
    det.bias = sol.bias;
    det.objective = sol.objective;
    det.converged = sol.converged;
    return det;
}

}  // namespace detail

/// Exemplar SVM whose negatives are rows of a shared descriptor matrix.
inline Detector train_esvm(const Trajectorylet &exemplar, const RowMatrix &pool_rows,
                           std::span<const Eigen::Index> negatives, const EsvmParams &params,
                           const Matrix *pool_gram = nullptr) {
    params.validate();
    if (negatives.empty()) {
        throw invalid_argument("exemplar SVM needs at least one negative");
    }
    if (exemplar.values.size() != pool_rows.cols()) {
        throw dimension_error("exemplar and negatives differ in dimension");
    }
    if (!exemplar.values.allFinite()) {
        throw invalid_argument("exemplar has non-finite values");
    }
    const ExemplarKernel kernel(exemplar.values, pool_rows, negatives, pool_gram);
    std::vector<double> y(negatives.size() + 1, -1.0);
    std::vector<double> cost(negatives.size() + 1, params.lambda_neg);
    y[0] = 1.0;
    cost[0] = params.lambda_pos;
    const auto sol = solver::solve_hinge(kernel, y, cost, params.solver_options());
    Detector det = detail::esvm_from_solution(sol, exemplar.values, pool_rows, negatives, y);
    det.source_class = exemplar.class_label;
    det.source_instance = exemplar.source_instance.empty() ? "-" : exemplar.source_instance;
    det.source_frame = exemplar.start_frame;
    if (!det.converged) {
        warn("exemplar SVM for " + det.source_instance + "@" + std::to_string(det.source_frame) +
             " stopped at the iteration budget; returning the best iterate");
    }
    return det;
}

inline Detector train_esvm(const Trajectorylet &exemplar, std::span<const Trajectorylet> negatives,
                           const EsvmParams &params) {
    if (negatives.empty()) {
        throw invalid_argument("exemplar SVM needs at least one negative");
    }
    for (const auto &n : negatives) {
        if (n.values.size() != exemplar.values.size()) {
            throw dimension_error("exemplar and negatives differ in dimension");
        }
        if (!n.values.allFinite()) {
            throw invalid_argument("negative descriptor has non-finite values");
        }
        if (n.class_label != 0 && n.class_label == exemplar.class_label) {
            throw invalid_argument("negatives must not share the exemplar's class");
        }
    }
    const RowMatrix rows = stack_values(negatives);
    std::vector<Eigen::Index> idx(negatives.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return train_esvm(exemplar, rows, idx, params);
}

// ---------------------------------------------------------------------------
// one-vs-all classifier

struct MulticlassModel {
    /// Ascending class labels; detectors[k] scores labels[k].
    std::vector<int> labels;
    std::vector<Detector> detectors;
    double c_reg = 1.0;

    [[nodiscard]] int class_count() const noexcept { return static_cast<int>(labels.size()); }
    [[nodiscard]] Eigen::Index dim() const noexcept {
        return detectors.empty() ? 0 : detectors.front().weight.size();
    }
};

struct OvaOptions {
    long max_iterations = 200000;
    double tolerance = 1e-6;
};

/// Per class: minimize ||w||^2 + C sum_i h(y_i (w^T x_i + b)) with that class positive.
inline MulticlassModel train_ova_svm(const RowMatrix &encodings, std::span<const int> labels, double c_reg,
                                     const OvaOptions &options = {}) {
    if (static_cast<Eigen::Index>(labels.size()) != encodings.rows()) {
        throw dimension_error("one label per encoding is required");
    }
    if (!(c_reg > 0.0)) {
        throw invalid_argument("regularization constant must be positive");
    }
    MulticlassModel model;
    model.c_reg = c_reg;
    model.labels.assign(labels.begin(), labels.end());
    std::sort(model.labels.begin(), model.labels.end());
    model.labels.erase(std::unique(model.labels.begin(), model.labels.end()), model.labels.end());
    if (model.labels.size() < 2) {
        throw invalid_argument("one-vs-all training needs at least 2 classes");
    }
    const solver::DenseKernel kernel(encodings);
    const std::vector<double> cost(labels.size(), c_reg);
    solver::HingeOptions opts;
    opts.max_iterations = options.max_iterations;
    opts.tolerance = options.tolerance;
    for (const int c : model.labels) {
        std::vector<double> y(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            y[i] = labels[i] == c ? 1.0 : -1.0;
        }
        const auto sol = solver::solve_hinge(kernel, y, cost, opts);
        Detector det;
        det.weight = solver::primal_weight(encodings, sol.beta, y);
        det.bias = sol.bias;
        det.source_class = c;
        det.objective = sol.objective;
        det.converged = sol.converged;
        if (!sol.converged) {
            warn("one-vs-all classifier for class " + std::to_string(c) + " stopped at the iteration budget");
        }
        model.detectors.push_back(std::move(det));
    }
    return model;
}

inline MulticlassModel train_ova_svm(std::span<const Vector> encodings, std::span<const int> labels, double c_reg,
                                     const OvaOptions &options = {}) {
    if (encodings.empty()) {
        throw invalid_argument("no encodings to train on");
    }
    RowMatrix rows(static_cast<Eigen::Index>(encodings.size()), encodings.front().size());
    for (std::size_t i = 0; i < encodings.size(); ++i) {
        if (encodings[i].size() != rows.cols()) {
            throw dimension_error("encodings differ in dimension");
        }
        rows.row(static_cast<Eigen::Index>(i)) = encodings[i].transpose();
    }
    return train_ova_svm(rows, labels, c_reg, options);
}

/// Per-class decision values in the order of model.labels.
inline Vector decision_values(const MulticlassModel &model, const Eigen::Ref<const Vector> &encoding) {
    Vector out(model.class_count());
    for (int k = 0; k < model.class_count(); ++k) {
        out[k] = score(model.detectors[static_cast<std::size_t>(k)], encoding);
    }
    return out;
}

/// Label with the largest decision value; ties go to the lowest label.
inline int predict(const MulticlassModel &model, const Eigen::Ref<const Vector> &encoding) {
    if (encoding.size() != model.dim()) {
        throw dimension_error("encoding has dimension " + std::to_string(encoding.size()) + ", model expects " +
                              std::to_string(model.dim()));
    }
    const Vector values = decision_values(model, encoding);
    int best = 0;
    for (int k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) {
            best = k;
        }
    }
    return model.labels[static_cast<std::size_t>(best)];
}

// ---------------------------------------------------------------------------
// cross-validation

inline std::vector<double> default_c_grid() {
    std::vector<double> grid;
    for (int k = -5; k <= 5; ++k) {
        grid.push_back(std::ldexp(1.0, k));
    }
    return grid;
}

/// Seeded stratified assignment of instances to folds.
inline std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
    if (folds < 2) {
        throw invalid_argument("cross-validation needs at least 2 folds");
    }
    if (static_cast<int>(labels.size()) < folds) {
        throw invalid_argument("cross-validation needs at least as many instances (" + std::to_string(labels.size()) +
                               ") as folds (" + std::to_string(folds) + ")");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[labels[i]].push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(labels.size(), 0);
    int next = 0;
    for (auto &[label, members] : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        for (const auto i : members) {
            fold_of[i] = next;
            next = (next + 1) % folds;
        }
    }
    return fold_of;
}

struct CvResult {
    double chosen = 1.0;
    std::vector<double> grid;
    std::vector<double> mean_accuracy;
    std::vector<int> fold_of;
};

inline CvResult cross_validate_C(const RowMatrix &encodings, std::span<const int> labels, std::span<const double> grid,
                                 int folds = 5, std::uint64_t seed = 0, const OvaOptions &options = {}) {
    if (grid.empty()) {
        throw invalid_argument("cross-validation grid is empty");
    }
    CvResult result;
    result.grid.assign(grid.begin(), grid.end());
    std::sort(result.grid.begin(), result.grid.end());
    result.fold_of = stratified_folds(labels, folds, seed);
    result.mean_accuracy.assign(result.grid.size(), 0.0);

    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> held;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            (result.fold_of[i] == f ? held : train).push_back(static_cast<Eigen::Index>(i));
        }
        if (held.empty()) {
            continue;
        }
        RowMatrix train_rows(static_cast<Eigen::Index>(train.size()), encodings.cols());
        std::vector<int> train_labels;
        for (std::size_t k = 0; k < train.size(); ++k) {
            train_rows.row(static_cast<Eigen::Index>(k)) = encodings.row(train[k]);
            train_labels.push_back(labels[static_cast<std::size_t>(train[k])]);
        }
        const bool single_class = std::adjacent_find(train_labels.begin(), train_labels.end(),
                                                     std::not_equal_to<>()) == train_labels.end();
        for (std::size_t g = 0; g < result.grid.size(); ++g) {
            int correct = 0;
            if (single_class) {
                for (const auto i : held) {
                    correct += labels[static_cast<std::size_t>(i)] == train_labels.front() ? 1 : 0;
                }
            } else {
                const auto model = train_ova_svm(train_rows, train_labels, result.grid[g], options);
                for (const auto i : held) {
                    correct += predict(model, encodings.row(i).transpose()) == labels[static_cast<std::size_t>(i)];
                }
            }
            result.mean_accuracy[g] += static_cast<double>(correct) / static_cast<double>(held.size());
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 0; g < result.grid.size(); ++g) {
        result.mean_accuracy[g] /= static_cast<double>(folds);
        if (result.mean_accuracy[g] > result.mean_accuracy[best]) {
            best = g;
        }
    }
    result.chosen = result.grid[best];
    return result;
}

// ---------------------------------------------------------------------------
// text serialization

inline void write_detector(std::ostream &out, const Detector &det) {
    if (det.source_instance.find_first_of(" \t\n") != std::string::npos || det.source_instance.empty()) {
        throw invalid_argument("instance id '" + det.source_instance + "' cannot be serialized");
    }
    out << "class=" << det.source_class << " instance=" << det.source_instance << " frame=" << det.source_frame
        << " normalized=" << (det.normalized ? 1 : 0) << '\n';
    out << format_real(det.bias);
    for (Eigen::Index i = 0; i < det.weight.size(); ++i) {
        out << ' ' << format_real(det.weight[i]);
    }
    out << '\n';
}

inline Detector read_detector(std::istream &in, Eigen::Index dim) {
    std::string meta;
    std::string row;
    if (!std::getline(in, meta) || !std::getline(in, row)) {
        throw parse_error("detector block truncated");
    }
    Detector det;
    int seen = 0;
    for (const auto field : split_whitespace(meta)) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) {
            throw parse_error("detector metadata field without '='");
        }
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (key == "class") {
            det.source_class = static_cast<int>(parse_integer(value));
        } else if (key == "instance") {
            det.source_instance = std::string(value);
        } else if (key == "frame") {
            det.source_frame = static_cast<int>(parse_integer(value));
        } else if (key == "normalized") {
            det.normalized = parse_integer(value) != 0;
        } else {
            throw parse_error("unknown detector metadata key '" + std::string(key) + "'");
        }
        ++seen;
    }
    if (seen != 4) {
        throw parse_error("detector metadata must be 'class=<c> instance=<id> frame=<t0> normalized=<0|1>'");
    }
    const Vector values = parse_row(row, dim + 1, "detector row");
    det.bias = values[0];
    det.weight = values.tail(dim);
    if (!det.weight.allFinite()) {
        throw parse_error("detector weight is not finite");
    }
    return det;
}

inline void write_multiclass(std::ostream &out, const MulticlassModel &model) {
    out << "classes=" << model.class_count() << " dim=" << model.dim() << " c_reg=" << format_real(model.c_reg)
        << '\n';
    for (const auto &det : model.detectors) {
        write_detector(out, det);
    }
}

inline MulticlassModel read_multiclass(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error("classifier file is empty");
    }
    const auto fields = split_whitespace(line);
    if (fields.size() != 3 || !fields[0].starts_with("classes=") || !fields[1].starts_with("dim=") ||
        !fields[2].starts_with("c_reg=")) {
        throw parse_error("classifier header must be 'classes=<C> dim=<d> c_reg=<v>'");
    }
    const auto classes = parse_integer(fields[0].substr(8));
    const auto dim = static_cast<Eigen::Index>(parse_integer(fields[1].substr(4)));
    MulticlassModel model;
    model.c_reg = parse_real(fields[2].substr(6));
    for (long long k = 0; k < classes; ++k) {
        model.detectors.push_back(read_detector(in, dim));
        model.labels.push_back(model.detectors.back().source_class);
    }
    if (!std::is_sorted(model.labels.begin(), model.labels.end())) {
        throw parse_error("classifier classes must be listed in ascending order");
    }
    return model;
}

/// `chosen=<C> folds=<k>`, a `fold_of=` line with each instance's fold, then
/// one `C mean_accuracy` row per grid value.
inline void write_cv_result(std::ostream &out, const CvResult &cv, int folds) {
    out << "chosen=" << format_real(cv.chosen) << " folds=" << folds << '\n' << "fold_of=";
    for (const int f : cv.fold_of) {
        out << ' ' << f;
    }
    out << '\n';
    for (std::size_t g = 0; g < cv.grid.size(); ++g) {
        out << format_real(cv.grid[g]) << ' ' << format_real(cv.mean_accuracy[g]) << '\n';
    }
}

inline CvResult read_cv_result(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error("empty cross-validation file");
    }
    const auto head = split_whitespace(line);
    if (head.size() != 2 || !head[0].starts_with("chosen=") || !head[1].starts_with("folds=")) {
        throw parse_error("cross-validation header must be 'chosen=<C> folds=<k>'");
    }
    CvResult cv;
    cv.chosen = parse_real(head[0].substr(7));
    if (!std::getline(in, line) || !line.starts_with("fold_of=")) {
        throw parse_error("cross-validation file lacks the fold_of= line");
    }
    for (const auto field : split_whitespace(std::string_view(line).substr(8))) {
        cv.fold_of.push_back(static_cast<int>(parse_integer(field)));
    }
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        const Vector row = parse_row(line, 2, "cross-validation row");
        cv.grid.push_back(row[0]);
        cv.mean_accuracy.push_back(row[1]);
    }
    return cv;
}

}  // namespace trajlet
