#pragma once

// Trajectorylet descriptors: static joint positions over a short window plus
// displacement, velocity and (optionally) acceleration blocks, and the PCA
// model used to shrink them.

#include "trajlet/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace trajlet {

/// Descriptor blocks. x0: positions, x1: displacement from the first frame,
/// x2: frame-to-frame velocity, x3: change of velocity.
enum class Component { x0 = 0, x1 = 1, x2 = 2, x3 = 3 };

inline std::string to_string(Component c) { return "x" + std::to_string(static_cast<int>(c)); }

inline Component parse_component(std::string_view text) {
    if (text == "x0") return Component::x0;
    if (text == "x1") return Component::x1;
    if (text == "x2") return Component::x2;
    if (text == "x3") return Component::x3;
    throw parse_error("unknown trajectorylet component '" + std::string(text) + "'");
}

struct TrajectoryletConfig {
    int length = 5;
    std::vector<Component> components{Component::x0, Component::x1, Component::x2};
    double pca_retain_fraction = 0.5;

    /// Sorted, de-duplicated component list; blocks are always laid out x0, x1, x2, x3.
    [[nodiscard]] std::vector<Component> ordered_components() const {
        auto out = components;
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void validate() const {
        if (length < 2) {
            throw invalid_argument("trajectorylet length must be >= 2");
        }
        if (components.empty()) {
            throw invalid_argument("at least one trajectorylet component is required");
        }
        for (const auto c : components) {
            if (length < static_cast<int>(c) + 1) {
                throw invalid_argument("component " + to_string(c) + " needs length >= " +
                                       std::to_string(static_cast<int>(c) + 1));
            }
        }
        if (!(pca_retain_fraction > 0.0 && pca_retain_fraction <= 1.0)) {
            throw invalid_argument("pca retain fraction must lie in (0, 1]");
        }
    }

    /// Σ (L - order) * 3J over the selected components.
    [[nodiscard]] Eigen::Index raw_dimension(int joint_count) const {
        Eigen::Index dim = 0;
        for (const auto c : ordered_components()) {
            dim += static_cast<Eigen::Index>(length - static_cast<int>(c)) * 3 * joint_count;
        }
        return dim;
    }
};

struct Trajectorylet {
    Vector values;
    std::string source_instance;
    int start_frame = 0;
    int class_label = 0;
};

/// One descriptor per window start t0 = 0..F-L over hip-centered frame vectors.
inline std::vector<Trajectorylet> extract_trajectorylets(std::span<const Vector> frames,
                                                         const TrajectoryletConfig &config,
                                                         const std::string &instance_id = {}, int class_label = 0) {
    config.validate();
    const int L = config.length;
    const int F = static_cast<int>(frames.size());
    if (F < L) {
        throw invalid_argument("instance '" + instance_id + "' has " + std::to_string(F) +
                               " frames, fewer than the trajectorylet length " + std::to_string(L));
    }
    const Eigen::Index width = frames.front().size();
    for (const auto &f : frames) {
        if (f.size() != width) {
            throw dimension_error("frame vectors of instance '" + instance_id + "' differ in length");
        }
    }
    const auto comps = config.ordered_components();
    const int max_order = static_cast<int>(comps.back());
    Eigen::Index dim = 0;
    for (const auto c : comps) {
        dim += static_cast<Eigen::Index>(L - static_cast<int>(c)) * width;
    }

    std::vector<Trajectorylet> out;
    out.reserve(static_cast<std::size_t>(F - L + 1));
    // diffs[k][i]: order-k difference at window offset i, valid for i >= k
    std::array<std::vector<Vector>, 4> diffs;
    for (int t0 = 0; t0 + L <= F; ++t0) {
        for (auto &d : diffs) {
            d.assign(static_cast<std::size_t>(L), Vector());
        }
        for (int i = 0; i < L; ++i) {
            diffs[0][static_cast<std::size_t>(i)] = frames[static_cast<std::size_t>(t0 + i)];
        }
        if (max_order >= 1) {
            for (int i = 1; i < L; ++i) {
                diffs[1][static_cast<std::size_t>(i)] = diffs[0][static_cast<std::size_t>(i)] - diffs[0][0];
            }
        }
        for (int k = 2; k <= max_order; ++k) {
            for (int i = k; i < L; ++i) {
                diffs[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
                    diffs[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(i)] -
                    diffs[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(i - 1)];
            }
        }
        Trajectorylet t;
        t.values.resize(dim);
        Eigen::Index pos = 0;
        for (const auto c : comps) {
            const int k = static_cast<int>(c);
            for (int i = k; i < L; ++i) {
                t.values.segment(pos, width) = diffs[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
                pos += width;
            }
        }
        t.source_instance = instance_id;
        t.start_frame = t0;
        t.class_label = class_label;
        out.push_back(std::move(t));
    }
    return out;
}

/// Principal-component projection learned from training descriptors.
struct PcaModel {
    Vector mean;
    Matrix basis;  // retained_dim x raw_dim, orthonormal rows
    Vector eigenvalues;

    [[nodiscard]] Eigen::Index retained_dim() const noexcept { return basis.rows(); }
    [[nodiscard]] Eigen::Index raw_dim() const noexcept { return basis.cols(); }
};

inline Eigen::Index pca_retained_dim(Eigen::Index raw_dim, double retain_fraction) {
    // the small slack keeps e.g. 0.5 * 720 from rounding up to 361
    const double target = retain_fraction * static_cast<double>(raw_dim);
    const auto d = static_cast<Eigen::Index>(std::ceil(target - 1e-9 * std::max(1.0, target)));
    return std::clamp<Eigen::Index>(d, 1, raw_dim);
}

/// Principal directions of a symmetric matrix, sorted by descending eigenvalue.
/// Each direction is flipped so its largest-magnitude entry is positive.
struct SortedEigen {
    Vector values;
    Matrix vectors;  // columns
};

inline SortedEigen sorted_symmetric_eigen(const Matrix &sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw error("symmetric eigendecomposition failed");
    }
    const Vector &vals = solver.eigenvalues();
    Matrix vecs = solver.eigenvectors();
    const Eigen::Index n = vals.size();
    const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
    const double tie = 1e-12 * scale;

    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index arg = 0;
        vecs.col(k).cwiseAbs().maxCoeff(&arg);
        if (vecs(arg, k) < 0.0) {
            vecs.col(k) = -vecs.col(k);
        }
    }
    auto first_nonzero = [&](Eigen::Index k) {
        for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
            if (std::abs(vecs(i, k)) > 1e-12) {
                return i;
            }
        }
        return vecs.rows();
    };
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (std::abs(vals[a] - vals[b]) > tie) {
            return vals[a] > vals[b];
        }
        return first_nonzero(a) < first_nonzero(b);
    });
    SortedEigen out{Vector(n), Matrix(vecs.rows(), n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values[k] = vals[order[static_cast<std::size_t>(k)]];
        out.vectors.col(k) = vecs.col(order[static_cast<std::size_t>(k)]);
    }
    return out;
}

/// Fits on the rows of `data` (one descriptor per row).
inline PcaModel fit_pca(const Eigen::Ref<const RowMatrix> &data, double retain_fraction) {
    if (data.rows() < 2) {
        throw invalid_argument("PCA needs at least 2 descriptors");
    }
    if (!(retain_fraction > 0.0 && retain_fraction <= 1.0)) {
        throw invalid_argument("pca retain fraction must lie in (0, 1]");
    }
    PcaModel model;
    model.mean = data.colwise().mean().transpose();
    const RowMatrix centered = data.rowwise() - model.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
    const auto eig = sorted_symmetric_eigen(cov);
    const auto d = pca_retained_dim(data.cols(), retain_fraction);
    model.basis = eig.vectors.leftCols(d).transpose();
    model.eigenvalues = eig.values.head(d);
    return model;
}

inline RowMatrix stack_values(std::span<const Trajectorylet> descriptors) {
    if (descriptors.empty()) {
        return {};
    }
    RowMatrix out(static_cast<Eigen::Index>(descriptors.size()), descriptors.front().values.size());
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (descriptors[i].values.size() != out.cols()) {
            throw dimension_error("descriptors differ in dimension");
        }
        out.row(static_cast<Eigen::Index>(i)) = descriptors[i].values.transpose();
    }
    return out;
}

inline PcaModel fit_pca(std::span<const Trajectorylet> descriptors, double retain_fraction) {
    if (descriptors.size() < 2) {
        throw invalid_argument("PCA needs at least 2 descriptors");
    }
    return fit_pca(stack_values(descriptors), retain_fraction);
}

inline Trajectorylet apply_pca(const PcaModel &model, const Trajectorylet &raw) {
    if (raw.values.size() != model.raw_dim()) {
        throw dimension_error("descriptor has dimension " + std::to_string(raw.values.size()) + ", PCA model expects " +
                              std::to_string(model.raw_dim()));
    }
    Trajectorylet out;
    out.values = model.basis * (raw.values - model.mean);
    out.source_instance = raw.source_instance;
    out.start_frame = raw.start_frame;
    out.class_label = raw.class_label;
    return out;
}

inline std::vector<Trajectorylet> apply_pca(const PcaModel &model, std::span<const Trajectorylet> raw) {
    std::vector<Trajectorylet> out;
    out.reserve(raw.size());
    for (const auto &t : raw) {
        out.push_back(apply_pca(model, t));
    }
    return out;
}

/// Text layout: `d raw_dim`, the mean row, then d basis rows.
inline void write_pca(std::ostream &out, const PcaModel &model) {
    out << model.retained_dim() << ' ' << model.raw_dim() << '\n';
    write_row(out, model.mean);
    out << '\n';
    for (Eigen::Index k = 0; k < model.retained_dim(); ++k) {
        write_row(out, model.basis.row(k).transpose());
        out << '\n';
    }
}

inline PcaModel read_pca(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error("PCA model is empty");
    }
    const auto head = split_whitespace(line);
    if (head.size() != 2) {
        throw parse_error("PCA header must be 'd raw_dim'");
    }
    const auto d = static_cast<Eigen::Index>(parse_integer(head[0]));
    const auto raw = static_cast<Eigen::Index>(parse_integer(head[1]));
    if (d < 1 || raw < d) {
        throw parse_error("PCA header has invalid dimensions");
    }
    PcaModel model;
    if (!std::getline(in, line)) {
        throw parse_error("PCA model missing mean row");
    }
    model.mean = parse_row(line, raw, "PCA mean row");
    model.basis.resize(d, raw);
    for (Eigen::Index k = 0; k < d; ++k) {
        if (!std::getline(in, line)) {
            throw parse_error("PCA model missing basis row " + std::to_string(k));
        }
        model.basis.row(k) = parse_row(line, raw, "PCA basis row").transpose();
    }
    return model;
}

}  // namespace trajlet
