#pragma once

// Removes redundancy from the mined detectors: detectors that fire on the same
// pool items are grouped by spectral clustering over the cosine similarity of
// their clipped ("active") score vectors, and one representative per group
// forms the template detector set.

#include "trajlet/common.hpp"
#include "trajlet/detector_mining.hpp"
#include "trajlet/linear_svm.hpp"
#include "trajlet/trajectorylet.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <tuple>
#include <vector>

namespace trajlet {

/// max(0, score) of a detector over every pool item.
inline Vector active_score_vector(const Detector &det, const TrajectoryletPool &pool) {
    if (!det.normalized) {
        throw invalid_argument("active scores need a unit-normalized detector");
    }
    if (pool.size() == 0) {
        throw invalid_argument("active scores need a non-empty pool");
    }
    if (det.weight.size() != pool.descriptors.cols()) {
        throw dimension_error("detector and pool differ in dimension");
    }
    return ((pool.descriptors * det.weight).array() + det.bias).cwiseMax(0.0).matrix();
}

/// Cosine similarity of two active score vectors; 0 when either is all zero.
inline double affinity(const Vector &r, const Vector &s) {
    if (r.size() != s.size()) {
        throw dimension_error("active score vectors differ in length");
    }
    const double nr = r.norm();
    const double ns = s.norm();
    if (nr == 0.0 || ns == 0.0) {
        return 0.0;
    }
    return std::clamp(r.dot(s) / (nr * ns), 0.0, 1.0);
}

/// Q[d][d'] = affinity(r_d, r_d'), rows of `active` are the score vectors.
inline Matrix affinity_matrix(const Eigen::Ref<const RowMatrix> &active) {
    RowMatrix unit = active;
    std::vector<bool> zero(static_cast<std::size_t>(active.rows()), false);
    for (Eigen::Index d = 0; d < unit.rows(); ++d) {
        const double norm = unit.row(d).norm();
        if (norm > 0.0) {
            unit.row(d) /= norm;
        } else {
            zero[static_cast<std::size_t>(d)] = true;
        }
    }
    Matrix q = unit * unit.transpose();
    q = (0.5 * (q + q.transpose())).cwiseMax(0.0).cwiseMin(1.0);
    for (Eigen::Index d = 0; d < q.rows(); ++d) {
        q(d, d) = zero[static_cast<std::size_t>(d)] ? 0.0 : 1.0;
    }
    return q;
}

namespace detail {

inline double squared_distance(const Eigen::Ref<const RowMatrix> &points, Eigen::Index i,
                               const Eigen::Ref<const RowMatrix> &centers, Eigen::Index k) {
    return (points.row(i) - centers.row(k)).squaredNorm();
}

/// Lloyd's k-means with seeded farthest-point initialisation. Every cluster ends non-empty.
inline std::vector<int> kmeans(const RowMatrix &points, int k, std::uint64_t seed, int max_rounds = 300) {
    const Eigen::Index n = points.rows();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    RowMatrix centers(k, points.cols());
    centers.row(0) = points.row(first(rng));
    Vector nearest = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        Eigen::Index far = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points, i, centers, c - 1));
            if (nearest[i] > nearest[far]) {
                far = i;
            }
        }
        centers.row(c) = points.row(far);
    }

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int round = 0; round < max_rounds; ++round) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = squared_distance(points, i, centers, 0);
            for (int c = 1; c < k; ++c) {
                const double d = squared_distance(points, i, centers, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
        RowMatrix sums = RowMatrix::Zero(k, points.cols());
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
            ++sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / sizes[static_cast<std::size_t>(c)];
            }
        }
    }

    // fill empty clusters with the member farthest from its center, taken from a cluster of size >= 2
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (const int a : assign) {
        ++sizes[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] > 0) {
            continue;
        }
        Eigen::Index donor = -1;
        double donor_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = assign[static_cast<std::size_t>(i)];
            if (sizes[static_cast<std::size_t>(a)] < 2) {
                continue;
            }
            const double d = squared_distance(points, i, centers, a);
            if (d > donor_d) {
                donor_d = d;
                donor = i;
            }
        }
        --sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(donor)])];
        assign[static_cast<std::size_t>(donor)] = c;
        sizes[static_cast<std::size_t>(c)] = 1;
        centers.row(c) = points.row(donor);
    }
    return assign;
}

}  // namespace detail

/// Normalized spectral clustering: leading K eigenvectors of D^-1/2 Q D^-1/2,
/// rows scaled to unit length, then seeded k-means. Cluster ids are numbered
/// in order of first appearance.
inline std::vector<int> spectral_cluster(const Matrix &q, int k, std::uint64_t seed) {
    const Eigen::Index n = q.rows();
    if (q.cols() != n) {
        throw dimension_error("affinity matrix must be square");
    }
    if (k < 1 || k > n) {
        throw invalid_argument("cluster count " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
    }
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw invalid_argument("affinity matrix is not symmetric");
    }
    if (k == 1) {
        return std::vector<int>(static_cast<std::size_t>(n), 0);
    }
    const Vector degree = q.rowwise().sum();
    Vector inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        inv_sqrt[i] = degree[i] > 0.0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
    }
    Matrix normalized = inv_sqrt.asDiagonal() * q * inv_sqrt.asDiagonal();
    normalized = 0.5 * (normalized + normalized.transpose());
    const auto eig = sorted_symmetric_eigen(normalized);
    RowMatrix embedding = eig.vectors.leftCols(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = embedding.row(i).norm();
        if (norm > 0.0) {
            embedding.row(i) /= norm;
        }
    }
    const auto raw = detail::kmeans(embedding, k, seed);
    std::map<int, int> renumber;
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto [it, inserted] = renumber.try_emplace(raw[i], static_cast<int>(renumber.size()));
        out[i] = it->second;
    }
    return out;
}

/// The K representative detectors that define the encoding.
struct TemplateDetectorSet {
    std::vector<Detector> detectors;
    /// Cluster of each clustered candidate, in candidate order.
    std::vector<int> assignments;
    /// For each representative, the index of the candidate it came from.
    std::vector<int> representative_of;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(detectors.size()); }
    [[nodiscard]] Eigen::Index dim() const noexcept {
        return detectors.empty() ? 0 : detectors.front().weight.size();
    }

    /// K x d weight matrix.
    [[nodiscard]] RowMatrix weights() const {
        RowMatrix w(size(), dim());
        for (int k = 0; k < size(); ++k) {
            w.row(k) = detectors[static_cast<std::size_t>(k)].weight.transpose();
        }
        return w;
    }

    [[nodiscard]] Vector biases() const {
        Vector b(size());
        for (int k = 0; k < size(); ++k) {
            b[k] = detectors[static_cast<std::size_t>(k)].bias;
        }
        return b;
    }
};

/// Per cluster, the detector with the largest single active score (ties: larger
/// mean active score, then instance id, then frame). `active` rows align with `detectors`.
inline TemplateDetectorSet select_representatives(std::span<const int> assignments, std::span<const Detector> detectors,
                                                  const Eigen::Ref<const RowMatrix> &active) {
    if (assignments.size() != detectors.size() || static_cast<Eigen::Index>(detectors.size()) != active.rows()) {
        throw dimension_error("assignments, detectors and active scores must align");
    }
    const int clusters = assignments.empty() ? 0 : *std::max_element(assignments.begin(), assignments.end()) + 1;
    TemplateDetectorSet set;
    set.assignments.assign(assignments.begin(), assignments.end());
    for (int c = 0; c < clusters; ++c) {
        int best = -1;
        double best_max = 0.0;
        double best_mean = 0.0;
        for (std::size_t d = 0; d < detectors.size(); ++d) {
            if (assignments[d] != c) {
                continue;
            }
            const auto row = active.row(static_cast<Eigen::Index>(d));
            // plain loops: vectorized reductions round differently by alignment,
            // which would make ties depend on the row's position
            double mx = 0.0;
            double sum = 0.0;
            for (Eigen::Index i = 0; i < row.size(); ++i) {
                mx = std::max(mx, row[i]);
                sum += row[i];
            }
            const double mean = row.size() > 0 ? sum / static_cast<double>(row.size()) : 0.0;
            bool better = best < 0 || mx > best_max || (mx == best_max && mean > best_mean);
            if (!better && best >= 0 && mx == best_max && mean == best_mean) {
                const auto &cur = detectors[static_cast<std::size_t>(best)];
                const auto &cand = detectors[d];
                better = std::tie(cand.source_instance, cand.source_frame) <
                         std::tie(cur.source_instance, cur.source_frame);
            }
            if (better) {
                best = static_cast<int>(d);
                best_max = mx;
                best_mean = mean;
            }
        }
        if (best < 0) {
            warn("cluster " + std::to_string(c) + " is empty and is skipped");
            continue;
        }
        set.detectors.push_back(detectors[static_cast<std::size_t>(best)]);
        set.representative_of.push_back(best);
    }
    return set;
}

inline RowMatrix active_score_matrix(std::span<const Detector> detectors, const TrajectoryletPool &pool) {
    RowMatrix active(static_cast<Eigen::Index>(detectors.size()), pool.size());
    for (std::size_t d = 0; d < detectors.size(); ++d) {
        active.row(static_cast<Eigen::Index>(d)) = active_score_vector(detectors[d], pool).transpose();
    }
    return active;
}

/// Drops detectors that never fire on the pool, clusters the rest into at most
/// K groups and keeps one representative per group. Returned assignments and
/// representative indices refer to `kept` positions, which index `candidates`.
struct TemplateBuild {
    TemplateDetectorSet set;
    std::vector<int> kept;
};

inline TemplateBuild build_template_set(std::span<const Detector> candidates, const TrajectoryletPool &pool, int k,
                                        std::uint64_t seed) {
    if (k < 1) {
        throw invalid_argument("the template set needs K >= 1");
    }
    const RowMatrix all_active = active_score_matrix(candidates, pool);
    TemplateBuild build;
    for (std::size_t d = 0; d < candidates.size(); ++d) {
        if (all_active.row(static_cast<Eigen::Index>(d)).maxCoeff() > 0.0) {
            build.kept.push_back(static_cast<int>(d));
        }
    }
    if (build.kept.size() < candidates.size()) {
        warn(std::to_string(candidates.size() - build.kept.size()) +
             " detectors never fire on the pool and are dropped before clustering");
    }
    if (build.kept.empty()) {
        throw invalid_argument("no detector fires on the pool");
    }
    std::vector<Detector> kept;
    RowMatrix active(static_cast<Eigen::Index>(build.kept.size()), pool.size());
    for (std::size_t i = 0; i < build.kept.size(); ++i) {
        kept.push_back(candidates[static_cast<std::size_t>(build.kept[i])]);
        active.row(static_cast<Eigen::Index>(i)) = all_active.row(build.kept[i]);
    }
    int clusters = k;
    if (clusters > static_cast<int>(kept.size())) {
        warn("requested " + std::to_string(k) + " template detectors but only " + std::to_string(kept.size()) +
             " candidates remain; using all of them");
        clusters = static_cast<int>(kept.size());
    }
    const auto assignments = spectral_cluster(affinity_matrix(active), clusters, seed);
    build.set = select_representatives(assignments, kept, active);
    return build;
}

// ---------------------------------------------------------------------------
// persistence

inline void write_template_set(std::ostream &out, const TemplateDetectorSet &set) {
    out << "detectors=" << set.size() << " dim=" << set.dim() << '\n';
    for (const auto &det : set.detectors) {
        write_detector(out, det);
    }
}

inline TemplateDetectorSet read_template_set(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error("template set is empty");
    }
    const auto fields = split_whitespace(line);
    if (fields.size() != 2 || !fields[0].starts_with("detectors=") || !fields[1].starts_with("dim=")) {
        throw parse_error("template header must be 'detectors=<K> dim=<d>'");
    }
    const auto count = parse_integer(fields[0].substr(10));
    const auto dim = static_cast<Eigen::Index>(parse_integer(fields[1].substr(4)));
    TemplateDetectorSet set;
    for (long long k = 0; k < count; ++k) {
        set.detectors.push_back(read_detector(in, dim));
    }
    return set;
}

/// Sidecar rows `detector_index cluster_index`.
inline void write_assignments(std::ostream &out, std::span<const int> assignments) {
    for (std::size_t d = 0; d < assignments.size(); ++d) {
        out << d << ' ' << assignments[d] << '\n';
    }
}

inline std::vector<int> read_assignments(std::istream &in) {
    std::vector<int> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto fields = split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        if (fields.size() != 2 || parse_integer(fields[0]) != static_cast<long long>(out.size())) {
            throw parse_error("assignment rows must be 'detector_index cluster_index' in order");
        }
        out.push_back(static_cast<int>(parse_integer(fields[1])));
    }
    return out;
}

}  // namespace trajlet
