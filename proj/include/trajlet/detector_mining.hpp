#pragma once

// Discriminative detector mining: every trajectorylet of a training instance
// gets an exemplar SVM, each detector is run over a shared sample of training
// trajectorylets, and detectors whose strongest responses stay inside their own
// class are kept.

#include "trajlet/common.hpp"
#include "trajlet/linear_svm.hpp"
#include "trajlet/parallel.hpp"
#include "trajlet/trajectorylet.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajlet {

/// Sampled training trajectorylets, one per row, with their provenance.
struct TrajectoryletPool {
    RowMatrix descriptors;
    std::vector<int> labels;
    std::vector<std::string> instances;
    std::vector<int> frames;
    std::uint64_t sample_seed = 0;
    /// descriptors * descriptors^T, empty until compute_gram() is called.
    Matrix gram;

    [[nodiscard]] Eigen::Index size() const noexcept { return descriptors.rows(); }
    [[nodiscard]] bool has_gram() const noexcept { return gram.rows() == size() && size() > 0; }
    [[nodiscard]] int class_count() const {
        return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    }

    void compute_gram() { gram = descriptors * descriptors.transpose(); }
};

/// Uniform sample without replacement of min(n, total) descriptors, kept in dataset order.
inline TrajectoryletPool sample_pool(std::span<const Trajectorylet> dataset, std::size_t n, std::uint64_t seed) {
    if (dataset.empty()) {
        throw invalid_argument("cannot sample a pool from an empty dataset");
    }
    std::vector<std::size_t> picked;
    if (n >= dataset.size()) {
        picked.resize(dataset.size());
        std::iota(picked.begin(), picked.end(), std::size_t{0});
    } else {
        std::vector<std::size_t> all(dataset.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        std::mt19937_64 rng(seed);
        std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
    }
    TrajectoryletPool pool;
    pool.sample_seed = seed;
    pool.descriptors.resize(static_cast<Eigen::Index>(picked.size()), dataset.front().values.size());
    for (std::size_t k = 0; k < picked.size(); ++k) {
        const auto &t = dataset[picked[k]];
        if (t.values.size() != pool.descriptors.cols()) {
            throw dimension_error("pool descriptors differ in dimension");
        }
        if (t.class_label < 1) {
            throw invalid_argument("pool descriptors need a class label >= 1");
        }
        pool.descriptors.row(static_cast<Eigen::Index>(k)) = t.values.transpose();
        pool.labels.push_back(t.class_label);
        pool.instances.push_back(t.source_instance);
        pool.frames.push_back(t.start_frame);
    }
    return pool;
}

struct ClassHistogram {
    /// counts[c - 1] = number of top-scoring pool items of class c.
    std::vector<int> counts;
    int n_top = 0;
    /// Pool rows of the top items, best first.
    std::vector<Eigen::Index> top_indices;
    double mean_top_score = 0.0;
};

/// Class counts among the n_top highest-scoring pool items (ties: lower pool
/// index first). Items from `exclude_instance` are left out of the ranking.
inline ClassHistogram class_histogram(const Detector &det, const TrajectoryletPool &pool, int n_top,
                                      std::optional<std::string_view> exclude_instance = std::nullopt) {
    if (!det.normalized) {
        throw invalid_argument("class histograms need a unit-normalized detector");
    }
    if (n_top < 1) {
        throw invalid_argument("n_top must be >= 1");
    }
    if (det.weight.size() != pool.descriptors.cols()) {
        throw dimension_error("detector and pool differ in dimension");
    }
    const Vector scores = (pool.descriptors * det.weight).array() + det.bias;
    std::vector<Eigen::Index> eligible;
    eligible.reserve(static_cast<std::size_t>(pool.size()));
    for (Eigen::Index i = 0; i < pool.size(); ++i) {
        if (!exclude_instance || pool.instances[static_cast<std::size_t>(i)] != *exclude_instance) {
            eligible.push_back(i);
        }
    }
    if (static_cast<int>(eligible.size()) < n_top) {
        throw invalid_argument("pool has " + std::to_string(eligible.size()) + " eligible items, fewer than n_top = " +
                               std::to_string(n_top));
    }
    const auto by_score = [&](Eigen::Index a, Eigen::Index b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    };
    std::partial_sort(eligible.begin(), eligible.begin() + n_top, eligible.end(), by_score);

    ClassHistogram hist;
    hist.n_top = n_top;
    hist.counts.assign(static_cast<std::size_t>(pool.class_count()), 0);
    hist.top_indices.assign(eligible.begin(), eligible.begin() + n_top);
    double sum = 0.0;
    for (const auto i : hist.top_indices) {
        ++hist.counts[static_cast<std::size_t>(pool.labels[static_cast<std::size_t>(i)] - 1)];
        sum += scores[i];
    }
    hist.mean_top_score = sum / n_top;
    return hist;
}

/// Fraction of the top responses that belong to class c.
inline double purity(const ClassHistogram &hist, int c) {
    if (c < 1 || hist.n_top < 1) {
        throw invalid_argument("purity needs a class label >= 1 and a non-empty histogram");
    }
    if (c > static_cast<int>(hist.counts.size())) {
        return 0.0;
    }
    return static_cast<double>(hist.counts[static_cast<std::size_t>(c - 1)]) / hist.n_top;
}

struct MiningParams {
    int n_top = 50;
    int per_instance_budget = 10;

    void validate() const {
        if (n_top < 1 || per_instance_budget < 1) {
            throw invalid_argument("mining needs n_top >= 1 and a per-instance budget >= 1");
        }
    }
};

struct MinedDetector {
    Detector detector;
    double purity = 0.0;
    double mean_top_score = 0.0;
    ClassHistogram histogram;
};

/// Pool rows usable as negatives for class c.
inline std::vector<Eigen::Index> negatives_for_class(const TrajectoryletPool &pool, int c) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < pool.size(); ++i) {
        if (pool.labels[static_cast<std::size_t>(i)] != c) {
            out.push_back(i);
        }
    }
    return out;
}

/// Trains one candidate per trajectorylet of the instance and keeps the
/// `per_instance_budget` with the highest purity (ties: larger mean top score,
/// then earlier start frame).
inline std::vector<MinedDetector> mine_instance_detectors(std::span<const Trajectorylet> instance, int c,
                                                          const TrajectoryletPool &pool, const EsvmParams &esvm,
                                                          const MiningParams &mining) {
    mining.validate();
    esvm.validate();
    if (instance.empty()) {
        throw invalid_argument("instance has no trajectorylets");
    }
    const auto negatives = negatives_for_class(pool, c);
    if (negatives.empty()) {
        throw invalid_argument("pool has no negatives for class " + std::to_string(c));
    }
    const Matrix *gram = pool.has_gram() ? &pool.gram : nullptr;

    std::vector<MinedDetector> candidates;
    candidates.reserve(instance.size());
    for (const auto &exemplar : instance) {
        Trajectorylet labelled = exemplar;
        labelled.class_label = c;
        try {
            MinedDetector mined;
            mined.detector = unit_normalize(train_esvm(labelled, pool.descriptors, negatives, esvm, gram));
            mined.histogram = class_histogram(mined.detector, pool, mining.n_top, exemplar.source_instance);
            mined.purity = purity(mined.histogram, c);
            mined.mean_top_score = mined.histogram.mean_top_score;
            candidates.push_back(std::move(mined));
        } catch (const invalid_argument &e) {
            warn("skipping candidate " + exemplar.source_instance + "@" + std::to_string(exemplar.start_frame) + ": " +
                 e.what());
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const MinedDetector &a, const MinedDetector &b) {
        if (a.purity != b.purity) {
            return a.purity > b.purity;
        }
        if (a.mean_top_score != b.mean_top_score) {
            return a.mean_top_score > b.mean_top_score;
        }
        return a.detector.source_frame < b.detector.source_frame;
    });
    if (static_cast<int>(candidates.size()) > mining.per_instance_budget) {
        candidates.resize(static_cast<std::size_t>(mining.per_instance_budget));
    }
    return candidates;
}

/// Mines every instance; the result is indexed like `instances`.
inline std::vector<std::vector<MinedDetector>> mine_all(std::span<const std::vector<Trajectorylet>> instances,
                                                        std::span<const int> classes, const TrajectoryletPool &pool,
                                                        const EsvmParams &esvm, const MiningParams &mining,
                                                        int threads = 1) {
    if (instances.size() != classes.size()) {
        throw dimension_error("one class label per instance is required");
    }
    std::vector<std::vector<MinedDetector>> out(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t i) {
        out[i] = mine_instance_detectors(instances[i], classes[i], pool, esvm, mining);
    });
    return out;
}

struct MiningRecord {
    std::string instance;
    int class_label = 0;
    int frame = 0;
    double purity = 0.0;
    double mean_top_score = 0.0;
};

/// Kept detectors flattened in instance order, best first within an instance.
inline std::vector<MiningRecord> mining_records(std::span<const std::vector<MinedDetector>> mined) {
    std::vector<MiningRecord> out;
    for (const auto &per_instance : mined) {
        for (const auto &m : per_instance) {
            out.push_back({m.detector.source_instance, m.detector.source_class, m.detector.source_frame, m.purity,
                           m.mean_top_score});
        }
    }
    return out;
}

/// One line per kept detector: `instance class frame P_t mean_top_score`.
inline void write_mining_report(std::ostream &out, std::span<const MiningRecord> records) {
    for (const auto &r : records) {
        out << r.instance << ' ' << r.class_label << ' ' << r.frame << ' ' << format_real(r.purity) << ' '
            << format_real(r.mean_top_score) << '\n';
    }
}

inline void write_mining_report(std::ostream &out, std::span<const std::vector<MinedDetector>> mined) {
    write_mining_report(out, mining_records(mined));
}

inline std::vector<MiningRecord> read_mining_report(std::istream &in) {
    std::vector<MiningRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto fields = split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        if (fields.size() != 5) {
            throw parse_error("mining report rows need 5 fields, got " + std::to_string(fields.size()));
        }
        out.push_back({std::string(fields[0]), static_cast<int>(parse_integer(fields[1])),
                       static_cast<int>(parse_integer(fields[2])), parse_real(fields[3]), parse_real(fields[4])});
    }
    return out;
}

}  // namespace trajlet
