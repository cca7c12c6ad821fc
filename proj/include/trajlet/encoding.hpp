#pragma once

// Action-level representation: template detector scores max-pooled over an
// instance's trajectorylets, optionally per temporal-pyramid segment.

#include "trajlet/common.hpp"
#include "trajlet/detector_clustering.hpp"
#include "trajlet/trajectorylet.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trajlet {

struct ActionEncoding {
    Vector values;
    int levels = 1;
    std::string instance;
    std::optional<int> label;
};

/// Half-open trajectorylet index ranges of a pyramid, level by level: 1 range,
/// then 2, then 4, ... Range s of a level with S ranges starts at ceil(s * n / S),
/// so earlier ranges take the extra item and short inputs leave some ranges empty.
inline std::vector<std::pair<std::size_t, std::size_t>> pyramid_segments(std::size_t n, int levels) {
    if (levels < 1) {
        throw invalid_argument("pyramid needs at least one level");
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (int level = 0; level < levels; ++level) {
        const std::size_t parts = std::size_t{1} << level;
        for (std::size_t s = 0; s < parts; ++s) {
            const std::size_t begin = (s * n + parts - 1) / parts;
            const std::size_t end = ((s + 1) * n + parts - 1) / parts;
            out.emplace_back(begin, end);
        }
    }
    return out;
}

namespace detail {

/// K x n score matrix of the template detectors over the trajectorylets.
inline Matrix template_scores(const TemplateDetectorSet &set, std::span<const Trajectorylet> trajectorylets) {
    if (trajectorylets.empty()) {
        throw invalid_argument("cannot encode an instance without trajectorylets");
    }
    if (set.size() == 0) {
        throw invalid_argument("template detector set is empty");
    }
    // Column by column so a window's scores do not depend on which other
    // windows share the product (blocked GEMM rounds by position).
    const RowMatrix w = set.weights();
    const Vector b = set.biases();
    Matrix scores(w.rows(), static_cast<Eigen::Index>(trajectorylets.size()));
    for (std::size_t j = 0; j < trajectorylets.size(); ++j) {
        if (trajectorylets[j].values.size() != set.dim()) {
            throw dimension_error("trajectorylet dimension " + std::to_string(trajectorylets[j].values.size()) +
                                  " does not match the template set (" + std::to_string(set.dim()) + ")");
        }
        scores.col(static_cast<Eigen::Index>(j)).noalias() = w * trajectorylets[j].values;
        scores.col(static_cast<Eigen::Index>(j)) += b;
    }
    return scores;
}

}  // namespace detail

/// Component k is the largest score of template detector k over the instance.
inline ActionEncoding encode(const TemplateDetectorSet &set, std::span<const Trajectorylet> trajectorylets) {
    const Matrix scores = detail::template_scores(set, trajectorylets);
    ActionEncoding enc;
    enc.values = scores.rowwise().maxCoeff();
    enc.levels = 1;
    enc.instance = trajectorylets.front().source_instance;
    enc.label = trajectorylets.front().class_label;
    return enc;
}

/// Max-pooled blocks for every pyramid segment, concatenated level by level.
/// An empty segment repeats the whole-instance block.
inline ActionEncoding encode_pyramid(const TemplateDetectorSet &set, std::span<const Trajectorylet> trajectorylets,
                                     int levels) {
    const auto segments = pyramid_segments(trajectorylets.size(), levels);
    const Matrix scores = detail::template_scores(set, trajectorylets);
    const Eigen::Index k = scores.rows();
    const Vector whole = scores.rowwise().maxCoeff();
    ActionEncoding enc;
    enc.values.resize(k * static_cast<Eigen::Index>(segments.size()));
    for (std::size_t p = 0; p < segments.size(); ++p) {
        const auto [begin, end] = segments[p];
        auto block = enc.values.segment(static_cast<Eigen::Index>(p) * k, k);
        if (begin == end) {
            block = whole;
        } else {
            block = scores.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin))
                        .rowwise()
                        .maxCoeff();
        }
    }
    enc.levels = levels;
    enc.instance = trajectorylets.front().source_instance;
    enc.label = trajectorylets.front().class_label;
    return enc;
}

/// One instance per line: `label v_1 ... v_dim` (label 0 when unknown).
inline void write_encodings(std::ostream &out, std::span<const ActionEncoding> encodings) {
    for (const auto &e : encodings) {
        out << e.label.value_or(0);
        for (Eigen::Index i = 0; i < e.values.size(); ++i) {
            out << ' ' << format_real(e.values[i]);
        }
        out << '\n';
    }
}

inline std::vector<ActionEncoding> read_encodings(std::istream &in) {
    std::vector<ActionEncoding> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto fields = split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        ActionEncoding e;
        e.label = static_cast<int>(parse_integer(fields[0]));
        e.values.resize(static_cast<Eigen::Index>(fields.size()) - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            e.values[static_cast<Eigen::Index>(i) - 1] = parse_real(fields[i]);
        }
        if (!out.empty() && out.front().values.size() != e.values.size()) {
            throw parse_error("encodings differ in dimension");
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace trajlet
