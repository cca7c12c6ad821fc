#pragma once

// Pipeline configuration as a flat `key=value` text file.

#include "trajlet/common.hpp"
#include "trajlet/detector_mining.hpp"
#include "trajlet/linear_svm.hpp"
#include "trajlet/skeleton_io.hpp"
#include "trajlet/trajectorylet.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace trajlet {

enum class ProtocolKind { cross_subject_all, as_subsets, custom_split };

inline std::string to_string(ProtocolKind kind) {
    switch (kind) {
    case ProtocolKind::cross_subject_all:
        return "cross_subject_all";
    case ProtocolKind::as_subsets:
        return "as_subsets";
    case ProtocolKind::custom_split:
        return "custom_split";
    }
    return "?";
}

struct PipelineConfig {
    TrajectoryletConfig trajectorylet;
    EsvmParams esvm;
    std::size_t pool_size = 10000;
    std::uint64_t pool_seed = 1;
    MiningParams mining;
    int clusters = 500;
    std::uint64_t cluster_seed = 1;
    int pyramid_levels = 1;
    std::vector<double> cv_grid = default_c_grid();
    int cv_folds = 5;
    std::uint64_t cv_seed = 1;
    int threads = 1;

    std::string data_dir;
    FileFormat format = FileFormat::canonical;
    MsrLayout msr_layout = MsrLayout::real_world;
    std::string exclusion_list;
    ProtocolKind protocol = ProtocolKind::cross_subject_all;
    std::vector<int> train_subjects;
    std::vector<int> test_subjects;

    /// Settings used for MSR Action3D: L=5, N_A=50, M_A=10, K=500, no pyramid.
    static PipelineConfig action3d() { return PipelineConfig{}; }

    /// MSR DailyActivity3D: M_A=15 and a 3-level temporal pyramid.
    static PipelineConfig daily_activity() {
        PipelineConfig cfg;
        cfg.mining.per_instance_budget = 15;
        cfg.pyramid_levels = 3;
        return cfg;
    }

    void validate() const {
        trajectorylet.validate();
        esvm.validate();
        mining.validate();
        if (pool_size < static_cast<std::size_t>(mining.n_top)) {
            throw invalid_argument("pool_size must be at least n_top");
        }
        if (clusters < 1 || pyramid_levels < 1 || cv_folds < 2 || threads < 1) {
            throw invalid_argument("clusters, pyramid_levels and threads must be >= 1 and cv_folds >= 2");
        }
        if (cv_grid.empty()) {
            throw invalid_argument("cv_grid must not be empty");
        }
        for (const double c : cv_grid) {
            if (!(c > 0.0)) {
                throw invalid_argument("cv_grid values must be positive");
            }
        }
        if (protocol == ProtocolKind::custom_split) {
            if (train_subjects.empty() || test_subjects.empty()) {
                throw invalid_argument("custom_split needs train_subjects and test_subjects");
            }
            const std::set<int> train(train_subjects.begin(), train_subjects.end());
            for (const int s : test_subjects) {
                if (train.contains(s)) {
                    throw invalid_argument("subject " + std::to_string(s) + " is in both train and test splits");
                }
            }
        }
    }

    /// Every key understood by set(), in file order.
    static const std::vector<std::string> &keys() {
        static const std::vector<std::string> k{
            "trajectory_length", "components",     "pca_fraction",   "lambda_pos",     "lambda_neg",
            "esvm_max_iterations", "esvm_tolerance", "pool_size",      "pool_seed",      "n_top",
            "per_instance_budget", "clusters",       "cluster_seed",   "pyramid_levels", "cv_grid",
            "cv_folds",           "cv_seed",        "threads",        "data_dir",       "format",
            "msr_layout",         "exclusion_list", "protocol",       "train_subjects", "test_subjects"};
        return k;
    }

    static const std::vector<std::string> &seed_keys() {
        static const std::vector<std::string> k{"pool_seed", "cluster_seed", "cv_seed"};
        return k;
    }

    void set(const std::string &key, const std::string &value);
    [[nodiscard]] std::string get(const std::string &key) const;
};

namespace detail {

inline std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    if (trim(text).empty()) {
        return out;
    }
    for (const auto part : split(text, ',')) {
        out.push_back(static_cast<int>(parse_integer(trim(part))));
    }
    return out;
}

inline std::string join_ints(const std::vector<int> &values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

inline std::uint64_t parse_seed(std::string_view text) {
    const auto v = parse_integer(text);
    if (v < 0) {
        throw parse_error("seeds must be non-negative");
    }
    return static_cast<std::uint64_t>(v);
}

inline int parse_int(std::string_view text) { return static_cast<int>(parse_integer(text)); }

}  // namespace detail

/// `components` accepts x0..x3 separated by ',' or '+'.
inline void PipelineConfig::set(const std::string &key, const std::string &raw) {
    using namespace detail;
    const std::string value(trim(raw));
    if (key == "trajectory_length") {
        trajectorylet.length = parse_int(value);
    } else if (key == "components") {
        trajectorylet.components.clear();
        std::string normalized = value;
        std::replace(normalized.begin(), normalized.end(), '+', ',');
        for (const auto part : split(normalized, ',')) {
            trajectorylet.components.push_back(parse_component(trim(part)));
        }
    } else if (key == "pca_fraction") {
        trajectorylet.pca_retain_fraction = parse_real(value);
    } else if (key == "lambda_pos") {
        esvm.lambda_pos = parse_real(value);
    } else if (key == "lambda_neg") {
        esvm.lambda_neg = parse_real(value);
    } else if (key == "esvm_max_iterations") {
        esvm.max_iterations = static_cast<long>(parse_integer(value));
    } else if (key == "esvm_tolerance") {
        esvm.convergence_tolerance = parse_real(value);
    } else if (key == "pool_size") {
        const auto n = parse_integer(value);
        if (n < 1) {
            throw parse_error("pool_size must be positive");
        }
        pool_size = static_cast<std::size_t>(n);
    } else if (key == "pool_seed") {
        pool_seed = parse_seed(value);
    } else if (key == "n_top") {
        mining.n_top = parse_int(value);
    } else if (key == "per_instance_budget") {
        mining.per_instance_budget = parse_int(value);
    } else if (key == "clusters") {
        clusters = parse_int(value);
    } else if (key == "cluster_seed") {
        cluster_seed = parse_seed(value);
    } else if (key == "pyramid_levels") {
        pyramid_levels = parse_int(value);
    } else if (key == "cv_grid") {
        cv_grid.clear();
        for (const auto part : split(value, ',')) {
            cv_grid.push_back(parse_real(trim(part)));
        }
    } else if (key == "cv_folds") {
        cv_folds = parse_int(value);
    } else if (key == "cv_seed") {
        cv_seed = parse_seed(value);
    } else if (key == "threads") {
        threads = parse_int(value);
    } else if (key == "data_dir") {
        data_dir = value;
    } else if (key == "format") {
        if (value == "canonical") {
            format = FileFormat::canonical;
        } else if (value == "msr" || value == "msr_skeleton") {
            format = FileFormat::msr_skeleton;
        } else {
            throw parse_error("format must be 'canonical' or 'msr'");
        }
    } else if (key == "msr_layout") {
        if (value == "real_world") {
            msr_layout = MsrLayout::real_world;
        } else if (value == "screen") {
            msr_layout = MsrLayout::screen;
        } else {
            throw parse_error("msr_layout must be 'real_world' or 'screen'");
        }
    } else if (key == "exclusion_list") {
        exclusion_list = value;
    } else if (key == "protocol") {
        if (value == "cross_subject_all") {
            protocol = ProtocolKind::cross_subject_all;
        } else if (value == "as_subsets") {
            protocol = ProtocolKind::as_subsets;
        } else if (value == "custom_split") {
            protocol = ProtocolKind::custom_split;
        } else {
            throw parse_error("protocol must be cross_subject_all, as_subsets or custom_split");
        }
    } else if (key == "train_subjects") {
        train_subjects = parse_int_list(value);
    } else if (key == "test_subjects") {
        test_subjects = parse_int_list(value);
    } else {
        throw parse_error("unknown configuration key '" + key + "'");
    }
}

inline std::string PipelineConfig::get(const std::string &key) const {
    using namespace detail;
    if (key == "trajectory_length") return std::to_string(trajectorylet.length);
    if (key == "components") {
        std::string out;
        for (const auto c : trajectorylet.ordered_components()) {
            out += (out.empty() ? "" : ",") + to_string(c);
        }
        return out;
    }
    if (key == "pca_fraction") return format_real(trajectorylet.pca_retain_fraction);
    if (key == "lambda_pos") return format_real(esvm.lambda_pos);
    if (key == "lambda_neg") return format_real(esvm.lambda_neg);
    if (key == "esvm_max_iterations") return std::to_string(esvm.max_iterations);
    if (key == "esvm_tolerance") return format_real(esvm.convergence_tolerance);
    if (key == "pool_size") return std::to_string(pool_size);
    if (key == "pool_seed") return std::to_string(pool_seed);
    if (key == "n_top") return std::to_string(mining.n_top);
    if (key == "per_instance_budget") return std::to_string(mining.per_instance_budget);
    if (key == "clusters") return std::to_string(clusters);
    if (key == "cluster_seed") return std::to_string(cluster_seed);
    if (key == "pyramid_levels") return std::to_string(pyramid_levels);
    if (key == "cv_grid") {
        std::string out;
        for (std::size_t i = 0; i < cv_grid.size(); ++i) {
            out += (i ? "," : "") + format_real(cv_grid[i]);
        }
        return out;
    }
    if (key == "cv_folds") return std::to_string(cv_folds);
    if (key == "cv_seed") return std::to_string(cv_seed);
    if (key == "threads") return std::to_string(threads);
    if (key == "data_dir") return data_dir;
    if (key == "format") return format == FileFormat::canonical ? "canonical" : "msr";
    if (key == "msr_layout") return msr_layout == MsrLayout::real_world ? "real_world" : "screen";
    if (key == "exclusion_list") return exclusion_list;
    if (key == "protocol") return to_string(protocol);
    if (key == "train_subjects") return join_ints(train_subjects);
    if (key == "test_subjects") return join_ints(test_subjects);
    throw parse_error("unknown configuration key '" + key + "'");
}

/// Reads `key=value` lines ('#' starts a comment) on top of `base`.
/// The seed keys must be present when `require_seeds` is set.
inline PipelineConfig read_config(std::istream &in, PipelineConfig base = {}, bool require_seeds = true) {
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = line;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = trim(text);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw parse_error("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key(trim(text.substr(0, eq)));
        try {
            base.set(key, std::string(text.substr(eq + 1)));
        } catch (const parse_error &e) {
            throw parse_error("config line " + std::to_string(line_no) + ": " + e.what());
        }
        seen.insert(key);
    }
    if (require_seeds) {
        for (const auto &key : PipelineConfig::seed_keys()) {
            if (!seen.contains(key)) {
                throw parse_error("config is missing the mandatory seed '" + key + "'");
            }
        }
    }
    return base;
}

inline void write_config(std::ostream &out, const PipelineConfig &cfg) {
    for (const auto &key : PipelineConfig::keys()) {
        out << key << '=' << cfg.get(key) << '\n';
    }
}

}  // namespace trajlet
