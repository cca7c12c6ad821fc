#pragma once

// Dataset directories and the train/test protocols evaluated on them.

#include "trajlet/common.hpp"
#include "trajlet/config.hpp"
#include "trajlet/skeleton_io.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace trajlet {

/// MSR Action3D class names, indexed by label - 1.
inline const std::array<std::string, 20> &action3d_class_names() {
    static const std::array<std::string, 20> names{
        "high arm wave", "horizontal arm wave", "hammer",       "hand catch",    "forward punch",
        "high throw",    "draw x",              "draw tick",    "draw circle",   "hand clap",
        "two hand wave", "side boxing",         "bend",         "forward kick",  "side kick",
        "jogging",       "tennis swing",        "tennis serve", "golf swing",    "pickup & throw"};
    return names;
}

struct ActionSubset {
    std::string name;
    std::vector<int> classes;
};

/// The three MSR Action3D subsets AS1, AS2 and AS3.
inline std::vector<ActionSubset> action3d_subsets() {
    return {{"AS1", {2, 3, 5, 6, 10, 13, 18, 20}},
            {"AS2", {1, 4, 7, 8, 9, 11, 12, 14}},
            {"AS3", {6, 14, 15, 16, 17, 18, 19, 20}}};
}

/// Instance ids to skip, one per line; '#' starts a comment.
inline std::set<std::string> read_exclusion_list(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw error("cannot open exclusion list '" + path.string() + "'");
    }
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view text = line;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = trim(text);
        if (!text.empty()) {
            out.emplace(text);
        }
    }
    return out;
}

/// Loads every instance of a directory in file-name order: `*.skel` files for the
/// canonical format, `*_skeleton*.txt` files for MSR.
inline std::vector<SkeletonSequence> load_dataset(const std::filesystem::path &dir, FileFormat format,
                                                  const MsrOptions &msr = {},
                                                  const std::set<std::string> &excluded = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw error("dataset directory '" + dir.string() + "' does not exist");
    }
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const auto name = entry.path().filename().string();
        const bool wanted = format == FileFormat::canonical
                                ? entry.path().extension() == ".skel"
                                : name.find("_skeleton") != std::string::npos && entry.path().extension() == ".txt";
        if (wanted) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<SkeletonSequence> out;
    for (const auto &file : files) {
        auto seq = load_instance(file, format, msr);
        if (!excluded.contains(seq.instance_id)) {
            out.push_back(std::move(seq));
        }
    }
    if (out.empty()) {
        throw error("no instances found in '" + dir.string() + "'");
    }
    return out;
}

inline std::vector<SkeletonSequence> load_dataset(const PipelineConfig &cfg) {
    if (cfg.data_dir.empty()) {
        throw invalid_argument("data_dir is not set");
    }
    MsrOptions msr;
    msr.layout = cfg.msr_layout;
    const auto excluded = cfg.exclusion_list.empty() ? std::set<std::string>{} : read_exclusion_list(cfg.exclusion_list);
    return load_dataset(cfg.data_dir, cfg.format, msr, excluded);
}

struct Split {
    std::string name;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

namespace detail {

inline Split subject_split(std::span<const SkeletonSequence> data, const std::string &name,
                           const std::set<int> &classes, const std::set<int> &train_subjects,
                           const std::set<int> &test_subjects, bool odd_even) {
    Split split{name, {}, {}};
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!classes.empty() && !classes.contains(data[i].class_label)) {
            continue;
        }
        const int s = data[i].subject_id;
        if (odd_even) {
            (s % 2 != 0 ? split.train : split.test).push_back(i);
        } else if (train_subjects.contains(s)) {
            split.train.push_back(i);
        } else if (test_subjects.contains(s)) {
            split.test.push_back(i);
        }
    }
    if (split.train.empty()) {
        throw invalid_argument("split '" + name + "' has no training instances");
    }
    if (split.test.empty()) {
        throw invalid_argument("split '" + name + "' has no test instances");
    }
    return split;
}

}  // namespace detail

/// Cross-subject splits: odd-numbered subjects train and even-numbered subjects
/// test, unless the protocol is custom_split with explicit subject lists.
inline std::vector<Split> make_splits(std::span<const SkeletonSequence> data, const PipelineConfig &cfg) {
    switch (cfg.protocol) {
    case ProtocolKind::cross_subject_all:
        return {detail::subject_split(data, "all", {}, {}, {}, true)};
    case ProtocolKind::custom_split: {
        const std::set<int> train(cfg.train_subjects.begin(), cfg.train_subjects.end());
        const std::set<int> test(cfg.test_subjects.begin(), cfg.test_subjects.end());
        for (const int s : test) {
            if (train.contains(s)) {
                throw invalid_argument("subject " + std::to_string(s) + " is in both train and test splits");
            }
        }
        return {detail::subject_split(data, "custom", {}, train, test, false)};
    }
    case ProtocolKind::as_subsets: {
        std::set<int> present;
        for (const auto &seq : data) {
            present.insert(seq.class_label);
        }
        std::vector<Split> out;
        for (const auto &subset : action3d_subsets()) {
            for (const int c : subset.classes) {
                if (!present.contains(c)) {
                    throw invalid_argument("class " + std::to_string(c) + " of " + subset.name +
                                           " is absent from the dataset");
                }
            }
            out.push_back(detail::subject_split(data, subset.name, {subset.classes.begin(), subset.classes.end()}, {},
                                                {}, true));
        }
        return out;
    }
    }
    throw invalid_argument("unknown protocol");
}

}  // namespace trajlet
