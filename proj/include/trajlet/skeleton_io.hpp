#pragma once

// Skeleton sequence loading, limb-length size normalization and hip centering.

#include "trajlet/common.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

namespace trajlet {

using Joint = Eigen::Vector3d;

struct JointFrame {
    std::vector<Joint> joints;
    int timestamp_index = 0;
};

/// A limb: the child joint hangs off the parent joint.
struct Edge {
    int parent = 0;
    int child = 0;

    friend bool operator==(const Edge &, const Edge &) = default;
};

/// One recorded action instance.
struct SkeletonSequence {
    std::vector<JointFrame> frames;
    int class_label = 0;
    int subject_id = 0;
    int trial_id = 0;
    int joint_count = 0;
    int hip_index = 0;
    std::vector<Edge> topology;
    std::string instance_id;

    [[nodiscard]] int frame_count() const noexcept { return static_cast<int>(frames.size()); }
};

/// Reference length per topology edge, in the edge order of `topology`.
struct LimbReference {
    std::vector<Edge> topology;
    std::vector<double> lengths;
};

enum class FileFormat { canonical, msr_skeleton };

/// MSR skeleton files come with either world coordinates (x, y, z) or screen
/// coordinates (u, v, depth).
enum class MsrLayout { real_world, screen };

struct MsrOptions {
    MsrLayout layout = MsrLayout::real_world;
    int joint_count = 20;
    int hip_index = 6;
    std::vector<Edge> topology;  // empty: the 20-joint Kinect topology below
};

/// 20-joint MSR Action3D skeleton, rooted at the hip center (index 6).
///
/// Joint order: 0 right shoulder, 1 left shoulder, 2 neck, 3 spine, 4 right hip,
/// 5 left hip, 6 hip center, 7 right elbow, 8 left elbow, 9 right wrist,
/// 10 left wrist, 11 right hand, 12 left hand, 13 right knee, 14 left knee,
/// 15 right ankle, 16 left ankle, 17 right foot, 18 left foot, 19 head.
inline std::vector<Edge> msr_action3d_topology() {
    return {{6, 3},   {3, 2},   {2, 0},   {2, 1},   {2, 19},  {0, 7},   {7, 9},
            {9, 11},  {1, 8},   {8, 10},  {10, 12}, {6, 4},   {4, 13},  {13, 15},
            {15, 17}, {6, 5},   {5, 14},  {14, 16}, {16, 18}};
}

namespace detail {

/// Edges reordered so every parent is placed before its children (BFS from the root).
/// Throws unless the edges form a spanning tree of `joint_count` joints rooted at `root`.
inline std::vector<Edge> tree_order(std::span<const Edge> topology, int joint_count, int root) {
    if (joint_count < 2) {
        throw invalid_argument("skeleton needs at least 2 joints, got " + std::to_string(joint_count));
    }
    if (root < 0 || root >= joint_count) {
        throw invalid_argument("hip index " + std::to_string(root) + " out of range");
    }
    if (static_cast<int>(topology.size()) != joint_count - 1) {
        throw invalid_argument("topology must have J-1 = " + std::to_string(joint_count - 1) +
                               " edges, got " + std::to_string(topology.size()));
    }
    std::vector<int> parent_of(static_cast<std::size_t>(joint_count), -1);
    for (const Edge &e : topology) {
        if (e.parent < 0 || e.parent >= joint_count || e.child < 0 || e.child >= joint_count) {
            throw invalid_argument("topology edge references a joint out of range");
        }
        if (e.child == root) {
            throw invalid_argument("topology edge points into the root joint");
        }
        if (parent_of[static_cast<std::size_t>(e.child)] != -1) {
            throw invalid_argument("joint " + std::to_string(e.child) + " has two parents");
        }
        parent_of[static_cast<std::size_t>(e.child)] = e.parent;
    }
    std::vector<Edge> ordered;
    ordered.reserve(topology.size());
    std::vector<int> frontier{root};
    std::vector<bool> seen(static_cast<std::size_t>(joint_count), false);
    seen[static_cast<std::size_t>(root)] = true;
    for (std::size_t head = 0; head < frontier.size(); ++head) {
        const int joint = frontier[head];
        for (const Edge &e : topology) {
            if (e.parent == joint && !seen[static_cast<std::size_t>(e.child)]) {
                seen[static_cast<std::size_t>(e.child)] = true;
                ordered.push_back(e);
                frontier.push_back(e.child);
            }
        }
    }
    if (static_cast<int>(frontier.size()) != joint_count) {
        throw invalid_argument("topology is not a spanning tree rooted at the hip joint");
    }
    return ordered;
}

inline void check_finite(const Joint &j, int frame, int joint) {
    if (!j.allFinite()) {
        throw invalid_argument("non-finite coordinate at frame " + std::to_string(frame) + ", joint " +
                               std::to_string(joint));
    }
}

}  // namespace detail

/// Checks every structural invariant of a sequence; throws invalid_argument.
inline void validate(const SkeletonSequence &seq) {
    if (seq.frames.empty()) {
        throw invalid_argument("sequence '" + seq.instance_id + "' has no frames");
    }
    detail::tree_order(seq.topology, seq.joint_count, seq.hip_index);
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const auto &frame = seq.frames[f];
        if (static_cast<int>(frame.joints.size()) != seq.joint_count) {
            throw invalid_argument("frame " + std::to_string(f) + " has " + std::to_string(frame.joints.size()) +
                                   " joints, expected " + std::to_string(seq.joint_count));
        }
        for (std::size_t j = 0; j < frame.joints.size(); ++j) {
            detail::check_finite(frame.joints[j], static_cast<int>(f), static_cast<int>(j));
        }
    }
}

// ---------------------------------------------------------------------------
// canonical text format

inline SkeletonSequence parse_canonical(std::istream &in, std::string instance_id) {
    SkeletonSequence seq;
    seq.instance_id = std::move(instance_id);
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw parse_error("empty file");
    }
    int frame_count = -1;
    bool have_hip = false;
    int seen_keys = 0;
    for (const auto field : split_whitespace(line)) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) {
            throw parse_error("header field without '=': '" + std::string(field) + "'");
        }
        const auto key = field.substr(0, eq);
        const auto value = static_cast<int>(parse_integer(field.substr(eq + 1)));
        if (key == "F") {
            frame_count = value;
        } else if (key == "J") {
            seq.joint_count = value;
        } else if (key == "class") {
            seq.class_label = value;
        } else if (key == "subject") {
            seq.subject_id = value;
        } else if (key == "trial") {
            seq.trial_id = value;
        } else if (key == "hip") {
            seq.hip_index = value;
            have_hip = true;
        } else {
            throw parse_error("unknown header key '" + std::string(key) + "'");
        }
        ++seen_keys;
    }
    if (seen_keys != 6 || !have_hip || frame_count < 1 || seq.joint_count < 2) {
        throw parse_error("header must be 'F=<int> J=<int> class=<int> subject=<int> trial=<int> hip=<int>'");
    }

    if (!std::getline(in, line)) {
        throw parse_error("missing topology line");
    }
    const auto topo_fields = split_whitespace(line);
    if (topo_fields.empty() || topo_fields.front() != "topology=") {
        throw parse_error("second line must start with 'topology='");
    }
    for (std::size_t k = 1; k < topo_fields.size(); ++k) {
        const auto colon = topo_fields[k].find(':');
        if (colon == std::string_view::npos) {
            throw parse_error("topology pair without ':': '" + std::string(topo_fields[k]) + "'");
        }
        seq.topology.push_back({static_cast<int>(parse_integer(topo_fields[k].substr(0, colon))),
                                static_cast<int>(parse_integer(topo_fields[k].substr(colon + 1)))});
    }

    seq.frames.resize(static_cast<std::size_t>(frame_count));
    for (int f = 0; f < frame_count; ++f) {
        auto &frame = seq.frames[static_cast<std::size_t>(f)];
        frame.timestamp_index = f;
        frame.joints.reserve(static_cast<std::size_t>(seq.joint_count));
        for (int j = 0; j < seq.joint_count; ++j) {
            if (!std::getline(in, line)) {
                throw parse_error("frame " + std::to_string(f) + " has " + std::to_string(j) + " joint rows, expected " +
                                  std::to_string(seq.joint_count));
            }
            const auto fields = split_whitespace(line);
            if (fields.size() != 3) {
                throw parse_error("frame " + std::to_string(f) + ", joint " + std::to_string(j) +
                                  ": expected 3 coordinates, got " + std::to_string(fields.size()));
            }
            frame.joints.emplace_back(parse_real(fields[0]), parse_real(fields[1]), parse_real(fields[2]));
        }
    }
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            throw parse_error("trailing data after " + std::to_string(frame_count) + " frames");
        }
    }
    try {
        validate(seq);
    } catch (const invalid_argument &e) {
        throw parse_error(e.what());
    }
    return seq;
}

inline void write_canonical(std::ostream &out, const SkeletonSequence &seq) {
    out << "F=" << seq.frame_count() << " J=" << seq.joint_count << " class=" << seq.class_label
        << " subject=" << seq.subject_id << " trial=" << seq.trial_id << " hip=" << seq.hip_index << '\n';
    out << "topology=";
    for (const Edge &e : seq.topology) {
        out << ' ' << e.parent << ':' << e.child;
    }
    out << '\n';
    for (const auto &frame : seq.frames) {
        for (const auto &j : frame.joints) {
            out << format_real(j.x()) << ' ' << format_real(j.y()) << ' ' << format_real(j.z()) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// MSR skeleton files

struct MsrFileLabels {
    int class_label = 0;
    int subject_id = 0;
    int trial_id = 0;
};

/// Labels from the `a<class>_s<subject>_e<trial>_skeleton*.txt` naming convention.
inline MsrFileLabels parse_msr_filename(const std::string &filename) {
    static const std::regex pattern(R"(a(\d+)_s(\d+)_e(\d+)_skeleton.*\.txt)");
    std::smatch m;
    if (!std::regex_match(filename, m, pattern)) {
        throw parse_error("file name '" + filename + "' does not match a<class>_s<subject>_e<trial>_skeleton*.txt");
    }
    return {std::stoi(m[1].str()), std::stoi(m[2].str()), std::stoi(m[3].str())};
}

inline SkeletonSequence parse_msr(std::istream &in, const std::string &filename, const MsrOptions &options) {
    const auto labels = parse_msr_filename(filename);
    SkeletonSequence seq;
    seq.instance_id = filename.substr(0, filename.find("_skeleton"));
    seq.class_label = labels.class_label;
    seq.subject_id = labels.subject_id;
    seq.trial_id = labels.trial_id;
    seq.joint_count = options.joint_count;
    seq.hip_index = options.hip_index;
    seq.topology = options.topology.empty() ? msr_action3d_topology() : options.topology;

    // Two variants: plain 4-column rows, J per frame (Action3D), or a `frames joints`
    // header with a row-count line before each frame (DailyActivity3D). In the
    // latter a frame of 2J rows interleaves world and screen rows per joint.
    const auto J = static_cast<std::size_t>(options.joint_count);
    std::vector<std::vector<Joint>> frames(1);
    std::string line;
    std::size_t line_no = 0;
    bool counted = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        const std::string where = filename + ":" + std::to_string(line_no);
        if (fields.size() == 2 && line_no == 1) {
            counted = true;
            if (parse_integer(fields[1]) != options.joint_count) {
                throw parse_error(where + ": file declares " + std::string(fields[1]) + " joints, expected " +
                                  std::to_string(J));
            }
            continue;
        }
        if (fields.size() == 1 && counted) {
            if (!frames.back().empty()) {
                frames.emplace_back();
            }
            continue;
        }
        if (fields.size() != 4) {
            throw parse_error(where + ": expected 4 values (x y z confidence), got " + std::to_string(fields.size()));
        }
        const double a = parse_real(fields[0]);
        const double b = parse_real(fields[1]);
        const double c = parse_real(fields[2]);
        frames.back().emplace_back(a, b, c);
    }
    if (frames.back().empty()) {
        frames.pop_back();
    }
    if (frames.empty()) {
        throw parse_error(filename + ": empty file");
    }
    if (!counted) {
        // one flat list of rows, J per frame
        auto rows = std::move(frames.front());
        if (rows.size() % J != 0) {
            throw parse_error(filename + ": frame " + std::to_string(rows.size() / J) + " has " +
                              std::to_string(rows.size() % J) + " joint rows, expected " + std::to_string(J));
        }
        frames.assign(rows.size() / J, {});
        for (std::size_t k = 0; k < rows.size(); ++k) {
            frames[k / J].push_back(rows[k]);
        }
    }
    for (std::size_t f = 0; f < frames.size(); ++f) {
        auto rows = std::move(frames[f]);
        if (rows.size() == 2 * J) {
            std::vector<Joint> picked;
            for (std::size_t j = 0; j < J; ++j) {
                picked.push_back(rows[2 * j + (options.layout == MsrLayout::screen ? 1 : 0)]);
            }
            rows = std::move(picked);
        } else if (rows.size() != J) {
            throw parse_error(filename + ": frame " + std::to_string(f) + " has " + std::to_string(rows.size()) +
                              " joint rows, expected " + std::to_string(J));
        }
        JointFrame frame;
        frame.timestamp_index = static_cast<int>(f);
        for (const auto &r : rows) {
            // image rows grow downwards
            frame.joints.push_back(options.layout == MsrLayout::screen ? Joint(r.x(), -r.y(), r.z()) : r);
        }
        seq.frames.push_back(std::move(frame));
    }
    try {
        validate(seq);
    } catch (const invalid_argument &e) {
        throw parse_error(filename + ": " + e.what());
    }
    return seq;
}

inline SkeletonSequence load_instance(const std::filesystem::path &path, FileFormat format,
                                      const MsrOptions &msr_options = {}) {
    std::ifstream in(path);
    if (!in) {
        throw parse_error("cannot open '" + path.string() + "'");
    }
    if (format == FileFormat::canonical) {
        try {
            return parse_canonical(in, path.stem().string());
        } catch (const parse_error &e) {
            throw parse_error(path.string() + ": " + e.what());
        }
    }
    return parse_msr(in, path.filename().string(), msr_options);
}

inline void save_canonical(const std::filesystem::path &path, const SkeletonSequence &seq) {
    std::ofstream out(path);
    if (!out) {
        throw error("cannot write '" + path.string() + "'");
    }
    write_canonical(out, seq);
}

// ---------------------------------------------------------------------------
// size normalization

/// Mean length of every limb over all frames of the training instances.
inline LimbReference compute_reference_limb_lengths(std::span<const SkeletonSequence> training) {
    if (training.empty()) {
        throw invalid_argument("cannot compute limb lengths from an empty training set");
    }
    LimbReference ref;
    ref.topology = training.front().topology;
    ref.lengths.assign(ref.topology.size(), 0.0);
    std::size_t frames = 0;
    for (const auto &seq : training) {
        if (seq.topology != ref.topology || seq.joint_count != training.front().joint_count) {
            throw invalid_argument("instance '" + seq.instance_id + "' has a different skeleton topology");
        }
        for (const auto &frame : seq.frames) {
            for (std::size_t e = 0; e < ref.topology.size(); ++e) {
                const auto &edge = ref.topology[e];
                ref.lengths[e] += (frame.joints[static_cast<std::size_t>(edge.child)] -
                                   frame.joints[static_cast<std::size_t>(edge.parent)])
                                      .norm();
            }
            ++frames;
        }
    }
    for (double &len : ref.lengths) {
        len /= static_cast<double>(frames);
    }
    return ref;
}

/// Rebuilds each frame outward from the hip so every limb keeps its direction
/// but takes its reference length. A zero-length limb keeps the child on its parent.
inline SkeletonSequence normalize_skeleton_size(const SkeletonSequence &seq, const LimbReference &ref) {
    if (seq.topology != ref.topology || ref.lengths.size() != ref.topology.size()) {
        throw invalid_argument("instance '" + seq.instance_id + "' does not match the limb reference topology");
    }
    const auto order = detail::tree_order(seq.topology, seq.joint_count, seq.hip_index);
    std::vector<double> length_of_child(static_cast<std::size_t>(seq.joint_count), 0.0);
    for (std::size_t e = 0; e < ref.topology.size(); ++e) {
        length_of_child[static_cast<std::size_t>(ref.topology[e].child)] = ref.lengths[e];
    }

    SkeletonSequence out = seq;
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const auto &src = seq.frames[f].joints;
        auto &dst = out.frames[f].joints;
        for (const Edge &e : order) {
            const auto p = static_cast<std::size_t>(e.parent);
            const auto c = static_cast<std::size_t>(e.child);
            const Joint offset = src[c] - src[p];
            const double len = offset.norm();
            dst[c] = len > 0.0 ? Joint(dst[p] + offset * (length_of_child[c] / len)) : dst[p];
        }
    }
    return out;
}

/// [j_1 - j_hip, ..., j_J - j_hip] as one 3J vector.
inline Vector center_at_hip(const JointFrame &frame, int hip_index) {
    if (hip_index < 0 || hip_index >= static_cast<int>(frame.joints.size())) {
        throw invalid_argument("hip index out of range");
    }
    const Joint hip = frame.joints[static_cast<std::size_t>(hip_index)];
    Vector out(3 * static_cast<Eigen::Index>(frame.joints.size()));
    for (std::size_t j = 0; j < frame.joints.size(); ++j) {
        out.segment<3>(3 * static_cast<Eigen::Index>(j)) = frame.joints[j] - hip;
    }
    return out;
}

inline std::vector<Vector> hip_centered_frames(const SkeletonSequence &seq) {
    std::vector<Vector> out;
    out.reserve(seq.frames.size());
    for (const auto &frame : seq.frames) {
        out.push_back(center_at_hip(frame, seq.hip_index));
    }
    return out;
}

// ---------------------------------------------------------------------------
// limb reference persistence

inline void write_limb_reference(std::ostream &out, const LimbReference &ref) {
    out << "edges=" << ref.topology.size() << '\n';
    for (std::size_t e = 0; e < ref.topology.size(); ++e) {
        out << ref.topology[e].parent << ':' << ref.topology[e].child << ' ' << format_real(ref.lengths[e]) << '\n';
    }
}

inline LimbReference read_limb_reference(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("edges=")) {
        throw parse_error("limb reference must start with 'edges=<n>'");
    }
    const auto n = parse_integer(std::string_view(line).substr(6));
    LimbReference ref;
    for (long long e = 0; e < n; ++e) {
        if (!std::getline(in, line)) {
            throw parse_error("limb reference truncated");
        }
        const auto fields = split_whitespace(line);
        const auto colon = fields.empty() ? std::string_view::npos : fields[0].find(':');
        if (fields.size() != 2 || colon == std::string_view::npos) {
            throw parse_error("limb reference row must be 'parent:child length'");
        }
        ref.topology.push_back({static_cast<int>(parse_integer(fields[0].substr(0, colon))),
                                static_cast<int>(parse_integer(fields[0].substr(colon + 1)))});
        const double len = parse_real(fields[1]);
        if (!std::isfinite(len) || len < 0.0) {
            throw parse_error("limb length must be finite and non-negative");
        }
        ref.lengths.push_back(len);
    }
    return ref;
}

}  // namespace trajlet
