#pragma once

// Synthetic skeleton datasets for desk-scale experiments. Every instance is a
// long stretch of idle motion shared by all classes; a short class-specific
// limb movement (the motif) is planted at a random time. Subjects differ in
// body size and the whole body drifts, so size normalization and hip centering
// both have work to do.

#include "trajlet/common.hpp"
#include "trajlet/skeleton_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace trajlet {

struct SyntheticSpec {
    int classes = 4;
    int instances_per_class = 40;
    int joints = 8;
    int min_frames = 30;
    int max_frames = 50;
    /// Standard deviation of the per-coordinate Gaussian noise, in meters.
    double noise = 0.01;
    int motif_length = 5;
    int subjects = 10;
    std::uint64_t seed = 1;

    void validate() const {
        if (classes < 2) {
            throw invalid_argument("synthetic data needs at least 2 classes");
        }
        if (instances_per_class < 1 || subjects < 1) {
            throw invalid_argument("synthetic data needs instances and subjects");
        }
        if (joints < 2) {
            throw invalid_argument("synthetic skeletons need at least 2 joints");
        }
        if (motif_length < 1 || min_frames < motif_length || max_frames < min_frames) {
            throw invalid_argument("synthetic frame range must satisfy motif_length <= min_frames <= max_frames");
        }
        if (!(noise >= 0.0)) {
            throw invalid_argument("noise must be non-negative");
        }
    }
};

struct SyntheticInstance {
    SkeletonSequence sequence;
    /// Frames [motif_start, motif_start + motif_length) carry the class motif.
    int motif_start = 0;
    int motif_length = 0;
};

namespace detail {

inline Joint random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Joint v;
    do {
        v = Joint(g(rng), g(rng), g(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

}  // namespace detail

inline std::vector<SyntheticInstance> generate_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // body: joint j > 0 hangs off joint (j - 1) / 2, hip is joint 0
    const int J = spec.joints;
    std::vector<Edge> topology;
    for (int j = 1; j < J; ++j) {
        topology.push_back({(j - 1) / 2, j});
    }
    std::vector<Joint> rest_direction;
    std::vector<double> rest_length;
    for (int e = 0; e < J - 1; ++e) {
        rest_direction.push_back(detail::random_unit(rng));
        rest_length.push_back(0.2 + 0.2 * unit(rng));
    }
    // idle sway shared by every class: per-limb amplitude and period
    std::vector<double> sway_amplitude;
    std::vector<double> sway_period;
    std::vector<Joint> sway_axis;
    for (int e = 0; e < J - 1; ++e) {
        sway_amplitude.push_back(0.15 + 0.15 * unit(rng));
        sway_period.push_back(12.0 + 18.0 * unit(rng));
        sway_axis.push_back(detail::random_unit(rng));
    }
    // motif of class c: limb motif_edge[c] swings toward motif_direction[c];
    // the outermost limbs are used first
    std::vector<int> motif_edge;
    std::vector<Joint> motif_direction;
    for (int c = 0; c < spec.classes; ++c) {
        motif_edge.push_back((J - 2) - c % (J - 1));
        motif_direction.push_back(detail::random_unit(rng));
    }
    std::vector<double> subject_scale;
    for (int s = 0; s < spec.subjects; ++s) {
        subject_scale.push_back(0.85 + 0.3 * unit(rng));
    }

    std::vector<SyntheticInstance> out;
    for (int c = 0; c < spec.classes; ++c) {
        for (int k = 0; k < spec.instances_per_class; ++k) {
            SyntheticInstance inst;
            auto &seq = inst.sequence;
            seq.class_label = c + 1;
            seq.subject_id = k % spec.subjects + 1;
            seq.trial_id = k / spec.subjects + 1;
            seq.joint_count = J;
            seq.hip_index = 0;
            seq.topology = topology;
            char id[64];
            std::snprintf(id, sizeof(id), "c%02d_s%02d_t%02d", seq.class_label, seq.subject_id, seq.trial_id);
            seq.instance_id = id;

            const int frames = spec.min_frames + static_cast<int>(unit(rng) * (spec.max_frames - spec.min_frames + 1));
            const int F = std::min(frames, spec.max_frames);
            inst.motif_length = spec.motif_length;
            inst.motif_start = static_cast<int>(unit(rng) * (F - spec.motif_length + 1));
            inst.motif_start = std::min(inst.motif_start, F - spec.motif_length);

            std::vector<double> phase;
            for (int e = 0; e < J - 1; ++e) {
                phase.push_back(2.0 * std::numbers::pi * unit(rng));
            }
            const Joint origin(gauss(rng), 0.0, 2.0 + gauss(rng));
            const Joint drift = 0.01 * detail::random_unit(rng);
            const double scale = subject_scale[static_cast<std::size_t>(seq.subject_id - 1)];

            for (int f = 0; f < F; ++f) {
                const int tau = f - inst.motif_start;
                const double bump = tau >= 0 && tau < spec.motif_length
                                        ? std::sin(std::numbers::pi * (tau + 1) / (spec.motif_length + 1))
                                        : 0.0;
                JointFrame frame;
                frame.timestamp_index = f;
                frame.joints.assign(static_cast<std::size_t>(J), Joint::Zero());
                frame.joints[0] = origin + f * drift;
                for (int e = 0; e < J - 1; ++e) {
                    const auto ue = static_cast<std::size_t>(e);
                    Joint dir = rest_direction[ue] +
                                sway_amplitude[ue] * std::sin(2.0 * std::numbers::pi * f / sway_period[ue] + phase[ue]) *
                                    sway_axis[ue];
                    if (e == motif_edge[static_cast<std::size_t>(c)]) {
                        dir += 1.5 * bump * motif_direction[static_cast<std::size_t>(c)];
                    }
                    const auto &edge = topology[ue];
                    frame.joints[static_cast<std::size_t>(edge.child)] =
                        frame.joints[static_cast<std::size_t>(edge.parent)] + scale * rest_length[ue] * dir.normalized();
                }
                if (spec.noise > 0.0) {
                    for (auto &j : frame.joints) {
                        j += spec.noise * Joint(gauss(rng), gauss(rng), gauss(rng));
                    }
                }
                seq.frames.push_back(std::move(frame));
            }
            out.push_back(std::move(inst));
        }
    }
    return out;
}

/// Writes `<instance>.skel` files and a `motifs.txt` ground-truth sidecar
/// (`instance motif_start motif_length` per line).
inline void write_synthetic(const std::filesystem::path &dir, std::span<const SyntheticInstance> data) {
    std::filesystem::create_directories(dir);
    std::ofstream motifs(dir / "motifs.txt");
    if (!motifs) {
        throw error("cannot write into '" + dir.string() + "'");
    }
    for (const auto &inst : data) {
        save_canonical(dir / (inst.sequence.instance_id + ".skel"), inst.sequence);
        motifs << inst.sequence.instance_id << ' ' << inst.motif_start << ' ' << inst.motif_length << '\n';
    }
}

struct MotifWindow {
    int start = 0;
    int length = 0;
};

inline std::map<std::string, MotifWindow> read_motifs(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw error("cannot open '" + path.string() + "'");
    }
    std::map<std::string, MotifWindow> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto fields = split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        if (fields.size() != 3) {
            throw parse_error("motif rows must be 'instance start length'");
        }
        out[std::string(fields[0])] = {static_cast<int>(parse_integer(fields[1])),
                                       static_cast<int>(parse_integer(fields[2]))};
    }
    return out;
}

/// A trajectorylet window [t0, t0 + L) lies in the motif when its center frame does.
inline bool window_in_motif(int start_frame, int trajectory_length, const MotifWindow &motif) {
    const double center = start_frame + 0.5 * (trajectory_length - 1);
    return center >= motif.start && center <= motif.start + motif.length - 1;
}

}  // namespace trajlet
