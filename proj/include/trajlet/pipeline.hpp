#pragma once

// End-to-end training and evaluation: model bundles, evaluation reports,
// protocols and parameter sweeps.

#include "trajlet/common.hpp"
#include "trajlet/config.hpp"
#include "trajlet/dataset.hpp"
#include "trajlet/detector_clustering.hpp"
#include "trajlet/detector_mining.hpp"
#include "trajlet/encoding.hpp"
#include "trajlet/linear_svm.hpp"
#include "trajlet/skeleton_io.hpp"
#include "trajlet/trajectorylet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace trajlet {

// ---------------------------------------------------------------------------
// evaluation report

struct EvaluationReport {
    std::string split = "all";
    /// Sorted class labels; rows and columns of `confusion` follow this order.
    std::vector<int> labels;
    /// confusion[i][j]: instances of labels[i] predicted as labels[j].
    std::vector<std::vector<long>> confusion;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, double>> timings;
    double chosen_c = 0.0;
    long templates = 0;

    [[nodiscard]] long total() const {
        long n = 0;
        for (const auto &row : confusion) {
            for (const long v : row) {
                n += v;
            }
        }
        return n;
    }

    [[nodiscard]] long correct() const {
        long n = 0;
        for (std::size_t i = 0; i < confusion.size(); ++i) {
            n += confusion[i][i];
        }
        return n;
    }

    [[nodiscard]] long class_count(std::size_t i) const {
        long n = 0;
        for (const long v : confusion[i]) {
            n += v;
        }
        return n;
    }

    /// Shape, accuracy = trace / total, per-class accuracy = diagonal / row sum.
    void check() const {
        const std::size_t c = labels.size();
        if (confusion.size() != c || per_class_accuracy.size() != c) {
            throw error("report: confusion matrix and labels disagree in size");
        }
        for (const auto &row : confusion) {
            if (row.size() != c) {
                throw error("report: confusion matrix is not square");
            }
        }
        const long n = total();
        const double expected = n > 0 ? static_cast<double>(correct()) / static_cast<double>(n) : 0.0;
        if (std::abs(expected - accuracy) > 1e-12) {
            throw error("report: accuracy does not equal trace / total");
        }
        for (std::size_t i = 0; i < c; ++i) {
            const long rows = class_count(i);
            const double per = rows > 0 ? static_cast<double>(confusion[i][i]) / static_cast<double>(rows) : 0.0;
            if (std::abs(per - per_class_accuracy[i]) > 1e-12) {
                throw error("report: per-class accuracy of class " + std::to_string(labels[i]) + " is inconsistent");
            }
        }
    }
};

/// Builds the confusion matrix over the union of true and predicted labels.
inline EvaluationReport make_report(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size()) {
        throw dimension_error("one prediction per test instance is required");
    }
    EvaluationReport report;
    std::set<int> labels(truth.begin(), truth.end());
    labels.insert(predicted.begin(), predicted.end());
    report.labels.assign(labels.begin(), labels.end());
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < report.labels.size(); ++i) {
        index[report.labels[i]] = i;
    }
    const std::size_t c = report.labels.size();
    report.confusion.assign(c, std::vector<long>(c, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++report.confusion[index[truth[i]]][index[predicted[i]]];
    }
    const long n = report.total();
    report.accuracy = n > 0 ? static_cast<double>(report.correct()) / static_cast<double>(n) : 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const long rows = report.class_count(i);
        report.per_class_accuracy.push_back(
            rows > 0 ? static_cast<double>(report.confusion[i][i]) / static_cast<double>(rows) : 0.0);
    }
    report.check();
    return report;
}

/// Machine-readable form, one `metric value` pair per line. `prefix` is
/// prepended to every metric name.
inline void write_metrics(std::ostream &out, const EvaluationReport &r, const std::string &prefix = "") {
    out << prefix << "split " << r.split << '\n';
    out << prefix << "accuracy " << format_real(r.accuracy) << '\n';
    out << prefix << "correct " << r.correct() << '\n';
    out << prefix << "total " << r.total() << '\n';
    out << prefix << "chosen_c " << format_real(r.chosen_c) << '\n';
    out << prefix << "templates " << r.templates << '\n';
    out << prefix << "classes";
    for (const int c : r.labels) {
        out << ' ' << c;
    }
    out << '\n';
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        out << prefix << "class." << r.labels[i] << ".accuracy " << format_real(r.per_class_accuracy[i]) << '\n';
    }
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        for (std::size_t j = 0; j < r.labels.size(); ++j) {
            out << prefix << "confusion." << r.labels[i] << '.' << r.labels[j] << ' ' << r.confusion[i][j] << '\n';
        }
    }
    for (const auto &[key, value] : r.config) {
        out << prefix << "config." << key << ' ' << (value.empty() ? "-" : value) << '\n';
    }
    for (const auto &[stage, seconds] : r.timings) {
        out << prefix << "timing." << stage << ' ' << format_real(seconds) << '\n';
    }
}

/// Splits `metric value` lines into a map; the value is the rest of the line.
inline std::map<std::string, std::string> read_metric_lines(std::istream &in) {
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto text = trim(line);
        if (text.empty()) {
            continue;
        }
        const auto space = text.find_first_of(" \t");
        if (space == std::string_view::npos) {
            throw parse_error("metric line without a value: '" + std::string(text) + "'");
        }
        out[std::string(text.substr(0, space))] = std::string(trim(text.substr(space + 1)));
    }
    return out;
}

/// Rebuilds the report written by write_metrics with the same prefix.
inline EvaluationReport report_from_metrics(const std::map<std::string, std::string> &m,
                                            const std::string &prefix = "") {
    const auto get = [&](const std::string &key) -> const std::string & {
        const auto it = m.find(prefix + key);
        if (it == m.end()) {
            throw parse_error("metrics lack '" + prefix + key + "'");
        }
        return it->second;
    };
    EvaluationReport r;
    r.split = get("split");
    r.accuracy = parse_real(get("accuracy"));
    r.chosen_c = parse_real(get("chosen_c"));
    r.templates = static_cast<long>(parse_integer(get("templates")));
    for (const auto field : split_whitespace(get("classes"))) {
        r.labels.push_back(static_cast<int>(parse_integer(field)));
    }
    const std::size_t c = r.labels.size();
    r.confusion.assign(c, std::vector<long>(c, 0));
    for (std::size_t i = 0; i < c; ++i) {
        const std::string li = std::to_string(r.labels[i]);
        r.per_class_accuracy.push_back(parse_real(get("class." + li + ".accuracy")));
        for (std::size_t j = 0; j < c; ++j) {
            r.confusion[i][j] =
                static_cast<long>(parse_integer(get("confusion." + li + "." + std::to_string(r.labels[j]))));
        }
    }
    for (const auto &key : PipelineConfig::keys()) {
        if (const auto it = m.find(prefix + "config." + key); it != m.end()) {
            r.config.emplace_back(key, it->second == "-" ? "" : it->second);
        }
    }
    const std::string timing = prefix + "timing.";
    for (const auto &[key, value] : m) {
        if (key.starts_with(timing)) {
            r.timings.emplace_back(key.substr(timing.size()), parse_real(value));
        }
    }
    r.check();
    return r;
}

/// Human-readable rendering with the confusion matrix as a table.
inline void write_report_text(std::ostream &out, const EvaluationReport &r) {
    char buf[64];
    out << "split: " << r.split << '\n';
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * r.accuracy);
    out << "accuracy: " << buf << " (" << r.correct() << '/' << r.total() << ")\n";
    if (r.templates > 0) {
        out << "template detectors: " << r.templates << '\n';
    }
    if (r.chosen_c > 0.0) {
        out << "classifier C: " << format_real(r.chosen_c) << '\n';
    }
    out << "per-class accuracy:\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "  %4d  %7.2f%%", r.labels[i], 100.0 * r.per_class_accuracy[i]);
        out << buf << "  (" << r.confusion[i][i] << '/' << r.class_count(i) << ")\n";
    }
    out << "confusion matrix (rows: true class, columns: predicted class):\n      ";
    for (const int c : r.labels) {
        std::snprintf(buf, sizeof(buf), "%5d", c);
        out << buf;
    }
    out << '\n';
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "  %4d", r.labels[i]);
        out << buf;
        for (const long v : r.confusion[i]) {
            std::snprintf(buf, sizeof(buf), "%5ld", v);
            out << buf;
        }
        out << '\n';
    }
    if (!r.timings.empty()) {
        out << "timings (seconds):\n";
        for (const auto &[stage, seconds] : r.timings) {
            std::snprintf(buf, sizeof(buf), "%10.3f", seconds);
            out << "  " << stage << std::string(stage.size() < 12 ? 12 - stage.size() : 1, ' ') << buf << '\n';
        }
    }
    if (!r.config.empty()) {
        out << "config:\n";
        for (const auto &[key, value] : r.config) {
            out << "  " << key << '=' << value << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// model bundle

struct ModelBundle {
    PipelineConfig config;
    /// Split the bundle was trained on and its training instance ids.
    std::string split = "all";
    std::vector<std::string> training_instances;
    LimbReference limbs;
    PcaModel pca;
    TemplateDetectorSet templates;
    MulticlassModel classifier;
    CvResult cv;
    std::vector<MiningRecord> mining;
};

namespace bundle_files {
inline constexpr const char *config = "pipeline.config";
inline constexpr const char *split = "cli_harness.split";
inline constexpr const char *limbs = "skeleton_io.limbs";
inline constexpr const char *pca = "trajectorylet.pca";
inline constexpr const char *templates = "detector_clustering.templates";
inline constexpr const char *assignments = "detector_clustering.assignments";
inline constexpr const char *classifier = "linear_svm.classifier";
inline constexpr const char *cv = "linear_svm.cv";
inline constexpr const char *mining = "detector_mining.report";
}  // namespace bundle_files

namespace detail {

template <typename Writer>
void write_file(const std::filesystem::path &path, Writer &&writer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error("cannot write '" + path.string() + "'");
    }
    writer(out);
    out.flush();
    if (!out) {
        throw error("failed writing '" + path.string() + "'");
    }
}

template <typename Reader>
auto read_file(const std::filesystem::path &path, Reader &&reader) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error("cannot open '" + path.string() + "'");
    }
    try {
        return reader(in);
    } catch (const parse_error &e) {
        throw parse_error(path.filename().string() + ": " + e.what());
    }
}

}  // namespace detail

/// Writes every artifact into a sibling temporary directory and renames it
/// into place, replacing an existing bundle.
inline void save_bundle(const std::filesystem::path &dir, const ModelBundle &bundle) {
    namespace fs = std::filesystem;
    const fs::path target = dir.lexically_normal();
    const fs::path tmp = target.string() + ".partial";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    try {
        using detail::write_file;
        write_file(tmp / bundle_files::config, [&](std::ostream &o) { write_config(o, bundle.config); });
        write_file(tmp / bundle_files::split, [&](std::ostream &o) {
            o << "split=" << bundle.split << '\n';
            for (const auto &id : bundle.training_instances) {
                o << id << '\n';
            }
        });
        write_file(tmp / bundle_files::limbs, [&](std::ostream &o) { write_limb_reference(o, bundle.limbs); });
        write_file(tmp / bundle_files::pca, [&](std::ostream &o) { write_pca(o, bundle.pca); });
        write_file(tmp / bundle_files::templates, [&](std::ostream &o) { write_template_set(o, bundle.templates); });
        write_file(tmp / bundle_files::assignments,
                   [&](std::ostream &o) { write_assignments(o, bundle.templates.assignments); });
        write_file(tmp / bundle_files::classifier, [&](std::ostream &o) { write_multiclass(o, bundle.classifier); });
        write_file(tmp / bundle_files::cv,
                   [&](std::ostream &o) { write_cv_result(o, bundle.cv, bundle.config.cv_folds); });
        write_file(tmp / bundle_files::mining, [&](std::ostream &o) { write_mining_report(o, bundle.mining); });
        fs::remove_all(target);
        fs::rename(tmp, target);
    } catch (...) {
        std::error_code ignored;
        fs::remove_all(tmp, ignored);
        throw;
    }
}

inline ModelBundle load_bundle(const std::filesystem::path &dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw error("model bundle '" + dir.string() + "' does not exist");
    }
    using detail::read_file;
    ModelBundle b;
    b.config = read_file(dir / bundle_files::config, [](std::istream &in) { return read_config(in); });
    read_file(dir / bundle_files::split, [&](std::istream &in) {
        std::string line;
        if (!std::getline(in, line) || !line.starts_with("split=")) {
            throw parse_error("first line must be split=<name>");
        }
        b.split = line.substr(6);
        while (std::getline(in, line)) {
            if (!trim(line).empty()) {
                b.training_instances.emplace_back(trim(line));
            }
        }
        return 0;
    });
    b.limbs = read_file(dir / bundle_files::limbs, [](std::istream &in) { return read_limb_reference(in); });
    b.pca = read_file(dir / bundle_files::pca, [](std::istream &in) { return read_pca(in); });
    b.templates = read_file(dir / bundle_files::templates, [](std::istream &in) { return read_template_set(in); });
    b.templates.assignments =
        read_file(dir / bundle_files::assignments, [](std::istream &in) { return read_assignments(in); });
    b.classifier = read_file(dir / bundle_files::classifier, [](std::istream &in) { return read_multiclass(in); });
    b.cv = read_file(dir / bundle_files::cv, [](std::istream &in) { return read_cv_result(in); });
    b.mining = read_file(dir / bundle_files::mining, [](std::istream &in) { return read_mining_report(in); });
    if (b.templates.dim() != b.pca.retained_dim()) {
        throw parse_error("template detectors do not match the PCA dimension");
    }
    if (b.classifier.dim() != b.templates.size() * (Eigen::Index{1} << b.config.pyramid_levels) - b.templates.size()) {
        throw parse_error("classifier dimension does not match the template set and pyramid levels");
    }
    return b;
}

// ---------------------------------------------------------------------------
// training and evaluation

using StageTimings = std::vector<std::pair<std::string, double>>;

namespace detail {

class StageClock {
public:
    explicit StageClock(StageTimings &timings) : timings_(timings) {}

    /// Runs `body`, records its wall time under `stage` and tags its errors.
    template <typename Body>
    auto run(const std::string &stage, Body &&body) {
        const auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(body())>) {
                body();
                record(stage, start);
            } else {
                auto result = body();
                record(stage, start);
                return result;
            }
        } catch (const stage_error &) {
            throw;
        } catch (const std::exception &e) {
            throw stage_error(stage, e.what());
        }
    }

private:
    void record(const std::string &stage, std::chrono::steady_clock::time_point start) {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        timings_.emplace_back(stage, elapsed.count());
    }

    StageTimings &timings_;
};

/// Size-normalized, hip-centered, PCA-projected trajectorylets of one instance.
inline std::vector<Trajectorylet> raw_trajectorylets(const SkeletonSequence &seq, const LimbReference &limbs,
                                                     const TrajectoryletConfig &cfg) {
    const auto normalized = normalize_skeleton_size(seq, limbs);
    const auto frames = hip_centered_frames(normalized);
    return extract_trajectorylets(frames, cfg, seq.instance_id, seq.class_label);
}

inline ActionEncoding encode_instance(const TemplateDetectorSet &set, std::span<const Trajectorylet> trajs,
                                      int levels) {
    return levels == 1 ? encode(set, trajs) : encode_pyramid(set, trajs, levels);
}

inline RowMatrix stack_encodings(std::span<const ActionEncoding> encodings) {
    RowMatrix out(static_cast<Eigen::Index>(encodings.size()), encodings.front().values.size());
    for (std::size_t i = 0; i < encodings.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = encodings[i].values.transpose();
    }
    return out;
}

}  // namespace detail

/// Largest pool whose Gram matrix is cached for detector training.
inline constexpr Eigen::Index gram_cache_limit = 12000;

struct TrainResult {
    ModelBundle bundle;
    StageTimings timings;
    /// Per training instance, kept detectors best first.
    std::vector<std::vector<MinedDetector>> mined;
};

/// Fits every model on the training instances only. Errors carry the stage
/// that raised them.
inline TrainResult train_pipeline(std::span<const SkeletonSequence> train, const PipelineConfig &cfg,
                                  const std::string &split_name = "all") {
    TrainResult result;
    detail::StageClock stages(result.timings);
    stages.run("config", [&] { cfg.validate(); });
    if (train.empty()) {
        throw stage_error("load", "no training instances");
    }
    auto &bundle = result.bundle;
    bundle.config = cfg;
    bundle.split = split_name;
    std::set<std::string> train_ids;
    for (const auto &seq : train) {
        bundle.training_instances.push_back(seq.instance_id);
        train_ids.insert(seq.instance_id);
    }

    bundle.limbs = stages.run("normalize", [&] { return compute_reference_limb_lengths(train); });

    std::vector<std::vector<Trajectorylet>> raw;
    std::vector<int> classes;
    stages.run("extract", [&] {
        for (const auto &seq : train) {
            if (seq.frame_count() < cfg.trajectorylet.length) {
                warn("skipping " + seq.instance_id + ": " + std::to_string(seq.frame_count()) +
                     " frames is shorter than the trajectorylet length");
                continue;
            }
            raw.push_back(detail::raw_trajectorylets(seq, bundle.limbs, cfg.trajectorylet));
            classes.push_back(seq.class_label);
        }
        if (std::set<int>(classes.begin(), classes.end()).size() < 2) {
            throw invalid_argument("training data must contain at least two classes");
        }
    });

    std::vector<std::vector<Trajectorylet>> projected;
    std::vector<Trajectorylet> all;
    stages.run("pca", [&] {
        std::vector<Trajectorylet> flat;
        for (const auto &r : raw) {
            flat.insert(flat.end(), r.begin(), r.end());
        }
        bundle.pca = fit_pca(flat, cfg.trajectorylet.pca_retain_fraction);
        for (const auto &r : raw) {
            projected.push_back(apply_pca(bundle.pca, r));
            all.insert(all.end(), projected.back().begin(), projected.back().end());
        }
    });
    raw.clear();

    TrajectoryletPool pool = stages.run("pool", [&] {
        auto p = sample_pool(all, cfg.pool_size, cfg.pool_seed);
        if (p.size() <= gram_cache_limit) {
            p.compute_gram();
        }
        return p;
    });
    all.clear();

    result.mined = stages.run("mining", [&] {
        return mine_all(projected, classes, pool, cfg.esvm, cfg.mining, cfg.threads);
    });
    bundle.mining = mining_records(result.mined);

    TemplateBuild build = stages.run("clustering", [&] {
        std::vector<Detector> candidates;
        for (const auto &per_instance : result.mined) {
            for (const auto &m : per_instance) {
                candidates.push_back(m.detector);
            }
        }
        if (candidates.empty()) {
            throw invalid_argument("mining produced no candidate detectors");
        }
        return build_template_set(candidates, pool, cfg.clusters, cfg.cluster_seed);
    });
    bundle.templates = std::move(build.set);

    stages.run("hygiene", [&] {
        for (const auto &id : pool.instances) {
            if (!train_ids.contains(id)) {
                throw error("pool item from non-training instance '" + id + "'");
            }
        }
        for (const auto &det : bundle.templates.detectors) {
            if (!train_ids.contains(det.source_instance)) {
                throw error("template detector from non-training instance '" + det.source_instance + "'");
            }
        }
    });
    pool = {};

    std::vector<ActionEncoding> encodings;
    stages.run("encoding", [&] {
        for (const auto &trajs : projected) {
            encodings.push_back(detail::encode_instance(bundle.templates, trajs, cfg.pyramid_levels));
        }
    });
    const RowMatrix x = detail::stack_encodings(encodings);

    bundle.cv = stages.run("cv", [&] {
        return cross_validate_C(x, classes, cfg.cv_grid, cfg.cv_folds, cfg.cv_seed);
    });
    bundle.classifier = stages.run("classifier", [&] { return train_ova_svm(x, classes, bundle.cv.chosen); });
    return result;
}

/// Predicted label per test instance.
inline std::vector<int> predict_instances(const ModelBundle &bundle, std::span<const SkeletonSequence> test) {
    std::vector<int> out;
    out.reserve(test.size());
    for (const auto &seq : test) {
        if (seq.frame_count() < bundle.config.trajectorylet.length) {
            throw invalid_argument("test instance " + seq.instance_id + " is shorter than the trajectorylet length");
        }
        const auto trajs =
            apply_pca(bundle.pca, detail::raw_trajectorylets(seq, bundle.limbs, bundle.config.trajectorylet));
        const auto enc = detail::encode_instance(bundle.templates, trajs, bundle.config.pyramid_levels);
        out.push_back(predict(bundle.classifier, enc.values));
    }
    return out;
}

/// Scores a bundle on test instances, none of which may have been used in training.
inline EvaluationReport evaluate_bundle(const ModelBundle &bundle, std::span<const SkeletonSequence> test,
                                        StageTimings *timings = nullptr) {
    StageTimings local;
    detail::StageClock stages(timings ? *timings : local);
    const std::set<std::string> trained(bundle.training_instances.begin(), bundle.training_instances.end());
    std::vector<int> truth;
    const auto predicted = stages.run("evaluate", [&] {
        for (const auto &seq : test) {
            if (trained.contains(seq.instance_id)) {
                throw error("test instance '" + seq.instance_id + "' was used for training");
            }
            truth.push_back(seq.class_label);
        }
        return predict_instances(bundle, test);
    });
    auto report = make_report(truth, predicted);
    report.split = bundle.split;
    report.chosen_c = bundle.classifier.c_reg;
    report.templates = static_cast<long>(bundle.templates.size());
    for (const auto &key : PipelineConfig::keys()) {
        report.config.emplace_back(key, bundle.config.get(key));
    }
    if (timings) {
        report.timings = *timings;
    } else {
        report.timings = local;
    }
    return report;
}

struct PipelineRun {
    ModelBundle bundle;
    EvaluationReport report;
    std::vector<std::vector<MinedDetector>> mined;
};

/// Trains on split.train and evaluates on split.test.
inline PipelineRun run_pipeline(std::span<const SkeletonSequence> data, const Split &split,
                                const PipelineConfig &cfg) {
    std::set<int> train_subjects;
    std::vector<SkeletonSequence> train;
    std::vector<SkeletonSequence> test;
    for (const auto i : split.train) {
        train.push_back(data[i]);
        train_subjects.insert(data[i].subject_id);
    }
    for (const auto i : split.test) {
        test.push_back(data[i]);
        if (train_subjects.contains(data[i].subject_id)) {
            throw stage_error("hygiene", "subject " + std::to_string(data[i].subject_id) +
                                             " appears in both training and test data");
        }
    }
    auto trained = train_pipeline(train, cfg, split.name);
    PipelineRun run;
    run.report = evaluate_bundle(trained.bundle, test, &trained.timings);
    run.bundle = std::move(trained.bundle);
    run.mined = std::move(trained.mined);
    return run;
}

struct ProtocolResult {
    std::vector<PipelineRun> runs;
    double mean_accuracy = 0.0;
};

/// One pipeline run per split of the configured protocol.
inline ProtocolResult evaluate_protocol(std::span<const SkeletonSequence> data, const PipelineConfig &cfg) {
    const auto splits = [&] {
        try {
            return make_splits(data, cfg);
        } catch (const stage_error &) {
            throw;
        } catch (const std::exception &e) {
            throw stage_error("protocol", e.what());
        }
    }();
    ProtocolResult result;
    for (const auto &split : splits) {
        result.runs.push_back(run_pipeline(data, split, cfg));
        result.mean_accuracy += result.runs.back().report.accuracy;
    }
    result.mean_accuracy /= static_cast<double>(result.runs.size());
    return result;
}

inline void write_protocol_metrics(std::ostream &out, const ProtocolResult &result) {
    if (result.runs.size() == 1) {
        write_metrics(out, result.runs.front().report);
        return;
    }
    out << "splits";
    for (const auto &run : result.runs) {
        out << ' ' << run.report.split;
    }
    out << '\n' << "mean_accuracy " << format_real(result.mean_accuracy) << '\n';
    for (const auto &run : result.runs) {
        write_metrics(out, run.report, run.report.split + ".");
    }
}

// ---------------------------------------------------------------------------
// sweeps

/// Sweep parameter names and the config keys they set.
inline const std::map<std::string, std::string> &sweep_parameters() {
    static const std::map<std::string, std::string> p{{"K", "clusters"},
                                                      {"M_A", "per_instance_budget"},
                                                      {"N_A", "n_top"},
                                                      {"L", "trajectory_length"},
                                                      {"pyramid_levels", "pyramid_levels"},
                                                      {"components", "components"}};
    return p;
}

struct SweepRow {
    std::string value;
    bool ok = false;
    double accuracy = 0.0;
    std::vector<double> split_accuracy;
    std::string failure;
};

struct SweepTable {
    std::string parameter;
    std::vector<std::string> splits;
    std::vector<SweepRow> rows;
};

/// Runs the protocol once per value with everything else fixed. Failing cells
/// are recorded rather than aborting the sweep.
inline SweepTable sweep(std::span<const SkeletonSequence> data, const PipelineConfig &base,
                        const std::string &parameter, std::span<const std::string> values) {
    const auto it = sweep_parameters().find(parameter);
    if (it == sweep_parameters().end()) {
        throw invalid_argument("cannot sweep '" + parameter + "'; use K, M_A, N_A, L, pyramid_levels or components");
    }
    if (values.empty()) {
        throw invalid_argument("sweep needs at least one value");
    }
    SweepTable table;
    table.parameter = parameter;
    for (const auto &value : values) {
        SweepRow row;
        row.value = value;
        try {
            PipelineConfig cfg = base;
            cfg.set(it->second, value);
            cfg.validate();
            const auto result = evaluate_protocol(data, cfg);
            row.ok = true;
            row.accuracy = result.mean_accuracy;
            if (table.splits.empty()) {
                for (const auto &run : result.runs) {
                    table.splits.push_back(run.report.split);
                }
            }
            for (const auto &run : result.runs) {
                row.split_accuracy.push_back(run.report.accuracy);
            }
        } catch (const stage_error &e) {
            row.failure = "[" + e.stage() + "] " + e.what();
        } catch (const std::exception &e) {
            row.failure = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline void write_sweep_table(std::ostream &out, const SweepTable &table) {
    char buf[64];
    const bool per_split = table.splits.size() > 1;
    std::size_t width = table.parameter.size();
    for (const auto &row : table.rows) {
        width = std::max(width, row.value.size());
    }
    const auto pad = [&](const std::string &s) { return s + std::string(width + 2 - s.size(), ' '); };
    out << pad(table.parameter);
    if (per_split) {
        for (const auto &s : table.splits) {
            std::snprintf(buf, sizeof(buf), "%9s", s.c_str());
            out << buf;
        }
        out << "     mean\n";
    } else {
        out << " accuracy\n";
    }
    for (const auto &row : table.rows) {
        out << pad(row.value);
        if (!row.ok) {
            out << " failed: " << row.failure << '\n';
            continue;
        }
        if (per_split) {
            for (const double a : row.split_accuracy) {
                std::snprintf(buf, sizeof(buf), "%8.2f%%", 100.0 * a);
                out << buf;
            }
        }
        std::snprintf(buf, sizeof(buf), "%8.2f%%", 100.0 * row.accuracy);
        out << buf << '\n';
    }
}

}  // namespace trajlet
