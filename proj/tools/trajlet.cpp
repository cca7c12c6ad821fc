// Command-line front end: ingest, train, evaluate, sweep, synth, report.

#include "trajlet/dataset.hpp"
#include "trajlet/pipeline.hpp"
#include "trajlet/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace trajlet;

namespace {

/// Config file, preset and one flag per config key, applied in that order
/// (flags win).
struct ConfigOptions {
    std::string file;
    std::string preset = "action3d";
    std::map<std::string, std::string> overrides;

    void attach(CLI::App &app) {
        app.add_option("-c,--config", file, "Config file of key=value lines");
        app.add_option("--preset", preset, "Defaults to start from")
            ->check(CLI::IsMember({"action3d", "daily_activity"}));
        for (const auto &key : PipelineConfig::keys()) {
            app.add_option_function<std::string>(
                "--" + key, [this, key](const std::string &v) { overrides[key] = v; }, "Overrides '" + key + "'");
        }
    }

    [[nodiscard]] PipelineConfig resolve() const {
        PipelineConfig cfg = preset == "daily_activity" ? PipelineConfig::daily_activity() : PipelineConfig::action3d();
        if (!file.empty()) {
            std::ifstream in(file);
            if (!in) {
                throw error("cannot open config '" + file + "'");
            }
            cfg = read_config(in, cfg);
        }
        for (const auto &[key, value] : overrides) {
            cfg.set(key, value);
        }
        cfg.validate();
        return cfg;
    }
};

std::vector<SkeletonSequence> load_for(const PipelineConfig &cfg) {
    try {
        return load_dataset(cfg);
    } catch (const std::exception &e) {
        throw stage_error("load", e.what());
    }
}

void write_text_file(const std::string &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) {
        throw error("cannot write '" + path + "'");
    }
    out << text;
}

int cmd_ingest(const std::string &input, const std::string &output, const std::string &layout,
               const std::string &exclusions) {
    MsrOptions msr;
    msr.layout = layout == "screen" ? MsrLayout::screen : MsrLayout::real_world;
    const auto excluded = exclusions.empty() ? std::set<std::string>{} : read_exclusion_list(exclusions);
    const auto data = load_dataset(input, FileFormat::msr_skeleton, msr, excluded);
    fs::create_directories(output);
    for (const auto &seq : data) {
        save_canonical(fs::path(output) / (seq.instance_id + ".skel"), seq);
    }
    std::cout << "converted " << data.size() << " instances into " << output << '\n';
    return 0;
}

int cmd_train(const ConfigOptions &opts, const std::string &out_dir) {
    const auto cfg = opts.resolve();
    const auto data = load_for(cfg);
    const auto splits = [&] {
        try {
            return make_splits(data, cfg);
        } catch (const std::exception &e) {
            throw stage_error("protocol", e.what());
        }
    }();
    for (const auto &split : splits) {
        std::vector<SkeletonSequence> train;
        for (const auto i : split.train) {
            train.push_back(data[i]);
        }
        const auto result = train_pipeline(train, cfg, split.name);
        const fs::path dir = splits.size() == 1 ? fs::path(out_dir) : fs::path(out_dir) / split.name;
        save_bundle(dir, result.bundle);
        std::cout << "split " << split.name << ": " << train.size() << " training instances, "
                  << result.bundle.templates.size() << " template detectors, C=" << format_real(result.bundle.cv.chosen)
                  << " -> " << dir.string() << '\n';
    }
    return 0;
}

int cmd_evaluate(const ConfigOptions &opts, const std::string &bundle_dir, const std::string &save_dir,
                 const std::string &metrics_path) {
    std::ostringstream text;
    std::ostringstream metrics;
    if (!bundle_dir.empty()) {
        const auto bundle = load_bundle(bundle_dir);
        PipelineConfig cfg = bundle.config;
        for (const auto &[key, value] : opts.overrides) {
            cfg.set(key, value);
        }
        const auto data = load_for(cfg);
        std::vector<SkeletonSequence> test;
        for (const auto &split : make_splits(data, cfg)) {
            if (split.name == bundle.split) {
                for (const auto i : split.test) {
                    test.push_back(data[i]);
                }
            }
        }
        if (test.empty()) {
            throw stage_error("protocol", "no test instances for split '" + bundle.split + "'");
        }
        const auto report = evaluate_bundle(bundle, test);
        write_report_text(text, report);
        write_metrics(metrics, report);
    } else {
        const auto cfg = opts.resolve();
        const auto data = load_for(cfg);
        const auto result = evaluate_protocol(data, cfg);
        for (const auto &run : result.runs) {
            write_report_text(text, run.report);
            text << '\n';
            if (!save_dir.empty()) {
                save_bundle(result.runs.size() == 1 ? fs::path(save_dir) : fs::path(save_dir) / run.report.split,
                            run.bundle);
            }
        }
        if (result.runs.size() > 1) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * result.mean_accuracy);
            text << "mean accuracy over " << result.runs.size() << " splits: " << buf << '\n';
        }
        write_protocol_metrics(metrics, result);
    }
    std::cout << text.str();
    if (!metrics_path.empty()) {
        write_text_file(metrics_path, metrics.str());
    }
    return 0;
}

int cmd_sweep(const ConfigOptions &opts, const std::string &parameter, const std::vector<std::string> &values,
              const std::string &output) {
    const auto cfg = opts.resolve();
    const auto data = load_for(cfg);
    const auto table = sweep(data, cfg, parameter, values);
    std::ostringstream text;
    write_sweep_table(text, table);
    std::cout << text.str();
    if (!output.empty()) {
        write_text_file(output, text.str());
    }
    for (const auto &row : table.rows) {
        if (!row.ok) {
            return 1;
        }
    }
    return 0;
}

int cmd_synth(const SyntheticSpec &spec, const std::string &output) {
    const auto data = generate_synthetic(spec);
    write_synthetic(output, data);
    std::cout << "wrote " << data.size() << " instances and motifs.txt into " << output << '\n';
    return 0;
}

int cmd_report(const std::string &path) {
    if (fs::is_directory(path)) {
        const auto b = load_bundle(path);
        std::cout << "bundle " << path << "\n  split: " << b.split << "\n  training instances: "
                  << b.training_instances.size() << "\n  limbs: " << b.limbs.topology.size()
                  << "\n  pca: " << b.pca.raw_dim() << " -> " << b.pca.retained_dim()
                  << "\n  mined detectors: " << b.mining.size() << "\n  template detectors: " << b.templates.size()
                  << "\n  classes: " << b.classifier.class_count() << "\n  encoding dimension: " << b.classifier.dim()
                  << "\n  C: " << format_real(b.classifier.c_reg) << '\n';
        return 0;
    }
    std::ifstream in(path);
    if (!in) {
        throw error("cannot open '" + path + "'");
    }
    const auto metrics = read_metric_lines(in);
    if (const auto it = metrics.find("splits"); it != metrics.end()) {
        for (const auto name : split_whitespace(it->second)) {
            write_report_text(std::cout, report_from_metrics(metrics, std::string(name) + "."));
            std::cout << '\n';
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * parse_real(metrics.at("mean_accuracy")));
        std::cout << "mean accuracy: " << buf << '\n';
    } else {
        write_report_text(std::cout, report_from_metrics(metrics));
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Skeleton action recognition with mined trajectorylet detectors"};
    app.require_subcommand(1);

    std::string input, output, layout = "real_world", exclusions;
    auto *ingest = app.add_subcommand("ingest", "Convert MSR skeleton files to the canonical format");
    ingest->add_option("-i,--input", input, "Directory of *_skeleton*.txt files")->required();
    ingest->add_option("-o,--output", output, "Directory for .skel files")->required();
    ingest->add_option("--msr_layout", layout, "real_world or screen")
        ->check(CLI::IsMember({"real_world", "screen"}));
    ingest->add_option("--exclusion_list", exclusions, "Instance ids to drop");

    ConfigOptions train_opts;
    std::string train_out;
    auto *train = app.add_subcommand("train", "Train model bundles for every split of the protocol");
    train_opts.attach(*train);
    train->add_option("-o,--out", train_out, "Bundle directory")->required();

    ConfigOptions eval_opts;
    std::string bundle_dir, save_dir, metrics_path;
    auto *evaluate = app.add_subcommand("evaluate", "Evaluate a bundle, or train and evaluate the protocol");
    eval_opts.attach(*evaluate);
    evaluate->add_option("-b,--bundle", bundle_dir, "Existing bundle to evaluate");
    evaluate->add_option("--save-bundle", save_dir, "Where to store the bundles trained on the way");
    evaluate->add_option("-m,--metrics", metrics_path, "Write 'metric value' lines here");

    ConfigOptions sweep_opts;
    std::string parameter, sweep_out;
    std::vector<std::string> values;
    auto *sweep_cmd = app.add_subcommand("sweep", "Accuracy table over one parameter");
    sweep_opts.attach(*sweep_cmd);
    sweep_cmd->add_option("-p,--parameter", parameter, "K, M_A, N_A, L, pyramid_levels or components")
        ->required();
    sweep_cmd->add_option("-v,--values", values, "Values to try, e.g. 25 50 100 or x0 x0+x1")->required();
    sweep_cmd->add_option("-o,--output", sweep_out, "Also write the table here");

    SyntheticSpec spec;
    std::string synth_out;
    auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted motifs");
    synth->add_option("-o,--output", synth_out, "Output directory")->required();
    synth->add_option("--classes", spec.classes)->capture_default_str();
    synth->add_option("--instances", spec.instances_per_class, "Instances per class")->capture_default_str();
    synth->add_option("--joints", spec.joints)->capture_default_str();
    synth->add_option("--min-frames", spec.min_frames)->capture_default_str();
    synth->add_option("--max-frames", spec.max_frames)->capture_default_str();
    synth->add_option("--noise", spec.noise, "Coordinate noise standard deviation")->capture_default_str();
    synth->add_option("--motif-length", spec.motif_length)->capture_default_str();
    synth->add_option("--subjects", spec.subjects)->capture_default_str();
    synth->add_option("--seed", spec.seed)->capture_default_str();

    std::string report_path;
    auto *report = app.add_subcommand("report", "Render a metrics file as text, or summarize a bundle");
    report->add_option("path", report_path, "Metrics file or bundle directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            return cmd_ingest(input, output, layout, exclusions);
        }
        if (*train) {
            return cmd_train(train_opts, train_out);
        }
        if (*evaluate) {
            return cmd_evaluate(eval_opts, bundle_dir, save_dir, metrics_path);
        }
        if (*sweep_cmd) {
            return cmd_sweep(sweep_opts, parameter, values, sweep_out);
        }
        if (*synth) {
            return cmd_synth(spec, synth_out);
        }
        if (*report) {
            return cmd_report(report_path);
        }
    } catch (const stage_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
