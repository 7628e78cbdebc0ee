#include "tsmq/net.hpp"
#include "tsmq/pipeline.hpp"
#include "tsmq/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

using namespace tsmq;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct ExtractionFlags {
    std::string alignment = "interp_test";
    std::size_t frame_size = 2048;
    std::size_t hop = 512;
    std::optional<double> beta;
    std::string config_path;
};

void add_extraction_flags(CLI::App* cmd, ExtractionFlags& flags)
{
    cmd->add_option("--alignment", flags.alignment,
                    "anchor_ref|anchor_test|interp_longest|interp_shortest|interp_ref|interp_test")
        ->capture_default_str();
    cmd->add_option("--frame-size", flags.frame_size, "STFT frame size for TSM features")
        ->capture_default_str();
    cmd->add_option("--hop", flags.hop, "STFT hop for TSM features")->capture_default_str();
    cmd->add_option("--beta", flags.beta, "override the processing time-scale ratio");
    cmd->add_option("--config", flags.config_path, "JSON settings file");
}

ExtractionConfig make_extraction_config(const ExtractionFlags& flags, const CLI::App* cmd)
{
    ExtractionConfig config;
    if (!flags.config_path.empty()) {
        std::ifstream file(flags.config_path);
        if (!file)
            throw DataError("cannot open config file: " + flags.config_path);
        json j;
        try {
            file >> j;
        } catch (const json::exception& e) {
            throw DataError("malformed config file: " + std::string(e.what()));
        }
        // command-line flags win over the settings file
        if (j.contains("alignment") && cmd->count("--alignment") == 0)
            config.alignment = alignment_from_string(j["alignment"].get<std::string>());
        if (j.contains("frame_size") && cmd->count("--frame-size") == 0)
            config.tsm.frame_size = j["frame_size"].get<std::size_t>();
        if (j.contains("hop") && cmd->count("--hop") == 0)
            config.tsm.hop = j["hop"].get<std::size_t>();
        if (j.contains("hpss_frame_size"))
            config.tsm.hpss_frame_size = j["hpss_frame_size"].get<std::size_t>();
        if (j.contains("hpss_hop"))
            config.tsm.hpss_hop = j["hpss_hop"].get<std::size_t>();
        if (j.contains("hpss_time_median"))
            config.tsm.hpss_time_median = j["hpss_time_median"].get<std::size_t>();
        if (j.contains("hpss_freq_median"))
            config.tsm.hpss_freq_median = j["hpss_freq_median"].get<std::size_t>();
        if (j.contains("peaq_frame_size"))
            config.peaq_frame_size = j["peaq_frame_size"].get<std::size_t>();
        if (j.contains("peaq_hop"))
            config.peaq_hop = j["peaq_hop"].get<std::size_t>();
        if (j.contains("playback_level_db"))
            config.playback_level_db = j["playback_level_db"].get<double>();
    }
    if (cmd->count("--alignment") > 0)
        config.alignment = alignment_from_string(flags.alignment);
    if (cmd->count("--frame-size") > 0)
        config.tsm.frame_size = flags.frame_size;
    if (cmd->count("--hop") > 0)
        config.tsm.hop = flags.hop;
    config.beta_override = flags.beta;
    return config;
}

ExtractionResult extract_with_progress(const std::vector<ManifestRow>& manifest,
                                       const ExtractionConfig& config, unsigned jobs)
{
    return extract_table(manifest, config, jobs,
                         [&](std::size_t i, const ManifestRow& m, const std::string& error) {
                             std::cerr << "[" << i + 1 << "/" << manifest.size() << "] "
                                       << m.ref_path << " vs " << m.test_path;
                             if (error.empty())
                                 std::cerr << ": ok\n";
                             else
                                 std::cerr << ": FAILED: " << error << "\n";
                         });
}

std::vector<ManifestRow> unique_train_references(const std::vector<ManifestRow>& manifest)
{
    std::vector<ManifestRow> refs;
    std::set<std::string> seen;
    for (const auto& row : manifest) {
        if (row.subset != "train")
            continue;
        if (seen.insert(row.ref_path).second)
            refs.push_back(row);
    }
    return refs;
}

int cmd_features(const std::string& manifest_path, const std::string& out_path,
                 const ExtractionConfig& config, bool include_refs, bool skip_errors,
                 unsigned jobs)
{
    const auto manifest = load_manifest(manifest_path);
    if (manifest.empty())
        throw DataError("manifest has no rows: " + manifest_path);

    ExtractionResult result = extract_with_progress(manifest, config, jobs);
    if (!result.failures.empty() && !skip_errors)
        throw DataError(std::to_string(result.failures.size()) + " of " +
                        std::to_string(manifest.size()) +
                        " rows failed (use --skip-errors to keep going)");

    FeatureTable table = std::move(result.table);
    if (include_refs) {
        const auto refs = unique_train_references(manifest);
        std::cerr << "appending " << refs.size() << " reference augmentation rows\n";
        table = include_references(std::move(table), refs, config);
    }

    save_feature_table(table, out_path);
    std::cout << "wrote " << table.rows.size() << " rows to " << out_path;
    if (!result.failures.empty())
        std::cout << " (" << result.failures.size() << " rows skipped)";
    std::cout << "\n";
    return 0;
}

void save_history_csv(const TrainHistory& history, const std::string& path)
{
    std::ofstream file(path);
    if (!file)
        throw DataError("cannot write history file: " + path);
    file << "epoch,loss_train,loss_val,loss_test,rho_train,rho_val,rho_test,distance\n";
    file << std::setprecision(17);
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const auto& s = history.epochs[e];
        file << e << ',' << s.loss_train << ',' << s.loss_val << ',' << s.loss_test << ','
             << s.rho_train << ',' << s.rho_val << ',' << s.rho_test << ',' << s.distance
             << '\n';
    }
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& spec)
{
    auto parse = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(s, &used);
            if (used != s.size())
                throw DataError("bad seed value: " + s);
            return v;
        } catch (const std::logic_error&) {
            throw DataError("bad seed range: " + spec + " (expected N or A..B)");
        }
    };
    const auto dots = spec.find("..");
    if (dots == std::string::npos) {
        const std::uint64_t seed = parse(spec);
        return {seed, seed};
    }
    const std::uint64_t lo = parse(spec.substr(0, dots));
    const std::uint64_t hi = parse(spec.substr(dots + 2));
    if (hi < lo)
        throw DataError("bad seed range: " + spec);
    return {lo, hi};
}

int cmd_train(const std::string& table_path, const std::string& out_prefix,
              const std::string& seeds, TrainConfig base_config)
{
    const FeatureTable raw = load_feature_table(table_path);
    const FeatureTable table = normalize(raw);

    const auto [seed_lo, seed_hi] = parse_seed_range(seeds);
    double best_distance = std::numeric_limits<double>::infinity();
    std::uint64_t best_seed = seed_lo;

    std::ofstream summary(out_prefix + "_summary.csv");
    if (!summary)
        throw DataError("cannot write summary file: " + out_prefix + "_summary.csv");
    summary << "seed,selected_epoch,epochs_trained,distance,loss_train,loss_val,loss_test,"
               "rho_train,rho_val,rho_test,model_file\n";
    summary << std::setprecision(17);

    for (std::uint64_t seed = seed_lo; seed <= seed_hi; ++seed) {
        TrainConfig config = base_config;
        config.seed = seed;
        auto [model, history] = train(table, config);
        const auto& sel = history.epochs[history.selected_epoch];

        const std::string model_path = out_prefix + "_seed" + std::to_string(seed) + ".json";
        save_model(model, history, model_path);
        save_history_csv(history,
                         out_prefix + "_seed" + std::to_string(seed) + "_history.csv");

        summary << seed << ',' << history.selected_epoch << ',' << history.epochs.size() << ','
                << sel.distance << ',' << sel.loss_train << ',' << sel.loss_val << ','
                << sel.loss_test << ',' << sel.rho_train << ',' << sel.rho_val << ','
                << sel.rho_test << ',' << model_path << '\n';
        std::cout << "seed " << seed << ": D=" << sel.distance << " at epoch "
                  << history.selected_epoch << " (rho_te=" << sel.rho_test
                  << ", rmse_te=" << sel.loss_test << ")\n";

        if (sel.distance < best_distance) {
            best_distance = sel.distance;
            best_seed = seed;
        }
    }
    std::cout << "best seed: " << best_seed << " (D=" << best_distance << ")\n";
    summary << "# best_seed," << best_seed << '\n';
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& ref_path,
                const std::string& test_path, const std::string& manifest_path,
                const std::string& out_path, const ExtractionConfig& config, unsigned jobs)
{
    const ModelParams model = load_model(model_path);

    if (!ref_path.empty()) {
        const FeatureVector features = extract_features(ref_path, test_path, config);
        std::printf("%.3f\n", predict(model, features));
        return 0;
    }

    const auto manifest = load_manifest(manifest_path);
    if (manifest.empty())
        throw DataError("manifest has no rows: " + manifest_path);
    const ExtractionResult extracted = extract_with_progress(manifest, config, jobs);
    if (!extracted.failures.empty())
        throw DataError("row " + std::to_string(extracted.failures.front().row) +
                        " failed: " + extracted.failures.front().message);

    std::vector<ResultRow> results;
    for (std::size_t i = 0; i < extracted.table.rows.size(); ++i) {
        const auto& features = extracted.table.rows[i].features;
        const double omos = predict(model, features);
        std::printf("%s,%s,%.3f\n", features.ref_id.c_str(), features.test_id.c_str(), omos);
        results.push_back({features.method, features.beta, features.file_class, omos});
    }
    if (!out_path.empty()) {
        save_results(results, out_path);
        std::cerr << "wrote " << results.size() << " results to " << out_path << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& results_path, const std::string& manifest_path,
                 const std::string& model_path, const std::string& out_prefix,
                 const ExtractionConfig& config, unsigned jobs)
{
    std::vector<ResultRow> rows;
    if (!results_path.empty()) {
        rows = load_results(results_path);
    } else {
        const ModelParams model = load_model(model_path);
        const auto manifest = load_manifest(manifest_path);
        const ExtractionResult extracted = extract_with_progress(manifest, config, jobs);
        if (!extracted.failures.empty())
            throw DataError("row " + std::to_string(extracted.failures.front().row) +
                            " failed: " + extracted.failures.front().message);
        for (const auto& row : extracted.table.rows)
            rows.push_back({row.features.method, row.features.beta, row.features.file_class,
                            predict(model, row.features)});
    }

    const EvaluationReport report = build_report(rows);
    write_report_files(report, out_prefix);

    std::cout << "rows: " << report.total_rows << " total, " << report.included_rows
              << " included, " << report.excluded_beta_one << " excluded at beta=1, "
              << report.excluded_beta_low << " excluded at beta<0.25\n";
    std::cout << "method means (ascending):\n";
    for (const auto& m : report.methods)
        std::printf("  %-12s %.3f  (n=%zu)\n", m.method.c_str(), m.mean_omos, m.count);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Objective quality measurement for time-scale-modified audio"};
    app.require_subcommand(1);

    // features
    auto* features = app.add_subcommand("features", "extract a feature table from a manifest");
    std::string features_manifest, features_out;
    ExtractionFlags features_flags;
    bool include_refs = true, skip_errors = false;
    unsigned jobs = 1;
    features->add_option("--manifest", features_manifest, "dataset manifest CSV")->required();
    features->add_option("--out", features_out, "output feature table CSV")->required();
    add_extraction_flags(features, features_flags);
    features->add_flag("--include-refs,!--no-include-refs", include_refs,
                       "append (ref, ref) rows labelled 5.0");
    features->add_flag("--skip-errors", skip_errors, "keep going when a row fails");
    features->add_option("--jobs", jobs, "parallel extraction workers")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "train models over a seed range");
    std::string train_table, train_out = "model", train_seeds = "0..0";
    TrainConfig train_config;
    bool train_include_refs = true;
    bool no_select_with_test = false, no_extend = false;
    train_cmd->add_option("--table", train_table, "feature table CSV")->required();
    train_cmd->add_option("--out", train_out, "output prefix for model files")
        ->capture_default_str();
    train_cmd->add_option("--seeds", train_seeds, "seed or range, e.g. 0..9")
        ->capture_default_str();
    train_cmd->add_option("--target", train_config.target,
                          "smos|median_os|raw_smos|raw_median_os")
        ->capture_default_str();
    train_cmd->add_option("--epochs", train_config.epochs)->capture_default_str();
    train_cmd->add_option("--lr", train_config.learning_rate)->capture_default_str();
    train_cmd->add_option("--weight-decay", train_config.weight_decay)->capture_default_str();
    train_cmd->add_option("--val-fraction", train_config.val_fraction)->capture_default_str();
    train_cmd->add_flag("--include-refs,!--no-include-refs", train_include_refs,
                        "keep reference augmentation rows in training");
    train_cmd->add_flag("--no-select-with-test", no_select_with_test,
                        "pick the epoch on train/val metrics only");
    train_cmd->add_flag("--no-extend", no_extend, "never extend past the scheduled epochs");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "predict OMOS for pairs");
    std::string predict_model, predict_ref, predict_test, predict_manifest, predict_out;
    ExtractionFlags predict_flags;
    unsigned predict_jobs = 1;
    predict_cmd->add_option("--model", predict_model, "trained model file")->required();
    predict_cmd->add_option("--ref", predict_ref, "reference WAV");
    predict_cmd->add_option("--test", predict_test, "test WAV");
    predict_cmd->add_option("--manifest", predict_manifest, "manifest for batch mode");
    predict_cmd->add_option("--out", predict_out, "results CSV (batch mode)");
    add_extraction_flags(predict_cmd, predict_flags);
    predict_cmd->add_option("--jobs", predict_jobs)->capture_default_str();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "method comparison report");
    std::string eval_results, eval_manifest, eval_model, eval_out = "report";
    ExtractionFlags eval_flags;
    unsigned eval_jobs = 1;
    evaluate_cmd->add_option("--results", eval_results, "results CSV from predict");
    evaluate_cmd->add_option("--manifest", eval_manifest, "manifest (with --model)");
    evaluate_cmd->add_option("--model", eval_model, "trained model file (with --manifest)");
    evaluate_cmd->add_option("--out", eval_out, "output prefix")->capture_default_str();
    add_extraction_flags(evaluate_cmd, eval_flags);
    evaluate_cmd->add_option("--jobs", eval_jobs)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (features->parsed()) {
            return cmd_features(features_manifest, features_out,
                                make_extraction_config(features_flags, features), include_refs,
                                skip_errors, jobs);
        }
        if (train_cmd->parsed()) {
            train_config.select_with_test = !no_select_with_test;
            train_config.extend_if_improving = !no_extend;
            train_config.include_references = train_include_refs;
            return cmd_train(train_table, train_out, train_seeds, train_config);
        }
        if (predict_cmd->parsed()) {
            const bool single = !predict_ref.empty() || !predict_test.empty();
            if (single && (predict_ref.empty() || predict_test.empty()))
                throw DataError("single-pair mode needs both --ref and --test");
            if (!single && predict_manifest.empty())
                throw DataError("predict needs either --ref/--test or --manifest");
            return cmd_predict(predict_model, predict_ref, predict_test, predict_manifest,
                               predict_out, make_extraction_config(predict_flags, predict_cmd),
                               predict_jobs);
        }
        if (evaluate_cmd->parsed()) {
            if (eval_results.empty() && (eval_manifest.empty() || eval_model.empty()))
                throw DataError("evaluate needs --results or --manifest plus --model");
            return cmd_evaluate(eval_results, eval_manifest, eval_model, eval_out,
                                make_extraction_config(eval_flags, evaluate_cmd), eval_jobs);
        }
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
