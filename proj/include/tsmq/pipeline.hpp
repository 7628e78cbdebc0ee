#pragma once

#include "tsmq/audio.hpp"
#include "tsmq/common.hpp"
#include "tsmq/peaq.hpp"
#include "tsmq/spectral.hpp"
#include "tsmq/tsm_features.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsmq {

inline constexpr std::size_t kFeatureCount = 23;
inline constexpr std::string_view kFeatureSchema = "tsmq.features.v1";

/// Column order is frozen; model files refuse tables with a different
/// schema tag. Names follow the published feature files.
extern const std::array<std::string_view, kFeatureCount> kFeatureNames;

std::size_t feature_index(std::string_view name);

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    std::string ref_id;
    std::string test_id;
    std::string method;
    double beta = 1.0;
    std::string file_class; // music | solo | voice
    AlignmentMode alignment = AlignmentMode::interp_to_test;
    std::string subset = "train"; // train | test | eval
    bool augmented = false;
};

struct Labels {
    std::optional<double> smos;
    std::optional<double> raw_smos;
    std::optional<double> median_os;
    std::optional<double> raw_median_os;

    std::optional<double> by_target(const std::string& target) const;
};

struct FeatureRow {
    FeatureVector features;
    Labels labels;
};

struct FeatureScaler {
    std::array<double, kFeatureCount> min{};
    std::array<double, kFeatureCount> max{};

    double to_unit(std::size_t i, double v) const { return (v - min[i]) / (max[i] - min[i]); }
};

struct FeatureTable {
    std::vector<FeatureRow> rows;
    bool normalized = false;
    std::optional<FeatureScaler> scaler;
};

struct ManifestRow {
    std::string subset;
    std::string ref_path;
    std::string test_path;
    std::string method;
    double beta = 1.0;
    Labels labels;
    std::string file_class;
};

struct ExtractionConfig {
    AlignmentMode alignment = AlignmentMode::interp_to_test;
    TsmConfig tsm;
    std::size_t peaq_frame_size = 2048;
    std::size_t peaq_hop = 1024;
    double playback_level_db = 92.0;
    std::optional<double> beta_override; // forces the processing beta
};

/// Full per-pair pipeline: load/prepare/truncate, alignment, TSM features
/// and PEAQ MOVs. The processing beta comes from the truncated lengths
/// unless overridden; `manifest_beta` is recorded as row metadata.
FeatureVector extract_features(const std::string& ref_path, const std::string& test_path,
                               const ExtractionConfig& config,
                               std::optional<double> manifest_beta = std::nullopt);

/// Eq-style min/max scaling of every feature to [0, 1]; the scaler is kept
/// for inference. Throws when a feature is constant.
FeatureTable normalize(const FeatureTable& table);

double smos_to_unit(double smos);    // [1,5] -> [0,1]
double unit_to_smos(double unit);    // inverse

/// Appends (ref, ref) rows with every label set to 5, flagged augmented.
FeatureTable include_references(FeatureTable table,
                                const std::vector<ManifestRow>& reference_rows,
                                const ExtractionConfig& config);

std::vector<ManifestRow> load_manifest(const std::string& path);
void save_feature_table(const FeatureTable& table, const std::string& path);
FeatureTable load_feature_table(const std::string& path);

/// One extraction failure: manifest row index plus the diagnostic.
struct RowFailure {
    std::size_t row = 0;
    std::string message;
};

/// Result rows stay in manifest order regardless of the worker count;
/// failed rows are omitted and reported instead.
struct ExtractionResult {
    FeatureTable table;
    std::vector<RowFailure> failures;
};

using RowProgress = std::function<void(std::size_t index, const ManifestRow& row,
                                       const std::string& error)>;

/// Extracts every manifest row, optionally across `jobs` worker threads.
/// `progress` (if set) fires once per row with an empty error on success.
ExtractionResult extract_table(const std::vector<ManifestRow>& manifest,
                               const ExtractionConfig& config, unsigned jobs = 1,
                               const RowProgress& progress = {});

} // namespace tsmq
