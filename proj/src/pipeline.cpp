#include "tsmq/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace tsmq {

const std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "WinModDiff1B", "AvgModDiff1B", "AvgModDiff2B", "RmsNoiseLoudB",
    "BandwidthRefB", "BandwidthTestB", "TotalNMRB", "RelDistFramesB",
    "MFPDB", "ADBB", "EHSB", "BandwidthTestNew",
    "SER", "DM", "MPhNW", "MPhMW", "SPhNW", "SPhMW",
    "SSMAD", "SSMD", "PeakDelta", "TrRat", "HPSTrRat",
};

std::size_t feature_index(std::string_view name)
{
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[i] == name)
            return i;
    throw DataError("unknown feature name: " + std::string(name));
}

std::optional<double> Labels::by_target(const std::string& target) const
{
    if (target == "smos") return smos;
    if (target == "raw_smos") return raw_smos;
    if (target == "median_os") return median_os;
    if (target == "raw_median_os") return raw_median_os;
    throw DataError("unknown training target: " + target);
}

FeatureVector extract_features(const std::string& ref_path, const std::string& test_path,
                               const ExtractionConfig& config,
                               std::optional<double> manifest_beta)
{
    AudioSignal ref = prepare(load_audio(ref_path));
    AudioSignal test = prepare(load_audio(test_path));
    auto [ref_cut, test_cut] = truncate_active(ref, test);

    const TimeScaleRatio beta =
        estimate_beta(ref_cut, test_cut, config.beta_override);

    // TSM feature spectrograms at the native rate
    const Spectrogram ref_spec = stft(ref_cut, config.tsm.frame_size, config.tsm.hop);
    const Spectrogram test_spec = stft(test_cut, config.tsm.frame_size, config.tsm.hop);

    Matrix aligned_ref, aligned_test;
    if (is_anchor_mode(config.alignment)) {
        const bool anchor_is_test = config.alignment == AlignmentMode::anchor_test;
        auto [ar, at] = time_instance_frames(ref_cut, test_cut, anchor_is_test, beta,
                                             config.tsm.frame_size, config.tsm.hop);
        std::tie(aligned_ref, aligned_test) = align(ar, at, config.alignment, beta);
    } else {
        std::tie(aligned_ref, aligned_test) = align(ref_spec, test_spec, config.alignment, beta);
    }

    const TsmFeatureSet tsm = compute_tsm_features(ref_cut, test_cut, ref_spec, test_spec,
                                                   aligned_ref, aligned_test, beta, config.tsm);
    if (!tsm.bandwidth_test_new)
        throw DataError("feature BandwidthTestNew unavailable: sample rate leaves no "
                        "spectrum above the 21 kHz noise-floor region");

    // PEAQ path uses its own calibrated analysis window
    EarModelConfig ear_cfg;
    ear_cfg.sample_rate = ref_cut.sample_rate;
    ear_cfg.frame_size = config.peaq_frame_size;
    ear_cfg.hop = config.peaq_hop;
    ear_cfg.playback_level_db = config.playback_level_db;
    const FftEarModel model(ear_cfg);

    Matrix peaq_ref_mag, peaq_test_mag;
    if (is_anchor_mode(config.alignment)) {
        const bool anchor_is_test = config.alignment == AlignmentMode::anchor_test;
        auto [ref_starts, test_starts] =
            time_instance_starts(ref_cut.size(), test_cut.size(), anchor_is_test, beta,
                                 config.peaq_frame_size, config.peaq_hop);
        peaq_ref_mag = model.magnitude_frames_at(ref_cut, ref_starts);
        peaq_test_mag = model.magnitude_frames_at(test_cut, test_starts);
    } else {
        std::tie(peaq_ref_mag, peaq_test_mag) =
            align_magnitudes(model.magnitude_frames(ref_cut),
                             model.magnitude_frames(test_cut), config.alignment);
    }
    const EarPatterns ref_patterns = model.process(peaq_ref_mag);
    const EarPatterns test_patterns = model.process(peaq_test_mag);
    const MovSet movs =
        compute_movs(model, ref_patterns, test_patterns, peaq_ref_mag, peaq_test_mag);

    FeatureVector out;
    out.values = {
        movs.win_mod_diff1, movs.avg_mod_diff1, movs.avg_mod_diff2, movs.rms_noise_loud,
        movs.bandwidth_ref, movs.bandwidth_test, movs.total_nmr, movs.rel_dist_frames,
        movs.mfpd, movs.adb, movs.ehs, *tsm.bandwidth_test_new,
        tsm.ser, tsm.dm, tsm.mphnw, tsm.mphmw, tsm.sphnw, tsm.sphmw,
        tsm.ssmad, tsm.ssmd, tsm.peak_delta, tsm.tr_rat, tsm.hps_tr_rat,
    };
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!std::isfinite(out.values[i]))
            throw NumericError("non-finite feature " + std::string(kFeatureNames[i]) +
                               " for pair " + ref_path + " / " + test_path);
    }
    out.ref_id = ref_path;
    out.test_id = test_path;
    out.beta = manifest_beta.value_or(beta.beta);
    out.alignment = config.alignment;
    return out;
}

FeatureTable normalize(const FeatureTable& table)
{
    if (table.rows.size() < 2)
        throw DataError("normalization needs at least two rows");

    FeatureScaler scaler;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        double lo = table.rows.front().features.values[i];
        double hi = lo;
        for (const auto& row : table.rows) {
            lo = std::min(lo, row.features.values[i]);
            hi = std::max(hi, row.features.values[i]);
        }
        if (!(hi > lo))
            throw DataError("degenerate scaler: feature " + std::string(kFeatureNames[i]) +
                            " is constant");
        scaler.min[i] = lo;
        scaler.max[i] = hi;
    }

    FeatureTable out = table;
    for (auto& row : out.rows)
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            row.features.values[i] = scaler.to_unit(i, row.features.values[i]);
    out.normalized = true;
    out.scaler = scaler;
    return out;
}

double smos_to_unit(double smos) { return (smos - 1.0) / 4.0; }
double unit_to_smos(double unit) { return 4.0 * unit + 1.0; }

FeatureTable include_references(FeatureTable table,
                                const std::vector<ManifestRow>& reference_rows,
                                const ExtractionConfig& config)
{
    for (const auto& manifest_row : reference_rows) {
        FeatureRow row;
        row.features = extract_features(manifest_row.ref_path, manifest_row.ref_path, config,
                                        /*manifest_beta=*/1.0);
        row.features.method = "REF";
        row.features.file_class = manifest_row.file_class;
        row.features.subset = manifest_row.subset;
        row.features.augmented = true;
        row.labels.smos = 5.0;
        row.labels.raw_smos = 5.0;
        row.labels.median_os = 5.0;
        row.labels.raw_median_os = 5.0;
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_double(const std::string& s, const std::string& context)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("bad numeric value '" + s + "' in " + context);
    return v;
}

std::optional<double> parse_optional(const std::string& s, const std::string& context)
{
    if (s.empty())
        return std::nullopt;
    return parse_double(s, context);
}

std::string strip_cr(std::string s)
{
    if (!s.empty() && s.back() == '\r')
        s.pop_back();
    return s;
}

} // namespace

std::vector<ManifestRow> load_manifest(const std::string& path)
{
    std::ifstream file(path);
    if (!file)
        throw DataError("cannot open manifest: " + path);

    std::vector<ManifestRow> rows;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto fields = split_csv_line(line);
        if (first) {
            first = false;
            if (!fields.empty() && fields[0] == "subset")
                continue; // header row
        }
        if (fields.size() != 10)
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": expected 10 columns, got " + std::to_string(fields.size()));
        ManifestRow row;
        row.subset = fields[0];
        row.ref_path = fields[1];
        row.test_path = fields[2];
        row.method = fields[3];
        row.beta = parse_double(fields[4], "manifest beta");
        row.labels.smos = parse_optional(fields[5], "manifest smos");
        row.labels.raw_smos = parse_optional(fields[6], "manifest raw_smos");
        row.labels.median_os = parse_optional(fields[7], "manifest median_os");
        row.labels.raw_median_os = parse_optional(fields[8], "manifest raw_median_os");
        row.file_class = fields[9];
        if (row.beta <= 0.0)
            throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                            ": beta must be positive");
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_feature_table(const FeatureTable& table, const std::string& path)
{
    std::ofstream file(path);
    if (!file)
        throw DataError("cannot write feature table: " + path);

    file << "# schema: " << kFeatureSchema << "\n";
    file << "subset,ref,test,method,beta,class,alignment,augmented";
    for (const auto& name : kFeatureNames)
        file << ',' << name;
    file << ",smos,raw_smos,median_os,raw_median_os\n";

    for (const auto& row : table.rows) {
        const auto& f = row.features;
        file << f.subset << ',' << f.ref_id << ',' << f.test_id << ',' << f.method << ','
             << format_double(f.beta) << ',' << f.file_class << ','
             << alignment_to_string(f.alignment) << ',' << (f.augmented ? 1 : 0);
        for (double v : f.values)
            file << ',' << format_double(v);
        auto emit_label = [&](const std::optional<double>& v) {
            file << ',';
            if (v)
                file << format_double(*v);
        };
        emit_label(row.labels.smos);
        emit_label(row.labels.raw_smos);
        emit_label(row.labels.median_os);
        emit_label(row.labels.raw_median_os);
        file << '\n';
    }
    if (!file)
        throw DataError("write failed: " + path);
}

ExtractionResult extract_table(const std::vector<ManifestRow>& manifest,
                               const ExtractionConfig& config, unsigned jobs,
                               const RowProgress& progress)
{
    std::vector<FeatureRow> rows(manifest.size());
    std::vector<char> failed(manifest.size(), 0);
    std::vector<std::string> errors(manifest.size());
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.size())
                return;
            const ManifestRow& m = manifest[i];
            try {
                rows[i].features = extract_features(m.ref_path, m.test_path, config, m.beta);
                rows[i].features.method = m.method;
                rows[i].features.file_class = m.file_class;
                rows[i].features.subset = m.subset;
                rows[i].labels = m.labels;
            } catch (const std::exception& e) {
                failed[i] = 1;
                errors[i] = e.what();
            }
            if (progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(i, m, errors[i]);
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::max(1u, jobs); ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    ExtractionResult result;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        if (failed[i])
            result.failures.push_back({i, errors[i]});
        else
            result.table.rows.push_back(std::move(rows[i]));
    }
    return result;
}

FeatureTable load_feature_table(const std::string& path)
{
    std::ifstream file(path);
    if (!file)
        throw DataError("cannot open feature table: " + path);

    std::string line;
    if (!std::getline(file, line))
        throw DataError("empty feature table: " + path);
    line = strip_cr(line);
    if (line.find(kFeatureSchema) == std::string::npos)
        throw DataError("feature table schema mismatch in " + path + " (expected " +
                        std::string(kFeatureSchema) + ")");
    if (!std::getline(file, line))
        throw DataError("feature table missing header: " + path);

    constexpr std::size_t kMetaCols = 8;
    constexpr std::size_t kLabelCols = 4;
    const std::size_t expected = kMetaCols + kFeatureCount + kLabelCols;

    FeatureTable table;
    std::size_t line_no = 2;
    while (std::getline(file, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty())
            continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected)
            throw DataError("feature table " + path + " line " + std::to_string(line_no) +
                            ": expected " + std::to_string(expected) + " columns, got " +
                            std::to_string(fields.size()));
        FeatureRow row;
        auto& f = row.features;
        f.subset = fields[0];
        f.ref_id = fields[1];
        f.test_id = fields[2];
        f.method = fields[3];
        f.beta = parse_double(fields[4], "feature table beta");
        f.file_class = fields[5];
        f.alignment = alignment_from_string(fields[6]);
        f.augmented = fields[7] == "1";
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            f.values[i] = parse_double(fields[kMetaCols + i], "feature value");
        const std::size_t lbl = kMetaCols + kFeatureCount;
        row.labels.smos = parse_optional(fields[lbl], "smos");
        row.labels.raw_smos = parse_optional(fields[lbl + 1], "raw_smos");
        row.labels.median_os = parse_optional(fields[lbl + 2], "median_os");
        row.labels.raw_median_os = parse_optional(fields[lbl + 3], "raw_median_os");
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace tsmq
