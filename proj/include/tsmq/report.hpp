#pragma once

#include "tsmq/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace tsmq {

/// One scored pair ready for aggregation.
struct ResultRow {
    std::string method;
    double beta = 1.0;
    std::string file_class;
    double omos = 0.0;
};

struct MethodSummary {
    std::string method;
    double mean_omos = 0.0;
    std::size_t count = 0;
    std::map<std::string, double> class_mean;       // class -> mean OMOS
    std::map<std::string, std::size_t> class_count; // class -> row count
};

/// Per-method means with exclusion accounting. Rows at beta == 1 or
/// beta < 0.25 never reach any average.
struct EvaluationReport {
    std::vector<MethodSummary> methods; // ascending overall mean
    // beta -> method -> mean OMOS, included rows only
    std::map<double, std::map<std::string, double>> series;
    std::size_t total_rows = 0;
    std::size_t included_rows = 0;
    std::size_t excluded_beta_one = 0;
    std::size_t excluded_beta_low = 0;
};

bool result_row_excluded(const ResultRow& row);

EvaluationReport build_report(const std::vector<ResultRow>& rows);

/// Writes <prefix>_overall.csv, <prefix>_class_<c>.csv, <prefix>_series.csv
/// and <prefix>_exclusions.csv.
void write_report_files(const EvaluationReport& report, const std::string& prefix);

std::vector<ResultRow> load_results(const std::string& path);
void save_results(const std::vector<ResultRow>& rows, const std::string& path);

} // namespace tsmq
