#include "tsmq/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace tsmq {

bool result_row_excluded(const ResultRow& row)
{
    return row.beta == 1.0 || row.beta < 0.25;
}

EvaluationReport build_report(const std::vector<ResultRow>& rows)
{
    EvaluationReport report;
    report.total_rows = rows.size();

    struct Acc {
        double sum = 0.0;
        std::size_t count = 0;
        std::map<std::string, std::pair<double, std::size_t>> per_class;
    };
    std::map<std::string, Acc> by_method;
    std::map<double, std::map<std::string, std::pair<double, std::size_t>>> series_acc;

    for (const auto& row : rows) {
        if (result_row_excluded(row)) {
            if (row.beta == 1.0)
                ++report.excluded_beta_one;
            else
                ++report.excluded_beta_low;
            continue;
        }
        ++report.included_rows;
        Acc& acc = by_method[row.method];
        acc.sum += row.omos;
        ++acc.count;
        auto& cls = acc.per_class[row.file_class];
        cls.first += row.omos;
        ++cls.second;
        auto& cell = series_acc[row.beta][row.method];
        cell.first += row.omos;
        ++cell.second;
    }

    for (const auto& [method, acc] : by_method) {
        MethodSummary summary;
        summary.method = method;
        summary.count = acc.count;
        summary.mean_omos = acc.sum / static_cast<double>(acc.count);
        for (const auto& [cls, pair] : acc.per_class) {
            summary.class_mean[cls] = pair.first / static_cast<double>(pair.second);
            summary.class_count[cls] = pair.second;
        }
        report.methods.push_back(std::move(summary));
    }
    std::sort(report.methods.begin(), report.methods.end(),
              [](const MethodSummary& a, const MethodSummary& b) {
                  return a.mean_omos < b.mean_omos;
              });

    for (const auto& [beta, cells] : series_acc)
        for (const auto& [method, pair] : cells)
            report.series[beta][method] = pair.first / static_cast<double>(pair.second);
    return report;
}

namespace {

std::string fixed3(double v)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << v;
    return ss.str();
}

std::string full_precision(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::set<std::string> all_classes(const EvaluationReport& report)
{
    std::set<std::string> classes;
    for (const auto& m : report.methods)
        for (const auto& [cls, mean] : m.class_mean)
            classes.insert(cls);
    return classes;
}

} // namespace

void write_report_files(const EvaluationReport& report, const std::string& prefix)
{
    const std::set<std::string> classes = all_classes(report);

    {
        std::ofstream file(prefix + "_overall.csv");
        if (!file)
            throw DataError("cannot write report: " + prefix + "_overall.csv");
        file << "method,mean_omos,rows";
        for (const auto& cls : classes)
            file << ',' << cls;
        file << '\n';
        for (const auto& m : report.methods) {
            file << m.method << ',' << fixed3(m.mean_omos) << ',' << m.count;
            for (const auto& cls : classes) {
                file << ',';
                const auto it = m.class_mean.find(cls);
                if (it != m.class_mean.end())
                    file << fixed3(it->second);
            }
            file << '\n';
        }
    }

    for (const auto& cls : classes) {
        std::ofstream file(prefix + "_class_" + cls + ".csv");
        if (!file)
            throw DataError("cannot write report class file for " + cls);
        file << "method,mean_omos,rows\n";
        std::vector<std::pair<double, const MethodSummary*>> ordered;
        for (const auto& m : report.methods) {
            const auto it = m.class_mean.find(cls);
            if (it != m.class_mean.end())
                ordered.emplace_back(it->second, &m);
        }
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [mean, m] : ordered)
            file << m->method << ',' << fixed3(mean) << ',' << m->class_count.at(cls) << '\n';
    }

    {
        // plot-ready: one column per method, rows indexed by beta
        std::ofstream file(prefix + "_series.csv");
        if (!file)
            throw DataError("cannot write report series file");
        file << "beta";
        for (const auto& m : report.methods)
            file << ',' << m.method;
        file << '\n';
        for (const auto& [beta, cells] : report.series) {
            file << full_precision(beta);
            for (const auto& m : report.methods) {
                file << ',';
                const auto it = cells.find(m.method);
                if (it != cells.end())
                    file << full_precision(it->second);
            }
            file << '\n';
        }
    }

    {
        std::ofstream file(prefix + "_exclusions.csv");
        if (!file)
            throw DataError("cannot write report exclusion log");
        file << "total_rows,included_rows,excluded_beta_eq_1,excluded_beta_lt_0.25\n";
        file << report.total_rows << ',' << report.included_rows << ','
             << report.excluded_beta_one << ',' << report.excluded_beta_low << '\n';
    }
}

std::vector<ResultRow> load_results(const std::string& path)
{
    std::ifstream file(path);
    if (!file)
        throw DataError("cannot open results file: " + path);
    std::vector<ResultRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ','))
            fields.push_back(field);
        if (first) {
            first = false;
            if (!fields.empty() && fields[0] == "method")
                continue;
        }
        if (fields.size() != 4)
            throw DataError("results file " + path + ": expected 4 columns (method,beta,class,omos)");
        ResultRow row;
        row.method = fields[0];
        auto parse = [&](const std::string& s) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size())
                throw DataError("bad numeric value '" + s + "' in " + path);
            return v;
        };
        row.beta = parse(fields[1]);
        row.file_class = fields[2];
        row.omos = parse(fields[3]);
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_results(const std::vector<ResultRow>& rows, const std::string& path)
{
    std::ofstream file(path);
    if (!file)
        throw DataError("cannot write results file: " + path);
    file << "method,beta,class,omos\n";
    for (const auto& row : rows)
        file << row.method << ',' << full_precision(row.beta) << ',' << row.file_class << ','
             << full_precision(row.omos) << '\n';
}

} // namespace tsmq
