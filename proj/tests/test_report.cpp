#include "helpers.hpp"
#include "tsmq/report.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

using namespace tsmq;
using namespace tsmq::testing;

TEST_CASE("exclusion rules")
{
    CHECK(result_row_excluded({"PV", 1.0, "music", 3.0}));
    CHECK(result_row_excluded({"PV", 0.22, "music", 3.0}));
    CHECK(result_row_excluded({"PV", 0.2499, "music", 3.0}));
    CHECK_FALSE(result_row_excluded({"PV", 0.25, "music", 3.0}));
    CHECK_FALSE(result_row_excluded({"PV", 0.9961, "music", 3.0}));
    CHECK_FALSE(result_row_excluded({"PV", 1.924, "music", 3.0}));
}

TEST_CASE("build_report means and exclusion accounting")
{
    std::vector<ResultRow> rows = {
        {"PV", 0.5, "music", 3.0},   {"PV", 1.5, "music", 4.0},
        {"WSOLA", 0.5, "voice", 2.0}, {"WSOLA", 1.5, "voice", 3.0},
        {"PV", 1.0, "music", 5.0},    // excluded: beta == 1
        {"WSOLA", 0.22, "voice", 1.0} // excluded: beta < 0.25
    };
    const EvaluationReport report = build_report(rows);

    CHECK(report.total_rows == 6);
    CHECK(report.included_rows == 4);
    CHECK(report.excluded_beta_one == 1);
    CHECK(report.excluded_beta_low == 1);
    CHECK(report.included_rows + report.excluded_beta_one + report.excluded_beta_low ==
          report.total_rows);

    REQUIRE(report.methods.size() == 2);
    // ascending overall mean: WSOLA 2.5, PV 3.5
    CHECK(report.methods[0].method == "WSOLA");
    CHECK(report.methods[0].mean_omos == doctest::Approx(2.5));
    CHECK(report.methods[1].method == "PV");
    CHECK(report.methods[1].mean_omos == doctest::Approx(3.5));
    CHECK(report.methods[1].class_mean.at("music") == doctest::Approx(3.5));

    // per-(method, beta) series
    CHECK(report.series.at(0.5).at("PV") == doctest::Approx(3.0));
    CHECK(report.series.at(1.5).at("WSOLA") == doctest::Approx(3.0));
    CHECK(report.series.count(1.0) == 0);
}

TEST_CASE("report means are order independent")
{
    TestRng rng(501);
    std::vector<ResultRow> rows;
    const std::vector<std::string> methods = {"PV", "IPL", "WSOLA"};
    const std::vector<std::string> classes = {"music", "solo", "voice"};
    for (int i = 0; i < 200; ++i) {
        rows.push_back({methods[static_cast<std::size_t>(rng.next() % 3)],
                        rng.uniform(0.1, 2.2), classes[static_cast<std::size_t>(rng.next() % 3)],
                        rng.uniform(1.0, 5.0)});
    }
    const EvaluationReport a = build_report(rows);
    std::reverse(rows.begin(), rows.end());
    const EvaluationReport b = build_report(rows);
    REQUIRE(a.methods.size() == b.methods.size());
    for (std::size_t i = 0; i < a.methods.size(); ++i) {
        CHECK(a.methods[i].method == b.methods[i].method);
        CHECK(a.methods[i].mean_omos == doctest::Approx(b.methods[i].mean_omos).epsilon(1e-12));
    }
}

TEST_CASE("report and results files round trip")
{
    const auto dir = std::filesystem::temp_directory_path();
    const std::string results_path = (dir / "tsmq_results.csv").string();
    const std::string prefix = (dir / "tsmq_report").string();

    std::vector<ResultRow> rows = {
        {"PV", 0.5, "music", 3.25}, {"IPL", 0.8, "voice", 4.5}, {"PV", 1.0, "music", 5.0}};
    save_results(rows, results_path);
    const auto loaded = load_results(results_path);
    REQUIRE(loaded.size() == rows.size());
    CHECK(loaded[1].method == "IPL");
    CHECK(loaded[1].beta == 0.8);
    CHECK(loaded[1].omos == 4.5);

    const EvaluationReport report = build_report(loaded);
    write_report_files(report, prefix);
    CHECK(std::filesystem::exists(prefix + "_overall.csv"));
    CHECK(std::filesystem::exists(prefix + "_series.csv"));
    CHECK(std::filesystem::exists(prefix + "_exclusions.csv"));

    for (const auto& suffix : {"_overall.csv", "_series.csv", "_exclusions.csv",
                               "_class_music.csv", "_class_voice.csv"})
        std::remove((prefix + suffix).c_str());
    std::remove(results_path.c_str());
}
