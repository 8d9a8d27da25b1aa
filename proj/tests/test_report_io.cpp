#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "bayesbag/report_io.hpp"
#include "doctest.h"

using namespace bayesbag;
using nlohmann::json;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::size_t columns(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("double formatting round-trips") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(std::nan("")) == "NA");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_optional(std::nullopt) == "NA");
    CHECK(format_optional(0.5) == "0.5");

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = std::ldexp(u(rng), static_cast<int>(u(rng)));
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
        CHECK(json::parse(json_number(x).dump()).get<double>() == x);
    }
}

TEST_CASE("json numbers") {
    CHECK(json_number(1.5) == json(1.5));
    CHECK(json_number(std::nan("")).is_null());
    CHECK(json_number(std::numeric_limits<double>::infinity()) == json("inf"));
    CHECK(json_number(-std::numeric_limits<double>::infinity()) == json("-inf"));
    CHECK(json_optional(std::nullopt).is_null());
    CHECK(json_optional(3.0) == json(3.0));
}

TEST_CASE("mismatch report json") {
    const auto r = build_mismatch_report({{"a", {0.1, 0.2, 50, 1.0}}, {"b", {0.2, 0.1, 50, {}}}}, "draws");
    const json j = to_json(r);
    CHECK(j["schema_version"] == schema_version);
    CHECK(j["n"] == 50);
    CHECK(j["variance_source"] == "draws");
    REQUIRE(j["records"].size() == 2);
    const auto& a = j["records"][0];
    for (const char* key : {"label", "v_n", "v_n_bag", "v0", "sigma_hat_sq", "s_hat_sq", "m_hat_asym",
                            "m_hat_fs", "m_hat_fs_valid", "index_asym", "index_fs"})
        CHECK(a.contains(key));
    CHECK(a["m_hat_asym"] == 100.0);
    CHECK(a["index_asym"] == 0.0);
    const auto& b = j["records"][1];
    CHECK(b["v0"].is_null());
    CHECK(b["index_asym"].is_null());
    CHECK(b["m_hat_fs"].is_null());
    CHECK(j["class_asym"]["index"].is_null());
    CHECK(j["class_fs"].is_null());

    const auto eq = build_mismatch_report({{"c", {0.1, 0.1, 50, {}}}}, "draws");
    CHECK(to_json(eq)["records"][0]["m_hat_asym"] == "inf");
}

TEST_CASE("study csv and summaries") {
    SimConfig c;
    c.replicates = 3;
    c.b = 10;
    c.master_seed = 4;
    SimConfig nl = c;
    nl.regression_fn = RegressionFn::nonlinear;
    const auto table = run_study({c, nl}, 1);

    std::ostringstream csv;
    write_study_csv(csv, table);
    const auto rows = lines(csv.str());
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] ==
          "schema_version,config_index,label,n,d,regressors,regression_fn,coefficients,lambda,a0,b0,b,"
          "master_seed,rep,rse_std,rse_bag,rse_diff,lpd_std,lpd_bag,lpd_diff,m_hat_fs,class_index,"
          "na_fallback,m_used");
    for (const auto& r : rows) CHECK(columns(r) == 24);
    CHECK(rows[1].rfind("1,0,uncorrelated-linear-dense,50,10,uncorrelated,linear,dense,", 0) == 0);
    CHECK(rows[4].rfind("1,1,uncorrelated-nonlinear-dense,", 0) == 0);

    const auto sum = summarize(table);
    std::ostringstream scsv;
    write_summary_csv(scsv, sum);
    const auto srows = lines(scsv.str());
    REQUIRE(srows.size() == 3);
    for (const auto& r : srows) CHECK(columns(r) == columns(srows[0]));
    CHECK(srows[0].find("na_fraction") != std::string::npos);
    CHECK(srows[0].find("lpd_diff_median") != std::string::npos);

    const json j = summary_json(sum);
    CHECK(j["schema_version"] == schema_version);
    REQUIRE(j["configs"].size() == 2);
    CHECK(j["configs"][0]["label"] == "uncorrelated-linear-dense");
    CHECK(j["configs"][1]["na_fraction"].get<double>() == sum[1].na_fraction);
    CHECK(j["configs"][0]["rse_std"]["median"].get<double>() == sum[0].rse_std.median);
}

TEST_CASE("text files") {
    const auto dir = std::filesystem::temp_directory_path() / "bayesbag_report_io_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "x.txt").string();
    write_text_file(path, "a\nb\n");
    write_text_file(path, "c\n");
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == "c\n");
    CHECK_THROWS_AS(write_text_file((dir / "missing" / "y.txt").string(), "z"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
