#include "bayesbag/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace bayesbag {

using nlohmann::json;

std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_optional(const std::optional<double>& x) {
    return x ? format_double(*x) : "NA";
}

json json_number(double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

json json_optional(const std::optional<double>& x) {
    return x ? json_number(*x) : json(nullptr);
}

json to_json(const ClassDiagnostics& c) {
    return json{{"m_hat", json_number(c.m_hat)},
                {"all_valid", c.all_valid},
                {"index", json_optional(c.index)}};
}

json to_json(const MismatchReport& report) {
    json records = json::array();
    for (const auto& r : report.records) {
        records.push_back(json{{"label", r.label},
                               {"v_n", json_number(r.v_n)},
                               {"v_n_bag", json_number(r.v_n_bag)},
                               {"v0", json_optional(r.v0)},
                               {"sigma_hat_sq", json_optional(r.sigma_hat_sq)},
                               {"s_hat_sq", json_optional(r.s_hat_sq)},
                               {"m_hat_asym", json_number(r.m_hat_asym)},
                               {"m_hat_fs", json_optional(r.m_hat_fs)},
                               {"m_hat_fs_valid", r.m_hat_fs_valid},
                               {"index_asym", json_optional(r.index_asym)},
                               {"index_fs", json_optional(r.index_fs)}});
    }
    json out{{"schema_version", schema_version},
             {"n", report.n},
             {"variance_source", report.variance_source},
             {"records", std::move(records)},
             {"class_asym", to_json(report.class_asym)},
             {"class_fs", report.class_fs ? to_json(*report.class_fs) : json(nullptr)}};
    return out;
}

void write_study_csv(std::ostream& out, const StudyTable& table) {
    out << "schema_version,config_index,label,n,d,regressors,regression_fn,coefficients,lambda,a0,b0,"
           "b,master_seed,rep,rse_std,rse_bag,rse_diff,lpd_std,lpd_bag,lpd_diff,m_hat_fs,"
           "class_index,na_fallback,m_used\n";
    for (const auto& row : table.rows) {
        const auto& c = table.configs[row.config_index];
        const auto& r = row.result;
        const std::string m_hat = r.mismatch.class_fs ? format_double(r.mismatch.class_fs->m_hat) : "NA";
        out << schema_version << ',' << row.config_index << ',' << c.label() << ',' << c.n << ','
            << c.d << ',' << to_string(c.regressors) << ',' << to_string(c.regression_fn) << ','
            << c.coefficients.label() << ',' << format_double(c.lambda) << ','
            << format_double(c.a0) << ',' << format_double(c.b0) << ',' << c.b << ','
            << c.master_seed << ',' << r.rep << ',' << format_double(r.rse_std) << ','
            << format_double(r.rse_bag) << ',' << format_double(r.rse_bag - r.rse_std) << ','
            << format_double(r.lpd_std) << ',' << format_double(r.lpd_bag) << ','
            << format_double(r.lpd_bag - r.lpd_std) << ',' << m_hat << ','
            << format_optional(r.class_index()) << ',' << (r.na_fallback ? 1 : 0) << ','
            << r.m_used << '\n';
    }
}

namespace {

const char* const metric_names[] = {"rse_std", "rse_bag", "rse_diff", "lpd_std", "lpd_bag", "lpd_diff"};

std::vector<const Quartiles*> metrics(const ConfigSummary& s) {
    return {&s.rse_std, &s.rse_bag, &s.rse_diff, &s.lpd_std, &s.lpd_bag, &s.lpd_diff};
}

json quartiles_json(const Quartiles& q) {
    return json{{"q1", json_number(q.q1)}, {"median", json_number(q.median)}, {"q3", json_number(q.q3)}};
}

}  // namespace

void write_summary_csv(std::ostream& out, const std::vector<ConfigSummary>& summaries) {
    out << "schema_version,config_index,label,replicates,na_fraction,class_index_q1,"
           "class_index_median,class_index_q3";
    for (const char* m : metric_names) out << ',' << m << "_q1," << m << "_median," << m << "_q3";
    out << '\n';
    for (const auto& s : summaries) {
        out << schema_version << ',' << s.config_index << ',' << s.label << ',' << s.replicates << ','
            << format_double(s.na_fraction);
        if (s.class_index)
            out << ',' << format_double(s.class_index->q1) << ',' << format_double(s.class_index->median)
                << ',' << format_double(s.class_index->q3);
        else
            out << ",NA,NA,NA";
        for (const auto* q : metrics(s))
            out << ',' << format_double(q->q1) << ',' << format_double(q->median) << ','
                << format_double(q->q3);
        out << '\n';
    }
}

json summary_json(const std::vector<ConfigSummary>& summaries) {
    json configs = json::array();
    for (const auto& s : summaries) {
        json entry{{"config_index", s.config_index},
                   {"label", s.label},
                   {"replicates", s.replicates},
                   {"na_fraction", json_number(s.na_fraction)},
                   {"class_index", s.class_index ? quartiles_json(*s.class_index) : json(nullptr)}};
        const auto qs = metrics(s);
        for (std::size_t i = 0; i < qs.size(); ++i) entry[metric_names[i]] = quartiles_json(*qs[i]);
        configs.push_back(std::move(entry));
    }
    return json{{"schema_version", schema_version}, {"configs", std::move(configs)}};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace bayesbag
