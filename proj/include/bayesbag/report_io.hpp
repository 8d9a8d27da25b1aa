#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bayesbag/diagnostics.hpp"
#include "bayesbag/simharness.hpp"
#include "json.hpp"

namespace bayesbag {

inline constexpr int schema_version = 1;

/// %.17g; "NA" for NaN, "inf" / "-inf" for infinities.
std::string format_double(double x);
std::string format_optional(const std::optional<double>& x);

/// JSON number, or the strings "inf" / "-inf"; NaN becomes null.
nlohmann::json json_number(double x);
nlohmann::json json_optional(const std::optional<double>& x);

nlohmann::json to_json(const ClassDiagnostics& c);
nlohmann::json to_json(const MismatchReport& report);

/** One row per (config, replicate), ordered by (config_index, rep).
 *
 * Columns: schema_version, config_index, label, n, d, regressors, regression_fn, coefficients,
 * lambda, a0, b0, b, master_seed, rep, rse_std, rse_bag, rse_diff, lpd_std, lpd_bag, lpd_diff,
 * m_hat_fs, class_index, na_fallback, m_used.
 */
void write_study_csv(std::ostream& out, const StudyTable& table);

/// One row per config: quartiles of class index and of each metric plus the NA fraction.
void write_summary_csv(std::ostream& out, const std::vector<ConfigSummary>& summaries);
nlohmann::json summary_json(const std::vector<ConfigSummary>& summaries);

/// Writes text to path, replacing any existing file.  \throws std::runtime_error on I/O failure.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace bayesbag
