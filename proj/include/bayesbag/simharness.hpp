#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bayesbag/conjugate.hpp"
#include "bayesbag/core.hpp"
#include "bayesbag/diagnostics.hpp"

namespace bayesbag {

enum class RegressorSetting { uncorrelated, correlated };
enum class RegressionFn { linear, nonlinear };

struct CoefSetting {
    enum class Kind { dense, sparse };
    Kind kind = Kind::dense;
    std::size_t k = 0;

    static CoefSetting dense() { return {}; }
    static CoefSetting sparse(std::size_t k) { return {Kind::sparse, k}; }
    std::string label() const;
};

std::string to_string(RegressorSetting s);
std::string to_string(RegressionFn f);
RegressorSetting parse_regressor_setting(const std::string& s);
RegressionFn parse_regression_fn(const std::string& s);
/// "dense" or "<k>-sparse".
CoefSetting parse_coef_setting(const std::string& s);

/// One cell of the linear-regression study.
struct SimConfig {
    std::size_t n = 50;
    std::size_t d = 10;
    RegressorSetting regressors = RegressorSetting::uncorrelated;
    RegressionFn regression_fn = RegressionFn::linear;
    CoefSetting coefficients = CoefSetting::dense();
    double lambda = 1.0;
    double a0 = 2.0;
    double b0 = 1.0;
    std::size_t replicates = 50;
    std::size_t b = 100;
    std::uint64_t master_seed = 0;
    /// Test hook: responses without noise.
    bool noiseless = false;

    /// e.g. "correlated-linear-dense"
    std::string label() const;
    void validate() const;
};

/** dense: beta_d = 2^{(5-d)/2};  k-sparse: beta_d = 1 iff d = floor(j (D + 1/2) / (k + 1)) for
 * some j = 1..k.  Indices d are 1-based in these formulas.
 */
VectorXd gen_coefficients(const CoefSetting& setting, std::size_t d);

/** uncorrelated: i.i.d. N(0, 1) entries.
 * correlated: per row draw xi ~ chi^2(10), scale odd (1-based) coordinates by sqrt((h-2)/xi), and
 * correlate with kernel exp(-(d-d')^2 / 64).  Every coordinate has unit variance; odd ones are
 * rescaled t_10 variables.
 */
MatrixXd gen_regressors(RegressorSetting setting, std::size_t n, std::size_t d, RngStream& stream);

/// y = f(z)' beta + eps, f(z) = z or z^3 elementwise, eps ~ N(0, 1) unless noiseless.
VectorXd gen_responses(const MatrixXd& z, const VectorXd& beta_dag, RegressionFn fn,
                       RngStream& stream, bool noiseless = false);

/// Minimizer of expected squared loss.  \throws std::invalid_argument for correlated-nonlinear.
VectorXd beta_opt(RegressorSetting regressors, RegressionFn fn, const VectorXd& beta_dag);

/// |beta_hat - beta_opt|^2 / |beta_opt|^2.  \throws std::invalid_argument if beta_opt = 0.
double rse(const VectorXd& beta_hat, const VectorXd& beta_opt);

/// Data of one replicate: a pure function of (cfg, rep).
Dataset gen_dataset(const SimConfig& cfg, std::size_t rep);

struct ReplicateResult {
    std::size_t rep = 0;
    double rse_std = 0.0;
    double rse_bag = 0.0;
    double lpd_std = 0.0;
    double lpd_bag = 0.0;
    MismatchReport mismatch;  ///< from the M = N bag
    std::size_t m_used = 0;
    bool na_fallback = false;

    std::optional<double> class_index() const;
};

/** Fit the standard posterior, bag with M = N, diagnose over (log sigma^2, beta), then rebag
 * with M = max(N, round(M_fs(F_proj))) or M = 2N when the class index is NA.
 */
ReplicateResult run_replicate(const SimConfig& cfg, std::size_t rep, unsigned threads = 1);

struct StudyRow {
    std::size_t config_index = 0;
    ReplicateResult result;
};

struct StudyTable {
    std::vector<SimConfig> configs;
    std::vector<StudyRow> rows;  ///< ordered by (config_index, rep)
};

StudyTable run_study(const std::vector<SimConfig>& grid, unsigned threads = 0);

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
Quartiles quartiles(std::vector<double> values);

struct ConfigSummary {
    std::size_t config_index = 0;
    std::string label;
    std::size_t replicates = 0;
    double na_fraction = 0.0;
    std::optional<Quartiles> class_index;  ///< over non-NA replicates
    Quartiles rse_std, rse_bag, rse_diff, lpd_std, lpd_bag, lpd_diff;
};

std::vector<ConfigSummary> summarize(const StudyTable& table);

}  // namespace bayesbag
