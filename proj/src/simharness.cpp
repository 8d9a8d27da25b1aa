#include "bayesbag/simharness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/random/chi_squared_distribution.hpp>
#include <cmath>
#include <stdexcept>

#include "bayesbag/engine.hpp"
#include "bayesbag/parallel.hpp"

namespace bayesbag {

namespace {

constexpr double correlated_dof = 10.0;
constexpr double correlation_length_sq = 64.0;

// Square root of the regressor correlation kernel, via its eigendecomposition (the kernel is
// numerically near-singular for larger D, so a plain Cholesky can fail).
MatrixXd kernel_root(std::size_t d) {
    const auto dd = static_cast<Eigen::Index>(d);
    MatrixXd k(dd, dd);
    for (Eigen::Index i = 0; i < dd; ++i)
        for (Eigen::Index j = 0; j < dd; ++j) {
            const double gap = static_cast<double>(i - j);
            k(i, j) = std::exp(-gap * gap / correlation_length_sq);
        }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(k);
    const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

std::string CoefSetting::label() const {
    return kind == Kind::dense ? "dense" : std::to_string(k) + "-sparse";
}

std::string to_string(RegressorSetting s) {
    return s == RegressorSetting::uncorrelated ? "uncorrelated" : "correlated";
}

std::string to_string(RegressionFn f) {
    return f == RegressionFn::linear ? "linear" : "nonlinear";
}

RegressorSetting parse_regressor_setting(const std::string& s) {
    if (s == "uncorrelated") return RegressorSetting::uncorrelated;
    if (s == "correlated") return RegressorSetting::correlated;
    throw std::invalid_argument("unknown regressor setting '" + s + "'");
}

RegressionFn parse_regression_fn(const std::string& s) {
    if (s == "linear") return RegressionFn::linear;
    if (s == "nonlinear") return RegressionFn::nonlinear;
    throw std::invalid_argument("unknown regression function '" + s + "'");
}

CoefSetting parse_coef_setting(const std::string& s) {
    if (s == "dense") return CoefSetting::dense();
    const auto dash = s.find("-sparse");
    if (dash != std::string::npos && dash > 0 && dash + 7 == s.size()) {
        std::size_t used = 0;
        const auto k = std::stoul(s.substr(0, dash), &used);
        if (used == dash && k >= 1) return CoefSetting::sparse(k);
    }
    throw std::invalid_argument("unknown coefficient setting '" + s + "' (expected dense or <k>-sparse)");
}

std::string SimConfig::label() const {
    return to_string(regressors) + "-" + to_string(regression_fn) + "-" + coefficients.label();
}

void SimConfig::validate() const {
    if (n < 1) throw std::invalid_argument("SimConfig: n must be >= 1");
    if (d < 1) throw std::invalid_argument("SimConfig: d must be >= 1");
    if (replicates < 1) throw std::invalid_argument("SimConfig: replicates must be >= 1");
    if (b < 2) throw std::invalid_argument("SimConfig: b must be >= 2");
    if (!(lambda > 0.0) || !(a0 > 0.0) || !(b0 > 0.0))
        throw std::invalid_argument("SimConfig: lambda, a0 and b0 must be positive");
    if (coefficients.kind == CoefSetting::Kind::sparse && (coefficients.k < 1 || coefficients.k > d))
        throw std::invalid_argument("SimConfig: sparsity k must satisfy 1 <= k <= d");
    if (regressors == RegressorSetting::correlated && regression_fn == RegressionFn::nonlinear)
        throw std::invalid_argument("SimConfig: correlated-nonlinear has no closed-form optimal coefficients");
}

VectorXd gen_coefficients(const CoefSetting& setting, std::size_t d) {
    if (d < 1) throw std::invalid_argument("gen_coefficients: d must be >= 1");
    VectorXd beta = VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (setting.kind == CoefSetting::Kind::dense) {
        for (std::size_t j = 1; j <= d; ++j)
            beta[static_cast<Eigen::Index>(j - 1)] = std::pow(2.0, (5.0 - static_cast<double>(j)) / 2.0);
        return beta;
    }
    const std::size_t k = setting.k;
    if (k < 1 || k > d) throw std::invalid_argument("gen_coefficients: need 1 <= k <= d");
    // floor(j (D + 1/2) / (k + 1)) in integer arithmetic
    for (std::size_t j = 1; j <= k; ++j) {
        const std::size_t idx = j * (2 * d + 1) / (2 * (k + 1));
        if (idx >= 1 && idx <= d) beta[static_cast<Eigen::Index>(idx - 1)] = 1.0;
    }
    return beta;
}

MatrixXd gen_regressors(RegressorSetting setting, std::size_t n, std::size_t d, RngStream& stream) {
    if (d < 1) throw std::invalid_argument("gen_regressors: d must be >= 1");
    const auto nn = static_cast<Eigen::Index>(n);
    const auto dd = static_cast<Eigen::Index>(d);
    MatrixXd z(nn, dd);
    if (setting == RegressorSetting::uncorrelated) {
        for (Eigen::Index i = 0; i < nn; ++i)
            for (Eigen::Index j = 0; j < dd; ++j) z(i, j) = stream.normal();
        return z;
    }

    const MatrixXd root = kernel_root(d);
    boost::random::chi_squared_distribution<double> chi2(correlated_dof);
    VectorXd eps(dd);
    for (Eigen::Index i = 0; i < nn; ++i) {
        const double xi = chi2(stream);
        const double odd_scale = std::sqrt((correlated_dof - 2.0) / xi);  // 1 / xi_d for odd d
        for (Eigen::Index j = 0; j < dd; ++j) eps[j] = stream.normal();
        VectorXd row = root * eps;
        for (Eigen::Index j = 0; j < dd; j += 2) row[j] *= odd_scale;  // 0-based even == 1-based odd
        z.row(i) = row.transpose();
    }
    return z;
}

VectorXd gen_responses(const MatrixXd& z, const VectorXd& beta_dag, RegressionFn fn,
                       RngStream& stream, bool noiseless) {
    if (z.cols() != beta_dag.size())
        throw std::invalid_argument("gen_responses: regressor width != coefficient length");
    VectorXd y = fn == RegressionFn::linear ? VectorXd(z * beta_dag)
                                            : VectorXd(z.array().cube().matrix() * beta_dag);
    if (!noiseless)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += stream.normal();
    return y;
}

VectorXd beta_opt(RegressorSetting regressors, RegressionFn fn, const VectorXd& beta_dag) {
    if (fn == RegressionFn::linear) return beta_dag;
    if (regressors == RegressorSetting::uncorrelated) return 3.0 * beta_dag;
    throw std::invalid_argument("beta_opt: correlated-nonlinear is not supported");
}

double rse(const VectorXd& beta_hat, const VectorXd& beta_opt) {
    if (beta_hat.size() != beta_opt.size()) throw std::invalid_argument("rse: dimension mismatch");
    const double denom = beta_opt.squaredNorm();
    if (denom == 0.0) throw std::invalid_argument("rse: optimal coefficient vector is zero");
    return (beta_hat - beta_opt).squaredNorm() / denom;
}

Dataset gen_dataset(const SimConfig& cfg, std::size_t rep) {
    auto stream = derive_stream(cfg.master_seed, rep, StreamDomain::data);
    const MatrixXd z = gen_regressors(cfg.regressors, cfg.n, cfg.d, stream);
    const VectorXd beta = gen_coefficients(cfg.coefficients, cfg.d);
    const VectorXd y = gen_responses(z, beta, cfg.regression_fn, stream, cfg.noiseless);
    return Dataset::regression(y, z);
}

std::optional<double> ReplicateResult::class_index() const {
    return mismatch.class_fs ? mismatch.class_fs->index : std::nullopt;
}

ReplicateResult run_replicate(const SimConfig& cfg, std::size_t rep, unsigned threads) {
    cfg.validate();
    const Dataset data = gen_dataset(cfg, rep);
    const NIGModel model{cfg.a0, cfg.b0, cfg.lambda};
    const auto adapter = nig_adapter(model);
    const VectorXd target = beta_opt(cfg.regressors, cfg.regression_fn,
                                     gen_coefficients(cfg.coefficients, cfg.d));

    auto seeds = derive_stream(cfg.master_seed, rep, StreamDomain::replicate_seed);
    const std::uint64_t diagnose_seed = seeds();
    const std::uint64_t rerun_seed = seeds();

    const NIGPosterior standard = nig_posterior(model, data);
    const auto first = bag(adapter, data, BootstrapPlan{cfg.n, cfg.b, diagnose_seed}, threads);

    ReplicateResult out;
    out.rep = rep;
    out.mismatch = diagnose(standard, first, nig_projection_family(cfg.d), cfg.n,
                            nig_projection_prior_variances(model, cfg.d));

    const auto index = out.class_index();
    if (index) {
        const auto rounded = static_cast<std::size_t>(std::llround(out.mismatch.class_fs->m_hat));
        out.m_used = std::max(cfg.n, rounded);
    } else {
        out.m_used = 2 * cfg.n;
        out.na_fallback = true;
    }
    const auto final_bag = bag(adapter, data, BootstrapPlan{out.m_used, cfg.b, rerun_seed}, threads);

    const auto d = static_cast<Eigen::Index>(cfg.d);
    const VectorXd bag_mean = mixture_mean_cov(final_bag).mean.tail(d);
    out.rse_std = rse(standard.mu_n, target);
    out.rse_bag = rse(bag_mean, target);
    out.lpd_std = nig_beta_logpdf(standard, target);
    out.lpd_bag = mixture_logpdf(final_bag, target);
    return out;
}

StudyTable run_study(const std::vector<SimConfig>& grid, unsigned threads) {
    if (grid.empty()) throw std::invalid_argument("run_study: empty configuration grid");
    StudyTable table;
    table.configs = grid;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        grid[c].validate();
        for (std::size_t r = 0; r < grid[c].replicates; ++r) table.rows.push_back({c, {}});
    }
    std::vector<std::size_t> rep_of(table.rows.size());
    {
        std::size_t at = 0;
        for (const auto& cfg : grid)
            for (std::size_t r = 0; r < cfg.replicates; ++r) rep_of[at++] = r;
    }
    parallel_for(table.rows.size(), threads, [&](std::size_t i) {
        auto& row = table.rows[i];
        row.result = run_replicate(grid[row.config_index], rep_of[i], 1);
    });
    return table;
}

Quartiles quartiles(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("quartiles: no values");
    std::sort(values.begin(), values.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

std::vector<ConfigSummary> summarize(const StudyTable& table) {
    std::vector<ConfigSummary> out;
    for (std::size_t c = 0; c < table.configs.size(); ++c) {
        std::vector<double> idx, rs, rb, rd, ls, lb, ld;
        std::size_t reps = 0, na = 0;
        for (const auto& row : table.rows) {
            if (row.config_index != c) continue;
            const auto& r = row.result;
            ++reps;
            if (const auto i = r.class_index()) idx.push_back(*i);
            else ++na;
            rs.push_back(r.rse_std);
            rb.push_back(r.rse_bag);
            rd.push_back(r.rse_bag - r.rse_std);
            ls.push_back(r.lpd_std);
            lb.push_back(r.lpd_bag);
            ld.push_back(r.lpd_bag - r.lpd_std);
        }
        if (reps == 0) continue;
        ConfigSummary s;
        s.config_index = c;
        s.label = table.configs[c].label();
        s.replicates = reps;
        s.na_fraction = static_cast<double>(na) / static_cast<double>(reps);
        if (!idx.empty()) s.class_index = quartiles(idx);
        s.rse_std = quartiles(rs);
        s.rse_bag = quartiles(rb);
        s.rse_diff = quartiles(rd);
        s.lpd_std = quartiles(ls);
        s.lpd_bag = quartiles(lb);
        s.lpd_diff = quartiles(ld);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace bayesbag
