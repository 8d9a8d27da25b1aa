#include "cli.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "bayesbag/conjugate.hpp"
#include "bayesbag/diagnostics.hpp"
#include "bayesbag/engine.hpp"
#include "bayesbag/error.hpp"
#include "bayesbag/parallel.hpp"
#include "bayesbag/report_io.hpp"
#include "bayesbag/sampler.hpp"
#include "bayesbag/simharness.hpp"

namespace bayesbag::cli {

namespace {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir = ".";
};

// Keys excluded from the resolved config: they do not affect any numeric output.
bool execution_only(const std::string& name) {
    return name == "help" || name == "threads" || name == "out-dir" || name == "seed";
}

std::string resolved_config(const CLI::App& sub, std::uint64_t seed) {
    std::ostringstream os;
    os << '[' << sub.get_name() << "]\n";
    os << "seed=" << seed << '\n';
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || execution_only(name)) continue;
        std::string value;
        const auto& res = opt->results();
        if (res.empty()) {
            value = opt->get_default_str();
        } else {
            for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
        }
        os << name << '=' << value << '\n';
    }
    return os.str();
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Master seed (env BAYESBAG_SEED if not given on the command line)");
    sub->add_option("--threads", c.threads, "Worker threads, 0 = all cores");
    sub->add_option("--out-dir", c.out_dir, "Output directory");
}

std::filesystem::path prepare_out_dir(const Common& c) {
    std::filesystem::path dir(c.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + c.out_dir + "': " + ec.message());
    return dir;
}

void write_outputs(const std::filesystem::path& dir, const std::map<std::string, std::string>& files,
                   std::ostream& out) {
    for (const auto& [name, text] : files) {
        write_text_file((dir / name).string(), text);
        out << "wrote " << (dir / name).string() << '\n';
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double z_quantile(double level) {
    boost::math::normal_distribution<double> normal;
    return boost::math::quantile(normal, 0.5 + level / 2.0);
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

// ---------------------------------------------------------------- CSV input

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, const std::string& where) {
    if (cell.empty()) throw ConfigError(where + ": empty cell");
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw ConfigError(where + ": not a finite number: '" + cell + "'");
    return v;
}

bool is_numeric_row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) {
        char* end = nullptr;
        std::strtod(c.c_str(), &end);
        if (c.empty() || end != c.c_str() + c.size()) return false;
    }
    return true;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Reads a numeric CSV.  A first row that is not entirely numeric is taken as the header.
Table read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    Table t;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_csv_line(line);
        if (width == 0) {
            width = cells.size();
            if (!is_numeric_row(cells)) {
                t.header = std::move(cells);
                continue;
            }
        }
        const std::string where = path + ":" + std::to_string(lineno);
        if (cells.size() != width) throw ConfigError(where + ": expected " + std::to_string(width) + " columns");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_cell(c, where));
        t.rows.push_back(std::move(row));
    }
    if (t.rows.empty()) throw ConfigError("'" + path + "' contains no data rows");
    if (t.header.empty())
        for (std::size_t j = 0; j < width; ++j) t.header.push_back("theta_" + std::to_string(j + 1));
    return t;
}

MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, std::size_t first_col) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto w = static_cast<Eigen::Index>(rows.front().size() - first_col);
    MatrixXd m(n, w);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < w; ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + first_col];
    return m;
}

// ---------------------------------------------------------------- gl-demo

struct GlDemo {
    double v = 1.0;
    double v0 = 100.0;
    double theta = 0.0;
    double true_var = 1.0;
    std::size_t n = 200;
    std::string m_mode = "n";
    std::size_t m = 0;
    std::size_t b = 100;
    std::size_t replications = 2000;
    double level = 0.95;
};

Dataset gl_demo_data(const GlDemo& o, std::uint64_t seed, std::size_t rep) {
    auto stream = derive_stream(seed, rep, StreamDomain::data);
    std::vector<double> x(o.n);
    const double sd = std::sqrt(o.true_var);
    for (auto& xi : x) xi = o.theta + sd * stream.normal();
    return Dataset::from_values(x);
}

std::size_t gl_demo_m(const GlDemo& o, const GaussianLocationModel& model, const Dataset& data) {
    if (o.m_mode == "n") return o.n;
    if (o.m_mode == "2n") return 2 * o.n;
    if (o.m_mode == "fixed") return o.m;
    const double v_n = gl_posterior(model, data).cov(0, 0);
    const double v_bag = gl_bagged_moments_exact(model, data, o.n).cov(0, 0);
    const double m_hat = m_hat_asymptotic({v_n, v_bag, o.n, std::nullopt});
    if (!std::isfinite(m_hat) || m_hat < static_cast<double>(o.n)) return 2 * o.n;
    return static_cast<std::size_t>(std::llround(m_hat));
}

void setup_gl_demo(CLI::App* sub, GlDemo& o) {
    sub->add_option("--v", o.v, "Modelled observation variance V");
    sub->add_option("--v0", o.v0, "Prior variance V0");
    sub->add_option("--theta", o.theta, "True location");
    sub->add_option("--true-var", o.true_var, "True data variance");
    sub->add_option("--n", o.n, "Observations per dataset");
    sub->add_option("--m-mode", o.m_mode, "Bootstrap size: n, 2n, opt or fixed")
        ->check(CLI::IsMember({"n", "2n", "opt", "fixed"}));
    sub->add_option("--m", o.m, "Bootstrap size when m-mode=fixed");
    sub->add_option("--b", o.b, "Bootstrap replicates of the Monte Carlo bag");
    sub->add_option("--replications", o.replications, "Datasets used for coverage");
    sub->add_option("--level", o.level, "Credible level");
}

std::map<std::string, std::string> cmd_gl_demo(const GlDemo& o, const Common& c) {
    require(o.v > 0 && o.v0 > 0 && o.true_var > 0, "gl-demo: variances must be positive");
    require(o.n >= 1, "gl-demo: n must be >= 1");
    require(o.b >= 2, "gl-demo: b must be >= 2");
    require(o.replications >= 1, "gl-demo: replications must be >= 1");
    require(o.level > 0 && o.level < 1, "gl-demo: level must lie in (0, 1)");
    require(o.m_mode != "fixed" || o.m >= 1, "gl-demo: m-mode=fixed needs m >= 1");
    const auto model = GaussianLocationModel::scalar(o.v, o.v0);
    const auto f = FunctionOfInterest::coordinate(0, "theta");

    const Dataset data = gl_demo_data(o, c.seed, 0);
    const auto standard = gl_posterior(model, data);
    const std::size_t m = gl_demo_m(o, model, data);
    const auto exact = gl_bagged_moments_exact(model, data, m);
    const auto mc_bag = bag(gaussian_location_adapter(model), data, BootstrapPlan{m, o.b, c.seed}, c.threads);
    const auto mc = mixture_mean_var(mc_bag, f);

    const double z = z_quantile(o.level);
    std::vector<std::uint8_t> hit_std(o.replications), hit_bag(o.replications);
    parallel_for(o.replications, c.threads, [&](std::size_t r) {
        const Dataset d = gl_demo_data(o, c.seed, r);
        const auto post = gl_posterior(model, d);
        const auto mom = gl_bagged_moments_exact(model, d, gl_demo_m(o, model, d));
        hit_std[r] = std::abs(post.mean[0] - o.theta) <= z * std::sqrt(post.cov(0, 0));
        hit_bag[r] = std::abs(mom.mean[0] - o.theta) <= z * std::sqrt(mom.cov(0, 0));
    });
    const double reps = static_cast<double>(o.replications);
    const double cov_std = static_cast<double>(std::count(hit_std.begin(), hit_std.end(), 1)) / reps;
    const double cov_bag = static_cast<double>(std::count(hit_bag.begin(), hit_bag.end(), 1)) / reps;

    json j{{"schema_version", schema_version},
           {"n", o.n},
           {"m_mode", o.m_mode},
           {"m", m},
           {"b", o.b},
           {"std_mean", json_number(standard.mean[0])},
           {"std_var", json_number(standard.cov(0, 0))},
           {"bag_mean_exact", json_number(exact.mean[0])},
           {"bag_var_exact", json_number(exact.cov(0, 0))},
           {"bag_mean_mc", json_number(mc.mean)},
           {"bag_var_mc", json_number(mc.var)},
           {"bag_var_mc_error", json_number(mc_error(mc_bag, f, McStatistic::variance))},
           {"level", json_number(o.level)},
           {"replications", o.replications},
           {"coverage_std", json_number(cov_std)},
           {"coverage_bag", json_number(cov_bag)}};
    return {{"gl_demo.json", dump(j)}};
}

// ---------------------------------------------------------------- linreg-sim

struct LinregSim {
    std::size_t n = 50;
    std::size_t d = 10;
    std::vector<std::string> settings{"linear"};
    std::vector<std::string> coefficients{"dense"};
    std::vector<double> lambda{1.0};
    double a0 = 2.0;
    double b0 = 1.0;
    std::size_t replicates = 50;
    std::size_t b = 100;
};

std::pair<RegressorSetting, RegressionFn> parse_setting(const std::string& s) {
    if (s == "linear" || s == "uncorrelated-linear") return {RegressorSetting::uncorrelated, RegressionFn::linear};
    if (s == "nonlinear" || s == "uncorrelated-nonlinear")
        return {RegressorSetting::uncorrelated, RegressionFn::nonlinear};
    if (s == "correlated" || s == "correlated-linear") return {RegressorSetting::correlated, RegressionFn::linear};
    throw ConfigError("unknown setting '" + s + "' (expected linear, nonlinear or correlated)");
}

void setup_linreg(CLI::App* sub, LinregSim& o) {
    sub->add_option("--n", o.n, "Observations per dataset");
    sub->add_option("--d", o.d, "Regressors");
    sub->add_option("--settings", o.settings, "Data settings: linear, nonlinear, correlated")->delimiter(',');
    sub->add_option("--coefficients", o.coefficients, "Coefficient settings: dense or <k>-sparse")->delimiter(',');
    sub->add_option("--lambda", o.lambda, "Prior precision scales")->delimiter(',');
    sub->add_option("--a0", o.a0, "Inverse-gamma shape");
    sub->add_option("--b0", o.b0, "Inverse-gamma scale");
    sub->add_option("--replicates", o.replicates, "Replicates per configuration");
    sub->add_option("--b", o.b, "Bootstrap replicates");
}

std::map<std::string, std::string> cmd_linreg_sim(const LinregSim& o, const Common& c) {
    require(!o.settings.empty() && !o.coefficients.empty() && !o.lambda.empty(), "linreg-sim: empty grid");
    std::vector<SimConfig> grid;
    for (const auto& s : o.settings) {
        const auto [reg, fn] = parse_setting(s);
        for (const auto& coef : o.coefficients)
            for (double lam : o.lambda) {
                SimConfig cfg;
                cfg.n = o.n;
                cfg.d = o.d;
                cfg.regressors = reg;
                cfg.regression_fn = fn;
                try {
                    cfg.coefficients = parse_coef_setting(coef);
                    cfg.lambda = lam;
                    cfg.a0 = o.a0;
                    cfg.b0 = o.b0;
                    cfg.replicates = o.replicates;
                    cfg.b = o.b;
                    cfg.master_seed = c.seed;
                    cfg.validate();
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
                grid.push_back(cfg);
            }
    }
    const auto table = run_study(grid, c.threads);
    const auto summaries = summarize(table);
    std::ostringstream results, summary;
    write_study_csv(results, table);
    write_summary_csv(summary, summaries);
    return {{"results.csv", results.str()},
            {"summary.csv", summary.str()},
            {"summary.json", dump(summary_json(summaries))}};
}

// ---------------------------------------------------------------- diagnose

struct Diagnose {
    std::string model = "gaussian-location";
    std::string draws;
    std::string bag_draws;
    std::string data;
    std::string function = "all";
    std::size_t index = 0;
    std::vector<double> prior_var;
    std::size_t n = 50;
    std::size_t dim = 1;
    double v = 1.0;
    double v0 = 100.0;
    double theta = 0.0;
    double true_var = 1.0;
    std::size_t d = 10;
    std::string setting = "linear";
    std::string coefficients = "dense";
    double a0 = 2.0;
    double b0 = 1.0;
    double lambda = 1.0;
    std::size_t b = 100;
};

void setup_diagnose(CLI::App* sub, Diagnose& o) {
    sub->add_option("--model", o.model, "Conjugate model: gaussian-location or nig")
        ->check(CLI::IsMember({"gaussian-location", "nig"}));
    sub->add_option("--draws", o.draws, "CSV of standard posterior draws (switches to draws mode)");
    sub->add_option("--bag-draws", o.bag_draws, "CSV of bagged draws with a leading component column");
    sub->add_option("--data", o.data, "CSV of observations (model mode); generated when absent");
    sub->add_option("--function", o.function, "all, log-sum-squares or coordinate")
        ->check(CLI::IsMember({"all", "log-sum-squares", "coordinate"}));
    sub->add_option("--index", o.index, "0-based parameter index for --function coordinate");
    sub->add_option("--prior-var", o.prior_var, "Per-parameter prior variances (draws mode)")->delimiter(',');
    sub->add_option("--n", o.n, "Observations (draws mode: size of the original data)");
    sub->add_option("--dim", o.dim, "Dimension of generated Gaussian location data");
    sub->add_option("--v", o.v, "Gaussian location: V = v I");
    sub->add_option("--v0", o.v0, "Gaussian location: V0 = v0 I");
    sub->add_option("--theta", o.theta, "Gaussian location: true location of generated data");
    sub->add_option("--true-var", o.true_var, "Gaussian location: true variance of generated data");
    sub->add_option("--d", o.d, "NIG: regressors of generated data");
    sub->add_option("--setting", o.setting, "NIG: linear, nonlinear or correlated");
    sub->add_option("--coefficients", o.coefficients, "NIG: dense or <k>-sparse");
    sub->add_option("--a0", o.a0, "NIG: inverse-gamma shape");
    sub->add_option("--b0", o.b0, "NIG: inverse-gamma scale");
    sub->add_option("--lambda", o.lambda, "NIG: prior precision scale");
    sub->add_option("--b", o.b, "Bootstrap replicates for bags that are not closed form");
}

// Picks the requested functions out of a projection family.
void select_functions(const Diagnose& o, std::vector<FunctionOfInterest>& fns,
                      std::vector<std::optional<double>>& pv, std::size_t log_sum_first) {
    if (o.function == "all") return;
    if (o.function == "coordinate") {
        require(o.index < fns.size(), "diagnose: --index out of range");
        fns = {fns[o.index]};
        pv = pv.empty() ? pv : std::vector<std::optional<double>>{pv[o.index]};
        return;
    }
    fns = {FunctionOfInterest::log_sum_of_squares(log_sum_first, FunctionOfInterest::npos, "log_sum_squares")};
    pv = pv.empty() ? pv : std::vector<std::optional<double>>{std::nullopt};
}

MismatchReport diagnose_draws(const Diagnose& o) {
    require(!o.bag_draws.empty(), "diagnose: --draws needs --bag-draws");
    require(o.n >= 1, "diagnose: n must be >= 1");
    const Table std_t = read_csv(o.draws);
    const Table bag_t = read_csv(o.bag_draws);
    const std::size_t dim = std_t.header.size();
    require(bag_t.header.size() == dim + 1, "diagnose: bag draws need a component column plus one column per parameter");
    require(std_t.rows.size() >= 2, "diagnose: need at least two standard draws");

    std::vector<double> ids;
    std::vector<std::vector<std::vector<double>>> groups;
    for (const auto& row : bag_t.rows) {
        auto it = std::find(ids.begin(), ids.end(), row[0]);
        if (it == ids.end()) {
            ids.push_back(row[0]);
            groups.emplace_back();
            it = ids.end() - 1;
        }
        groups[static_cast<std::size_t>(it - ids.begin())].push_back(row);
    }
    require(groups.size() >= 2, "diagnose: bag draws need at least two components");
    BaggedPosterior bp;
    for (const auto& g : groups) {
        require(g.size() >= 2, "diagnose: every component needs at least two draws");
        bp.components.emplace_back(DrawMatrix(to_matrix(g, 1)));
    }
    bp.weights.assign(groups.size(), 1.0 / static_cast<double>(groups.size()));
    bp.plan.m = o.n;
    bp.plan.b = groups.size();

    std::vector<FunctionOfInterest> fns = projection_family(std_t.header);
    std::vector<std::optional<double>> pv;
    if (!o.prior_var.empty()) {
        require(o.prior_var.size() == dim, "diagnose: --prior-var needs one value per parameter");
        for (double x : o.prior_var) {
            require(x > 0, "diagnose: prior variances must be positive");
            pv.emplace_back(x);
        }
    }
    select_functions(o, fns, pv, 0);
    return diagnose(PosteriorSummary{DrawMatrix(to_matrix(std_t.rows, 0))}, bp, fns, o.n, pv);
}

MismatchReport diagnose_gaussian(const Diagnose& o, const Common& c) {
    require(o.v > 0 && o.v0 > 0 && o.true_var > 0, "diagnose: variances must be positive");
    Dataset data = [&] {
        if (!o.data.empty()) return Dataset(to_matrix(read_csv(o.data).rows, 0));
        require(o.n >= 1 && o.dim >= 1, "diagnose: n and dim must be >= 1");
        auto stream = derive_stream(c.seed, 0, StreamDomain::data);
        MatrixXd x(static_cast<Eigen::Index>(o.n), static_cast<Eigen::Index>(o.dim));
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = o.theta + std::sqrt(o.true_var) * stream.normal();
        return Dataset(std::move(x));
    }();
    const auto dim = static_cast<Eigen::Index>(data.width());
    const GaussianLocationModel model(o.v * MatrixXd::Identity(dim, dim), o.v0 * MatrixXd::Identity(dim, dim));
    const std::size_t n = data.n();

    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < dim; ++j) names.push_back("theta_" + std::to_string(j + 1));
    std::vector<FunctionOfInterest> fns = projection_family(names);
    std::vector<std::optional<double>> pv(names.size(), o.v0);
    select_functions(o, fns, pv, 0);

    if (o.function == "log-sum-squares") {
        require(o.b >= 2, "diagnose: b must be >= 2");
        const auto bp = bag(gaussian_location_adapter(model), data, BootstrapPlan{n, o.b, c.seed}, c.threads);
        return diagnose(PosteriorSummary{gl_posterior(model, data)}, bp, fns, n, pv);
    }
    const auto standard = gl_posterior(model, data);
    const auto bagged = gl_bagged_moments_exact(model, data, n);
    std::vector<LabelledVariances> entries;
    for (std::size_t k = 0; k < fns.size(); ++k) {
        const auto j = static_cast<Eigen::Index>(std::get<FunctionOfInterest::Coordinate>(fns[k].kind()).index);
        entries.push_back({fns[k].label(), VariancePair{standard.cov(j, j), bagged.cov(j, j), n, pv[k]}});
    }
    return build_mismatch_report(entries, "closed_form");
}

MismatchReport diagnose_nig(const Diagnose& o, const Common& c) {
    require(o.b >= 2, "diagnose: b must be >= 2");
    SimConfig cfg;
    Dataset data = [&] {
        if (!o.data.empty()) {
            const auto rows = to_matrix(read_csv(o.data).rows, 0);
            require(rows.cols() >= 2, "diagnose: NIG data need a response and at least one regressor");
            return Dataset(rows);
        }
        const auto [reg, fn] = parse_setting(o.setting);
        cfg.n = o.n;
        cfg.d = o.d;
        cfg.regressors = reg;
        cfg.regression_fn = fn;
        cfg.master_seed = c.seed;
        try {
            cfg.coefficients = parse_coef_setting(o.coefficients);
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        return gen_dataset(cfg, 0);
    }();
    NIGModel model;
    try {
        model = NIGModel(o.a0, o.b0, o.lambda);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const std::size_t d = data.width() - 1;
    std::vector<FunctionOfInterest> fns = nig_projection_family(d);
    std::vector<std::optional<double>> pv;
    if (model.a0 > 1.0) pv = nig_projection_prior_variances(model, d);
    select_functions(o, fns, pv, 1);
    const auto bp = bag(nig_adapter(model), data, BootstrapPlan{data.n(), o.b, c.seed}, c.threads);
    return diagnose(PosteriorSummary{nig_posterior(model, data)}, bp, fns, data.n(), pv);
}

std::map<std::string, std::string> cmd_diagnose(const Diagnose& o, const Common& c) {
    MismatchReport report;
    if (!o.draws.empty()) report = diagnose_draws(o);
    else if (o.model == "nig") report = diagnose_nig(o, c);
    else report = diagnose_gaussian(o, c);
    return {{"mismatch_report.json", dump(to_json(report))}};
}

// ---------------------------------------------------------------- sampler-demo

struct SamplerDemo {
    std::string target = "gaussian-location";
    std::size_t n = 20;
    std::size_t b = 50;
    std::size_t t_large = 20000;
    std::size_t t_small = 0;
    double v = 1.0;
    double v0 = 100.0;
    double theta = 0.0;
    double true_var = 1.0;
    std::size_t d = 2;
    double prior_sd = 10.0;
};

void setup_sampler(CLI::App* sub, SamplerDemo& o) {
    sub->add_option("--target", o.target, "gaussian-location or logistic")
        ->check(CLI::IsMember({"gaussian-location", "logistic"}));
    sub->add_option("--n", o.n, "Observations");
    sub->add_option("--b", o.b, "Bootstrap replicates");
    sub->add_option("--t-large", o.t_large, "Retained draws of the long chain");
    sub->add_option("--t-small", o.t_small, "Retained draws per short chain, 0 = t-large / 10");
    sub->add_option("--v", o.v, "Gaussian location: modelled variance");
    sub->add_option("--v0", o.v0, "Gaussian location: prior variance");
    sub->add_option("--theta", o.theta, "Gaussian location: true location");
    sub->add_option("--true-var", o.true_var, "Gaussian location: true data variance");
    sub->add_option("--d", o.d, "Logistic: regressors");
    sub->add_option("--prior-sd", o.prior_sd, "Logistic: prior standard deviation");
}

Dataset logistic_data(std::size_t n, std::size_t d, std::uint64_t seed) {
    auto stream = derive_stream(seed, 0, StreamDomain::data);
    MatrixXd rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        double eta = 0.0;
        for (Eigen::Index j = 1; j < rows.cols(); ++j) {
            rows(i, j) = stream.normal();
            eta += (j % 2 ? 1.0 : -1.0) * rows(i, j);
        }
        rows(i, 0) = stream.uniform01() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    return Dataset(std::move(rows));
}

std::map<std::string, std::string> cmd_sampler_demo(const SamplerDemo& o, const Common& c) {
    require(o.n >= 1, "sampler-demo: n must be >= 1");
    require(o.b >= 2, "sampler-demo: b must be >= 2");
    const std::size_t t_small = o.t_small ? o.t_small : default_t_small(o.t_large);
    require(o.t_large >= t_small && t_small >= 2, "sampler-demo: need t-large >= t-small >= 2");

    TargetModel target;
    Dataset data = Dataset::from_values(std::vector<double>{0.0});
    std::optional<GaussianLocationModel> gl;
    if (o.target == "gaussian-location") {
        require(o.v > 0 && o.v0 > 0 && o.true_var > 0, "sampler-demo: variances must be positive");
        gl.emplace(GaussianLocationModel::scalar(o.v, o.v0));
        target = gaussian_location_target(*gl);
        GlDemo g;
        g.n = o.n;
        g.theta = o.theta;
        g.true_var = o.true_var;
        data = gl_demo_data(g, c.seed, 0);
    } else {
        require(o.d >= 1 && o.prior_sd > 0, "sampler-demo: need d >= 1 and prior-sd > 0");
        target = logistic_target(o.d, o.prior_sd);
        data = logistic_data(o.n, o.d, c.seed);
    }
    SamplerState init;
    init.theta = VectorXd::Zero(static_cast<Eigen::Index>(target.dim));
    const BootstrapPlan plan{o.n, o.b, c.seed};
    const auto res = basic_bayesbag_sampler(target, data, o.t_large, t_small, plan, init, c.threads);

    json standard_mean = json::array(), standard_var = json::array(), bagged_mean = json::array(),
         bagged_var = json::array(), mean_err = json::array(), var_err = json::array();
    for (std::size_t j = 0; j < target.dim; ++j) {
        const auto f = FunctionOfInterest::coordinate(j);
        const auto s = component_mean_var(res.standard, f);
        const auto m = mixture_mean_var(res.bagged, f);
        standard_mean.push_back(json_number(s.mean));
        standard_var.push_back(json_number(s.var));
        bagged_mean.push_back(json_number(m.mean));
        bagged_var.push_back(json_number(m.var));
        mean_err.push_back(json_number(mc_error(res.bagged, f, McStatistic::mean)));
        var_err.push_back(json_number(mc_error(res.bagged, f, McStatistic::variance)));
    }
    json j{{"schema_version", schema_version},
           {"target", o.target},
           {"n", o.n},
           {"b", o.b},
           {"t_large", o.t_large},
           {"t_small", t_small},
           {"accept_rate", json_number(res.adapted.accept_rate)},
           {"step_scale", json_number(res.adapted.step_scale)},
           {"standard_mean", standard_mean},
           {"standard_var", standard_var},
           {"bagged_mean", bagged_mean},
           {"bagged_var", bagged_var},
           {"bagged_mean_mc_error", mean_err},
           {"bagged_var_mc_error", var_err}};
    if (gl) {
        const auto exact = gl_bagged_moments_exact(*gl, data, o.n);
        j["exact_bagged_mean"] = json::array({json_number(exact.mean[0])});
        j["exact_bagged_var"] = json::array({json_number(exact.cov(0, 0))});
    }
    return {{"sampler_demo.json", dump(j)}};
}

bool seed_on_command_line(const std::vector<std::string>& args) {
    return std::any_of(args.begin(), args.end(),
                       [](const std::string& a) { return a == "--seed" || a.rfind("--seed=", 0) == 0; });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bagged posteriors, mismatch diagnostics and the linear-regression study", "bayesbag"};
    app.set_config("--config", "", "INI config file; sections are subcommand names");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    Common common;
    GlDemo gl;
    LinregSim lr;
    Diagnose dg;
    SamplerDemo sd;
    auto* gl_cmd = app.add_subcommand("gl-demo", "Gaussian location: standard vs bagged moments and coverage");
    auto* lr_cmd = app.add_subcommand("linreg-sim", "Linear-regression simulation study");
    auto* dg_cmd = app.add_subcommand("diagnose", "Mismatch index report from draws or a conjugate model");
    auto* sd_cmd = app.add_subcommand("sampler-demo", "Basic BayesBag sampler on a demo target");
    setup_gl_demo(gl_cmd, gl);
    setup_linreg(lr_cmd, lr);
    setup_diagnose(dg_cmd, dg);
    setup_sampler(sd_cmd, sd);
    for (auto* sub : {gl_cmd, lr_cmd, dg_cmd, sd_cmd}) {
        add_common(sub, common);
        sub->fallthrough();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!seed_on_command_line(args)) {
            if (const char* env = std::getenv("BAYESBAG_SEED")) {
                const std::string s(env);
                std::size_t used = 0;
                try {
                    common.seed = std::stoull(s, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (s.empty() || used != s.size() || s[0] == '-')
                    throw ConfigError("BAYESBAG_SEED is not an unsigned integer: '" + s + "'");
            }
        }
        std::map<std::string, std::string> files;
        if (sub == gl_cmd) files = cmd_gl_demo(gl, common);
        else if (sub == lr_cmd) files = cmd_linreg_sim(lr, common);
        else if (sub == dg_cmd) files = cmd_diagnose(dg, common);
        else files = cmd_sampler_demo(sd, common);
        files["resolved_config.ini"] = resolved_config(*sub, common.seed);
        write_outputs(prepare_out_dir(common), files, out);
        return exit_ok;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

}  // namespace bayesbag::cli
