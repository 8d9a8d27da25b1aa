#include "bayesbag/engine.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <bit>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "bayesbag/error.hpp"
#include "bayesbag/parallel.hpp"

namespace bayesbag {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Fingerprint {
public:
    void add(std::uint64_t v) { h_ = splitmix64(h_ ^ v); }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
    template <class Derived>
    void add(const Eigen::DenseBase<Derived>& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) add(static_cast<double>(m(i, j)));
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0x243f6a8885a308d3ULL;
};

// Content hash: keys the draw stream of a component independently of its position in the bag.
std::uint64_t fingerprint(const PosteriorSummary& s) {
    Fingerprint fp;
    fp.add(static_cast<std::uint64_t>(s.index()));
    std::visit(overloaded{
                   [&](const GaussianPosterior& g) {
                       fp.add(g.mean);
                       fp.add(g.cov);
                   },
                   [&](const NIGPosterior& p) {
                       fp.add(p.a_n);
                       fp.add(p.b_n);
                       fp.add(p.mu_n);
                       fp.add(p.precision_n);
                   },
                   [&](const DrawMatrix& d) { fp.add(d.draws); },
               },
               s);
    return fp.value();
}

struct Moment {
    double mean;
    double var;
    double weight;
};

// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Accumulation runs over components sorted by value, so any permutation of the components gives
// bit-identical results.
MeanVar aggregate(std::vector<Moment> parts, bool uniform) {
    std::sort(parts.begin(), parts.end(), [](const Moment& a, const Moment& b) {
        return std::tie(a.mean, a.var, a.weight) < std::tie(b.mean, b.var, b.weight);
    });
    const double count = static_cast<double>(parts.size());
    MeanVar out;
    if (uniform) {
        CompensatedSum sum_mean, sum_var, between;
        for (const auto& p : parts) {
            sum_mean.add(p.mean);
            sum_var.add(p.var);
        }
        out.mean = sum_mean.value() / count;
        for (const auto& p : parts) between.add((p.mean - out.mean) * (p.mean - out.mean));
        out.var = sum_var.value() / count + between.value() / count;
    } else {
        CompensatedSum total_w, sum_mean, sum_var, between;
        for (const auto& p : parts) {
            total_w.add(p.weight);
            sum_mean.add(p.weight * p.mean);
            sum_var.add(p.weight * p.var);
        }
        out.mean = sum_mean.value() / total_w.value();
        for (const auto& p : parts) between.add(p.weight * (p.mean - out.mean) * (p.mean - out.mean));
        out.var = (sum_var.value() + between.value()) / total_w.value();
    }
    return out;
}

MeanVar draws_mean_var(const MatrixXd& draws, const FunctionOfInterest& f) {
    const auto s = draws.rows();
    VectorXd values(s);
    for (Eigen::Index i = 0; i < s; ++i) {
        const VectorXd row = draws.row(i).transpose();
        values[i] = f(row);
    }
    MeanVar out;
    out.mean = values.mean();
    out.var = (values.array() - out.mean).square().mean();
    return out;
}

MeanVar project(const MeanCov& mc, const FunctionOfInterest& f) {
    const auto dim = static_cast<std::size_t>(mc.mean.size());
    if (const auto* c = std::get_if<FunctionOfInterest::Coordinate>(&f.kind())) {
        if (c->index >= dim)
            throw std::invalid_argument("coordinate " + std::to_string(c->index) +
                                        " out of range for dimension " + std::to_string(dim));
        const auto d = static_cast<Eigen::Index>(c->index);
        return {mc.mean[d], mc.cov(d, d)};
    }
    const auto& w = std::get<FunctionOfInterest::Linear>(f.kind()).weights;
    if (static_cast<std::size_t>(w.size()) != dim)
        throw std::invalid_argument("linear function: weight dimension mismatch");
    return {w.dot(mc.mean), w.dot(mc.cov * w)};
}

void check_compatible(const BaggedPosterior& bp) {
    if (bp.components.empty()) throw std::invalid_argument("BaggedPosterior has no components");
    if (bp.weights.size() != bp.components.size())
        throw std::invalid_argument("BaggedPosterior: weights and components differ in length");
    const auto kind = bp.components.front().index();
    const auto dim = parameter_dim(bp.components.front());
    for (const auto& c : bp.components)
        if (c.index() != kind || parameter_dim(c) != dim)
            throw std::invalid_argument("BaggedPosterior: components differ in form or dimension");
}

}  // namespace

DrawMatrix::DrawMatrix(MatrixXd d) : draws{std::move(d)} {
    if (draws.rows() < 2) throw std::invalid_argument("DrawMatrix: at least 2 draws are required");
    if (!draws.allFinite()) throw std::invalid_argument("DrawMatrix: draws must be finite");
}

std::size_t parameter_dim(const PosteriorSummary& s) {
    return std::visit(overloaded{
                          [](const GaussianPosterior& g) { return static_cast<std::size_t>(g.mean.size()); },
                          [](const NIGPosterior& p) { return p.dim() + 1; },
                          [](const DrawMatrix& d) { return d.dim(); },
                      },
                      s);
}

ModelAdapter gaussian_location_adapter(GaussianLocationModel model) {
    return [model = std::move(model)](const Dataset& data, const CountVector& w) -> PosteriorSummary {
        return gl_posterior(model, data, w);
    };
}

ModelAdapter nig_adapter(NIGModel model) {
    return [model](const Dataset& data, const CountVector& w) -> PosteriorSummary {
        return nig_posterior(model, data, w);
    };
}

bool BaggedPosterior::uniform_weights() const noexcept {
    return std::all_of(weights.begin(), weights.end(),
                       [&](double w) { return w == weights.front(); });
}

BaggedPosterior bag_from_counts(const ModelAdapter& adapter, const Dataset& data,
                                std::vector<CountVector> counts, std::vector<double> weights,
                                unsigned threads) {
    if (counts.empty()) throw std::invalid_argument("bag_from_counts: no count vectors");
    if (weights.empty()) weights.assign(counts.size(), 1.0 / static_cast<double>(counts.size()));
    if (weights.size() != counts.size())
        throw std::invalid_argument("bag_from_counts: weights and counts differ in length");

    BaggedPosterior bp;
    bp.components.resize(counts.size());
    parallel_for(counts.size(), threads, [&](std::size_t b) {
        try {
            bp.components[b] = adapter(data, counts[b]);
        } catch (const ReplicateError&) {
            throw;
        } catch (const std::exception& e) {
            throw ReplicateError(b, e.what());
        }
    });
    bp.counts = std::move(counts);
    bp.weights = std::move(weights);
    bp.plan.m = static_cast<std::size_t>(bp.counts.front().total());
    bp.plan.b = bp.counts.size();
    return bp;
}

BaggedPosterior bag(const ModelAdapter& adapter, const Dataset& data, const BootstrapPlan& plan,
                    unsigned threads) {
    if (plan.m < 1 || plan.b < 1) throw std::invalid_argument("bag: invalid plan");
    std::vector<CountVector> counts(plan.b);
    parallel_for(plan.b, threads, [&](std::size_t b) {
        auto stream = derive_stream(plan.master_seed, b, StreamDomain::counts);
        counts[b] = sample_counts(data.n(), plan.m, stream);
    });
    auto bp = bag_from_counts(adapter, data, std::move(counts), {}, threads);
    bp.plan = plan;
    return bp;
}

BaggedPosterior bag_exact_enumeration(const ModelAdapter& adapter, const Dataset& data,
                                      std::size_t m, std::uint64_t cap, unsigned threads) {
    auto terms = enumerate_count_vectors(data.n(), m, cap);
    const double total = static_cast<double>(saturating_pow(data.n(), m));
    std::vector<CountVector> counts;
    std::vector<double> weights;
    counts.reserve(terms.size());
    weights.reserve(terms.size());
    for (auto& t : terms) {
        weights.push_back(static_cast<double>(t.multiplicity) / total);
        counts.push_back(std::move(t.counts));
    }
    auto bp = bag_from_counts(adapter, data, std::move(counts), std::move(weights), threads);
    bp.exact = true;
    return bp;
}

MeanCov component_mean_cov(const PosteriorSummary& s) {
    return std::visit(
        overloaded{
            [](const GaussianPosterior& g) { return MeanCov{g.mean, g.cov}; },
            [](const NIGPosterior& p) {
                const auto beta = nig_beta_mean_cov(p);
                const auto [ls_mean, ls_var] = nig_logsigma2_moments(p);
                const auto d = static_cast<Eigen::Index>(p.dim());
                MeanCov out{VectorXd(d + 1), MatrixXd::Zero(d + 1, d + 1)};
                out.mean[0] = ls_mean;
                out.mean.tail(d) = beta.mean;
                out.cov(0, 0) = ls_var;
                out.cov.bottomRightCorner(d, d) = beta.cov;
                return out;
            },
            [](const DrawMatrix& dm) {
                const VectorXd mean = dm.draws.colwise().mean().transpose();
                const MatrixXd centered = dm.draws.rowwise() - mean.transpose();
                return MeanCov{mean, (centered.transpose() * centered) /
                                         static_cast<double>(dm.draws.rows())};
            },
        },
        s);
}

MeanVar component_mean_var(const PosteriorSummary& s, const FunctionOfInterest& f,
                           std::uint64_t seed) {
    if (const auto* dm = std::get_if<DrawMatrix>(&s)) return draws_mean_var(dm->draws, f);
    if (f.is_linear()) return project(component_mean_cov(s), f);
    auto stream = derive_stream(seed, fingerprint(s), StreamDomain::component_draws);
    return draws_mean_var(sample_component(s, default_component_draws, stream), f);
}

MeanVar mixture_mean_var(const BaggedPosterior& bp, const FunctionOfInterest& f) {
    check_compatible(bp);
    std::vector<Moment> parts(bp.size());
    for (std::size_t b = 0; b < bp.size(); ++b) {
        const auto mv = component_mean_var(bp.components[b], f, bp.plan.master_seed);
        parts[b] = {mv.mean, mv.var, bp.weights[b]};
    }
    return aggregate(std::move(parts), bp.uniform_weights());
}

MeanCov mixture_mean_cov(const BaggedPosterior& bp) {
    check_compatible(bp);
    struct Part {
        MeanCov mc;
        double weight;
    };
    std::vector<Part> parts;
    parts.reserve(bp.size());
    for (std::size_t b = 0; b < bp.size(); ++b)
        parts.push_back({component_mean_cov(bp.components[b]), bp.weights[b]});
    std::sort(parts.begin(), parts.end(), [](const Part& a, const Part& b) {
        const auto& x = a.mc.mean;
        const auto& y = b.mc.mean;
        if (!std::equal(x.begin(), x.end(), y.begin()))
            return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
        const auto xr = a.mc.cov.reshaped();
        const auto yr = b.mc.cov.reshaped();
        if (!std::equal(xr.begin(), xr.end(), yr.begin()))
            return std::lexicographical_compare(xr.begin(), xr.end(), yr.begin(), yr.end());
        return a.weight < b.weight;
    });

    const auto d = parts.front().mc.mean.size();
    double total_w = 0.0;
    VectorXd mean = VectorXd::Zero(d);
    MatrixXd within = MatrixXd::Zero(d, d);
    for (const auto& p : parts) {
        total_w += p.weight;
        mean += p.weight * p.mc.mean;
        within += p.weight * p.mc.cov;
    }
    mean /= total_w;
    MatrixXd between = MatrixXd::Zero(d, d);
    for (const auto& p : parts) {
        const VectorXd r = p.mc.mean - mean;
        between += p.weight * r * r.transpose();
    }
    MeanCov out{mean, (within + between) / total_w};
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

double component_logpdf(const PosteriorSummary& s, const VectorXd& point) {
    return std::visit(overloaded{
                          [&](const GaussianPosterior& g) { return g.logpdf(point); },
                          [&](const NIGPosterior& p) { return nig_beta_logpdf(p, point); },
                          [](const DrawMatrix&) -> double {
                              throw std::invalid_argument(
                                  "mixture_logpdf: density unavailable for draw-based components");
                          },
                      },
                      s);
}

double mixture_logpdf(const BaggedPosterior& bp, const VectorXd& point) {
    check_compatible(bp);
    std::vector<double> terms(bp.size());
    for (std::size_t b = 0; b < bp.size(); ++b)
        terms[b] = std::log(bp.weights[b]) + component_logpdf(bp.components[b], point);
    std::sort(terms.begin(), terms.end());
    const double top = terms.back();
    if (!std::isfinite(top)) return top;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - top);
    return top + std::log(sum);
}

double mc_error(const BaggedPosterior& bp, const FunctionOfInterest& f, McStatistic statistic) {
    check_compatible(bp);
    const std::size_t count = bp.size();
    if (count < 2) throw std::invalid_argument("mc_error: requires at least 2 components");
    if (bp.exact) return 0.0;

    std::vector<Moment> parts(count);
    for (std::size_t b = 0; b < count; ++b) {
        const auto mv = component_mean_var(bp.components[b], f, bp.plan.master_seed);
        parts[b] = {mv.mean, mv.var, 1.0};
    }
    std::sort(parts.begin(), parts.end(), [](const Moment& a, const Moment& b) {
        return std::tie(a.mean, a.var) < std::tie(b.mean, b.var);
    });
    const double bn = static_cast<double>(count);
    CompensatedSum center_sum;
    for (const auto& p : parts) center_sum.add(p.mean);
    const double center = center_sum.value() / bn;

    if (statistic == McStatistic::mean) {
        CompensatedSum ss;
        for (const auto& p : parts) ss.add((p.mean - center) * (p.mean - center));
        return std::sqrt(ss.value() / (bn - 1.0)) / std::sqrt(bn);
    }

    // Leave-one-out mixture variances from running sums of centered means.
    CompensatedSum s1_sum, s2_sum, sv_sum;
    for (const auto& p : parts) {
        const double c = p.mean - center;
        s1_sum.add(c);
        s2_sum.add(c * c);
        sv_sum.add(p.var);
    }
    const double s1 = s1_sum.value(), s2 = s2_sum.value(), sv = sv_sum.value();
    const double k = bn - 1.0;
    std::vector<double> loo(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double c = parts[i].mean - center;
        const double m = (s1 - c) / k;
        loo[i] = (sv - parts[i].var) / k + (s2 - c * c) / k - m * m;
    }
    CompensatedSum loo_sum;
    for (double v : loo) loo_sum.add(v);
    const double loo_mean = loo_sum.value() / bn;
    CompensatedSum ss;
    for (double v : loo) ss.add((v - loo_mean) * (v - loo_mean));
    return std::sqrt((bn - 1.0) / bn * ss.value());
}

MatrixXd sample_component(const PosteriorSummary& s, std::size_t count, RngStream& stream) {
    const auto n = static_cast<Eigen::Index>(count);
    return std::visit(
        overloaded{
            [&](const GaussianPosterior& g) {
                const auto d = g.mean.size();
                Eigen::LLT<MatrixXd> llt(g.cov);
                if (llt.info() != Eigen::Success)
                    throw SingularMatrixError("sample_component: covariance not positive definite");
                const MatrixXd l = llt.matrixL();
                MatrixXd out(n, d);
                VectorXd z(d);
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = 0; j < d; ++j) z[j] = stream.normal();
                    out.row(i) = (g.mean + l * z).transpose();
                }
                return out;
            },
            [&](const NIGPosterior& p) {
                const auto d = static_cast<Eigen::Index>(p.dim());
                Eigen::LLT<MatrixXd> llt(p.precision_n);
                if (llt.info() != Eigen::Success)
                    throw SingularMatrixError("sample_component: precision not positive definite");
                const MatrixXd upper = llt.matrixU();
                boost::random::gamma_distribution<double> gamma(p.a_n, 1.0 / p.b_n);
                MatrixXd out(n, d + 1);
                VectorXd z(d);
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double sigma2 = 1.0 / gamma(stream);
                    for (Eigen::Index j = 0; j < d; ++j) z[j] = stream.normal();
                    // Lambda = U'U, so U^{-1} z has covariance Lambda^{-1}.
                    const VectorXd step = upper.triangularView<Eigen::Upper>().solve(z);
                    out(i, 0) = std::log(sigma2);
                    out.row(i).tail(d) = (p.mu_n + std::sqrt(sigma2) * step).transpose();
                }
                return out;
            },
            [&](const DrawMatrix& dm) {
                MatrixXd out(n, dm.draws.cols());
                for (Eigen::Index i = 0; i < n; ++i) out.row(i) = dm.draws.row(static_cast<Eigen::Index>(stream.index(dm.size())));
                return out;
            },
        },
        s);
}

MatrixXd pooled_draws(const BaggedPosterior& bp) {
    check_compatible(bp);
    Eigen::Index rows = 0;
    for (const auto& c : bp.components) {
        const auto* dm = std::get_if<DrawMatrix>(&c);
        if (!dm) throw std::invalid_argument("pooled_draws: components must be DrawMatrix");
        rows += dm->draws.rows();
    }
    const auto cols = static_cast<Eigen::Index>(parameter_dim(bp.components.front()));
    MatrixXd out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& c : bp.components) {
        const auto& d = std::get<DrawMatrix>(c).draws;
        out.middleRows(at, d.rows()) = d;
        at += d.rows();
    }
    return out;
}

double mixture_quantile(const BaggedPosterior& bp, const FunctionOfInterest& f, double p,
                        std::size_t draws_per_component) {
    check_compatible(bp);
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mixture_quantile: p must be in [0, 1]");
    if (draws_per_component < 1)
        throw std::invalid_argument("mixture_quantile: draws_per_component must be >= 1");

    std::vector<std::pair<double, double>> values;  // (f value, weight)
    for (std::size_t b = 0; b < bp.size(); ++b) {
        const auto& comp = bp.components[b];
        MatrixXd draws;
        if (const auto* dm = std::get_if<DrawMatrix>(&comp)) {
            draws = dm->draws;
        } else {
            auto stream = derive_stream(bp.plan.master_seed, fingerprint(comp), StreamDomain::component_draws);
            draws = sample_component(comp, draws_per_component, stream);
        }
        const double w = bp.weights[b] / static_cast<double>(draws.rows());
        for (Eigen::Index i = 0; i < draws.rows(); ++i) {
            const VectorXd row = draws.row(i).transpose();
            values.emplace_back(f(row), w);
        }
    }
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (const auto& v : values) total += v.second;
    const double target = p * total;
    double cum = 0.0;
    for (const auto& [x, w] : values) {
        cum += w;
        if (cum >= target) return x;
    }
    return values.back().first;
}

std::pair<double, double> credible_interval(const BaggedPosterior& bp, const FunctionOfInterest& f,
                                            double level, std::size_t draws_per_component) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("credible_interval: level must be in (0, 1)");
    const double tail = 0.5 * (1.0 - level);
    return {mixture_quantile(bp, f, tail, draws_per_component),
            mixture_quantile(bp, f, 1.0 - tail, draws_per_component)};
}

}  // namespace bayesbag
