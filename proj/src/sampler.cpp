#include "bayesbag/sampler.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bayesbag/error.hpp"
#include "bayesbag/parallel.hpp"

namespace bayesbag {

namespace {

std::span<const double> as_span(const VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

// Robbins-Monro gain for the log step scale.
double adaptation_gain(std::size_t iteration) {
    return std::pow(static_cast<double>(iteration + 1), -0.6);
}

}  // namespace

double log_posterior(const TargetModel& target, const Dataset& data, const CountVector& weights,
                     const VectorXd& theta) {
    double lp = target.log_prior(as_span(theta));
    if (!std::isfinite(lp)) return lp;
    const MatrixXd& rows = data.rows();
    std::vector<double> row(data.width());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto w = weights.counts[i];
        if (w == 0) continue;
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        lp += static_cast<double>(w) * target.log_lik(row, as_span(theta));
    }
    return lp;
}

ChainResult rw_metropolis(const TargetModel& target, const Dataset& data, const CountVector& weights,
                          std::size_t t, const SamplerState& init, RngStream& stream) {
    if (t < 2) throw std::invalid_argument("rw_metropolis: t must be >= 2");
    if (static_cast<std::size_t>(init.theta.size()) != target.dim)
        throw std::invalid_argument("rw_metropolis: initial state has the wrong dimension");
    if (!(init.step_scale > 0.0) || !std::isfinite(init.step_scale))
        throw std::invalid_argument("rw_metropolis: step_scale must be positive");
    if (weights.size() != data.n())
        throw std::invalid_argument("rw_metropolis: weight vector length != number of rows");

    VectorXd theta = init.theta;
    double lp = log_posterior(target, data, weights, theta);
    if (!std::isfinite(lp))
        throw std::domain_error("rw_metropolis: log posterior is not finite at the initial state");

    const auto d = static_cast<Eigen::Index>(target.dim);
    double log_scale = std::log(init.step_scale);
    MatrixXd kept(static_cast<Eigen::Index>(t), d);
    std::size_t accepted_kept = 0;
    VectorXd proposal(d);

    for (std::size_t it = 0; it < 2 * t; ++it) {
        const bool burn_in = it < t;
        const double scale = std::exp(log_scale);
        for (Eigen::Index j = 0; j < d; ++j) proposal[j] = theta[j] + scale * stream.normal();
        const double lp_new = log_posterior(target, data, weights, proposal);
        const double log_ratio = lp_new - lp;
        const double accept_prob =
            std::isfinite(lp_new) ? (log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio)) : 0.0;
        const bool accept = stream.uniform01() < accept_prob;
        if (accept) {
            theta = proposal;
            lp = lp_new;
        }
        if (burn_in) {
            log_scale += adaptation_gain(it) * (accept_prob - target_acceptance);
        } else {
            kept.row(static_cast<Eigen::Index>(it - t)) = theta.transpose();
            if (accept) ++accepted_kept;
        }
    }

    ChainResult out;
    out.state.theta = theta;
    out.state.step_scale = std::exp(log_scale);
    out.state.accept_rate = static_cast<double>(accepted_kept) / static_cast<double>(t);
    out.draws = DrawMatrix{std::move(kept)};
    return out;
}

BayesBagSamples basic_bayesbag_sampler(const TargetModel& target, const Dataset& data,
                                       std::size_t t_large, std::size_t t_small,
                                       const BootstrapPlan& plan, const SamplerState& init,
                                       unsigned threads) {
    std::vector<CountVector> counts(plan.b);
    for (std::size_t b = 0; b < plan.b; ++b) {
        auto stream = derive_stream(plan.master_seed, b, StreamDomain::counts);
        counts[b] = sample_counts(data.n(), plan.m, stream);
    }
    return basic_bayesbag_sampler(target, data, t_large, t_small, plan, init, std::move(counts),
                                  threads);
}

BayesBagSamples basic_bayesbag_sampler(const TargetModel& target, const Dataset& data,
                                       std::size_t t_large, std::size_t t_small,
                                       const BootstrapPlan& plan, const SamplerState& init,
                                       std::vector<CountVector> counts, unsigned threads) {
    if (t_small < 2 || t_large < t_small)
        throw std::invalid_argument("basic_bayesbag_sampler: need t_large >= t_small >= 2");
    if (counts.empty()) throw std::invalid_argument("basic_bayesbag_sampler: no bootstrap datasets");

    auto long_stream = derive_stream(plan.master_seed, 0, StreamDomain::long_chain);
    auto standard = rw_metropolis(target, data, CountVector::ones(data.n()), t_large, init, long_stream);

    BayesBagSamples out;
    out.bagged.components.resize(counts.size());
    parallel_for(counts.size(), threads, [&](std::size_t b) {
        try {
            auto stream = derive_stream(plan.master_seed, b, StreamDomain::sampler);
            const auto start = stream.index(standard.draws.size());
            SamplerState warm = standard.state;
            warm.theta = standard.draws.draws.row(static_cast<Eigen::Index>(start)).transpose();
            auto chain = rw_metropolis(target, data, counts[b], t_small, warm, stream);
            out.bagged.components[b] = std::move(chain.draws);
        } catch (const std::exception& e) {
            throw ReplicateError(b, e.what());
        }
    });
    out.bagged.weights.assign(counts.size(), 1.0 / static_cast<double>(counts.size()));
    out.bagged.counts = std::move(counts);
    out.bagged.plan = plan;
    out.bagged.plan.b = out.bagged.counts.size();
    out.standard = std::move(standard.draws);
    out.adapted = standard.state;
    return out;
}

TargetModel gaussian_location_target(const GaussianLocationModel& model) {
    TargetModel t;
    t.dim = model.dim();
    const MatrixXd v_inv = model.v_inv();
    const MatrixXd v0_inv = model.v0_inv();
    t.log_prior = [v0_inv](std::span<const double> theta) {
        const Eigen::Map<const VectorXd> th(theta.data(), static_cast<Eigen::Index>(theta.size()));
        return -0.5 * th.dot(v0_inv * th);
    };
    t.log_lik = [v_inv](std::span<const double> row, std::span<const double> theta) {
        const auto d = static_cast<Eigen::Index>(theta.size());
        const Eigen::Map<const VectorXd> x(row.data(), d);
        const Eigen::Map<const VectorXd> th(theta.data(), d);
        const VectorXd r = x - th;
        return -0.5 * r.dot(v_inv * r);
    };
    return t;
}

TargetModel logistic_target(std::size_t d, double prior_sd) {
    if (d < 1) throw std::invalid_argument("logistic_target: d must be >= 1");
    if (!(prior_sd > 0.0)) throw std::invalid_argument("logistic_target: prior_sd must be positive");
    TargetModel t;
    t.dim = d;
    const double prior_var = prior_sd * prior_sd;
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * prior_var);
    t.log_prior = [prior_var, log_norm](std::span<const double> beta) {
        double lp = 0.0;
        for (double b : beta) lp += log_norm - 0.5 * b * b / prior_var;
        return lp;
    };
    t.log_lik = [](std::span<const double> row, std::span<const double> beta) {
        double eta = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) eta += row[j + 1] * beta[j];
        // y eta - log(1 + e^eta), with a stable softplus
        const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
        return row[0] * eta - softplus;
    };
    return t;
}

}  // namespace bayesbag
