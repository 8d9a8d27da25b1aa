#pragma once

#include <functional>
#include <span>

#include "bayesbag/conjugate.hpp"
#include "bayesbag/core.hpp"
#include "bayesbag/engine.hpp"

namespace bayesbag {

/** Model specified by a log prior and a per-row log likelihood.  The log posterior of a
 * bootstrap dataset is log_prior(theta) + sum_n counts[n] * log_lik(row_n, theta).
 */
struct TargetModel {
    std::size_t dim = 0;
    std::function<double(std::span<const double> theta)> log_prior;
    std::function<double(std::span<const double> row, std::span<const double> theta)> log_lik;
};

/// Chain position plus the adapted proposal scale.
struct SamplerState {
    VectorXd theta;
    double step_scale = 1.0;
    double accept_rate = 0.0;
};

inline constexpr double target_acceptance = 0.234;

double log_posterior(const TargetModel& target, const Dataset& data, const CountVector& weights,
                     const VectorXd& theta);

struct ChainResult {
    SamplerState state;
    DrawMatrix draws;
};

/** Random-walk Metropolis with spherical Gaussian proposals.
 *
 * Runs 2t iterations and keeps the last t.  During the first t the log step scale follows a
 * Robbins-Monro recursion toward 0.234 acceptance; it is frozen for the retained draws.
 * accept_rate in the returned state is the acceptance rate over the retained draws.
 *
 * \throws std::domain_error if the log posterior at init is not finite.
 */
ChainResult rw_metropolis(const TargetModel& target, const Dataset& data, const CountVector& weights,
                          std::size_t t, const SamplerState& init, RngStream& stream);

struct BayesBagSamples {
    DrawMatrix standard;
    SamplerState adapted;
    BaggedPosterior bagged;  ///< DrawMatrix components, one per bootstrap dataset
};

inline std::size_t default_t_small(std::size_t t_large) {
    return std::max<std::size_t>(2, t_large / 10);
}

/** Long chain on the full data, then one short warm-started chain per bootstrap dataset.
 *
 * Bootstrap counts for replicate b come from derive_stream(plan.master_seed, b), as in bag(), so a
 * sampler run and a closed-form run with the same plan see the same bootstrap datasets.
 */
BayesBagSamples basic_bayesbag_sampler(const TargetModel& target, const Dataset& data,
                                       std::size_t t_large, std::size_t t_small,
                                       const BootstrapPlan& plan, const SamplerState& init,
                                       unsigned threads = 0);

/// Same, with the bootstrap count vectors supplied by the caller.
BayesBagSamples basic_bayesbag_sampler(const TargetModel& target, const Dataset& data,
                                       std::size_t t_large, std::size_t t_small,
                                       const BootstrapPlan& plan, const SamplerState& init,
                                       std::vector<CountVector> counts, unsigned threads = 0);

/// Gaussian location likelihood N(theta, V) with prior N(0, V0).
TargetModel gaussian_location_target(const GaussianLocationModel& model);

/** Logistic regression on rows (y, z_1..z_d) with y in {0, 1}: p = logistic(z' beta),
 * beta_j ~ N(0, prior_sd^2) independently.
 */
TargetModel logistic_target(std::size_t d, double prior_sd);

}  // namespace bayesbag
