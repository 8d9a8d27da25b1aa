#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <utility>
#include <variant>
#include <vector>

#include "bayesbag/conjugate.hpp"
#include "bayesbag/core.hpp"

namespace bayesbag {

/// S x D matrix of (approximate) posterior draws, one draw per row.
struct DrawMatrix {
    MatrixXd draws;

    DrawMatrix() = default;
    explicit DrawMatrix(MatrixXd d);

    std::size_t size() const noexcept { return static_cast<std::size_t>(draws.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(draws.cols()); }
};

/** One (possibly bootstrapped) posterior.
 *
 * Parameter vectors seen by functions of interest:
 *   GaussianPosterior: theta itself;
 *   NIGPosterior:      (log sigma^2, beta_1, ..., beta_D);
 *   DrawMatrix:        the columns of the draws.
 */
using PosteriorSummary = std::variant<GaussianPosterior, NIGPosterior, DrawMatrix>;

/// Dimension of the parameter vector a summary exposes to functions of interest.
std::size_t parameter_dim(const PosteriorSummary& s);

/// Computes the posterior given the data reweighted by bootstrap counts.
using ModelAdapter = std::function<PosteriorSummary(const Dataset&, const CountVector&)>;

ModelAdapter gaussian_location_adapter(GaussianLocationModel model);
ModelAdapter nig_adapter(NIGModel model);

/** Equally weighted mixture of B bootstrapped posteriors.  Exact enumerations carry multinomial
 * weights instead of 1/B.
 */
struct BaggedPosterior {
    std::vector<PosteriorSummary> components;
    std::vector<double> weights;  ///< sums to 1
    std::vector<CountVector> counts;
    BootstrapPlan plan;
    bool exact = false;

    std::size_t size() const noexcept { return components.size(); }
    bool uniform_weights() const noexcept;
};

inline constexpr std::size_t default_b_simulation = 100;
inline constexpr std::size_t default_b_sampler = 50;
/// Draws per closed-form component for draw-based queries (quantiles, nonlinear functions).
inline constexpr std::size_t default_component_draws = 4096;

/// Component b uses sample_counts on derive_stream(plan.master_seed, b).
BaggedPosterior bag(const ModelAdapter& adapter, const Dataset& data, const BootstrapPlan& plan,
                    unsigned threads = 0);

/// Builds a bag from explicit count vectors; weights default to uniform.
BaggedPosterior bag_from_counts(const ModelAdapter& adapter, const Dataset& data,
                                std::vector<CountVector> counts, std::vector<double> weights = {},
                                unsigned threads = 0);

/// One component per composition of m into N parts, weighted by multinomial probability.
BaggedPosterior bag_exact_enumeration(const ModelAdapter& adapter, const Dataset& data,
                                      std::size_t m, std::uint64_t cap = default_enumeration_cap,
                                      unsigned threads = 0);

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
};

/** Mean and variance of f(theta) under one component.  Closed form for linear f on conjugate
 * components; otherwise from draws (DrawMatrix rows, or default_component_draws samples drawn on a
 * stream keyed by the component's contents and `seed`).  Draw variances use 1/S normalization.
 */
MeanVar component_mean_var(const PosteriorSummary& s, const FunctionOfInterest& f,
                           std::uint64_t seed = 0);

/// Law of total expectation / variance over the mixture.
MeanVar mixture_mean_var(const BaggedPosterior& bp, const FunctionOfInterest& f);

/// Full mean vector and covariance of the parameter under one component.
MeanCov component_mean_cov(const PosteriorSummary& s);
MeanCov mixture_mean_cov(const BaggedPosterior& bp);

/** Log density of a closed-form component at a point.  For NIG components the point is beta
 * (sigma^2 integrated out).
 * \throws std::invalid_argument for DrawMatrix components.
 */
double component_logpdf(const PosteriorSummary& s, const VectorXd& point);

/// Log of the mixture density, via log-sum-exp.
double mixture_logpdf(const BaggedPosterior& bp, const VectorXd& point);

enum class McStatistic { mean, variance };

/** Monte Carlo standard error of the bagged estimate of E[f] or Var[f].
 *
 * mean:     sd(component means) / sqrt(B), sd with 1/(B-1).
 * variance: leave-one-component-out jackknife; an estimate, not exact.
 * Exact enumerations have no Monte Carlo error and return 0.
 * \throws std::invalid_argument if B < 2.
 */
double mc_error(const BaggedPosterior& bp, const FunctionOfInterest& f, McStatistic statistic);

/// Draws from a single component, one parameter vector per row.
MatrixXd sample_component(const PosteriorSummary& s, std::size_t count, RngStream& stream);

/// Concatenated draws of all DrawMatrix components (row blocks in component order).
MatrixXd pooled_draws(const BaggedPosterior& bp);

/// Mixture quantile of f from pooled component draws.
double mixture_quantile(const BaggedPosterior& bp, const FunctionOfInterest& f, double p,
                        std::size_t draws_per_component = default_component_draws);

/// Equal-tailed credible interval of the given level.
std::pair<double, double> credible_interval(const BaggedPosterior& bp, const FunctionOfInterest& f,
                                            double level = 0.95,
                                            std::size_t draws_per_component = default_component_draws);

}  // namespace bayesbag
