#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>

#include "bayesbag/core.hpp"

namespace bayesbag {

/** Gaussian location model: x_n ~ N(theta, V) with V known, prior theta ~ N(0, V0). */
class GaussianLocationModel {
public:
    /// \throws SingularMatrixError if V or V0 is not symmetric positive definite.
    GaussianLocationModel(MatrixXd v, MatrixXd v0);
    /// Scalar convenience for D = 1.
    static GaussianLocationModel scalar(double v, double v0);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(v_.rows()); }
    const MatrixXd& v() const noexcept { return v_; }
    const MatrixXd& v0() const noexcept { return v0_; }
    const MatrixXd& v_inv() const noexcept { return v_inv_; }
    const MatrixXd& v0_inv() const noexcept { return v0_inv_; }

    /// Shrinkage matrix R_M mapping a sample mean of M observations to the posterior mean.
    MatrixXd shrinkage(double m) const;
    /// Posterior covariance V_M = (V0^{-1} + M V^{-1})^{-1}.
    MatrixXd posterior_cov(double m) const;

private:
    MatrixXd v_, v0_, v_inv_, v0_inv_;
};

struct GaussianPosterior {
    VectorXd mean;
    MatrixXd cov;
    std::uint64_t n_eff = 0;

    double logpdf(const VectorXd& theta) const;
};

GaussianPosterior gl_posterior(const GaussianLocationModel& model, const Dataset& data);
GaussianPosterior gl_posterior(const GaussianLocationModel& model, const Dataset& data,
                               const CountVector& weights);

struct MeanCov {
    VectorXd mean;
    MatrixXd cov;
};

/** Exact mean and covariance of the bagged posterior with bootstrap size m, averaged over all
 * N^m bootstrap datasets.  Uses the biased (1/N) sample covariance.
 */
MeanCov gl_bagged_moments_exact(const GaussianLocationModel& model, const Dataset& data,
                                std::size_t m);

/// 1/N sample covariance of the rows of data.
MatrixXd sample_covariance(const Dataset& data);

struct NIGPosterior {
    double a_n = 0.0;
    double b_n = 0.0;
    VectorXd mu_n;
    MatrixXd precision_n;  ///< lambda I + Z' diag(w) Z

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mu_n.size()); }
};

/** Conjugate normal / inverse-gamma linear regression:
 *   sigma^2 ~ InvGamma(a0, b0),  beta_d | sigma^2 ~ N(0, sigma^2 / lambda),
 *   y_n | z_n ~ N(z_n' beta, sigma^2).
 */
struct NIGModel {
    double a0 = 2.0;
    double b0 = 1.0;
    double lambda = 1.0;

    NIGModel() = default;
    NIGModel(double a0_, double b0_, double lambda_);

    /// Prior (no data) as a posterior object, for prior moments.
    NIGPosterior prior(std::size_t d) const;

    /// Prior variance of each beta coordinate: (b0 / (a0 - 1)) / lambda.  Requires a0 > 1.
    double beta_prior_variance() const;
    /// Prior variance of log sigma^2: trigamma(a0).
    double log_sigma2_prior_variance() const;
};

NIGPosterior nig_posterior(const NIGModel& model, const Dataset& data);
NIGPosterior nig_posterior(const NIGModel& model, const Dataset& data, const CountVector& weights);

/// Mean and covariance of the marginal (multivariate-t) posterior of beta.
/// \throws UndefinedMomentError if a_n <= 1.
MeanCov nig_beta_mean_cov(const NIGPosterior& post);

/// Log density of the marginal posterior of beta: multivariate t with 2 a_n degrees of freedom,
/// location mu_n and scale (b_n / a_n) precision_n^{-1}.
double nig_beta_logpdf(const NIGPosterior& post, const VectorXd& beta);

/// Mean and variance of log sigma^2 under InvGamma(a_n, b_n).
std::pair<double, double> nig_logsigma2_moments(const NIGPosterior& post);

}  // namespace bayesbag
