#include "bayesbag/conjugate.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bayesbag/error.hpp"

namespace bayesbag {

namespace {

Eigen::LLT<MatrixXd> spd_factor(const MatrixXd& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() < 1)
        throw std::invalid_argument(std::string(what) + ": matrix must be square and non-empty");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw SingularMatrixError(std::string(what) + ": matrix is not symmetric");
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError(std::string(what) + ": matrix is not positive definite");
    return llt;
}

MatrixXd spd_inverse(const MatrixXd& a, const char* what) {
    auto llt = spd_factor(a, what);
    MatrixXd inv = llt.solve(MatrixXd::Identity(a.rows(), a.cols()));
    return 0.5 * (inv + inv.transpose());
}

double log_det(const Eigen::LLT<MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void check_weights(const Dataset& data, const CountVector& w, const char* what) {
    if (w.size() != data.n())
        throw std::invalid_argument(std::string(what) + ": weight vector has length " +
                                    std::to_string(w.size()) + " but data has " +
                                    std::to_string(data.n()) + " rows");
    if (w.total() == 0)
        throw std::invalid_argument(std::string(what) + ": effective count must be >= 1");
}

}  // namespace

GaussianLocationModel::GaussianLocationModel(MatrixXd v, MatrixXd v0)
    : v_{std::move(v)}, v0_{std::move(v0)} {
    if (v_.rows() != v0_.rows())
        throw std::invalid_argument("GaussianLocationModel: V and V0 have different dimensions");
    v_inv_ = spd_inverse(v_, "GaussianLocationModel V");
    v0_inv_ = spd_inverse(v0_, "GaussianLocationModel V0");
}

GaussianLocationModel GaussianLocationModel::scalar(double v, double v0) {
    return {MatrixXd::Constant(1, 1, v), MatrixXd::Constant(1, 1, v0)};
}

MatrixXd GaussianLocationModel::posterior_cov(double m) const {
    return spd_inverse(v0_inv_ + m * v_inv_, "posterior precision");
}

// R_M = V_M (M V^{-1}) = (I + V V0^{-1} / M)^{-1}.  Reduces to (V0^{-1} V / M + I)^{-1} whenever V
// and V0 commute (in particular for D = 1).
MatrixXd GaussianLocationModel::shrinkage(double m) const {
    return posterior_cov(m) * (m * v_inv_);
}

double GaussianPosterior::logpdf(const VectorXd& theta) const {
    if (theta.size() != mean.size())
        throw std::invalid_argument("GaussianPosterior::logpdf: dimension mismatch");
    auto llt = spd_factor(cov, "GaussianPosterior covariance");
    const VectorXd r = theta - mean;
    const double quad = r.dot(llt.solve(r));
    const double d = static_cast<double>(mean.size());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det(llt) + quad);
}

GaussianPosterior gl_posterior(const GaussianLocationModel& model, const Dataset& data) {
    return gl_posterior(model, data, CountVector::ones(data.n()));
}

GaussianPosterior gl_posterior(const GaussianLocationModel& model, const Dataset& data,
                               const CountVector& weights) {
    if (data.width() != model.dim())
        throw std::invalid_argument("gl_posterior: data width " + std::to_string(data.width()) +
                                    " != model dimension " + std::to_string(model.dim()));
    check_weights(data, weights, "gl_posterior");

    VectorXd weighted_sum = VectorXd::Zero(static_cast<Eigen::Index>(model.dim()));
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto w = weights.counts[i];
        if (w == 0) continue;
        weighted_sum += static_cast<double>(w) * data.row(i).transpose();
    }
    const double m = static_cast<double>(weights.total());

    auto llt = spd_factor(model.v0_inv() + m * model.v_inv(), "gl_posterior precision");
    GaussianPosterior post;
    post.cov = llt.solve(MatrixXd::Identity(model.v().rows(), model.v().cols()));
    post.cov = 0.5 * (post.cov + post.cov.transpose());
    post.mean = llt.solve(model.v_inv() * weighted_sum);
    post.n_eff = weights.total();
    return post;
}

MatrixXd sample_covariance(const Dataset& data) {
    const MatrixXd& x = data.rows();
    const VectorXd mean = x.colwise().mean().transpose();
    const MatrixXd centered = x.rowwise() - mean.transpose();
    return (centered.transpose() * centered) / static_cast<double>(data.n());
}

MeanCov gl_bagged_moments_exact(const GaussianLocationModel& model, const Dataset& data,
                                std::size_t m) {
    if (m < 1) throw std::invalid_argument("gl_bagged_moments_exact: m must be >= 1");
    if (data.width() != model.dim())
        throw std::invalid_argument("gl_bagged_moments_exact: data width != model dimension");
    const double md = static_cast<double>(m);
    const VectorXd xbar = data.rows().colwise().mean().transpose();
    const MatrixXd r = model.shrinkage(md);
    MeanCov out;
    out.mean = r * xbar;
    out.cov = model.posterior_cov(md) + (r * sample_covariance(data) * r.transpose()) / md;
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

NIGModel::NIGModel(double a0_, double b0_, double lambda_) : a0{a0_}, b0{b0_}, lambda{lambda_} {
    if (!(a0 > 0.0) || !(b0 > 0.0) || !(lambda > 0.0))
        throw std::invalid_argument("NIGModel: a0, b0 and lambda must be positive");
}

NIGPosterior NIGModel::prior(std::size_t d) const {
    NIGPosterior p;
    p.a_n = a0;
    p.b_n = b0;
    p.mu_n = VectorXd::Zero(static_cast<Eigen::Index>(d));
    p.precision_n = lambda * MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    return p;
}

double NIGModel::beta_prior_variance() const {
    if (!(a0 > 1.0))
        throw UndefinedMomentError("NIGModel: prior variance of beta requires a0 > 1");
    return (b0 / (a0 - 1.0)) / lambda;
}

double NIGModel::log_sigma2_prior_variance() const {
    return boost::math::trigamma(a0);
}

NIGPosterior nig_posterior(const NIGModel& model, const Dataset& data) {
    return nig_posterior(model, data, CountVector::ones(data.n()));
}

NIGPosterior nig_posterior(const NIGModel& model, const Dataset& data, const CountVector& weights) {
    if (data.width() < 2)
        throw std::invalid_argument("nig_posterior: regression data needs a response and >= 1 regressor");
    check_weights(data, weights, "nig_posterior");
    const auto d = static_cast<Eigen::Index>(data.width() - 1);

    MatrixXd precision = model.lambda * MatrixXd::Identity(d, d);
    VectorXd rhs = VectorXd::Zero(d);
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto w = weights.counts[i];
        if (w == 0) continue;
        const auto row = data.row(i);
        const VectorXd z = row.tail(d).transpose();
        precision.selfadjointView<Eigen::Lower>().rankUpdate(z, static_cast<double>(w));
        rhs += static_cast<double>(w) * row(0) * z;
    }
    MatrixXd full = precision.selfadjointView<Eigen::Lower>();
    precision = std::move(full);

    auto llt = spd_factor(precision, "nig_posterior precision");
    NIGPosterior post;
    post.mu_n = llt.solve(rhs);
    post.precision_n = std::move(precision);
    post.a_n = model.a0 + 0.5 * static_cast<double>(weights.total());

    // y'Wy - mu'Lambda mu == sum_n w_n (y_n - z_n'mu)^2 + lambda |mu|^2, which is
    // nonnegative term by term.
    double rss = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto w = weights.counts[i];
        if (w == 0) continue;
        const auto row = data.row(i);
        const double resid = row(0) - row.tail(d).dot(post.mu_n);
        rss += static_cast<double>(w) * resid * resid;
    }
    post.b_n = model.b0 + 0.5 * (rss + model.lambda * post.mu_n.squaredNorm());
    return post;
}

MeanCov nig_beta_mean_cov(const NIGPosterior& post) {
    if (!(post.a_n > 1.0))
        throw UndefinedMomentError("nig_beta_mean_cov: variance undefined for a_n <= 1");
    MeanCov out;
    out.mean = post.mu_n;
    out.cov = (post.b_n / (post.a_n - 1.0)) * spd_inverse(post.precision_n, "nig precision");
    return out;
}

double nig_beta_logpdf(const NIGPosterior& post, const VectorXd& beta) {
    if (beta.size() != post.mu_n.size())
        throw std::invalid_argument("nig_beta_logpdf: dimension mismatch");
    const double d = static_cast<double>(post.dim());
    const double nu = 2.0 * post.a_n;
    auto llt = spd_factor(post.precision_n, "nig precision");
    const VectorXd r = beta - post.mu_n;
    // Scale matrix S = (b/a) Lambda^{-1}:  r' S^{-1} r = (a/b) r' Lambda r,  log|S| = d log(b/a) - log|Lambda|.
    const double quad = (post.a_n / post.b_n) * r.dot(post.precision_n * r);
    const double log_det_scale = d * std::log(post.b_n / post.a_n) - log_det(llt);
    return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
           0.5 * d * std::log(nu * std::numbers::pi) - 0.5 * log_det_scale -
           0.5 * (nu + d) * std::log1p(quad / nu);
}

std::pair<double, double> nig_logsigma2_moments(const NIGPosterior& post) {
    if (!(post.a_n > 0.0) || !(post.b_n > 0.0))
        throw std::invalid_argument("nig_logsigma2_moments: a_n and b_n must be positive");
    return {std::log(post.b_n) - boost::math::digamma(post.a_n), boost::math::trigamma(post.a_n)};
}

}  // namespace bayesbag
