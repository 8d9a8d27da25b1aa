#include <cmath>
#include <numeric>

#include "bayesbag/conjugate.hpp"
#include "bayesbag/engine.hpp"
#include "bayesbag/error.hpp"
#include "bayesbag/sampler.hpp"
#include "doctest.h"

using namespace bayesbag;

namespace {

// Batch-means standard error of a column mean.
double batch_se(const MatrixXd& draws, Eigen::Index col, std::size_t batches = 40) {
    const auto n = static_cast<std::size_t>(draws.rows());
    const std::size_t len = n / batches;
    std::vector<double> means(batches);
    for (std::size_t k = 0; k < batches; ++k)
        means[k] = draws.col(col).segment(static_cast<Eigen::Index>(k * len), static_cast<Eigen::Index>(len)).mean();
    const double m = std::accumulate(means.begin(), means.end(), 0.0) / batches;
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    return std::sqrt(ss / (batches - 1) / batches);
}

TargetModel standard_normal(std::size_t d) {
    TargetModel t;
    t.dim = d;
    t.log_prior = [](std::span<const double> th) {
        double s = 0.0;
        for (double x : th) s -= 0.5 * x * x;
        return s;
    };
    t.log_lik = [](std::span<const double>, std::span<const double>) { return 0.0; };
    return t;
}

TargetModel flat(std::size_t d) {
    TargetModel t;
    t.dim = d;
    t.log_prior = [](std::span<const double>) { return 0.0; };
    t.log_lik = [](std::span<const double>, std::span<const double>) { return 0.0; };
    return t;
}

Dataset logistic_data(std::size_t n, std::uint64_t seed) {
    auto s = derive_stream(seed, 0, StreamDomain::data);
    MatrixXd rows(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const double z1 = s.normal(), z2 = s.normal();
        const double p = 1.0 / (1.0 + std::exp(-(1.0 * z1 - 0.5 * z2)));
        rows(i, 0) = s.uniform01() < p ? 1.0 : 0.0;
        rows(i, 1) = z1;
        rows(i, 2) = z2;
    }
    return Dataset(rows);
}

SamplerState start(std::size_t d) {
    return {VectorXd::Zero(static_cast<Eigen::Index>(d)), 1.0, 0.0};
}

}  // namespace

TEST_CASE("standard normal target moments") {
    const Dataset dummy = Dataset::from_values(std::vector<double>{0.0});
    auto s = derive_stream(5, 0, StreamDomain::sampler);
    const auto r = rw_metropolis(standard_normal(1), dummy, CountVector::ones(1), 20000, start(1), s);
    REQUIRE(r.draws.size() == 20000);
    const VectorXd x = r.draws.draws.col(0);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
    CHECK(r.state.accept_rate > 0.1);
    CHECK(r.state.accept_rate < 0.6);
}

TEST_CASE("flat target accepts every proposal and the scale is frozen after burn-in") {
    const Dataset dummy = Dataset::from_values(std::vector<double>{0.0});
    auto s = derive_stream(6, 0, StreamDomain::sampler);
    const auto r = rw_metropolis(flat(1), dummy, CountVector::ones(1), 4000, start(1), s);
    CHECK(r.state.accept_rate == 1.0);
    const VectorXd x = r.draws.draws.col(0);
    const Eigen::Index h = x.size() / 2;
    for (Eigen::Index lo : {Eigen::Index{1}, h}) {
        const VectorXd dx = x.segment(lo, h - 1) - x.segment(lo - 1, h - 1);
        const double sd = std::sqrt(dx.array().square().mean());
        CHECK(sd == doctest::Approx(r.state.step_scale).epsilon(0.05));
    }
    CHECK(x.allFinite());
}

TEST_CASE("rw_metropolis validation") {
    const Dataset dummy = Dataset::from_values(std::vector<double>{0.0});
    auto s = derive_stream(1, 0, StreamDomain::sampler);
    CHECK_THROWS_AS(rw_metropolis(standard_normal(1), dummy, CountVector::ones(1), 1, start(1), s),
                    std::invalid_argument);
    CHECK_THROWS_AS(rw_metropolis(standard_normal(2), dummy, CountVector::ones(1), 10, start(1), s),
                    std::invalid_argument);
    SamplerState zero = start(1);
    zero.step_scale = 0.0;
    CHECK_THROWS_AS(rw_metropolis(standard_normal(1), dummy, CountVector::ones(1), 10, zero, s),
                    std::invalid_argument);

    TargetModel half = standard_normal(1);
    half.log_prior = [](std::span<const double> th) {
        return th[0] > 0.0 ? -th[0] : -std::numeric_limits<double>::infinity();
    };
    CHECK_THROWS_AS(rw_metropolis(half, dummy, CountVector::ones(1), 10, start(1), s), std::domain_error);
    SamplerState inside{VectorXd::Constant(1, 1.0), 1.0, 0.0};
    const auto r = rw_metropolis(half, dummy, CountVector::ones(1), 2000, inside, s);
    CHECK((r.draws.draws.array() > 0.0).all());
}

TEST_CASE("logistic target") {
    const auto t = logistic_target(2, 10.0);
    const std::vector<double> zero{0.0, 0.0};
    const std::vector<double> r1{1.0, 0.3, -2.0}, r0{0.0, 5.0, 1.0};
    CHECK(t.log_lik(r1, zero) == doctest::Approx(std::log(0.5)));
    CHECK(t.log_lik(r0, zero) == doctest::Approx(std::log(0.5)));
    const std::vector<double> big{800.0, 0.0};
    const std::vector<double> pos{1.0, 1.0, 0.0}, neg{0.0, 1.0, 0.0};
    CHECK(std::isfinite(t.log_lik(neg, big)));
    CHECK(t.log_lik(neg, big) == doctest::Approx(-800.0));
    CHECK(t.log_lik(pos, big) == doctest::Approx(0.0));
    CHECK_THROWS_AS(logistic_target(0, 1.0), std::invalid_argument);
}

TEST_CASE("logistic log posterior is symmetric under label flip") {
    const auto t = logistic_target(2, 3.0);
    const Dataset data = logistic_data(50, 3);
    MatrixXd flipped = data.rows();
    flipped.col(0) = (1.0 - flipped.col(0).array()).matrix();
    const Dataset fdata(flipped);
    auto s = derive_stream(3, 1, StreamDomain::counts);
    const auto w = sample_counts(50, 50, s);
    for (const auto& b : {VectorXd{{0.4, -1.3}}, VectorXd{{-2.0, 0.7}}, VectorXd{{0.0, 0.0}}}) {
        const double a = log_posterior(t, data, w, b);
        const double c = log_posterior(t, fdata, w, VectorXd(-b));
        CHECK(a == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("separable logistic data stays finite under the prior") {
    const double prior_sd = 10.0;
    MatrixXd rows(30, 2);
    for (Eigen::Index i = 0; i < 30; ++i) {
        rows(i, 1) = (static_cast<double>(i) - 14.5) / 5.0;
        rows(i, 0) = rows(i, 1) > 0 ? 1.0 : 0.0;
    }
    const Dataset data(rows);
    auto s = derive_stream(8, 0, StreamDomain::sampler);
    const auto r = rw_metropolis(logistic_target(1, prior_sd), data, CountVector::ones(30), 20000, start(1), s);
    const double m = r.draws.draws.col(0).mean();
    CHECK(m > 2.0);
    CHECK(std::abs(m) < 10 * prior_sd);
    CHECK(r.draws.draws.allFinite());
}

TEST_CASE("logistic chain agrees with a ten times longer chain") {
    const Dataset data = logistic_data(100, 11);
    const auto t = logistic_target(2, 10.0);
    auto s1 = derive_stream(11, 0, StreamDomain::sampler);
    auto s2 = derive_stream(11, 1, StreamDomain::sampler);
    const auto shorter = rw_metropolis(t, data, CountVector::ones(100), 5000, start(2), s1);
    const auto longer = rw_metropolis(t, data, CountVector::ones(100), 50000, start(2), s2);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const double se = std::hypot(batch_se(shorter.draws.draws, j), batch_se(longer.draws.draws, j));
        CHECK(std::abs(shorter.draws.draws.col(j).mean() - longer.draws.draws.col(j).mean()) < 3 * se);
    }
}

TEST_CASE("identity resample with equal chain lengths matches the long chain") {
    const auto model = GaussianLocationModel::scalar(1.0, 100.0);
    std::vector<double> x(20);
    auto ds = derive_stream(2, 0, StreamDomain::data);
    for (auto& xi : x) xi = 0.5 + ds.normal();
    const auto data = Dataset::from_values(x);
    const auto r = basic_bayesbag_sampler(gaussian_location_target(model), data, 20000, 20000,
                                          BootstrapPlan(20, 1, 4), start(1), {CountVector::ones(20)}, 1);
    const auto& comp = std::get<DrawMatrix>(r.bagged.components[0]).draws;
    const double se = std::hypot(batch_se(comp, 0), batch_se(r.standard.draws, 0));
    CHECK(std::abs(comp.col(0).mean() - r.standard.draws.col(0).mean()) < 3 * se);
}

TEST_CASE("bagged sampler matches exact bagged Gaussian location moments") {
    const auto model = GaussianLocationModel::scalar(1.0, 100.0);
    std::vector<double> x(20);
    auto ds = derive_stream(12, 0, StreamDomain::data);
    for (auto& xi : x) xi = 1.0 + 2.0 * ds.normal();
    const auto data = Dataset::from_values(x);
    const BootstrapPlan plan(20, 50, 12);
    const auto r = basic_bayesbag_sampler(gaussian_location_target(model), data, 20000, 2000, plan, start(1));
    const auto exact = gl_bagged_moments_exact(model, data, 20);
    const auto f = FunctionOfInterest::coordinate(0);
    const auto mv = mixture_mean_var(r.bagged, f);
    CHECK(std::abs(mv.mean - exact.mean(0)) < 3 * mc_error(r.bagged, f, McStatistic::mean));
    CHECK(std::abs(mv.var - exact.cov(0, 0)) < 3 * mc_error(r.bagged, f, McStatistic::variance));
}

TEST_CASE("sampler output shapes, determinism and thread invariance") {
    const Dataset data = logistic_data(40, 21);
    const auto t = logistic_target(2, 10.0);
    const BootstrapPlan plan(40, 6, 21);
    const auto a = basic_bayesbag_sampler(t, data, 400, 60, plan, start(2), 1);
    const auto b = basic_bayesbag_sampler(t, data, 400, 60, plan, start(2), 4);
    CHECK(a.standard.size() == 400);
    CHECK(a.standard.dim() == 2);
    REQUIRE(a.bagged.size() == 6);
    const MatrixXd pa = pooled_draws(a.bagged);
    CHECK(pa.rows() == 6 * 60);
    CHECK(pa.cols() == 2);
    CHECK(pa.allFinite());
    CHECK(a.standard.draws == b.standard.draws);
    CHECK(pa == pooled_draws(b.bagged));
    CHECK(a.adapted.step_scale == b.adapted.step_scale);
    CHECK(a.adapted.step_scale > 0.0);
    CHECK(std::abs(std::accumulate(a.bagged.weights.begin(), a.bagged.weights.end(), 0.0) - 1.0) < 1e-15);

    // Same bootstrap datasets as the closed-form engine with the same plan.
    const auto closed = bag(gaussian_location_adapter(GaussianLocationModel::scalar(1.0, 1.0)),
                            Dataset::from_values(std::vector<double>(40, 0.0)), plan, 1);
    for (std::size_t k = 0; k < 6; ++k) CHECK(closed.counts[k] == a.bagged.counts[k]);

    CHECK_THROWS_AS(basic_bayesbag_sampler(t, data, 10, 20, plan, start(2)), std::invalid_argument);
    CHECK_THROWS_AS(basic_bayesbag_sampler(t, data, 10, 1, plan, start(2)), std::invalid_argument);
    CHECK(default_t_small(20000) == 2000);
    CHECK(default_t_small(5) == 2);
}

TEST_CASE("short chain failures carry the replicate index") {
    TargetModel t = standard_normal(1);
    t.log_lik = [](std::span<const double> row, std::span<const double>) { return row[0] * 1e308; };
    MatrixXd rows(2, 1);
    rows << 1.0, -1.0;
    const std::vector<CountVector> counts{CountVector{{1, 1}}, CountVector{{0, 2}}};
    try {
        (void)basic_bayesbag_sampler(t, Dataset(rows), 10, 2, BootstrapPlan(2, 2, 1), start(1), counts, 1);
        FAIL("expected a ReplicateError");
    } catch (const ReplicateError& e) {
        CHECK(e.replicate() == 1);
    }
}
