#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bayesbag/diagnostics.hpp"
#include "doctest.h"

using namespace bayesbag;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Solves (R_M s2 + R_M^2 t2) / M = t2 / N for M by bisection, R_M = 1 / (1 + s2 / (v0 M)).
double solve_fs(double s2, double t2, double v0, double n) {
    auto g = [&](double m) {
        const double r = 1.0 / (1.0 + s2 / (v0 * m));
        return (r * s2 + r * r * t2) / m - t2 / n;
    };
    double lo = 1e-6, hi = 1e9;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("asymptotic bootstrap size") {
    CHECK(m_hat_asymptotic({0.1, 0.2, 50, {}}) == 100.0);
    CHECK(m_hat_asymptotic({0.1, 0.1, 50, {}}) == inf);
    CHECK(m_hat_asymptotic({0.2, 0.1, 50, {}}) == doctest::Approx(-50.0));
}

TEST_CASE("sigma and s estimators") {
    const auto ss = sigma_s_estimators({0.1, 0.2, 50, 1.0});
    CHECK(ss.sigma_hat_sq == doctest::Approx(50 * 0.1 / 0.9).epsilon(1e-14));
    CHECK(ss.s_hat_sq == doctest::Approx(0.1 * 50 / 0.81).epsilon(1e-14));
    CHECK(ss.sigma_hat_sq == doctest::Approx(5.5556).epsilon(1e-5));
    CHECK(ss.s_hat_sq == doctest::Approx(6.1728).epsilon(1e-5));

    const auto lim = sigma_s_estimators({0.1, 0.2, 50, 1e12});
    CHECK(lim.sigma_hat_sq == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(lim.s_hat_sq == doctest::Approx(5.0).epsilon(1e-10));

    CHECK(sigma_s_estimators({0.1, 0.1, 50, 1.0}).s_hat_sq == 0.0);
    CHECK_THROWS_AS(sigma_s_estimators({0.1, 0.2, 50, {}}), std::invalid_argument);
    CHECK_THROWS_AS(sigma_s_estimators({0.1, 0.2, 50, 0.1}), std::invalid_argument);
}

TEST_CASE("finite-sample bootstrap size") {
    const VariancePair vp{0.01, 0.02, 100, 1.0};
    const auto m = m_hat_finite_sample(vp);
    const auto ss = sigma_s_estimators(vp);
    CHECK(ss.sigma_hat_sq == doctest::Approx(1.0101).epsilon(1e-4));
    CHECK(ss.s_hat_sq == doctest::Approx(1.0203).epsilon(1e-4));
    CHECK(m.valid);
    CHECK(m.value == doctest::Approx(197.5).epsilon(1e-3));
    CHECK(m.value == doctest::Approx(solve_fs(ss.sigma_hat_sq, ss.s_hat_sq, 1.0, 100)).epsilon(1e-9));

    const auto zero = m_hat_finite_sample({0.01, 0.01, 100, 1.0});
    CHECK_FALSE(zero.valid);
    CHECK(zero.value == 100.0);

    // Posterior variance above the prior variance: sigma^2 estimate is negative.
    const auto neg = m_hat_finite_sample({2.0, 3.0, 100, 1.0});
    CHECK_FALSE(neg.valid);
    CHECK(neg.value == 100.0);

    CHECK_THROWS_AS(m_hat_finite_sample({0.01, 0.02, 100, {}}), std::invalid_argument);
}

TEST_CASE("finite-sample estimate solves its defining equation") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        const double n = 20 + std::floor(200 * u(rng));
        const double v0 = 0.5 + 5 * u(rng);
        const double v_n = v0 * 0.2 * u(rng) + 1e-4;
        const double v_bag = v_n * (1.0 + 3.0 * u(rng)) + 1e-6;
        const VariancePair vp{v_n, v_bag, static_cast<std::size_t>(n), v0};
        const auto m = m_hat_finite_sample(vp);
        if (!m.valid) continue;
        const auto ss = sigma_s_estimators(vp);
        CHECK(m.value == doctest::Approx(solve_fs(ss.sigma_hat_sq, ss.s_hat_sq, v0, n)).epsilon(1e-7));
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("finite-sample estimate reduces to the asymptotic one for a flat prior") {
    for (double ratio : {1.1, 1.5, 2.0, 4.0}) {
        const VariancePair vp{0.01, 0.01 * ratio, 80, 1e12};
        const auto fs = m_hat_finite_sample(vp);
        REQUIRE(fs.valid);
        CHECK(std::abs(fs.value / m_hat_asymptotic(vp) - 1.0) < 1e-3);
    }
}

TEST_CASE("mismatch index") {
    CHECK(mismatch_index(100.0, true, 50) == 0.0);
    CHECK(mismatch_index(50.0, true, 50) == 1.0);
    CHECK_FALSE(mismatch_index(-100.0, true, 50));
    CHECK_FALSE(mismatch_index(inf, true, 50));
    CHECK_FALSE(mismatch_index(49.9, true, 50));
    CHECK_FALSE(mismatch_index(100.0, false, 50));
}

TEST_CASE("class diagnostics") {
    const std::vector<MEstimate> ok{{100.0, true}, {150.0, true}};
    const auto c = class_diagnostics(ok, 50);
    CHECK(c.m_hat == 100.0);
    REQUIRE(c.index);
    CHECK(*c.index == 0.0);

    const std::vector<MEstimate> bad{{75.0, true}, {50.0, false}};
    const auto d = class_diagnostics(bad, 50);
    CHECK_FALSE(d.all_valid);
    CHECK_FALSE(d.index);
    CHECK_THROWS_AS(class_diagnostics(std::span<const MEstimate>{}, 50), std::invalid_argument);
}

TEST_CASE("index lies in (-1, 1] whenever defined") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(1e-6, 10.0);
    for (int i = 0; i < 5000; ++i) {
        const VariancePair vp{u(rng), u(rng), 1 + static_cast<std::size_t>(u(rng) * 50), u(rng)};
        for (const auto idx : {mismatch_index(m_hat_asymptotic(vp), true, vp.n),
                               [&] {
                                   const auto m = m_hat_finite_sample(vp);
                                   return mismatch_index(m.value, m.valid, vp.n);
                               }()}) {
            if (!idx) continue;
            CHECK(*idx > -1.0);
            CHECK(*idx <= 1.0);
        }
    }
}

TEST_CASE("monotonicity in the bagged variance") {
    double prev_m = inf, prev_i = -2.0;
    for (double v_bag = 0.11; v_bag < 5.0; v_bag *= 1.3) {
        const double m = m_hat_asymptotic({0.1, v_bag, 50, {}});
        const auto i = mismatch_index(m, true, 50);
        REQUIRE(i);
        CHECK(m < prev_m);
        CHECK(m > 50.0);
        CHECK(*i > prev_i);
        prev_m = m;
        prev_i = *i;
    }
}

TEST_CASE("scale invariance") {
    const VariancePair base{0.013, 0.031, 60, 0.9};
    for (double c : {0.25, 2.0, 8.0}) {
        const double c2 = c * c;
        const VariancePair s{base.v_n * c2, base.v_n_bag * c2, base.n, *base.v0 * c2};
        CHECK(m_hat_asymptotic(s) == m_hat_asymptotic(base));
        CHECK(m_hat_finite_sample(s).value == m_hat_finite_sample(base).value);
    }
    for (double c : {0.3, 3.0, 17.0}) {
        const double c2 = c * c;
        const VariancePair s{base.v_n * c2, base.v_n_bag * c2, base.n, *base.v0 * c2};
        CHECK(m_hat_asymptotic(s) == doctest::Approx(m_hat_asymptotic(base)).epsilon(1e-12));
        CHECK(m_hat_finite_sample(s).value == doctest::Approx(m_hat_finite_sample(base).value).epsilon(1e-12));
    }
}

TEST_CASE("mismatch report") {
    std::vector<LabelledVariances> e{{"a", {0.1, 0.2, 50, 1.0}}, {"b", {0.1, 0.15, 50, 1.0}}};
    const auto r = build_mismatch_report(e, "closed_form");
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].m_hat_asym == 100.0);
    CHECK(r.records[1].m_hat_asym == doctest::Approx(150.0));
    CHECK(r.class_asym.m_hat == 100.0);
    REQUIRE(r.class_fs);
    CHECK(r.records[0].sigma_hat_sq);
    CHECK(r.class_fs->m_hat == doctest::Approx(std::min(*r.records[0].m_hat_fs, *r.records[1].m_hat_fs)));

    e.push_back({"c", {0.2, 0.1, 50, {}}});
    const auto r2 = build_mismatch_report(e, "draws");
    CHECK_FALSE(r2.class_fs);
    CHECK_FALSE(r2.records[2].index_asym);
    CHECK_FALSE(r2.class_asym.index);

    e.push_back({"d", {0.2, 0.3, 49, {}}});
    CHECK_THROWS_AS(build_mismatch_report(e, "draws"), std::invalid_argument);
    CHECK_THROWS_AS(build_mismatch_report({}, "draws"), std::invalid_argument);
}

TEST_CASE("well-specified vs misspecified Gaussian location") {
    const auto model = GaussianLocationModel::scalar(1.0, 100.0);
    std::vector<double> well, mis;
    std::size_t mis_na = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        auto s = derive_stream(31, rep, StreamDomain::data);
        std::vector<double> a(500), b(500);
        for (std::size_t i = 0; i < 500; ++i) {
            const double z = s.normal();
            a[i] = 1.0 + z;
            b[i] = 1.0 + 3.0 * z;
        }
        for (int k = 0; k < 2; ++k) {
            const auto data = Dataset::from_values(k == 0 ? a : b);
            const double v_n = gl_posterior(model, data).cov(0, 0);
            const double v_bag = gl_bagged_moments_exact(model, data, 500).cov(0, 0);
            const auto r = build_mismatch_report({{"theta", {v_n, v_bag, 500, 100.0}}}, "closed_form");
            const auto idx = r.class_fs->index;
            if (k == 0) {
                REQUIRE(idx);
                well.push_back(*idx);
            } else if (!idx) {
                ++mis_na;
            } else {
                mis.push_back(*idx);
            }
        }
    }
    std::sort(well.begin(), well.end());
    CHECK(std::abs(0.5 * (well[24] + well[25])) < 0.15);
    for (double x : mis) CHECK(x > 0.7);
    CHECK(mis.size() + mis_na == 50);
}

TEST_CASE("diagnose on conjugate models") {
    const auto model = GaussianLocationModel::scalar(1.0, 10.0);
    std::vector<double> x(40);
    auto s = derive_stream(1, 0, StreamDomain::data);
    for (auto& xi : x) xi = 2.0 * s.normal();
    const auto data = Dataset::from_values(x);
    const auto bp = bag(gaussian_location_adapter(model), data, BootstrapPlan{40, 200, 3}, 1);
    const std::vector<FunctionOfInterest> fs{FunctionOfInterest::coordinate(0, "theta")};
    const auto r = diagnose(gl_posterior(model, data), bp, fs, 40, {10.0});
    CHECK(r.variance_source == "closed_form");
    CHECK(r.records[0].label == "theta");
    CHECK(r.records[0].v_n == doctest::Approx(gl_posterior(model, data).cov(0, 0)));
    CHECK(r.records[0].v_n_bag == doctest::Approx(mixture_mean_var(bp, fs[0]).var));
    CHECK(r.class_fs);

    const std::vector<FunctionOfInterest> nl{FunctionOfInterest::log_sum_of_squares()};
    CHECK(diagnose(gl_posterior(model, data), bp, nl, 40).variance_source == "draws");
    CHECK_THROWS_AS(diagnose(gl_posterior(model, data), bp, fs, 40, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("NIG projection family") {
    const auto fam = nig_projection_family(3);
    REQUIRE(fam.size() == 4);
    CHECK(fam[0].label() == "log_sigma2");
    CHECK(fam[3].label() == "beta_3");
    const auto pv = nig_projection_prior_variances(NIGModel(3.0, 2.0, 4.0), 3);
    REQUIRE(pv.size() == 4);
    CHECK(*pv[0] == doctest::Approx(std::pow(std::acos(-1.0), 2) / 6 - 1 - 0.25));
    CHECK(*pv[1] == doctest::Approx(0.25));
}
