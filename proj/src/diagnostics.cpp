#include "bayesbag/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bayesbag {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= variance_guard * std::max(std::abs(a), std::abs(b));
}

double require_v0(const VariancePair& vp, const char* what) {
    if (!vp.v0) throw std::invalid_argument(std::string(what) + ": prior variance v0 is required");
    return *vp.v0;
}

}  // namespace

double m_hat_asymptotic(const VariancePair& vp) {
    if (nearly_equal(vp.v_n_bag, vp.v_n)) return inf;
    return vp.v_n_bag / (vp.v_n_bag - vp.v_n) * static_cast<double>(vp.n);
}

SigmaS sigma_s_estimators(const VariancePair& vp) {
    const double v0 = require_v0(vp, "sigma_s_estimators");
    if (nearly_equal(v0, vp.v_n))
        throw std::invalid_argument("sigma_s_estimators: v0 must differ from v_n");
    const double n = static_cast<double>(vp.n);
    const double gap = v0 - vp.v_n;
    return {n * v0 * vp.v_n / gap, v0 * v0 / (gap * gap) * (vp.v_n_bag - vp.v_n) * n};
}

MEstimate m_hat_finite_sample(const VariancePair& vp) {
    const double v0 = require_v0(vp, "m_hat_finite_sample");
    const double n = static_cast<double>(vp.n);
    const MEstimate fallback{n, false};
    if (nearly_equal(v0, vp.v_n)) return fallback;

    const auto [sigma2, s2] = sigma_s_estimators(vp);
    if (!(sigma2 > 0.0) || !(s2 > 0.0) || nearly_equal(vp.v_n_bag, vp.v_n)) return fallback;

    const double half = n / 2.0 + n * sigma2 / (2.0 * s2);
    const double disc = half * half - n * sigma2 / v0;
    if (!(disc >= 0.0)) return fallback;
    const double m = half - sigma2 / v0 + std::sqrt(disc);
    if (!std::isfinite(m) || !(m > 0.0)) return fallback;
    return {m, true};
}

std::optional<double> mismatch_index(double m_hat, bool valid, std::size_t n) {
    const double nd = static_cast<double>(n);
    if (!valid || !std::isfinite(m_hat) || m_hat < nd) return std::nullopt;
    return 2.0 * nd / m_hat - 1.0;
}

ClassDiagnostics class_diagnostics(std::span<const MEstimate> members, std::size_t n) {
    if (members.empty()) throw std::invalid_argument("class_diagnostics: empty function class");
    ClassDiagnostics out;
    out.m_hat = inf;
    for (const auto& m : members) {
        out.m_hat = std::min(out.m_hat, m.value);
        out.all_valid = out.all_valid && m.valid;
    }
    out.index = mismatch_index(out.m_hat, out.all_valid, n);
    return out;
}

MismatchReport build_mismatch_report(const std::vector<LabelledVariances>& entries,
                                     std::string variance_source) {
    if (entries.empty()) throw std::invalid_argument("build_mismatch_report: no functions");
    MismatchReport report;
    report.n = entries.front().vp.n;
    report.variance_source = std::move(variance_source);

    std::vector<MEstimate> asym, fs;
    bool all_have_v0 = true;
    for (const auto& e : entries) {
        if (e.vp.n != report.n)
            throw std::invalid_argument("build_mismatch_report: entries disagree on N");
        MismatchRecord r;
        r.label = e.label;
        r.v_n = e.vp.v_n;
        r.v_n_bag = e.vp.v_n_bag;
        r.v0 = e.vp.v0;
        r.m_hat_asym = m_hat_asymptotic(e.vp);
        r.index_asym = mismatch_index(r.m_hat_asym, true, report.n);
        asym.push_back({r.m_hat_asym, true});
        if (e.vp.v0) {
            if (!nearly_equal(*e.vp.v0, e.vp.v_n)) {
                const auto ss = sigma_s_estimators(e.vp);
                r.sigma_hat_sq = ss.sigma_hat_sq;
                r.s_hat_sq = ss.s_hat_sq;
            }
            const auto m = m_hat_finite_sample(e.vp);
            r.m_hat_fs = m.value;
            r.m_hat_fs_valid = m.valid;
            r.index_fs = mismatch_index(m.value, m.valid, report.n);
            fs.push_back(m);
        } else {
            all_have_v0 = false;
        }
        report.records.push_back(std::move(r));
    }
    report.class_asym = class_diagnostics(asym, report.n);
    if (all_have_v0) report.class_fs = class_diagnostics(fs, report.n);
    return report;
}

MismatchReport diagnose(const PosteriorSummary& standard, const BaggedPosterior& bag_at_n,
                        const std::vector<FunctionOfInterest>& functions, std::size_t n,
                        const std::vector<std::optional<double>>& prior_variances) {
    if (!prior_variances.empty() && prior_variances.size() != functions.size())
        throw std::invalid_argument("diagnose: one prior variance per function is required");
    std::vector<LabelledVariances> entries;
    entries.reserve(functions.size());
    for (std::size_t i = 0; i < functions.size(); ++i) {
        const auto& f = functions[i];
        LabelledVariances e;
        e.label = f.label();
        e.vp.n = n;
        e.vp.v_n = component_mean_var(standard, f, bag_at_n.plan.master_seed).var;
        e.vp.v_n_bag = mixture_mean_var(bag_at_n, f).var;
        if (!prior_variances.empty()) e.vp.v0 = prior_variances[i];
        entries.push_back(std::move(e));
    }
    const bool closed = !std::holds_alternative<DrawMatrix>(standard) &&
                        std::all_of(functions.begin(), functions.end(),
                                    [](const FunctionOfInterest& f) { return f.is_linear(); });
    return build_mismatch_report(entries, closed ? "closed_form" : "draws");
}

std::vector<FunctionOfInterest> nig_projection_family(std::size_t d) {
    std::vector<std::string> names{"log_sigma2"};
    for (std::size_t j = 1; j <= d; ++j) names.push_back("beta_" + std::to_string(j));
    return projection_family(names);
}

std::vector<std::optional<double>> nig_projection_prior_variances(const NIGModel& model,
                                                                  std::size_t d) {
    std::vector<std::optional<double>> out{model.log_sigma2_prior_variance()};
    const std::optional<double> beta =
        model.a0 > 1.0 ? std::optional<double>{model.beta_prior_variance()} : std::nullopt;
    for (std::size_t j = 0; j < d; ++j) out.push_back(beta);
    return out;
}

}  // namespace bayesbag
