#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bayesbag/engine.hpp"

namespace bayesbag {

/** Standard and bagged (M = N) posterior variances of one scalar f(theta), plus the prior
 * variance of f(theta) when the finite-sample estimators are wanted.
 */
struct VariancePair {
    double v_n = 0.0;
    double v_n_bag = 0.0;
    std::size_t n = 0;
    std::optional<double> v0;
};

/// Relative tolerance used before dividing by a difference of variances.
inline constexpr double variance_guard = 1e-12;

/** v_n_bag / (v_n_bag - v_n) * N.  Returns +infinity when the two variances coincide; a negative
 * value means v_n > v_n_bag.
 */
double m_hat_asymptotic(const VariancePair& vp);

struct SigmaS {
    double sigma_hat_sq;
    double s_hat_sq;
};

/** Model-based and sandwich variance estimates corrected for a prior of variance v0:
 *   sigma^2 = N v0 v_n / (v0 - v_n),   s^2 = v0^2 / (v0 - v_n)^2 * (v_n_bag - v_n) * N.
 * \throws std::invalid_argument if v0 is absent or equal to v_n.
 */
SigmaS sigma_s_estimators(const VariancePair& vp);

struct MEstimate {
    double value = 0.0;
    bool valid = true;
};

/** Finite-sample optimal bootstrap size.  Falls back to (N, invalid) when sigma^2 <= 0 (v_n >= v0),
 * s^2 <= 0, the square root's argument is negative, or the result is not positive.
 * \throws std::invalid_argument if v0 is absent.
 */
MEstimate m_hat_finite_sample(const VariancePair& vp);

/// 2N / m_hat - 1 when valid and N <= m_hat < infinity; std::nullopt (NA) otherwise.
std::optional<double> mismatch_index(double m_hat, bool valid, std::size_t n);

struct ClassDiagnostics {
    double m_hat = 0.0;  ///< infimum over the class
    bool all_valid = true;
    std::optional<double> index;
};

/** Most conservative bootstrap size over a function class.  Any invalid member makes the class
 * index NA.
 * \throws std::invalid_argument for an empty class.
 */
ClassDiagnostics class_diagnostics(std::span<const MEstimate> members, std::size_t n);

struct MismatchRecord {
    std::string label;
    double v_n = 0.0;
    double v_n_bag = 0.0;
    std::optional<double> v0;
    std::optional<double> sigma_hat_sq;
    std::optional<double> s_hat_sq;
    double m_hat_asym = 0.0;
    std::optional<double> m_hat_fs;
    bool m_hat_fs_valid = false;
    std::optional<double> index_asym;
    std::optional<double> index_fs;
};

struct MismatchReport {
    std::size_t n = 0;
    std::string variance_source;  ///< "closed_form" or "draws"
    std::vector<MismatchRecord> records;
    ClassDiagnostics class_asym;
    /// Present when every member has a prior variance.
    std::optional<ClassDiagnostics> class_fs;
};

struct LabelledVariances {
    std::string label;
    VariancePair vp;
};

MismatchReport build_mismatch_report(const std::vector<LabelledVariances>& entries,
                                     std::string variance_source);

/** Runs the diagnostics on a standard posterior and a bag built with M = N.  `prior_variances`
 * is either empty or one entry per function (std::nullopt skips the finite-sample path for it).
 */
MismatchReport diagnose(const PosteriorSummary& standard, const BaggedPosterior& bag_at_n,
                        const std::vector<FunctionOfInterest>& functions, std::size_t n,
                        const std::vector<std::optional<double>>& prior_variances = {});

/// Coordinates of (log sigma^2, beta_1..beta_D) with their prior variances under the NIG prior.
std::vector<FunctionOfInterest> nig_projection_family(std::size_t d);
std::vector<std::optional<double>> nig_projection_prior_variances(const NIGModel& model, std::size_t d);

}  // namespace bayesbag
