#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bayesbag {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/** An ordered collection of fixed-width observations, one per row.
 *
 * Row order is significant: bootstrap count vectors refer to rows by index.  Regression data are
 * stored with the response in column 0 and the D regressors in columns 1..D.
 */
class Dataset {
public:
    explicit Dataset(MatrixXd rows);

    /// Univariate data: one observation per element.
    static Dataset from_values(std::span<const double> values);
    /// Regression data: row n is (y[n], z.row(n)).
    static Dataset regression(const VectorXd& y, const MatrixXd& z);

    std::size_t n() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
    std::size_t width() const noexcept { return static_cast<std::size_t>(rows_.cols()); }
    const MatrixXd& rows() const noexcept { return rows_; }
    auto row(std::size_t i) const { return rows_.row(static_cast<Eigen::Index>(i)); }

    /// Response column of regression data.
    auto y() const { return rows_.col(0); }
    /// Regressor block of regression data (n x (width-1)).
    auto z() const { return rows_.rightCols(rows_.cols() - 1); }

private:
    MatrixXd rows_;
};

/// Bootstrap dataset size M, number of replicates B, and the master seed.
struct BootstrapPlan {
    std::size_t m = 1;
    std::size_t b = 1;
    std::uint64_t master_seed = 0;

    BootstrapPlan() = default;
    BootstrapPlan(std::size_t m_, std::size_t b_, std::uint64_t seed);
};

/// Multiplicity K_n of each original row in one bootstrap dataset.
struct CountVector {
    std::vector<std::uint32_t> counts;

    std::size_t size() const noexcept { return counts.size(); }
    std::uint64_t total() const noexcept;
    /// All ones: the bootstrap dataset that is the original data.
    static CountVector ones(std::size_t n);

    friend bool operator==(const CountVector&, const CountVector&) = default;
};

/** Domains keep the streams used for different purposes apart, so that e.g. the draws used to
 * sample a component never alias the draws that produced its counts.
 */
enum class StreamDomain : std::uint32_t {
    counts = 0,
    component_draws = 1,
    sampler = 2,
    data = 3,
    replicate_seed = 4,
    long_chain = 5,
};

/** Reproducible random stream.
 *
 * Stream derivation: a std::mt19937_64 engine seeded through std::seed_seq with the five 32-bit
 * words (seed_lo, seed_hi, domain, index_lo, index_hi).  Both std::mt19937_64 and std::seed_seq
 * are fully specified by the C++ standard, so the raw bit stream is identical on every conforming
 * platform.  Distributions on top of it come from Boost.Random, whose algorithms live in headers.
 */
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t index, StreamDomain domain);

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    double uniform01();
    double normal();
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

private:
    std::mt19937_64 engine_;
};

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t replicate_index,
                        StreamDomain domain = StreamDomain::counts);

/// Draws K ~ Multinomial(m, 1/n) as m independent uniform categorical draws.
CountVector sample_counts(std::size_t n, std::size_t m, RngStream& stream);

inline constexpr std::uint64_t default_enumeration_cap = 1'000'000;

struct WeightedCounts {
    CountVector counts;
    std::uint64_t multiplicity = 0;
};

/** Every composition of m into n nonnegative parts, with multinomial multiplicity
 * m! / prod(counts[i]!).  The multiplicities sum to n^m.
 *
 * \throws EnumerationCapError if n^m exceeds cap.
 */
std::vector<WeightedCounts> enumerate_count_vectors(std::size_t n, std::size_t m,
                                                    std::uint64_t cap = default_enumeration_cap);

/// n^m, saturating at the largest uint64 value.
std::uint64_t saturating_pow(std::uint64_t n, std::uint64_t m);

/** A real-valued function of the parameter vector. */
class FunctionOfInterest {
public:
    struct Coordinate {
        std::size_t index;
    };
    struct Linear {
        VectorXd weights;
    };
    /// log(sum_{d in [first, last)} theta_d^2)
    struct LogSumOfSquares {
        std::size_t first;
        std::size_t last;
    };
    struct Custom {
        std::function<double(std::span<const double>)> fn;
    };
    using Kind = std::variant<Coordinate, Linear, LogSumOfSquares, Custom>;

    static FunctionOfInterest coordinate(std::size_t d, std::string label = {});
    static FunctionOfInterest linear(VectorXd w, std::string label = {});
    /// last == npos means "through the final coordinate".
    static FunctionOfInterest log_sum_of_squares(std::size_t first = 0, std::size_t last = npos,
                                                 std::string label = {});
    static FunctionOfInterest custom(std::function<double(std::span<const double>)> fn,
                                     std::string label);

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    double operator()(std::span<const double> theta) const;
    double operator()(const VectorXd& theta) const {
        return (*this)(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
    }

    const Kind& kind() const noexcept { return kind_; }
    const std::string& label() const noexcept { return label_; }
    /// Coordinate and Linear maps have closed-form moments under Gaussian-like components.
    bool is_linear() const noexcept;

private:
    FunctionOfInterest(Kind kind, std::string label) : kind_{std::move(kind)}, label_{std::move(label)} {}

    Kind kind_;
    std::string label_;
};

double evaluate_function(const FunctionOfInterest& f, std::span<const double> theta);

/// F_proj: one coordinate projection per parameter, labelled with the given names.
std::vector<FunctionOfInterest> projection_family(const std::vector<std::string>& names);

}  // namespace bayesbag
