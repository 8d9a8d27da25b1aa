#include "bayesbag/core.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <cmath>
#include <stdexcept>

#include "bayesbag/error.hpp"

namespace bayesbag {

Dataset::Dataset(MatrixXd rows) : rows_{std::move(rows)} {
    if (rows_.rows() < 1) throw std::invalid_argument("Dataset: at least one row is required");
    if (rows_.cols() < 1) throw std::invalid_argument("Dataset: rows must have positive width");
}

Dataset Dataset::from_values(std::span<const double> values) {
    MatrixXd rows(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) rows(static_cast<Eigen::Index>(i), 0) = values[i];
    return Dataset{std::move(rows)};
}

Dataset Dataset::regression(const VectorXd& y, const MatrixXd& z) {
    if (y.size() != z.rows())
        throw std::invalid_argument("Dataset::regression: y and z have different row counts");
    MatrixXd rows(y.size(), z.cols() + 1);
    rows.col(0) = y;
    rows.rightCols(z.cols()) = z;
    return Dataset{std::move(rows)};
}

BootstrapPlan::BootstrapPlan(std::size_t m_, std::size_t b_, std::uint64_t seed)
    : m{m_}, b{b_}, master_seed{seed} {
    if (m < 1) throw std::invalid_argument("BootstrapPlan: m must be >= 1");
    if (b < 1) throw std::invalid_argument("BootstrapPlan: b must be >= 1");
}

std::uint64_t CountVector::total() const noexcept {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

CountVector CountVector::ones(std::size_t n) {
    return CountVector{std::vector<std::uint32_t>(n, 1u)};
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t index, StreamDomain domain) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(domain),
                      static_cast<std::uint32_t>(index & 0xffffffffu),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
}

double RngStream::uniform01() {
    return boost::random::uniform_01<double>{}(engine_);
}

double RngStream::normal() {
    return boost::random::normal_distribution<double>{}(engine_);
}

std::size_t RngStream::index(std::size_t n) {
    return boost::random::uniform_int_distribution<std::size_t>{0, n - 1}(engine_);
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t replicate_index,
                        StreamDomain domain) {
    return RngStream{master_seed, replicate_index, domain};
}

CountVector sample_counts(std::size_t n, std::size_t m, RngStream& stream) {
    if (n < 1) throw std::invalid_argument("sample_counts: n must be >= 1");
    if (m < 1) throw std::invalid_argument("sample_counts: m must be >= 1");
    CountVector k{std::vector<std::uint32_t>(n, 0u)};
    for (std::size_t j = 0; j < m; ++j) ++k.counts[stream.index(n)];
    return k;
}

std::uint64_t saturating_pow(std::uint64_t n, std::uint64_t m) {
    constexpr auto top = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < m; ++i) {
        if (n != 0 && r > top / n) return top;
        r *= n;
    }
    return r;
}

namespace {

// m! / prod k_i!, built as a product of binomial coefficients so intermediates stay exact.
std::uint64_t multinomial_coefficient(const std::vector<std::uint32_t>& k) {
    std::uint64_t result = 1;
    std::uint64_t running = 0;
    for (auto ki : k) {
        for (std::uint64_t j = 1; j <= ki; ++j) {
            ++running;
            result = result * running / j;  // exact: C(running, j) is an integer at each step
        }
    }
    return result;
}

void compositions(std::size_t pos, std::uint32_t remaining, std::vector<std::uint32_t>& current,
                  std::vector<WeightedCounts>& out) {
    if (pos + 1 == current.size()) {
        current[pos] = remaining;
        out.push_back({CountVector{current}, multinomial_coefficient(current)});
        return;
    }
    for (std::uint32_t c = remaining + 1; c-- > 0;) {
        current[pos] = c;
        compositions(pos + 1, remaining - c, current, out);
    }
}

}  // namespace

std::vector<WeightedCounts> enumerate_count_vectors(std::size_t n, std::size_t m,
                                                    std::uint64_t cap) {
    if (n < 1) throw std::invalid_argument("enumerate_count_vectors: n must be >= 1");
    if (m < 1) throw std::invalid_argument("enumerate_count_vectors: m must be >= 1");
    if (saturating_pow(n, m) > cap)
        throw EnumerationCapError("enumerate_count_vectors: n^m = " + std::to_string(n) + "^" +
                                  std::to_string(m) + " exceeds the cap of " + std::to_string(cap));
    std::vector<WeightedCounts> out;
    std::vector<std::uint32_t> current(n, 0u);
    compositions(0, static_cast<std::uint32_t>(m), current, out);
    return out;
}

FunctionOfInterest FunctionOfInterest::coordinate(std::size_t d, std::string label) {
    if (label.empty()) label = "theta[" + std::to_string(d) + "]";
    return {Coordinate{d}, std::move(label)};
}

FunctionOfInterest FunctionOfInterest::linear(VectorXd w, std::string label) {
    if (label.empty()) label = "linear";
    return {Linear{std::move(w)}, std::move(label)};
}

FunctionOfInterest FunctionOfInterest::log_sum_of_squares(std::size_t first, std::size_t last,
                                                          std::string label) {
    if (last != npos && last <= first)
        throw std::invalid_argument("log_sum_of_squares: empty index range");
    if (label.empty()) label = "log_sum_of_squares";
    return {LogSumOfSquares{first, last}, std::move(label)};
}

FunctionOfInterest FunctionOfInterest::custom(std::function<double(std::span<const double>)> fn,
                                              std::string label) {
    if (!fn) throw std::invalid_argument("FunctionOfInterest::custom: empty function");
    return {Custom{std::move(fn)}, std::move(label)};
}

bool FunctionOfInterest::is_linear() const noexcept {
    return std::holds_alternative<Coordinate>(kind_) || std::holds_alternative<Linear>(kind_);
}

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
}  // namespace

double FunctionOfInterest::operator()(std::span<const double> theta) const {
    return std::visit(
        overloaded{
            [&](const Coordinate& c) {
                if (c.index >= theta.size())
                    throw std::invalid_argument("coordinate " + std::to_string(c.index) +
                                                " out of range for dimension " +
                                                std::to_string(theta.size()));
                return theta[c.index];
            },
            [&](const Linear& l) {
                if (static_cast<std::size_t>(l.weights.size()) != theta.size())
                    throw std::invalid_argument("linear function: weight dimension " +
                                                std::to_string(l.weights.size()) +
                                                " != parameter dimension " +
                                                std::to_string(theta.size()));
                double s = 0.0;
                for (std::size_t i = 0; i < theta.size(); ++i)
                    s += l.weights[static_cast<Eigen::Index>(i)] * theta[i];
                return s;
            },
            [&](const LogSumOfSquares& r) {
                const std::size_t last = r.last == npos ? theta.size() : r.last;
                if (last > theta.size() || r.first >= last)
                    throw std::invalid_argument("log_sum_of_squares: index range out of bounds");
                double s = 0.0;
                for (std::size_t i = r.first; i < last; ++i) s += theta[i] * theta[i];
                return std::log(s);
            },
            [&](const Custom& c) { return c.fn(theta); },
        },
        kind_);
}

double evaluate_function(const FunctionOfInterest& f, std::span<const double> theta) {
    return f(theta);
}

std::vector<FunctionOfInterest> projection_family(const std::vector<std::string>& names) {
    std::vector<FunctionOfInterest> out;
    out.reserve(names.size());
    for (std::size_t d = 0; d < names.size(); ++d)
        out.push_back(FunctionOfInterest::coordinate(d, names[d]));
    return out;
}

}  // namespace bayesbag
