#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lforge {

/// Row-major point matrix; one sample point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(Points const& points, Eigen::Index row)
{
    return {points.data() + row * points.cols(), static_cast<std::size_t>(points.cols())};
}

/// Raised when a point lies outside the function's box or a value is not finite.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(std::string const& what, std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(what), index_(index)
    {
    }

    /// Offending position within a batch, when raised from evaluate_batch.
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    std::optional<std::size_t> index_;
};

/// Axis-aligned box [lower, upper] in R^d.
struct Domain {
    std::vector<double> lower;
    std::vector<double> upper;

    static Domain box(std::size_t dim, double lo, double hi);

    std::size_t dim() const noexcept { return lower.size(); }
    double width(std::size_t axis) const { return upper[axis] - lower[axis]; }
    bool contains(std::span<const double> x) const noexcept;

    /// Throws std::invalid_argument unless dim >= 1 and lower < upper on every axis.
    void validate() const;

    bool operator==(Domain const&) const = default;
};

using Evaluator = std::function<double(std::span<const double>)>;

/// Immutable black-box objective over a box domain. Copies share the evaluator.
class ObjectiveFunction {
public:
    ObjectiveFunction(std::string id, Domain domain, Evaluator evaluator);

    std::string const& id() const noexcept { return id_; }
    Domain const& domain() const noexcept { return domain_; }
    std::size_t dim() const noexcept { return domain_.dim(); }

    /// Unchecked evaluation; callers guarantee the point is in the domain.
    double operator()(std::span<const double> x) const { return (*evaluator_)(x); }

private:
    std::string id_;
    Domain domain_;
    std::shared_ptr<const Evaluator> evaluator_;
};

/// Checked evaluation: throws DomainError for a point outside the box, a
/// dimension mismatch, or a non-finite result.
double evaluate(ObjectiveFunction const& f, std::span<const double> x);

/// Evaluates every row of `points`, preserving order. The DomainError raised
/// for a bad row carries its index.
std::vector<double> evaluate_batch(ObjectiveFunction const& f, Points const& points);

struct NormalizedValues {
    std::vector<double> values;
    /// Set when max == min; all values are then 0.5.
    bool degenerate = false;
};

/// Affine rescale of observed min to 0 and max to 1.
NormalizedValues normalize_objective(std::span<const double> values);

/// Points with their objective values and the seed of the design.
struct SampleSet {
    Points points;
    std::vector<double> values;
    std::uint64_t seed = 0;
};

SampleSet sample_function(ObjectiveFunction const& f, Points points, std::uint64_t seed);

} // namespace lforge
