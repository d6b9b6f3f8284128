#include "lforge/function.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lforge {

Domain Domain::box(std::size_t dim, double lo, double hi)
{
    Domain d{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
    d.validate();
    return d;
}

bool Domain::contains(std::span<const double> x) const noexcept
{
    if (x.size() != dim()) {
        return false;
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] >= lower[k] && x[k] <= upper[k])) {
            return false;
        }
    }
    return true;
}

void Domain::validate() const
{
    if (lower.empty()) {
        throw std::invalid_argument("domain must have dimension >= 1");
    }
    if (lower.size() != upper.size()) {
        throw std::invalid_argument("domain bounds have different lengths");
    }
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (!(lower[k] < upper[k]) || !std::isfinite(lower[k]) || !std::isfinite(upper[k])) {
            std::ostringstream os;
            os << "invalid bounds on axis " << k << ": [" << lower[k] << ", " << upper[k] << "]";
            throw std::invalid_argument(os.str());
        }
    }
}

ObjectiveFunction::ObjectiveFunction(std::string id, Domain domain, Evaluator evaluator)
    : id_(std::move(id)), domain_(std::move(domain)),
      evaluator_(std::make_shared<const Evaluator>(std::move(evaluator)))
{
    domain_.validate();
    if (!*evaluator_) {
        throw std::invalid_argument("objective function '" + id_ + "' has no evaluator");
    }
}

namespace {

double evaluate_at(ObjectiveFunction const& f, std::span<const double> x, std::optional<std::size_t> index)
{
    if (x.size() != f.dim()) {
        std::ostringstream os;
        os << "point has dimension " << x.size() << ", function '" << f.id() << "' expects " << f.dim();
        throw DomainError(os.str(), index);
    }
    if (!f.domain().contains(x)) {
        std::ostringstream os;
        os << "point outside domain of '" << f.id() << "'";
        if (index) {
            os << " at index " << *index;
        }
        throw DomainError(os.str(), index);
    }
    double const y = f(x);
    if (!std::isfinite(y)) {
        std::ostringstream os;
        os << "non-finite value from '" << f.id() << "'";
        if (index) {
            os << " at index " << *index;
        }
        throw DomainError(os.str(), index);
    }
    return y;
}

} // namespace

double evaluate(ObjectiveFunction const& f, std::span<const double> x)
{
    return evaluate_at(f, x, std::nullopt);
}

std::vector<double> evaluate_batch(ObjectiveFunction const& f, Points const& points)
{
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(points.rows()));
    if (points.rows() > 0 && static_cast<std::size_t>(points.cols()) != f.dim()) {
        throw DomainError("batch dimension does not match function '" + f.id() + "'", 0);
    }
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        values.push_back(evaluate_at(f, row_span(points, i), static_cast<std::size_t>(i)));
    }
    return values;
}

NormalizedValues normalize_objective(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("normalize_objective needs at least one value");
    }
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double const lo = *lo_it;
    double const hi = *hi_it;
    NormalizedValues out;
    out.values.resize(values.size());
    if (!(hi > lo)) {
        std::fill(out.values.begin(), out.values.end(), 0.5);
        out.degenerate = true;
        return out;
    }
    double const range = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.values[i] = std::clamp((values[i] - lo) / range, 0.0, 1.0);
    }
    return out;
}

SampleSet sample_function(ObjectiveFunction const& f, Points points, std::uint64_t seed)
{
    SampleSet s;
    s.values = evaluate_batch(f, points);
    s.points = std::move(points);
    s.seed = seed;
    return s;
}

} // namespace lforge
