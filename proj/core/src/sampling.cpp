#include "lforge/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lforge/rng.hpp"

namespace lforge {

std::string_view to_string(SamplerKind kind) noexcept
{
    switch (kind) {
    case SamplerKind::LatinHypercube: return "latin_hypercube";
    case SamplerKind::Uniform: return "uniform";
    case SamplerKind::Grid: return "grid";
    }
    return "?";
}

SamplerKind sampler_kind_from_string(std::string_view name)
{
    for (auto k : {SamplerKind::LatinHypercube, SamplerKind::Uniform, SamplerKind::Grid}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument("unknown sampler kind '" + std::string(name) + "'");
}

void SamplerConfig::validate() const
{
    if (kind == SamplerKind::Grid) {
        if (resolution < 2) {
            throw std::invalid_argument("grid resolution must be >= 2");
        }
    } else if (n < 1) {
        throw std::invalid_argument("sample size must be >= 1");
    }
}

Points latin_hypercube(std::size_t n, Domain const& domain, std::uint64_t seed)
{
    domain.validate();
    if (n < 1) {
        throw std::invalid_argument("latin_hypercube needs n >= 1");
    }
    std::size_t const d = domain.dim();
    Points points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Rng rng(seed);
    std::vector<std::size_t> perm(n);
    double const inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm.begin(), perm.end());
        double const lo = domain.lower[k];
        double const w = domain.width(k);
        for (std::size_t i = 0; i < n; ++i) {
            double const u = rng.uniform01();
            double v = lo + (static_cast<double>(perm[i]) + u) * inv_n * w;
            points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::min(v, domain.upper[k]);
        }
    }
    return points;
}

Points uniform(std::size_t n, Domain const& domain, std::uint64_t seed)
{
    domain.validate();
    if (n < 1) {
        throw std::invalid_argument("uniform needs n >= 1");
    }
    std::size_t const d = domain.dim();
    Points points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                domain.lower[k] + rng.uniform01() * domain.width(k);
        }
    }
    return points;
}

double grid_coordinate(double lo, double hi, std::size_t i, std::size_t r) noexcept
{
    auto const steps = static_cast<double>(r - 1);
    auto const a = static_cast<double>(r - 1 - i);
    auto const b = static_cast<double>(i);
    return (a * lo + b * hi) / steps;
}

Points grid(std::size_t resolution, Domain const& domain)
{
    domain.validate();
    if (domain.dim() != 2) {
        throw UnsupportedDimension("grid sampling supports only 2-D domains, got dimension " +
                                   std::to_string(domain.dim()));
    }
    if (resolution < 2) {
        throw std::invalid_argument("grid resolution must be >= 2");
    }
    auto const r = resolution;
    Points points(static_cast<Eigen::Index>(r * r), 2);
    for (std::size_t i = 0; i < r; ++i) {
        double const x1 = grid_coordinate(domain.lower[0], domain.upper[0], i, r);
        for (std::size_t j = 0; j < r; ++j) {
            auto const row = static_cast<Eigen::Index>(i * r + j);
            points(row, 0) = x1;
            points(row, 1) = grid_coordinate(domain.lower[1], domain.upper[1], j, r);
        }
    }
    return points;
}

Points sample(SamplerConfig const& config, Domain const& domain)
{
    config.validate();
    switch (config.kind) {
    case SamplerKind::LatinHypercube: return latin_hypercube(config.n, domain, config.seed);
    case SamplerKind::Uniform: return uniform(config.n, domain, config.seed);
    case SamplerKind::Grid: return grid(config.resolution, domain);
    }
    throw std::invalid_argument("unknown sampler kind");
}

void write_design_csv(std::ostream& os, Points const& points)
{
    auto const old_precision = os.precision(17);
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        os << (k ? "," : "") << 'x' << (k + 1);
    }
    os << '\n';
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index k = 0; k < points.cols(); ++k) {
            os << (k ? "," : "") << points(i, k);
        }
        os << '\n';
    }
    os.precision(old_precision);
}

} // namespace lforge
