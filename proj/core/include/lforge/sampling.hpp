#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string_view>

#include "lforge/function.hpp"

namespace lforge {

enum class SamplerKind { LatinHypercube, Uniform, Grid };

std::string_view to_string(SamplerKind kind) noexcept;
SamplerKind sampler_kind_from_string(std::string_view name);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::LatinHypercube;
    std::size_t n = 0;          // point count for LHS/uniform
    std::size_t resolution = 0; // points per axis for grid
    std::uint64_t seed = 0;

    void validate() const;
};

class UnsupportedDimension : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One point per axis stratum: axis k of point i is
///   lower_k + (perm_k[i] + u) / n * width_k,  u ~ U[0, 1)
/// with an independent random permutation per axis.
Points latin_hypercube(std::size_t n, Domain const& domain, std::uint64_t seed);

Points uniform(std::size_t n, Domain const& domain, std::uint64_t seed);

/// r x r lattice over a 2-D domain including both bounds, row-major:
/// point i * r + j has x1 at step i and x2 at step j.
Points grid(std::size_t resolution, Domain const& domain);

/// Coordinate of lattice step i of r between lo and hi; mirror-exact for
/// symmetric bounds.
double grid_coordinate(double lo, double hi, std::size_t i, std::size_t r) noexcept;

Points sample(SamplerConfig const& config, Domain const& domain);

/// CSV with header x1..xd.
void write_design_csv(std::ostream& os, Points const& points);

} // namespace lforge
