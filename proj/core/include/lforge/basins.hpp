#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "lforge/function.hpp"

namespace lforge {

/// Raised when a basin metric is not defined for a map (unimodal, or every
/// cell its own optimum).
class UndefinedMetric : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Attractor {
    std::size_t cell = 0;
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
};

/// Grid steepest-descent partition of a 2-D function. Cell index is
/// i * r + j with x1 at step i and x2 at step j.
struct BasinMap {
    std::size_t resolution = 0;
    Domain domain;
    std::vector<double> values;
    /// Attractor index (into `attractors`) reached from each cell.
    std::vector<std::uint32_t> attractor_of;
    /// Attractors in row-major order of their cells.
    std::vector<Attractor> attractors;
    /// Cells per attractor under `attractor_of`.
    std::vector<std::size_t> cell_counts;
    /// Basin sizes where a cell whose best neighbours tie shares its mass
    /// equally among them. Sums to r * r.
    std::vector<double> basin_sizes;

    std::size_t cells() const noexcept { return resolution * resolution; }
};

/// Evaluates f on an r x r grid and follows the strictly best Moore
/// neighbour from every cell until none improves. Ties between equally good
/// neighbours go to the lowest row-major index. Requires a 2-D domain and
/// r >= 3.
BasinMap assign_basins(ObjectiveFunction const& f, std::size_t resolution, std::size_t workers = 1);

/// Cells with no strictly better Moore neighbour, in row-major order.
std::vector<std::size_t> local_minimum_cells(std::vector<double> const& values, std::size_t resolution);

std::size_t count_basins(BasinMap const& map) noexcept;

/// Mean attractor value after shifting the best attractor to 0, divided by
/// the mean shifted value over `samples` uniform points.
double optima_contrast(BasinMap const& map, ObjectiveFunction const& f, std::size_t samples = 10000,
                       std::uint64_t seed = 0);

/// Largest over smallest basin size.
double basin_size_ratio(BasinMap const& map);

/// CSV with header x,y,f,attractor.
void write_basin_csv(std::ostream& os, BasinMap const& map);

} // namespace lforge
