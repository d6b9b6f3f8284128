#include "lforge/basins.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "lforge/rng.hpp"
#include "lforge/sampling.hpp"
#include "lforge/util.hpp"

namespace lforge {

namespace {

constexpr std::uint32_t kUnassigned = 0xffffffffU;

/// Calls fn(neighbour) for each Moore neighbour of `cell`, in row-major order.
template <class Fn>
void for_each_neighbour(std::size_t cell, std::size_t r, Fn&& fn)
{
    std::size_t const i = cell / r;
    std::size_t const j = cell % r;
    for (std::size_t di = 0; di < 3; ++di) {
        if ((i == 0 && di == 0) || (i + 1 == r && di == 2)) {
            continue;
        }
        for (std::size_t dj = 0; dj < 3; ++dj) {
            if ((j == 0 && dj == 0) || (j + 1 == r && dj == 2) || (di == 1 && dj == 1)) {
                continue;
            }
            fn((i + di - 1) * r + (j + dj - 1));
        }
    }
}

} // namespace

std::vector<std::size_t> local_minimum_cells(std::vector<double> const& values, std::size_t resolution)
{
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < values.size(); ++c) {
        bool better = false;
        for_each_neighbour(c, resolution, [&](std::size_t nb) { better = better || values[nb] < values[c]; });
        if (!better) {
            out.push_back(c);
        }
    }
    return out;
}

BasinMap assign_basins(ObjectiveFunction const& f, std::size_t resolution, std::size_t workers)
{
    if (f.dim() != 2) {
        throw std::invalid_argument("assign_basins needs a two-dimensional function, got dimension " +
                                    std::to_string(f.dim()));
    }
    if (resolution < 3) {
        throw std::invalid_argument("assign_basins needs a grid resolution of at least 3");
    }
    std::size_t const r = resolution;
    std::size_t const cells = r * r;
    BasinMap map;
    map.resolution = r;
    map.domain = f.domain();
    Points const pts = grid(r, f.domain());
    map.values.resize(cells);
    parallel_for(cells, workers, [&](std::size_t c) { map.values[c] = evaluate(f, row_span(pts, static_cast<Eigen::Index>(c))); });
    auto const& v = map.values;

    // Steepest strictly-improving neighbour of each cell, or itself.
    std::vector<std::size_t> next(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        std::size_t best = c;
        for_each_neighbour(c, r, [&](std::size_t nb) {
            if (v[nb] < v[best]) {
                best = nb;
            }
        });
        next[c] = best;
    }

    map.attractor_of.assign(cells, kUnassigned);
    for (std::size_t c = 0; c < cells; ++c) {
        if (next[c] == c) {
            map.attractor_of[c] = static_cast<std::uint32_t>(map.attractors.size());
            map.attractors.push_back({c, pts(static_cast<Eigen::Index>(c), 0), pts(static_cast<Eigen::Index>(c), 1), v[c]});
        }
    }
    // Path memoization: follow until an assigned cell, then label the path.
    std::vector<std::size_t> path;
    for (std::size_t c = 0; c < cells; ++c) {
        std::size_t cur = c;
        path.clear();
        while (map.attractor_of[cur] == kUnassigned) {
            path.push_back(cur);
            cur = next[cur];
        }
        for (std::size_t p : path) {
            map.attractor_of[p] = map.attractor_of[cur];
        }
    }
    map.cell_counts.assign(map.attractors.size(), 0);
    for (auto a : map.attractor_of) {
        ++map.cell_counts[a];
    }

    // Shared-mass basin sizes: process cells from worst to best, passing each
    // cell's mass in equal parts to all equally best improving neighbours.
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    std::vector<double> mass(cells, 1.0);
    std::vector<std::size_t> ties;
    for (std::size_t c : order) {
        if (next[c] == c) {
            continue;
        }
        double const best = v[next[c]];
        ties.clear();
        for_each_neighbour(c, r, [&](std::size_t nb) {
            if (v[nb] == best) {
                ties.push_back(nb);
            }
        });
        double const share = mass[c] / static_cast<double>(ties.size());
        for (std::size_t nb : ties) {
            mass[nb] += share;
        }
        mass[c] = 0.0;
    }
    map.basin_sizes.reserve(map.attractors.size());
    for (auto const& a : map.attractors) {
        map.basin_sizes.push_back(mass[a.cell]);
    }
    return map;
}

std::size_t count_basins(BasinMap const& map) noexcept
{
    return map.attractors.size();
}

double optima_contrast(BasinMap const& map, ObjectiveFunction const& f, std::size_t samples, std::uint64_t seed)
{
    if (map.attractors.size() < 2) {
        throw UndefinedMetric("optima contrast is undefined for a unimodal landscape");
    }
    if (samples == 0) {
        throw std::invalid_argument("optima_contrast needs a positive sample count");
    }
    double best = map.attractors.front().value;
    for (auto const& a : map.attractors) {
        best = std::min(best, a.value);
    }
    Points const pts = uniform(samples, f.domain(), seed);
    auto const sample_values = evaluate_batch(f, pts);
    double norm = 0.0;
    for (double y : sample_values) {
        norm += y - best;
    }
    norm /= static_cast<double>(samples);
    if (!(norm > 0.0)) {
        throw UndefinedMetric("optima contrast is undefined: mean shifted fitness is not positive");
    }
    double sum = 0.0;
    for (auto const& a : map.attractors) {
        sum += (a.value - best) / norm;
    }
    return sum / static_cast<double>(map.attractors.size());
}

double basin_size_ratio(BasinMap const& map)
{
    if (map.attractors.size() < 2) {
        throw UndefinedMetric("basin size ratio is undefined for a unimodal landscape");
    }
    if (map.attractors.size() == map.cells()) {
        throw UndefinedMetric("basin size ratio is undefined: every cell is its own optimum");
    }
    auto [lo, hi] = std::minmax_element(map.basin_sizes.begin(), map.basin_sizes.end());
    return *hi / *lo;
}

void write_basin_csv(std::ostream& os, BasinMap const& map)
{
    os << "x,y,f,attractor\n";
    std::size_t const r = map.resolution;
    for (std::size_t c = 0; c < map.cells(); ++c) {
        double const x = grid_coordinate(map.domain.lower[0], map.domain.upper[0], c / r, r);
        double const y = grid_coordinate(map.domain.lower[1], map.domain.upper[1], c % r, r);
        os << format_double(x) << ',' << format_double(y) << ',' << format_double(map.values[c]) << ','
           << map.attractor_of[c] << '\n';
    }
}

} // namespace lforge
