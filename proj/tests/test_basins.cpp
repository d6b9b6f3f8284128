#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "lforge/basins.hpp"
#include "lforge/expr.hpp"
#include "lforge/sampling.hpp"

using namespace lforge;

namespace {

ObjectiveFunction fn(std::string const& text)
{
    return make_expr_function(parse(text, 2), Domain::box(2, -5, 5));
}

ObjectiveFunction rastrigin()
{
    return ObjectiveFunction("rastrigin", Domain::box(2, -5, 5), [](std::span<const double> x) {
        double s = 20.0;
        for (double v : x) {
            s += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
        }
        return s;
    });
}

std::string const kTwoWell = "min((x1-2)^2, (x1+2)^2) + x2^2";

/// Cells with no strictly lower Moore neighbour, by direct scan.
std::vector<std::size_t> scan_minima(std::vector<double> const& v, std::size_t r)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            bool minimum = true;
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    long const ni = long(i) + di;
                    long const nj = long(j) + dj;
                    if ((di || dj) && ni >= 0 && nj >= 0 && ni < long(r) && nj < long(r) &&
                        v[std::size_t(ni) * r + std::size_t(nj)] < v[i * r + j]) {
                        minimum = false;
                    }
                }
            }
            if (minimum) {
                out.push_back(i * r + j);
            }
        }
    }
    return out;
}

void check_invariants(BasinMap const& map)
{
    std::size_t const cells = map.cells();
    REQUIRE(map.attractor_of.size() == cells);
    CHECK(std::accumulate(map.cell_counts.begin(), map.cell_counts.end(), std::size_t{0}) == cells);
    CHECK(std::accumulate(map.basin_sizes.begin(), map.basin_sizes.end(), 0.0) ==
          doctest::Approx(static_cast<double>(cells)));
    auto const minima = scan_minima(map.values, map.resolution);
    std::vector<std::size_t> attractor_cells;
    for (auto const& a : map.attractors) {
        attractor_cells.push_back(a.cell);
        CHECK(map.values[a.cell] == a.value);
    }
    CHECK(attractor_cells == minima);
    for (std::size_t c = 0; c < cells; ++c) {
        CHECK(map.values[c] >= map.attractors[map.attractor_of[c]].value);
    }
}

} // namespace

TEST_SUITE("basins")
{
    TEST_CASE("sphere has one basin at the centre")
    {
        auto const map = assign_basins(fn("x1^2 + x2^2"), 101);
        REQUIRE(count_basins(map) == 1);
        CHECK(map.attractors[0].cell == 50 * 101 + 50);
        CHECK(map.attractors[0].x == 0.0);
        CHECK(map.attractors[0].y == 0.0);
        check_invariants(map);
        CHECK_THROWS_AS(optima_contrast(map, fn("x1^2 + x2^2")), UndefinedMetric);
        CHECK_THROWS_AS(basin_size_ratio(map), UndefinedMetric);
    }

    TEST_CASE("two-well function")
    {
        for (std::size_t r : {101u, 201u, 401u}) {
            auto const map = assign_basins(fn(kTwoWell), r);
            CAPTURE(r);
            CHECK(count_basins(map) == 2);
            CHECK(basin_size_ratio(map) == 1.0);
            if (r == 201) {
                check_invariants(map);
            }
        }
    }

    TEST_CASE("rastrigin lattice")
    {
        auto const map = assign_basins(rastrigin(), 201);
        CHECK(count_basins(map) == 121);
        check_invariants(map);
    }

    TEST_CASE("assignment is deterministic and independent of workers")
    {
        auto const f = fn("sin(3*x1) * cos(2*x2) + 0.1 * x1");
        auto const a = assign_basins(f, 81, 1);
        auto const b = assign_basins(f, 81, 3);
        CHECK(a.attractor_of == b.attractor_of);
        CHECK(a.basin_sizes == b.basin_sizes);
        check_invariants(a);
    }

    TEST_CASE("plateaus register as optima")
    {
        auto const map = assign_basins(fn("floor(x1) + floor(x2)"), 51);
        CHECK(count_basins(map) > 1);
        check_invariants(map);
    }

    TEST_CASE("local minimum helper matches the scan")
    {
        auto const map = assign_basins(fn("sin(2*x1) + cos(3*x2) + 0.05*x1*x2"), 61);
        CHECK(local_minimum_cells(map.values, 61) == scan_minima(map.values, 61));
    }

    TEST_CASE("optima contrast arithmetic")
    {
        BasinMap map;
        map.resolution = 3;
        map.domain = Domain::box(2, -5, 5);
        map.attractors = {{0, 0, 0, 1.0}, {8, 0, 0, 1.5}};
        // Shifted optima {0, 0.5}; a constant 3 gives a normalizing mean m = 2.
        auto const flat = fn("3");
        CHECK(optima_contrast(map, flat, 100, 0) == doctest::Approx(0.25 / 2.0));
        map.attractors = {{0, 0, 0, 1.0}, {8, 0, 0, 1.0}};
        CHECK(optima_contrast(map, flat, 100, 0) == 0.0);
    }

    TEST_CASE("basin size ratio arithmetic and degenerate maps")
    {
        BasinMap map;
        map.resolution = 20;
        map.attractors.resize(2);
        map.basin_sizes = {300, 100};
        CHECK(basin_size_ratio(map) == 3.0);

        BasinMap all;
        all.resolution = 2;
        all.attractors.resize(4);
        all.basin_sizes = {1, 1, 1, 1};
        CHECK_THROWS_AS(basin_size_ratio(all), UndefinedMetric);
    }

    TEST_CASE("input validation and csv")
    {
        auto const f3 = make_expr_function(parse("x1", 1), Domain::box(3, -5, 5));
        CHECK_THROWS(assign_basins(f3, 11));
        CHECK_THROWS(assign_basins(fn("x1"), 2));
        auto const map = assign_basins(fn("x1^2 + x2^2"), 3);
        std::ostringstream os;
        write_basin_csv(os, map);
        CHECK(os.str().rfind("x,y,f,attractor\n-5,-5,50,0\n", 0) == 0);
    }
}
