#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "lforge/sampling.hpp"

using namespace lforge;

TEST_SUITE("sampling")
{
    TEST_CASE("latin hypercube size and stratification")
    {
        auto const domain = Domain::box(2, -5, 5);
        Points const p = latin_hypercube(500, domain, 3);
        REQUIRE(p.rows() == 500);
        REQUIRE(p.cols() == 2);
        for (Eigen::Index axis = 0; axis < 2; ++axis) {
            std::vector<int> hits(500, 0);
            for (Eigen::Index i = 0; i < p.rows(); ++i) {
                double const u = (p(i, axis) + 5.0) / 10.0;
                auto const bin = static_cast<std::size_t>(std::floor(u * 500.0));
                REQUIRE(bin < 500);
                ++hits[bin];
            }
            CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
        }
    }

    TEST_CASE("designs are deterministic per seed")
    {
        auto const domain = Domain::box(3, 0, 1);
        CHECK(latin_hypercube(50, domain, 9) == latin_hypercube(50, domain, 9));
        CHECK(latin_hypercube(50, domain, 9) != latin_hypercube(50, domain, 10));
        CHECK(uniform(50, domain, 9) == uniform(50, domain, 9));
        CHECK(uniform(50, domain, 9) != uniform(50, domain, 10));
    }

    TEST_CASE("uniform stays in the box with a centred mean")
    {
        auto const domain = Domain::box(2, -5, 5);
        Points const p = uniform(10000, domain, 21);
        CHECK(p.minCoeff() >= -5.0);
        CHECK(p.maxCoeff() <= 5.0);
        // Standard error of the mean is 10/sqrt(12)/100 ~= 0.029.
        CHECK(std::fabs(p.col(0).mean()) < 0.2);
        CHECK(std::fabs(p.col(1).mean()) < 0.2);
    }

    TEST_CASE("grid")
    {
        Points const g = grid(3, Domain::box(2, 0, 1));
        REQUIRE(g.rows() == 9);
        CHECK(g(0, 0) == 0.0);
        CHECK(g(0, 1) == 0.0);
        CHECK(g(8, 0) == 1.0);
        CHECK(g(8, 1) == 1.0);
        // Row-major: point i*r + j has x1 at step i, x2 at step j.
        CHECK(g(1, 0) == 0.0);
        CHECK(g(1, 1) == 0.5);
        CHECK(grid(201, Domain::box(2, -5, 5)).rows() == 40401);
        CHECK_THROWS_AS(grid(5, Domain::box(5, -5, 5)), UnsupportedDimension);
    }

    TEST_CASE("grid coordinates mirror exactly on symmetric bounds")
    {
        for (std::size_t i = 0; i < 201; ++i) {
            CHECK(grid_coordinate(-5, 5, i, 201) == -grid_coordinate(-5, 5, 200 - i, 201));
        }
        CHECK(grid_coordinate(-5, 5, 100, 201) == 0.0);
    }

    TEST_CASE("sampler config validation")
    {
        SamplerConfig c;
        c.n = 0;
        CHECK_THROWS(c.validate());
        c.kind = SamplerKind::Grid;
        c.resolution = 1;
        CHECK_THROWS(c.validate());
        CHECK(sampler_kind_from_string("latin_hypercube") == SamplerKind::LatinHypercube);
        CHECK_THROWS(sampler_kind_from_string("sobol"));
    }

    TEST_CASE("design csv")
    {
        Points p(1, 2);
        p << 0.5, -1;
        std::ostringstream os;
        write_design_csv(os, p);
        CHECK(os.str() == "x1,x2\n0.5,-1\n");
    }
}
