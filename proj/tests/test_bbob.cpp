#include <doctest.h>

#include <cmath>
#include <vector>

#include "lforge/bbob.hpp"

using namespace lforge;

TEST_SUITE("bbob")
{
    TEST_CASE("optimum is consistent for every function")
    {
        for (std::size_t dim : {2u, 5u, 10u}) {
            for (int fid = 1; fid <= bbob::kFunctionCount; ++fid) {
                for (int iid = 1; iid <= 5; ++iid) {
                    auto const p = bbob::instantiate(fid, iid, dim);
                    auto const [x, fopt] = bbob::optimum(p.instance);
                    CAPTURE(fid);
                    CAPTURE(iid);
                    CHECK(std::isfinite(fopt));
                    CHECK(std::fabs(p.function(x) - fopt) <= 1e-9);
                    // The linear slope puts its optimum on the boundary.
                    double const bound = fid == 5 ? bbob::kBound : 4.0;
                    for (double xi : p.instance.x_opt) {
                        CHECK(std::fabs(xi) <= bound + 1e-12);
                    }
                }
            }
        }
    }

    TEST_CASE("sphere identity")
    {
        auto const p = bbob::instantiate(1, 3, 4);
        auto x = p.instance.x_opt;
        x[2] += 1.0;
        CHECK(p.function(x) == doctest::Approx(p.instance.f_opt + 1.0).epsilon(1e-12));
    }

    TEST_CASE("instances are seed-separated and deterministic")
    {
        auto const a = bbob::instantiate(3, 1, 2);
        auto const b = bbob::instantiate(3, 2, 2);
        CHECK(a.instance.x_opt != b.instance.x_opt);
        auto const a2 = bbob::instantiate(3, 1, 2);
        CHECK(a.instance.x_opt == a2.instance.x_opt);
        CHECK(a.instance.f_opt == a2.instance.f_opt);
        std::vector<double> probe{1.25, -3.5};
        CHECK(a.function(probe) == a2.function(probe));
    }

    TEST_CASE("optimum is a minimum among random probes")
    {
        for (int fid = 1; fid <= bbob::kFunctionCount; ++fid) {
            auto const p = bbob::instantiate(fid, 1, 2);
            double const fopt = p.instance.f_opt;
            for (int k = 0; k < 200; ++k) {
                double const t = k * 0.05;
                std::vector<double> x{-5.0 + std::fmod(t * 7.3, 10.0), -5.0 + std::fmod(t * 3.1, 10.0)};
                CAPTURE(fid);
                CHECK(p.function(x) >= fopt - 1e-9);
            }
        }
    }

    TEST_CASE("invalid ids")
    {
        CHECK_THROWS_AS(bbob::instantiate(0, 1, 2), std::out_of_range);
        CHECK_THROWS_AS(bbob::instantiate(25, 1, 2), std::out_of_range);
        CHECK_THROWS_AS(bbob::instantiate(1, 1, 0), std::out_of_range);
        CHECK(bbob::function_name(3) == "rastrigin_separable");
    }
}
