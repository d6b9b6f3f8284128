#include <doctest.h>

#include <cmath>
#include <vector>

#include "lforge/expr.hpp"
#include "lforge/function.hpp"
#include "lforge/rng.hpp"
#include "lforge/sampling.hpp"

using namespace lforge;

namespace {

ObjectiveFunction sphere2()
{
    return make_expr_function(parse("x1^2+x2^2", 2), Domain::box(2, -5, 5), "sphere");
}

} // namespace

TEST_SUITE("function")
{
    TEST_CASE("evaluate sphere")
    {
        auto const f = sphere2();
        std::vector<double> x0{0, 0};
        std::vector<double> x1{1, 2};
        CHECK(evaluate(f, x0) == 0.0);
        CHECK(evaluate(f, x1) == 5.0);
    }

    TEST_CASE("points outside the box are rejected")
    {
        auto const f = sphere2();
        std::vector<double> out{6, 0};
        std::vector<double> short_point{1};
        CHECK_THROWS_AS(evaluate(f, out), DomainError);
        CHECK_THROWS_AS(evaluate(f, short_point), DomainError);
    }

    TEST_CASE("batch keeps order and reports the bad row")
    {
        auto const f = sphere2();
        Points p(2, 2);
        p << 0, 0, 1, 0;
        CHECK(evaluate_batch(f, p) == std::vector<double>{0, 1});
        CHECK(evaluate_batch(f, Points(0, 2)).empty());

        Points bad(3, 2);
        bad << 0, 0, 1, 1, 7, 0;
        try {
            evaluate_batch(f, bad);
            FAIL("expected DomainError");
        } catch (DomainError const& e) {
            REQUIRE(e.index().has_value());
            CHECK(*e.index() == 2);
        }
    }

    TEST_CASE("batch equals element-wise evaluation")
    {
        auto const f = make_expr_function(parse("sin(x1)*x2 + exp(x2/3)", 2), Domain::box(2, -5, 5));
        Points const p = uniform(100, f.domain(), 17);
        auto const batch = evaluate_batch(f, p);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            CHECK(batch[static_cast<std::size_t>(i)] == evaluate(f, row_span(p, i)));
        }
    }

    TEST_CASE("evaluation is pure")
    {
        auto const f = make_expr_function(parse("tanh(x1*x2) - log(abs(x1))", 2), Domain::box(2, -5, 5));
        std::vector<double> x{0.3, -1.7};
        double const a = evaluate(f, x);
        for (int k = 0; k < 10; ++k) {
            CHECK(evaluate(f, x) == a);
        }
    }

    TEST_CASE("normalize_objective")
    {
        std::vector<double> v{2, 4, 6};
        auto const n = normalize_objective(v);
        CHECK(n.values == std::vector<double>{0, 0.5, 1});
        CHECK_FALSE(n.degenerate);

        std::vector<double> one{7};
        auto const c = normalize_objective(one);
        CHECK(c.values == std::vector<double>{0.5});
        CHECK(c.degenerate);

        auto const twice = normalize_objective(n.values);
        CHECK(twice.values == n.values);
    }

    TEST_CASE("normalize_objective is monotone and bounded")
    {
        Rng rng(5);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> v(20);
            for (auto& x : v) {
                x = rng.normal(0, 100);
            }
            auto const n = normalize_objective(v);
            for (std::size_t i = 0; i < v.size(); ++i) {
                CHECK(n.values[i] >= 0.0);
                CHECK(n.values[i] <= 1.0);
                for (std::size_t j = 0; j < v.size(); ++j) {
                    if (v[i] < v[j]) {
                        CHECK(n.values[i] <= n.values[j]);
                    }
                }
            }
        }
    }

    TEST_CASE("domain validation")
    {
        CHECK_THROWS(Domain{{0}, {0}}.validate());
        CHECK_THROWS(Domain{{}, {}}.validate());
        CHECK_NOTHROW(Domain::box(3, -1, 1).validate());
    }
}
