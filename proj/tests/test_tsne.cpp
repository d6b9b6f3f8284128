#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lforge/rng.hpp"
#include "lforge/stats.hpp"

using namespace lforge;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.normal();
        }
    }
    return m;
}

Eigen::MatrixXd three_clusters(std::size_t per_cluster, std::uint64_t seed)
{
    Rng rng(seed);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(3 * per_cluster), 5);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double const centre = 10.0 * static_cast<double>(i % 3);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = (j == 0 ? centre : 0.0) + rng.normal();
        }
    }
    return m;
}

/// Direct transcription of the trustworthiness definition.
double trust_oracle(Eigen::MatrixXd const& x, Eigen::MatrixXd const& y, std::size_t k)
{
    auto const n = static_cast<std::size_t>(x.rows());
    auto order_by = [&](Eigen::MatrixXd const& m, std::size_t i) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                idx.push_back(j);
            }
        }
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return (m.row(Eigen::Index(i)) - m.row(Eigen::Index(a))).squaredNorm() <
                   (m.row(Eigen::Index(i)) - m.row(Eigen::Index(b))).squaredNorm();
        });
        return idx;
    };
    double penalty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto const ox = order_by(x, i);
        auto const oy = order_by(y, i);
        for (std::size_t a = 0; a < k; ++a) {
            auto const pos = static_cast<std::size_t>(std::find(ox.begin(), ox.end(), oy[a]) - ox.begin()) + 1;
            if (pos > k) {
                penalty += static_cast<double>(pos - k);
            }
        }
    }
    double const dn = static_cast<double>(n);
    double const dk = static_cast<double>(k);
    return 1.0 - 2.0 / (dn * dk * (2.0 * dn - 3.0 * dk - 1.0)) * penalty;
}

} // namespace

TEST_SUITE("tsne")
{
    TEST_CASE("affinities are a symmetric distribution")
    {
        auto const x = random_matrix(30, 4, 1);
        auto const p = tsne_affinities(x, 5.0);
        CHECK(p.sum() == doctest::Approx(1.0));
        CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(p.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(p.minCoeff() >= 0.0);
    }

    TEST_CASE("gradient matches central differences")
    {
        auto const x = random_matrix(15, 3, 2);
        auto const p = tsne_affinities(x, 4.0);
        Eigen::MatrixXd y = random_matrix(15, 2, 3);
        auto const g = tsne_gradient(p, y);
        double const h = 1e-6;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            for (Eigen::Index d = 0; d < 2; ++d) {
                Eigen::MatrixXd plus = y;
                Eigen::MatrixXd minus = y;
                plus(i, d) += h;
                minus(i, d) -= h;
                double const fd = (tsne_kl(p, plus) - tsne_kl(p, minus)) / (2.0 * h);
                CHECK(g(i, d) == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }

    TEST_CASE("trustworthiness matches the definition")
    {
        auto const x = random_matrix(40, 6, 4);
        auto const y = random_matrix(40, 2, 5);
        for (std::size_t k : {1u, 5u, 10u, 19u}) {
            CAPTURE(k);
            CHECK(trustworthiness(x, y, k) == doctest::Approx(trust_oracle(x, y, k)).epsilon(1e-12));
        }
        CHECK(trustworthiness(x, x, 10) == 1.0);
        CHECK_THROWS(trustworthiness(x, y, 20));
        CHECK_THROWS(trustworthiness(x, y, 0));
    }

    TEST_CASE("separated clusters stay separated")
    {
        auto const x = three_clusters(30, 6);
        TsneConfig cfg;
        cfg.perplexity = 10.0;
        cfg.iterations = 500;
        cfg.seed = 7;
        auto const r = tsne_embed(x, cfg);
        REQUIRE(r.coordinates.rows() == 90);
        REQUIRE(r.coordinates.cols() == 2);
        CHECK(r.perplexity == 10.0);
        CHECK(r.seed == 7);
        Eigen::MatrixXd const y = r.coordinates;
        CHECK(trustworthiness(x, y, 10) > 0.9);
        // Nearly every nearest embedded neighbour lies in the same cluster.
        std::size_t same = 0;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            Eigen::Index best = -1;
            double bd = INFINITY;
            for (Eigen::Index j = 0; j < y.rows(); ++j) {
                double const d = (y.row(i) - y.row(j)).squaredNorm();
                if (j != i && d < bd) {
                    bd = d;
                    best = j;
                }
            }
            same += best % 3 == i % 3 ? 1 : 0;
        }
        CHECK(same >= 86);
    }

    TEST_CASE("same seed gives the same embedding")
    {
        auto const x = three_clusters(10, 8);
        TsneConfig cfg;
        cfg.perplexity = 5.0;
        cfg.iterations = 200;
        cfg.seed = 11;
        auto const a = tsne_embed(x, cfg);
        auto const b = tsne_embed(x, cfg);
        CHECK(a.coordinates == b.coordinates);
        cfg.seed = 12;
        CHECK(tsne_embed(x, cfg).coordinates != a.coordinates);
    }

    TEST_CASE("too few points for the perplexity")
    {
        auto const x = random_matrix(20, 3, 9);
        TsneConfig cfg;
        cfg.perplexity = 30.0;
        try {
            tsne_embed(x, cfg);
            FAIL("expected an error");
        } catch (std::invalid_argument const& e) {
            std::string const msg = e.what();
            CHECK(msg.find("20 points") != std::string::npos);
            CHECK(msg.find("at most 6") != std::string::npos);
        }
    }
}
