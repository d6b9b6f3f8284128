#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lforge/rng.hpp"
#include "lforge/stats.hpp"

namespace lforge {

namespace {

Eigen::MatrixXd squared_distances(Eigen::MatrixXd const& x)
{
    Eigen::VectorXd const norms = x.rowwise().squaredNorm();
    Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + norms;
    d.rowwise() += norms.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    return d;
}

/// Student-t kernel values (1 + |yi - yj|^2)^-1 with a zero diagonal.
Eigen::MatrixXd student_kernel(Eigen::MatrixXd const& y)
{
    std::size_t const n = static_cast<std::size_t>(y.rows());
    Eigen::MatrixXd num(n, n);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        num(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < y.rows(); ++j) {
            double const v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            num(i, j) = v;
            num(j, i) = v;
        }
    }
    return num;
}

} // namespace

Eigen::MatrixXd tsne_affinities(Eigen::MatrixXd const& data, double perplexity)
{
    auto const n = data.rows();
    if (n < 2) {
        throw std::invalid_argument("tsne needs at least two points");
    }
    Eigen::MatrixXd const d = squared_distances(data);
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
    double const target = std::log(perplexity);
    for (Eigen::Index i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) {
                dmin = std::min(dmin, d(i, j));
            }
        }
        double beta = 1.0;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0;
            double weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                double const w = std::exp(-beta * (d(i, j) - dmin));
                cond(i, j) = w;
                sum += w;
                weighted += w * (d(i, j) - dmin);
            }
            // Shannon entropy (nats) of the conditional distribution.
            double const entropy = std::log(sum) + beta * weighted / sum;
            for (Eigen::Index j = 0; j < n; ++j) {
                cond(i, j) /= sum;
            }
            double const diff = entropy - target;
            if (std::fabs(diff) < 1e-5) {
                break;
            }
            if (diff > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        cond(i, i) = 0.0;
    }
    Eigen::MatrixXd p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
    p = p.cwiseMax(1e-12);
    p.diagonal().setZero();
    return p;
}

double tsne_kl(Eigen::MatrixXd const& p, Eigen::MatrixXd const& y)
{
    Eigen::MatrixXd const num = student_kernel(y);
    double const z = num.sum();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (i != j && p(i, j) > 0.0) {
                kl += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
            }
        }
    }
    return kl;
}

Eigen::MatrixXd tsne_gradient(Eigen::MatrixXd const& p, Eigen::MatrixXd const& y)
{
    Eigen::MatrixXd const num = student_kernel(y);
    double const z = num.sum();
    Eigen::MatrixXd const w = (p - num / z).cwiseProduct(num);
    // grad_i = 4 * sum_j w_ij (y_i - y_j)
    Eigen::VectorXd const row_sums = w.rowwise().sum();
    return 4.0 * (row_sums.asDiagonal() * y - w * y);
}

EmbeddingResult tsne_embed(Eigen::MatrixXd const& data, TsneConfig const& config)
{
    auto const n = data.rows();
    if (!(config.perplexity > 0.0)) {
        throw std::invalid_argument("tsne perplexity must be positive");
    }
    if (3.0 * config.perplexity > static_cast<double>(n - 1)) {
        auto const suggested = std::max<Eigen::Index>(1, (n - 1) / 3);
        throw std::invalid_argument("tsne: " + std::to_string(n) + " points are too few for perplexity " +
                                    std::to_string(config.perplexity) + "; use a perplexity of at most " +
                                    std::to_string(suggested));
    }
    Eigen::MatrixXd const p = tsne_affinities(data, config.perplexity);

    Rng rng(derive_seed(config.seed, {0x75e}));
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) = 1e-2 * rng.normal();
        y(i, 1) = 1e-2 * rng.normal();
    }
    Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    Eigen::MatrixXd const p_exaggerated = p * config.exaggeration;
    for (std::size_t it = 0; it < config.iterations; ++it) {
        bool const early = it < config.exaggeration_iterations;
        Eigen::MatrixXd const grad = tsne_gradient(early ? p_exaggerated : p, y);
        double const momentum = it < config.momentum_switch ? config.momentum_initial : config.momentum_final;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < 2; ++c) {
                bool const same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
                gains(i, c) = same_sign ? std::max(0.01, gains(i, c) * 0.8) : gains(i, c) + 0.2;
                update(i, c) = momentum * update(i, c) - config.learning_rate * gains(i, c) * grad(i, c);
            }
        }
        y += update;
        y.rowwise() -= y.colwise().mean();
    }
    EmbeddingResult out;
    out.coordinates = y;
    out.perplexity = config.perplexity;
    out.seed = config.seed;
    out.kl_divergence = tsne_kl(p, y);
    return out;
}

double trustworthiness(Eigen::MatrixXd const& data, Eigen::MatrixXd const& embedding, std::size_t k)
{
    auto const n = static_cast<std::size_t>(data.rows());
    if (static_cast<std::size_t>(embedding.rows()) != n) {
        throw std::invalid_argument("trustworthiness: data and embedding differ in row count");
    }
    if (k < 1 || 2 * k >= n) {
        throw std::invalid_argument("trustworthiness needs 1 <= k < n/2 (k=" + std::to_string(k) +
                                    ", n=" + std::to_string(n) + ")");
    }
    Eigen::MatrixXd const d_orig = squared_distances(data);
    Eigen::MatrixXd const d_emb = squared_distances(embedding);
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> rank(n);
    double penalty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto by = [&](Eigen::MatrixXd const& d) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (a == i || b == i) {
                    return a == i && b != i;
                }
                return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) <
                       d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
            });
        };
        by(d_orig);
        for (std::size_t r = 1; r < n; ++r) {
            rank[order[r]] = r;
        }
        by(d_emb);
        for (std::size_t r = 1; r <= k; ++r) {
            std::size_t const j = order[r];
            if (rank[j] > k) {
                penalty += static_cast<double>(rank[j] - k);
            }
        }
    }
    auto const dn = static_cast<double>(n);
    auto const dk = static_cast<double>(k);
    return 1.0 - 2.0 / (dn * dk * (2.0 * dn - 3.0 * dk - 1.0)) * penalty;
}

} // namespace lforge
