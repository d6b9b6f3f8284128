#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lforge/features.hpp"
#include "lforge/function.hpp"

namespace lforge {

enum class Alternative { TwoSided, Greater, Less };

struct MannWhitneyResult {
    double u = 0.0; // U statistic of sample a
    double p = 1.0;
    bool exact = false;
};

/// Sample sizes at or below which the exact null distribution is used, given
/// min(|a|, |b|) < 8.
inline constexpr std::size_t kMannWhitneyExactMaxTotal = 200;

/// Rank-sum test with midranks for ties. `Greater` tests whether a tends to
/// exceed b. Exact permutation p-values when min(|a|, |b|) < 8, otherwise the
/// normal approximation with tie and continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative = Alternative::TwoSided);

/// For each vector, the smallest ela_distance to any other vector.
std::vector<double> nearest_neighbor_distances(std::span<const StandardizedFeatures> vectors);

// ---------------------------------------------------------------------------
// t-SNE

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double exaggeration = 12.0;
    std::size_t exaggeration_iterations = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    std::size_t momentum_switch = 250;
    std::uint64_t seed = 0;
};

struct EmbeddingResult {
    Points coordinates; // n x 2
    double perplexity = 0.0;
    std::uint64_t seed = 0;
    double kl_divergence = 0.0;
};

/// Symmetrized joint affinities P (n x n, zero diagonal, sums to 1) with
/// per-point bandwidths matched to the perplexity by bisection.
Eigen::MatrixXd tsne_affinities(Eigen::MatrixXd const& data, double perplexity);

/// KL(P || Q) for embedding `y` (n x 2) under the Student-t kernel.
double tsne_kl(Eigen::MatrixXd const& p, Eigen::MatrixXd const& y);

/// Analytic gradient of tsne_kl with respect to y.
Eigen::MatrixXd tsne_gradient(Eigen::MatrixXd const& p, Eigen::MatrixXd const& y);

/// Exact t-SNE. Throws std::invalid_argument when the point count cannot
/// support the perplexity; the message suggests a usable value.
EmbeddingResult tsne_embed(Eigen::MatrixXd const& data, TsneConfig const& config = {});

/// Fraction of embedded k-neighbourhoods that are true neighbourhoods,
/// penalized by original-space rank. Requires 1 <= k < n / 2.
double trustworthiness(Eigen::MatrixXd const& data, Eigen::MatrixXd const& embedding, std::size_t k = 10);

} // namespace lforge
