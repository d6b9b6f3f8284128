#include "lforge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lforge {

namespace {

/// Midranks doubled so that every rank is an integer.
std::vector<long> doubled_midranks(std::span<const double> pooled, double& tie_term)
{
    std::size_t const n = pooled.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<long> ranks(n);
    tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && pooled[idx[j]] == pooled[idx[i]]) {
            ++j;
        }
        // Ranks i+1 .. j share (i+1+j)/2; doubled that is i+1+j.
        auto const r2 = static_cast<long>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            ranks[idx[k]] = r2;
        }
        auto const t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    return ranks;
}

double normal_upper(double z)
{
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

} // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative)
{
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("mann_whitney_u needs two non-empty samples");
    }
    std::size_t const na = a.size();
    std::size_t const nb = b.size();
    std::size_t const n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    for (double v : pooled) {
        if (std::isnan(v)) {
            throw std::invalid_argument("mann_whitney_u: samples contain NaN");
        }
    }
    double tie_term = 0.0;
    auto const r2 = doubled_midranks(pooled, tie_term);
    long const r2_a = std::accumulate(r2.begin(), r2.begin() + static_cast<std::ptrdiff_t>(na), 0L);

    MannWhitneyResult out;
    auto const dna = static_cast<double>(na);
    auto const dnb = static_cast<double>(nb);
    out.u = 0.5 * static_cast<double>(r2_a) - dna * (dna + 1.0) / 2.0;

    if (std::min(na, nb) < 8 && n <= kMannWhitneyExactMaxTotal) {
        out.exact = true;
        // Distribution of the doubled rank sum of the smaller sample over all
        // equally likely subsets of the pooled ranks.
        bool const subset_is_a = na <= nb;
        std::size_t const k = subset_is_a ? na : nb;
        long const total = static_cast<long>(n * (n + 1));
        long max_sum = 0;
        {
            std::vector<long> sorted(r2);
            std::sort(sorted.rbegin(), sorted.rend());
            max_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0L);
        }
        auto const width = static_cast<std::size_t>(max_sum + 1);
        std::vector<long double> dp((k + 1) * width, 0.0L);
        dp[0] = 1.0L;
        for (std::size_t item = 0; item < n; ++item) {
            auto const w = static_cast<std::size_t>(r2[item]);
            for (std::size_t j = std::min(k, item + 1); j >= 1; --j) {
                long double* row = &dp[j * width];
                long double const* prev = &dp[(j - 1) * width];
                for (std::size_t s = width; s-- > w;) {
                    row[s] += prev[s - w];
                }
            }
        }
        long double const* dist = &dp[k * width];
        long double count_all = 0.0L;
        for (std::size_t s = 0; s < width; ++s) {
            count_all += dist[s];
        }
        // Doubled rank sum of a implied by subset sum s.
        auto sum_a = [&](long s) { return subset_is_a ? s : total - s; };
        long const e2_a = static_cast<long>(na * (n + 1));
        long double hits = 0.0L;
        for (std::size_t s = 0; s < width; ++s) {
            if (dist[s] == 0.0L) {
                continue;
            }
            long const sa = sum_a(static_cast<long>(s));
            bool hit = false;
            switch (alternative) {
            case Alternative::TwoSided:
                hit = std::labs(sa - e2_a) >= std::labs(r2_a - e2_a);
                break;
            case Alternative::Greater:
                hit = sa >= r2_a;
                break;
            case Alternative::Less:
                hit = sa <= r2_a;
                break;
            }
            if (hit) {
                hits += dist[s];
            }
        }
        out.p = static_cast<double>(std::min(1.0L, hits / count_all));
        return out;
    }

    double const mu = dna * dnb / 2.0;
    auto const dn = static_cast<double>(n);
    double const var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (!(var > 0.0)) {
        out.p = 1.0;
        return out;
    }
    double const sd = std::sqrt(var);
    switch (alternative) {
    case Alternative::TwoSided:
        out.p = std::min(1.0, 2.0 * normal_upper(std::max(0.0, std::fabs(out.u - mu) - 0.5) / sd));
        break;
    case Alternative::Greater:
        out.p = normal_upper((out.u - mu - 0.5) / sd);
        break;
    case Alternative::Less:
        out.p = normal_upper(-(out.u - mu + 0.5) / sd);
        break;
    }
    return out;
}

std::vector<double> nearest_neighbor_distances(std::span<const StandardizedFeatures> vectors)
{
    if (vectors.size() < 2) {
        throw std::invalid_argument("nearest_neighbor_distances needs at least two vectors");
    }
    std::vector<double> out(vectors.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) {
            double const d = ela_distance(vectors[i], vectors[j]);
            out[i] = std::min(out[i], d);
            out[j] = std::min(out[j], d);
        }
    }
    return out;
}

} // namespace lforge
