#include <cmath>
#include <stdexcept>
#include <utility>

#include "lforge/property_models.hpp"
#include "lforge/rng.hpp"

namespace lforge {

void SeparabilityConfig::validate() const
{
    if (samples == 0) {
        throw std::invalid_argument("separability: samples must be positive");
    }
    if (!(step_fraction > 0.0) || !(step_fraction < 1.0)) {
        throw std::invalid_argument("separability: step fraction must lie in (0, 1)");
    }
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("separability: tolerance must be positive");
    }
    if (pair_budget == 0) {
        throw std::invalid_argument("separability: pair budget must be positive");
    }
}

SeparabilityResult separability_score(ObjectiveFunction const& f, SeparabilityConfig const& config)
{
    config.validate();
    std::size_t const d = f.dim();
    SeparabilityResult result;
    if (d < 2) {
        result.note = "one-dimensional function is trivially separable";
        return result;
    }
    auto const& dom = f.domain();
    std::vector<double> h(d);
    for (std::size_t k = 0; k < d; ++k) {
        h[k] = config.step_fraction * dom.width(k);
    }

    Rng rng(derive_seed(config.seed, {0x5e9}));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    if (d > 10 && pairs.size() > config.pair_budget) {
        rng.shuffle(pairs.begin(), pairs.end());
        pairs.resize(config.pair_budget);
        result.note = "tested " + std::to_string(config.pair_budget) + " random variable pairs";
    }

    std::vector<double> x(d);
    std::vector<double> xi(d);
    std::vector<double> fi(d);
    std::size_t cross = 0;
    std::size_t superposition = 0;
    for (std::size_t s = 0; s < config.samples; ++s) {
        for (std::size_t k = 0; k < d; ++k) {
            x[k] = rng.uniform(dom.lower[k], dom.upper[k] - h[k]);
        }
        double const f0 = evaluate(f, x);
        for (std::size_t k = 0; k < d; ++k) {
            xi = x;
            xi[k] += h[k];
            fi[k] = evaluate(f, xi);
        }
        double const tol = config.tolerance * std::max(1.0, std::fabs(f0));
        for (auto [i, j] : pairs) {
            xi = x;
            xi[i] += h[i];
            xi[j] += h[j];
            double const fij = evaluate(f, xi);
            double const c = std::fabs(fij - fi[i] - fi[j] + f0);
            double const sp = std::fabs((fij - fi[j]) - (fi[i] - f0));
            cross += c > tol ? 1 : 0;
            superposition += sp > tol ? 1 : 0;
        }
    }
    result.tests = config.samples * pairs.size();
    auto const tests = static_cast<double>(result.tests);
    result.cross_violation = static_cast<double>(cross) / tests;
    result.superposition_violation = static_cast<double>(superposition) / tests;
    double const v = config.combine == ViolationCombine::Max
                         ? std::max(result.cross_violation, result.superposition_violation)
                         : 0.5 * (result.cross_violation + result.superposition_violation);
    result.p = 1.0 - v;
    return result;
}

} // namespace lforge
