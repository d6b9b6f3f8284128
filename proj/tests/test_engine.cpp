#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lforge/bundled_data.hpp"
#include "lforge/engine.hpp"
#include "lforge/rng.hpp"

using namespace lforge;

namespace {

StandardizedFeatures vec(std::vector<double> v)
{
    return {std::move(v), 1};
}

/// Cheap stand-in for the ELA pipeline: the "features" are the tree's values
/// at four fixed points, and the multimodality "score" squashes the first one.
Assessment toy_assess(ExprTree const& tree)
{
    Assessment a;
    std::vector<double> v;
    for (double p : {-2.0, -0.5, 0.5, 2.0}) {
        std::vector<double> x(tree.dim(), p);
        v.push_back(std::tanh(tree.eval(x) / 10.0));
    }
    a.features = vec(v);
    a.scores[Property::Multimodality] = 0.5 + 0.5 * v[0];
    a.scores[Property::Separability] = 0.5 + 0.5 * v[1];
    a.scores[Property::SearchSpaceHomogeneity] = 0.5 + 0.5 * v[2];
    return a;
}

class FailingGenerator final : public Generator {
public:
    ProposalResponse propose(ProposalRequest const&) override
    {
        ++calls;
        ProposalResponse r;
        r.status = ProposalStatus::TransportError;
        r.error = "connection refused";
        return r;
    }
    std::string name() const override { return "failing"; }
    int calls = 0;
};

class GarbageGenerator final : public Generator {
public:
    ProposalResponse propose(ProposalRequest const&) override
    {
        return interpret_response("I cannot help with that.", 2);
    }
    std::string name() const override { return "garbage"; }
};

EngineConfig small_config(std::uint64_t seed, bool sharing = true)
{
    EngineConfig c;
    c.seed = seed;
    c.sharing = sharing;
    c.max_generations = 5;
    c.dims = {2};
    return c;
}

TargetSpec multimodal()
{
    return TargetSpec::from_name("multimodality");
}

} // namespace

TEST_SUITE("engine")
{
    TEST_CASE("raw fitness is the mean of polarity-adjusted scores")
    {
        std::vector<TargetScore> two{{0.9, Polarity::Present}, {0.7, Polarity::Present}};
        CHECK(raw_fitness(two) == doctest::Approx(0.8));
        std::vector<TargetScore> one{{0.6, Polarity::Present}};
        CHECK(raw_fitness(one) == 0.6);
        std::vector<TargetScore> absent{{0.2, Polarity::Absent}};
        CHECK(raw_fitness(absent) == doctest::Approx(0.8));
        CHECK_THROWS(raw_fitness(std::span<const TargetScore>{}));
    }

    TEST_CASE("adaptive sigma")
    {
        // Pairwise distances 2, 6 and 4.
        std::vector<StandardizedFeatures> f{vec({0}), vec({2}), vec({6})};
        CHECK(adaptive_sigma(f) == doctest::Approx(4.0));
        std::vector<StandardizedFeatures> same{vec({1, 1}), vec({1, 1}), vec({1, 1})};
        CHECK(adaptive_sigma(same) == 1.0);
        std::vector<StandardizedFeatures> lone{vec({1})};
        CHECK(adaptive_sigma(lone) == 1.0);
    }

    TEST_CASE("hand-derived sharing examples")
    {
        {
            std::vector<double> raw{0.8, 0.8};
            std::vector<std::optional<StandardizedFeatures>> f{vec({1, 2}), vec({1, 2})};
            auto const s = shared_fitness(raw, f, 1.0);
            CHECK(s.denominators == std::vector<double>{1.0, 1.0});
            CHECK(s.shared == std::vector<double>{0.8, 0.8});
        }
        {
            std::vector<double> raw{0.9, 0.9, 0.9};
            std::vector<std::optional<StandardizedFeatures>> f{vec({3}), vec({3}), vec({3})};
            auto const s = shared_fitness(raw, f, 1.0);
            CHECK(s.denominators == std::vector<double>{2.0, 2.0, 2.0});
            CHECK(s.shared == std::vector<double>{0.45, 0.45, 0.45});
        }
        {
            std::vector<double> raw{0.7, 0.2};
            std::vector<std::optional<StandardizedFeatures>> f{vec({0}), vec({5})};
            auto const s = shared_fitness(raw, f, 5.0);
            CHECK(s.shared == std::vector<double>{0.7, 0.2});
        }
    }

    TEST_CASE("individuals without features get the worst fitness and crowd nobody")
    {
        std::vector<double> raw{0.9, kWorstFitness, 0.9};
        std::vector<std::optional<StandardizedFeatures>> f{vec({0}), std::nullopt, vec({10})};
        auto const s = shared_fitness(raw, f, 1.0);
        CHECK(s.shared == std::vector<double>{0.9, kWorstFitness, 0.9});
        CHECK(s.denominators[1] == 0.0);
    }

    TEST_CASE("sharing never increases fitness")
    {
        Rng rng(99);
        for (int trial = 0; trial < 2000; ++trial) {
            std::size_t const n = 1 + rng.below(20);
            std::vector<double> raw(n);
            std::vector<std::optional<StandardizedFeatures>> f(n);
            std::vector<StandardizedFeatures> present;
            for (std::size_t i = 0; i < n; ++i) {
                raw[i] = rng.uniform01();
                if (rng.bernoulli(0.9)) {
                    f[i] = vec({std::floor(rng.uniform(0, 3)), rng.normal()});
                    present.push_back(*f[i]);
                }
            }
            auto const s = shared_fitness(raw, f, adaptive_sigma(present));
            for (std::size_t i = 0; i < n; ++i) {
                if (f[i]) {
                    CHECK(s.shared[i] <= raw[i]);
                }
            }
        }
    }

    TEST_CASE("an extra duplicate strictly lowers shared fitness")
    {
        std::vector<double> raw{0.9, 0.9};
        std::vector<std::optional<StandardizedFeatures>> f{vec({1}), vec({1})};
        double const before = shared_fitness(raw, f, 1.0).shared[0];
        raw.push_back(0.9);
        f.push_back(vec({1}));
        double const after = shared_fitness(raw, f, 1.0).shared[0];
        CHECK(after < before);
    }

    TEST_CASE("comma selection")
    {
        std::vector<Individual> off(3);
        double const fit[3] = {0.1, 0.9, 0.5};
        for (std::size_t i = 0; i < 3; ++i) {
            off[i].lineage = i;
            off[i].shared_fitness = fit[i];
        }
        CHECK(select_comma(off, 2) == std::vector<std::size_t>{1, 2});
        off[0].shared_fitness = 0.9;
        off[0].lineage = 7;
        CHECK(select_comma(off, 1) == std::vector<std::size_t>{1});
        CHECK_THROWS(select_comma(off, 4));
    }

    TEST_CASE("feedback")
    {
        Individual ind;
        ind.assessment.scores[Property::Multimodality] = 0.93;
        ind.raw_fitness = 0.93;
        ind.shared_fitness = 0.93;
        ind.denominator = 1.0;
        auto const spec = multimodal();
        auto const text = compose_feedback(ind, spec);
        CHECK(text.find("multimodality") != std::string::npos);
        CHECK(text.find("0.93") != std::string::npos);
        CHECK(compose_feedback(ind, spec) == text);

        Individual failed;
        failed.assessment.failure_stage = "features";
        failed.assessment.failure = "constant";
        CHECK(compose_feedback(failed, spec).find("features") != std::string::npos);

        Individual sep = ind;
        sep.assessment.scores[Property::Separability] = 0.5;
        sep.assessment.separability = SeparabilityResult{0.5, 0.5, 0.25, 10, ""};
        auto const sep_text = compose_feedback(sep, TargetSpec::from_name("multimodality+separability"));
        CHECK(sep_text.find("cross-term violation rate 0.500") != std::string::npos);
    }

    TEST_CASE("target groups")
    {
        auto const groups = enumerate_target_groups();
        CHECK(groups.size() == 23);
        std::size_t singles = 0;
        std::size_t pairs = 0;
        std::size_t nots = 0;
        for (auto const& g : groups) {
            singles += g.category == TargetCategory::Single;
            pairs += g.category == TargetCategory::Pair;
            nots += g.category == TargetCategory::NotCombo;
            auto const back = TargetSpec::from_name(g.name());
            CHECK(back.targets == g.targets);
            CHECK(back.category == g.category);
        }
        CHECK(singles == 5);
        CHECK(pairs == 10);
        CHECK(nots == 8);
        CHECK(TargetSpec::from_name("not_basin_size_homogeneity+separability").category == TargetCategory::NotCombo);
        CHECK_THROWS(TargetSpec::from_name("not_multimodality+separability"));
        CHECK_THROWS(TargetSpec::from_name("multimodality+multimodality"));
        CHECK_THROWS(TargetSpec::from_name("a+b+c"));
    }

    TEST_CASE("engine population sizes and audit growth")
    {
        OfflineGenerator gen;
        Engine engine(small_config(1), multimodal(), gen, toy_assess, std::string(bundled_prompt_template()));
        std::size_t audit = 0;
        engine.set_audit_sink([&](nlohmann::json const&) { ++audit; });
        engine.initialize();
        CHECK(engine.parents().size() == 8);
        CHECK(engine.last_offspring().size() == 16);
        CHECK(audit == 16);
        for (int g = 0; g < 3; ++g) {
            auto const previous = engine.parents();
            engine.step();
            CHECK(engine.parents().size() == 8);
            CHECK(audit == 16u * (g + 2));
            for (auto const& p : engine.parents()) {
                CHECK(p.generation == engine.generations() - 1);
                for (auto const& old : previous) {
                    CHECK(p.lineage != old.lineage);
                }
                REQUIRE(p.parent.has_value());
                CHECK(std::any_of(previous.begin(), previous.end(),
                                  [&](Individual const& o) { return o.lineage == *p.parent; }));
            }
        }
        CHECK(engine.history().size() == 64);
    }

    TEST_CASE("sharing disabled leaves fitness untouched")
    {
        OfflineGenerator gen;
        Engine engine(small_config(2, false), multimodal(), gen, toy_assess, std::string(bundled_prompt_template()));
        engine.run();
        CHECK(engine.generations() == 5);
        for (auto const& ind : engine.history()) {
            CHECK(ind.shared_fitness == ind.raw_fitness);
        }
    }

    TEST_CASE("runs are reproducible")
    {
        auto trace = [](std::uint64_t seed) {
            OfflineGenerator gen;
            Engine engine(small_config(seed), multimodal(), gen, toy_assess, std::string(bundled_prompt_template()));
            std::string out;
            engine.set_audit_sink([&](nlohmann::json const& r) { out += r.dump() + "\n"; });
            engine.run();
            return out;
        };
        CHECK(trace(5) == trace(5));
        CHECK(trace(5) != trace(6));
    }

    TEST_CASE("target fitness stops the run")
    {
        OfflineGenerator gen;
        auto cfg = small_config(3);
        cfg.target_fitness = 0.0;
        Engine engine(cfg, multimodal(), gen, toy_assess, std::string(bundled_prompt_template()));
        engine.run();
        CHECK(engine.generations() == 1);
    }

    TEST_CASE("unusable proposals fall back to local mutation")
    {
        GarbageGenerator gen;
        Engine engine(small_config(4), multimodal(), gen, toy_assess, std::string(bundled_prompt_template()));
        engine.run();
        for (auto const& ind : engine.history()) {
            CHECK(ind.origin == "fallback");
            CHECK(ind.proposal_status == "extraction_failure");
            CHECK(ind.genome.has_value());
        }
    }

    TEST_CASE("persistent transport errors abort the run")
    {
        FailingGenerator gen;
        Engine engine(small_config(5), multimodal(), gen, toy_assess, std::string(bundled_prompt_template()));
        CHECK_THROWS_AS(engine.run(), UpstreamFailure);
        CHECK(gen.calls == 3 * 16);
    }

    TEST_CASE("failed assessments get the worst fitness")
    {
        OfflineGenerator gen;
        Assessor failing = [](ExprTree const&) {
            Assessment a;
            a.failure_stage = "features";
            a.failure = "constant landscape";
            return a;
        };
        Engine engine(small_config(6), multimodal(), gen, failing, std::string(bundled_prompt_template()));
        engine.initialize();
        for (auto const& ind : engine.last_offspring()) {
            CHECK(ind.raw_fitness == kWorstFitness);
            CHECK(ind.shared_fitness == kWorstFitness);
        }
    }

    TEST_CASE("prompts carry targets, parent and feedback")
    {
        OfflineGenerator gen;
        Engine engine(small_config(7), TargetSpec::from_name("not_search_space_homogeneity+multimodality"), gen,
                      toy_assess, std::string(bundled_prompt_template()));
        engine.initialize();
        auto const& parent = engine.parents().front();
        auto const prompt = engine.build_prompt(&parent);
        CHECK(prompt.find("search_space_homogeneity: should be ABSENT") != std::string::npos);
        CHECK(prompt.find(parent.expr) != std::string::npos);
        CHECK(prompt.find("Combined fitness") != std::string::npos);
        CHECK(prompt.find("{{") == std::string::npos);
    }

    TEST_CASE("config validation")
    {
        EngineConfig c;
        c.lambda = 4;
        CHECK_THROWS(c.validate());
        c = {};
        c.dims.clear();
        CHECK_THROWS(c.validate());
    }
}
