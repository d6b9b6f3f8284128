#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "lforge/property_models.hpp"
#include "lforge/rng.hpp"

using namespace lforge;

namespace {

/// AUC by enumerating every (positive, negative) pair.
double oracle_auc(std::vector<double> const& s, std::vector<int> const& y)
{
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
        }
    }
    return wins / pairs;
}

struct ToySet {
    std::vector<StandardizedFeatures> rows;
    std::vector<int> labels;
};

/// One informative feature (x < 0 <-> label 0) plus noise columns.
ToySet separable_toy(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    ToySet t;
    for (std::size_t i = 0; i < n; ++i) {
        StandardizedFeatures r{{rng.uniform(-1, 1), rng.normal(), rng.normal()}, 42};
        t.labels.push_back(r.values[0] < 0 ? 0 : 1);
        t.rows.push_back(std::move(r));
    }
    return t;
}

} // namespace

TEST_SUITE("property_models")
{
    TEST_CASE("property names")
    {
        for (Property p : kAllProperties) {
            CHECK(property_from_string(to_string(p)) == p);
            CHECK_FALSE(property_description(p).empty());
        }
        CHECK_THROWS(property_from_string("ruggedness"));
    }

    TEST_CASE("binarization uses the lowest level")
    {
        auto const t = PropertyLabelTable::parse_csv("function_id,property,level\n"
                                                     "1,multimodality,none\n"
                                                     "2,multimodality,low\n"
                                                     "3,multimodality,high\n");
        auto const b = binarize_labels(t, Property::Multimodality);
        CHECK(b.labels == std::vector<int>{0, 1, 1});
        CHECK_FALSE(b.degenerate);
    }

    TEST_CASE("single-level column is degenerate")
    {
        auto const t = PropertyLabelTable::parse_csv("function_id,property,level\n"
                                                     "1,separability,high\n"
                                                     "2,separability,high\n");
        auto const b = binarize_labels(t, Property::Separability);
        CHECK(b.labels == std::vector<int>{0, 0});
        CHECK(b.degenerate);
    }

    TEST_CASE("not-applicable rows join the negative class")
    {
        auto const t = PropertyLabelTable::parse_csv("# comment\nfunction_id,property,level\n"
                                                     "1,basin_size_homogeneity,na\n"
                                                     "2,basin_size_homogeneity,low\n"
                                                     "3,basin_size_homogeneity,medium\n");
        CHECK(binarize_labels(t, Property::BasinSizeHomogeneity).labels == std::vector<int>{0, 0, 1});
        CHECK_THROWS(PropertyLabelTable::parse_csv("function_id,property,level\n1,multimodality,huge\n"));
        CHECK_THROWS(PropertyLabelTable::parse_csv("id,prop,lvl\n"));
    }

    TEST_CASE("bundled table covers every function and learned property")
    {
        auto const& t = PropertyLabelTable::bundled();
        CHECK(t.function_ids().size() == 24);
        for (Property p : kLearnedProperties) {
            auto const b = binarize_labels(t, p);
            CHECK(b.labels.size() == 24);
            CHECK_FALSE(b.degenerate);
            for (int v : b.labels) {
                CHECK((v == 0 || v == 1));
            }
        }
        // Unimodal sphere versus highly multimodal Rastrigin.
        CHECK(*t.level(1, Property::Multimodality) == "none");
        CHECK(*t.level(3, Property::Multimodality) == "high");
    }

    TEST_CASE("roc_auc matches pair enumeration")
    {
        Rng rng(9);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> s;
            std::vector<int> y;
            for (int k = 0; k < 30; ++k) {
                s.push_back(std::floor(rng.uniform(0, 5)));
                y.push_back(static_cast<int>(rng.below(2)));
            }
            if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) {
                continue;
            }
            CHECK(roc_auc(s, y) == doctest::Approx(oracle_auc(s, y)).epsilon(1e-12));
        }
    }

    TEST_CASE("separable toy set is learned")
    {
        auto const t = separable_toy(80, 1);
        auto const model = train_property_model(t.rows, t.labels, Property::Multimodality, 5);
        std::vector<double> s;
        for (auto const& r : t.rows) {
            double const p = model.predict(r);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            s.push_back(p);
        }
        CHECK(roc_auc(s, t.labels) == 1.0);
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            if (t.labels[i] == 1) {
                CHECK(s[i] > 0.5);
            }
        }
        CHECK(model.trees().size() == 100);
    }

    TEST_CASE("one-feature threshold is found exactly")
    {
        std::vector<StandardizedFeatures> rows;
        std::vector<int> labels;
        for (int k = -10; k < 10; ++k) {
            rows.push_back({{k + 0.5}, 1});
            labels.push_back(k + 0.5 < 0 ? 0 : 1);
        }
        BoostingParams p;
        p.trees = 1;
        p.max_depth = 1;
        p.learning_rate = 1.0;
        p.lambda = 0.0;
        auto const m = train_property_model(rows, labels, Property::Separability, 0, p);
        REQUIRE(m.trees().size() == 1);
        auto const& root = m.trees()[0].nodes[0];
        CHECK(root.feature == 0);
        CHECK(root.threshold == doctest::Approx(0.0));
        CHECK(m.predict(rows.front()) == doctest::Approx(0.0));
        CHECK(m.predict(rows.back()) == doctest::Approx(1.0));
    }

    TEST_CASE("training errors")
    {
        auto t = separable_toy(20, 2);
        std::vector<int> constant(t.rows.size(), 1);
        CHECK_THROWS_AS(train_property_model(t.rows, constant, Property::Multimodality, 0), std::invalid_argument);
        t.rows[3].schema_hash = 43;
        CHECK_THROWS(train_property_model(t.rows, t.labels, Property::Multimodality, 0));
    }

    TEST_CASE("training is deterministic")
    {
        auto const t = separable_toy(60, 3);
        auto const a = train_property_model(t.rows, t.labels, Property::Multimodality, 11);
        auto const b = train_property_model(t.rows, t.labels, Property::Multimodality, 11);
        CHECK(a.to_json().dump() == b.to_json().dump());
    }

    TEST_CASE("serialization round-trips bit-identically")
    {
        auto const t = separable_toy(60, 4);
        auto const m = train_property_model(t.rows, t.labels, Property::GlobalLocalContrast, 1);
        auto const back = PropertyModel::from_json(nlohmann::json::parse(m.to_json().dump()));
        CHECK(back.property() == Property::GlobalLocalContrast);
        Rng rng(12);
        for (int k = 0; k < 200; ++k) {
            StandardizedFeatures probe{{rng.normal(0, 2), rng.normal(), rng.normal()}, 42};
            double const a = m.raw_score(probe.values);
            double const b = back.raw_score(probe.values);
            CHECK(std::memcmp(&a, &b, sizeof a) == 0);
        }
    }

    TEST_CASE("prediction checks the schema")
    {
        auto const t = separable_toy(30, 5);
        auto const m = train_property_model(t.rows, t.labels, Property::Multimodality, 1);
        CHECK_THROWS_AS(m.predict({{0.0, 0.0, 0.0}, 41}), SchemaMismatch);
        CHECK_THROWS_AS(m.predict({{0.0, 0.0}, 42}), SchemaMismatch);
        auto j = m.to_json();
        j["metadata"]["schema_version"] = 999;
        CHECK_THROWS(PropertyModel::from_json(j));
    }

    TEST_CASE("predictions are clamped")
    {
        std::vector<StandardizedFeatures> rows;
        std::vector<int> labels;
        for (int k = 0; k < 10; ++k) {
            rows.push_back({{double(k)}, 1});
            labels.push_back(k < 5 ? 0 : 1);
        }
        BoostingParams p;
        p.learning_rate = 1.5; // overshoots on purpose
        p.lambda = 0.0;
        auto const m = train_property_model(rows, labels, Property::Multimodality, 0, p);
        for (double x = -20; x <= 20; x += 0.5) {
            double const s = m.predict({{x}, 1});
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
    }
}
