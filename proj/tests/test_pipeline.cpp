#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lforge/pipeline.hpp"
#include "lforge/util.hpp"

using namespace lforge;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny_config(fs::path const& out)
{
    return {
        {"name", "tiny"},
        {"output_dir", out.string()},
        {"seed", 5},
        {"corpus", {{"instances", 1}, {"dims", {2}}}},
        {"features", {{"sample_factor", 50}, {"repetitions", 1}}},
        {"boosting", {{"trees", 10}}},
        {"separability", {{"samples", 20}}},
        {"engine", {{"mu", 3}, {"lambda", 6}, {"max_generations", 3}}},
        {"groups", {"multimodality", "not_basin_size_homogeneity+multimodality"}},
        {"problems_per_group", 2},
        {"verify", {{"resolution", 31}, {"contrast_samples", 200}, {"include_bbob", true}}},
        {"embed", {{"perplexity", 3}, {"iterations", 150}, {"k", 3}}},
    };
}

std::string slurp(fs::path const& p)
{
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<nlohmann::json> jsonl(fs::path const& p)
{
    std::vector<nlohmann::json> out;
    std::istringstream in(slurp(p));
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) {
            out.push_back(nlohmann::json::parse(line));
        }
    }
    return out;
}

fs::path scratch(std::string const& name)
{
    auto const dir = fs::temp_directory_path() / ("lforge-test-" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_SUITE("pipeline")
{
    TEST_CASE("config defaults and derived seeds")
    {
        auto const c = CampaignConfig::from_json(nlohmann::json::object());
        CHECK(c.corpus.functions.size() == 24);
        CHECK(c.groups.size() == 23);
        CHECK(c.output_dir == fs::path("runs/campaign"));
        CHECK(c.train_dir() == fs::path("runs/campaign/train"));
        CHECK(c.engine.dims == c.corpus.dims);
        CHECK(c.features.seed != c.separability.seed);
    }

    TEST_CASE("config errors")
    {
        auto bad = [](nlohmann::json j) { CHECK_THROWS_AS(CampaignConfig::from_json(j), ConfigError); };
        bad({{"sed", 1}});
        bad({{"engine", {{"mu", 8}, {"lamda", 16}}}});
        bad({{"engine", {{"mu", 8}, {"lambda", 4}}}});
        bad({{"seed", "one"}});
        bad({{"groups", {"multimodality", "wiggliness"}}});
        bad({{"groups", "some"}});
        bad({{"corpus", {{"functions", {0}}}}});
        bad({{"features", {{"sampler", "grid"}}}});
        bad({{"generator", {{"kind", "remote"}, {"remote", {{"base_url", "localhost"}}}}}});
        bad({{"retention_threshold", 1.0}});
        bad(nlohmann::json::array());
        CHECK_THROWS_AS(CampaignConfig::load("/nonexistent/lforge.json"), ConfigError);
    }

    TEST_CASE("hash ignores paths and workers but not settings")
    {
        auto const a = CampaignConfig::from_json({{"output_dir", "a"}, {"workers", 1}});
        auto const b = CampaignConfig::from_json({{"output_dir", "b"}, {"workers", 4}, {"models_dir", "m"}});
        auto const c = CampaignConfig::from_json({{"output_dir", "a"}, {"seed", 2}});
        CHECK(a.hash() == b.hash());
        CHECK(a.hash() != c.hash());
        auto const round = CampaignConfig::from_json(a.to_json());
        CHECK(round.hash() == a.hash());
    }

    TEST_CASE("shipped presets parse")
    {
        for (auto const* name : {"desk.json", "full.json"}) {
            CAPTURE(name);
            CHECK_NOTHROW(CampaignConfig::load(fs::path(LFORGE_SOURCE_DIR) / "configs" / name));
        }
    }

    TEST_CASE("retention rule")
    {
        auto const spec = TargetSpec::from_name("not_basin_size_homogeneity+multimodality");
        Individual ind;
        ind.raw_fitness = 0.7;
        ind.assessment.scores[Property::BasinSizeHomogeneity] = 0.2;
        ind.assessment.scores[Property::Multimodality] = 0.6;
        CHECK(passes_retention(ind, spec, 0.5));
        ind.assessment.scores[Property::BasinSizeHomogeneity] = 0.5;
        CHECK_FALSE(passes_retention(ind, spec, 0.5));
        ind.assessment.scores[Property::BasinSizeHomogeneity] = 0.2;
        ind.raw_fitness = 0.5;
        CHECK_FALSE(passes_retention(ind, spec, 0.5));
    }

    TEST_CASE("tiny campaign end to end")
    {
        auto const dir = scratch("e2e");
        auto const config = CampaignConfig::from_json(tiny_config(dir));
        CommandOptions opt;

        cmd_train(config, opt);
        auto const manifest = nlohmann::json::parse(slurp(dir / "train" / "manifest.json"));
        CHECK(manifest.at("config_hash") == hex64(config.hash()));
        for (auto const* f : {"features.csv", "scaler.json", "labels.csv"}) {
            CHECK(fs::exists(dir / "train" / f));
        }
        auto const model_time = fs::last_write_time(dir / "train" / "scaler.json");
        cmd_train(config, opt); // up to date: nothing rewritten
        CHECK(fs::last_write_time(dir / "train" / "scaler.json") == model_time);

        cmd_generate(config, opt);
        for (auto const& group : config.groups) {
            CAPTURE(group);
            auto const gdir = dir / "generate" / group;
            auto const done = nlohmann::json::parse(slurp(gdir / "done.json"));
            auto const audit = jsonl(gdir / "audit.jsonl");
            CHECK(audit.size() == done.at("candidates").get<std::size_t>());
            for (auto const& rec : audit) {
                CHECK(rec.at("config_hash") == hex64(config.hash()));
            }
            auto const spec = TargetSpec::from_name(group);
            for (auto const& rec : jsonl(gdir / "library.jsonl")) {
                CHECK(rec.at("raw_fitness").get<double>() > config.retention_threshold);
                for (auto const& t : spec.targets) {
                    double s = rec.at("scores").at(std::string(to_string(t.property))).get<double>();
                    if (t.polarity == Polarity::Absent) {
                        s = 1.0 - s;
                    }
                    CHECK(s > config.retention_threshold);
                }
                CHECK(rec.at("provenance").at("config_hash") == hex64(config.hash()));
            }
        }

        // A second run with the same seed reproduces the audit byte for byte.
        auto const first = slurp(dir / "generate" / "multimodality" / "audit.jsonl");
        CommandOptions forced;
        forced.force = true;
        forced.group = "multimodality";
        cmd_generate(config, forced);
        CHECK(slurp(dir / "generate" / "multimodality" / "audit.jsonl") == first);

        CommandOptions wrong;
        wrong.group = "wiggliness";
        CHECK_THROWS_AS(cmd_generate(config, wrong), ConfigError);

        cmd_verify(config, opt);
        auto const report = slurp(dir / "verify" / "report.csv");
        CHECK(report.rfind("id,group,expr,basins", 0) == 0);
        CHECK(report.find("f1_i1,bbob") != std::string::npos);
        CHECK(fs::exists(dir / "verify" / "tests.csv"));

        cmd_embed(config, opt);
        auto const embed = slurp(dir / "embed" / "embedding.csv");
        CHECK(embed.rfind("id,source,group,target,x,y\n", 0) == 0);
        auto const es = nlohmann::json::parse(slurp(dir / "embed" / "summary.json"));
        CHECK(es.at("trustworthiness").get<double>() > 0.0);

        cmd_report(config, opt);
        auto const summary = nlohmann::json::parse(slurp(dir / "report" / "summary.json"));
        CHECK(summary.at("groups").size() == 2);
        fs::remove_all(dir);
    }

    TEST_CASE("generate without trained models fails clearly")
    {
        auto const dir = scratch("nomodels");
        auto const config = CampaignConfig::from_json(tiny_config(dir));
        CHECK_THROWS(cmd_generate(config, {}));
        CHECK_THROWS(cmd_report(config, {}));
    }
}
