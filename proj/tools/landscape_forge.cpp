// landscape-forge: campaign driver.
//
//   landscape-forge train|generate|verify|embed|report --config <path> [--seed N] [--debug-llm]
//
// Exit codes: 0 success, 2 config error, 3 upstream-service failure, 1 anything else.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lforge/engine.hpp"
#include "lforge/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kUpstream = 3 };

lforge::CampaignConfig load_config(std::string const& path, std::optional<std::uint64_t> seed)
{
    std::ifstream in(path);
    if (!in) {
        throw lforge::ConfigError("cannot open config " + path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (nlohmann::json::parse_error const& e) {
        throw lforge::ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    // The seed override goes through the JSON so every derived seed follows it.
    if (seed) {
        j["seed"] = *seed;
    }
    return lforge::CampaignConfig::from_json(j);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Generate optimization problems with controllable landscape properties"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool debug_llm = false;
    bool force = false;
    bool quiet = false;
    std::string group;
    std::string library;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Campaign config (JSON)")->required();
        cmd->add_option("--seed", seed, "Override the campaign seed");
        cmd->add_flag("--debug-llm", debug_llm, "Log generator requests and responses to stderr (API key redacted)");
        cmd->add_flag("--force", force, "Recompute even when artifacts for this config exist");
        cmd->add_flag("-q,--quiet", quiet, "No progress output");
    };
    auto* train = app.add_subcommand("train", "Compute BBOB features, fit the scaler and train property models");
    auto* generate = app.add_subcommand("generate", "Evolve problems for each target group");
    auto* verify = app.add_subcommand("verify", "Basin analysis and group-vs-group tests on the library");
    auto* embed = app.add_subcommand("embed", "t-SNE embedding of BBOB and generated feature vectors");
    auto* report = app.add_subcommand("report", "Success rates, retention ratios and threshold sweeps");
    for (auto* cmd : {train, generate, verify, embed, report}) {
        common(cmd);
    }
    generate->add_option("--group", group, "Run a single target group, e.g. multimodality+separability");
    verify->add_option("--library", library, "Verify this library.jsonl instead of the whole campaign");

    CLI11_PARSE(app, argc, argv);

    try {
        auto const config = load_config(config_path, seed);
        lforge::CommandOptions options;
        options.log = quiet ? nullptr : &std::cerr;
        options.llm_log = debug_llm ? &std::cerr : nullptr;
        options.force = force;
        if (!group.empty()) {
            options.group = group;
        }
        if (!library.empty()) {
            options.library = library;
        }
        if (train->parsed()) {
            lforge::cmd_train(config, options);
        } else if (generate->parsed()) {
            lforge::cmd_generate(config, options);
        } else if (verify->parsed()) {
            lforge::cmd_verify(config, options);
        } else if (embed->parsed()) {
            lforge::cmd_embed(config, options);
        } else {
            lforge::cmd_report(config, options);
        }
    } catch (lforge::ConfigError const& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (lforge::UpstreamFailure const& e) {
        std::cerr << "upstream failure: " << e.what() << '\n';
        return kUpstream;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
