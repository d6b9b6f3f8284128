#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lforge/basins.hpp"
#include "lforge/engine.hpp"
#include "lforge/features.hpp"
#include "lforge/generator.hpp"
#include "lforge/property_models.hpp"
#include "lforge/stats.hpp"

namespace lforge {

/// Malformed or inconsistent campaign configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CampaignConfig {
    struct Corpus {
        std::vector<int> functions;
        std::size_t instances = 5;
        std::vector<std::size_t> dims{2};
    };
    struct GeneratorSpec {
        std::string kind = "offline"; // offline | remote
        RemoteConfig remote;
    };
    struct Verify {
        std::size_t resolution = 201;
        std::size_t contrast_samples = 10000;
        bool include_bbob = true;
    };
    struct Embed {
        TsneConfig tsne;
        std::size_t k = 10;
    };

    std::string name = "campaign";
    std::filesystem::path output_dir = "runs/campaign";
    /// Where trained models are read by generate; defaults to output_dir/train.
    std::optional<std::filesystem::path> models_dir;
    std::uint64_t seed = 1;
    Corpus corpus;
    AveragingConfig features;
    double max_missing_fraction = 0.05;
    BoostingParams boosting;
    SeparabilityConfig separability;
    EngineConfig engine;
    GeneratorSpec generator;
    std::vector<std::string> groups;
    std::size_t problems_per_group = 55;
    double retention_threshold = 0.5;
    Verify verify;
    Embed embed;
    std::size_t workers = 1;

    /// FNV-1a of the canonical JSON form, excluding paths and worker counts.
    std::uint64_t hash() const;
    nlohmann::json to_json() const;
    std::filesystem::path train_dir() const;

    /// Throws ConfigError on unknown keys, wrong types or invalid values.
    static CampaignConfig from_json(nlohmann::json const& j);
    static CampaignConfig load(std::filesystem::path const& path);
};

/// Trained scaler and models plus everything needed to score a candidate.
struct ScoringContext {
    FeatureScaler scaler;
    std::map<Property, PropertyModel> models;
    AveragingConfig averaging;
    std::vector<std::size_t> dims;
    SeparabilityConfig separability;
    double lower = -5.0;
    double upper = 5.0;
};

/// Features across all dims, standardized, then scored by every model and
/// by the separability test (p averaged over dims).
Assessment assess_expression(ScoringContext const& ctx, ExprTree const& tree);

Assessor make_assessor(std::shared_ptr<const ScoringContext> ctx);

/// Features of one BBOB problem concatenated over dims.
FeatureVector bbob_features(int function_id, int instance_id, std::vector<std::size_t> const& dims,
                            AveragingConfig const& averaging);

struct TrainingResult {
    std::vector<std::string> ids;
    std::vector<int> function_ids;
    std::vector<FeatureVector> rows;
    FeatureScaler scaler;
    std::map<Property, PropertyModel> models;
    std::map<Property, double> auc;
    std::map<Property, BinaryLabels> labels;
};

/// Builds the BBOB corpus of the config, fits the scaler and trains one
/// model per learned property.
TrainingResult train_corpus(CampaignConfig const& config, std::ostream* log = nullptr);

/// Loads scaler and models written by cmd_train.
std::shared_ptr<ScoringContext> load_scoring_context(CampaignConfig const& config);

/// True when the record passes the retention rule: combined fitness and
/// every polarity-adjusted target score strictly above `threshold`.
bool passes_retention(Individual const& ind, TargetSpec const& spec, double threshold);

struct CommandOptions {
    std::optional<std::string> group;
    std::optional<std::filesystem::path> library;
    std::ostream* log = nullptr;
    std::ostream* llm_log = nullptr;
    bool force = false;
};

void cmd_train(CampaignConfig const& config, CommandOptions const& options);
void cmd_generate(CampaignConfig const& config, CommandOptions const& options);
void cmd_verify(CampaignConfig const& config, CommandOptions const& options);
void cmd_embed(CampaignConfig const& config, CommandOptions const& options);
void cmd_report(CampaignConfig const& config, CommandOptions const& options);

/// Groups used to colour embeddings: homogeneous_basin, non_homogeneous_basin, other.
std::string embedding_group(TargetSpec const& spec);
std::string embedding_group_for_bbob(int function_id);

} // namespace lforge
