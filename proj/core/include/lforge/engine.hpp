#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lforge/expr.hpp"
#include "lforge/features.hpp"
#include "lforge/generator.hpp"
#include "lforge/property_models.hpp"

namespace lforge {

enum class Polarity { Present, Absent };

struct Target {
    Property property = Property::Multimodality;
    Polarity polarity = Polarity::Present;

    bool operator==(Target const&) const = default;
};

enum class TargetCategory { Single, Pair, NotCombo };

std::string_view to_string(TargetCategory c) noexcept;

struct TargetSpec {
    std::vector<Target> targets;
    TargetCategory category = TargetCategory::Single;

    /// e.g. "multimodality", "multimodality+separability",
    /// "not_basin_size_homogeneity+separability".
    std::string name() const;
    void validate() const;

    static TargetSpec from_name(std::string_view name);
};

/// 5 singles, 10 pairs, and 8 combinations of one absent homogeneity
/// property with one other present property.
std::vector<TargetSpec> enumerate_target_groups();

inline constexpr double kWorstFitness = -1.0;

struct TargetScore {
    double score = 0.0;
    Polarity polarity = Polarity::Present;
};

/// Score when present, 1 - score when absent.
double polarity_adjusted(TargetScore const& t) noexcept;

/// Mean of polarity-adjusted scores. Throws on an empty list.
double raw_fitness(std::span<const TargetScore> scores);

/// Mean pairwise ELA distance; 1.0 when fewer than two vectors or the mean
/// is below 1e-9.
double adaptive_sigma(std::span<const StandardizedFeatures> features);

struct SharedFitness {
    std::vector<double> shared;
    /// max(1, sum_{j != i} max(0, 1 - D_ij / sigma)); 0 for individuals without features.
    std::vector<double> denominators;
};

/// Individuals without features get kWorstFitness and do not crowd others.
SharedFitness shared_fitness(std::span<const double> raw, std::span<const std::optional<StandardizedFeatures>> features,
                             double sigma);

/// Outcome of scoring one candidate.
struct Assessment {
    std::optional<FeatureVector> raw_features;
    std::optional<StandardizedFeatures> features;
    std::map<Property, double> scores;
    std::optional<SeparabilityResult> separability;
    std::string failure_stage; // empty on success
    std::string failure;

    bool ok() const noexcept { return failure_stage.empty(); }
};

using Assessor = std::function<Assessment(ExprTree const&)>;

struct Individual {
    std::uint64_t lineage = 0;
    std::optional<std::uint64_t> parent;
    std::size_t generation = 0;
    std::size_t slot = 0;
    std::string expr;
    std::optional<ExprTree> genome;
    std::string origin; // "generator" or "fallback"
    std::string proposal_status;
    std::string proposal_error;
    Assessment assessment;
    double raw_fitness = kWorstFitness;
    double shared_fitness = kWorstFitness;
    double denominator = 0.0;
    double sigma_share = 1.0;
    bool selected = false;
};

/// Indices of the mu offspring with the highest shared fitness, ties to the
/// lower lineage id. Throws if offspring.size() < mu.
std::vector<std::size_t> select_comma(std::span<const Individual> offspring, std::size_t mu);

/// Deterministic feedback text for the generator.
std::string compose_feedback(Individual const& ind, TargetSpec const& spec);

struct EngineConfig {
    std::size_t mu = 8;
    std::size_t lambda = 16;
    std::size_t max_generations = 50;
    std::optional<double> target_fitness;
    std::uint64_t seed = 0;
    bool sharing = true;
    std::size_t workers = 1;
    std::size_t expr_dim = 2;
    std::vector<std::size_t> dims{2, 5, 10};
    ExprLimits limits;
    /// Generations in a row in which every proposal hit a transport error
    /// before the run is abandoned with UpstreamFailure.
    std::size_t max_upstream_failure_generations = 3;

    void validate() const;
};

class UpstreamFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (mu, lambda) loop with fitness sharing in ELA space.
class Engine {
public:
    Engine(EngineConfig config, TargetSpec spec, Generator& generator, Assessor assessor,
           std::string prompt_template);

    /// Called once per individual after its generation is selected.
    void set_audit_sink(std::function<void(nlohmann::json const&)> sink) { audit_ = std::move(sink); }

    /// Generation 0: lambda independent proposals, then selection.
    void initialize();
    /// One further generation from the current parents.
    void step();
    /// initialize() and step() until max_generations generations exist, the
    /// target fitness is reached, or `stop` returns true.
    void run(std::function<bool(Engine const&)> const& stop = {});

    std::size_t generations() const noexcept { return generations_; }
    std::vector<Individual> const& parents() const noexcept { return parents_; }
    std::vector<Individual> const& last_offspring() const noexcept { return offspring_; }
    /// Every offspring of every generation, in creation order.
    std::vector<Individual> const& history() const noexcept { return history_; }
    EngineConfig const& config() const noexcept { return config_; }
    TargetSpec const& spec() const noexcept { return spec_; }

    std::string build_prompt(Individual const* parent) const;
    static nlohmann::json audit_record(Individual const& ind, TargetSpec const& spec);

private:
    void produce_generation(bool from_parents);
    Individual make_offspring(std::size_t slot, Individual const* parent);

    EngineConfig config_;
    TargetSpec spec_;
    Generator& generator_;
    Assessor assessor_;
    std::string prompt_template_;
    std::function<void(nlohmann::json const&)> audit_;

    std::size_t generations_ = 0;
    std::size_t upstream_failures_ = 0;
    std::vector<Individual> parents_;
    std::vector<Individual> offspring_;
    std::vector<Individual> history_;
};

} // namespace lforge
