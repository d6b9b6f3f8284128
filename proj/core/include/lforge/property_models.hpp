#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lforge/features.hpp"
#include "lforge/function.hpp"

namespace lforge {

enum class Property {
    Multimodality,
    GlobalLocalContrast,
    SearchSpaceHomogeneity,
    BasinSizeHomogeneity,
    Separability,
};

inline constexpr std::array<Property, 5> kAllProperties = {
    Property::Multimodality, Property::GlobalLocalContrast, Property::SearchSpaceHomogeneity,
    Property::BasinSizeHomogeneity, Property::Separability,
};

/// Properties scored by a trained model; separability is scored analytically.
inline constexpr std::array<Property, 4> kLearnedProperties = {
    Property::Multimodality, Property::GlobalLocalContrast, Property::SearchSpaceHomogeneity,
    Property::BasinSizeHomogeneity,
};

std::string_view to_string(Property p) noexcept;
Property property_from_string(std::string_view name);

/// One-sentence description used in generator prompts.
std::string_view property_description(Property p) noexcept;

/// Categorical property levels per BBOB function id.
class PropertyLabelTable {
public:
    /// CSV with header function_id,property,level; '#' lines are comments.
    static PropertyLabelTable parse_csv(std::string_view text);
    static PropertyLabelTable const& bundled();

    std::optional<std::string> level(int function_id, Property p) const;
    std::vector<int> function_ids() const;

    /// Rank of a level name: none < low < medium < high; "na" (not applicable) is -1.
    static int level_rank(std::string_view level);

private:
    std::map<std::pair<int, Property>, std::string> levels_;
};

struct BinaryLabels {
    std::vector<int> function_ids;
    std::vector<int> labels;
    /// Set when only one level occurs in the column; all labels are then 0.
    bool degenerate = false;
};

/// Lowest graded level observed for the property maps to 0, every higher level
/// to 1. "na" rows are labelled 0.
BinaryLabels binarize_labels(PropertyLabelTable const& table, Property p);

struct BoostingParams {
    int trees = 100;
    int max_depth = 6;
    double learning_rate = 0.3;
    double lambda = 1.0;
    double min_child_weight = 1.0;
    double gamma = 0.0;
    double base_score = 0.5;
};

struct RegressionTree {
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    std::vector<Node> nodes;

    double predict(std::span<const double> x) const;
};

/// Squared-error gradient-boosted tree ensemble scoring one property.
class PropertyModel {
public:
    struct Metadata {
        std::uint64_t corpus_hash = 0;
        std::uint64_t schema_hash = 0;
        int schema_version = kFeatureSchemaVersion;
        std::uint64_t seed = 0;
        std::size_t feature_count = 0;
    };

    PropertyModel() = default;
    PropertyModel(Property property, BoostingParams params, std::vector<RegressionTree> trees, Metadata meta);

    Property property() const noexcept { return property_; }
    BoostingParams const& params() const noexcept { return params_; }
    std::vector<RegressionTree> const& trees() const noexcept { return trees_; }
    Metadata const& metadata() const noexcept { return meta_; }

    /// Unclamped ensemble output.
    double raw_score(std::span<const double> x) const;

    /// Score in [0, 1]. Throws SchemaMismatch unless `x` was standardized by
    /// the scaler the model was trained with.
    double predict(StandardizedFeatures const& x) const;

    nlohmann::json to_json() const;
    static PropertyModel from_json(nlohmann::json const& j);

private:
    Property property_ = Property::Multimodality;
    BoostingParams params_;
    std::vector<RegressionTree> trees_;
    Metadata meta_;
};

/// Exact greedy boosting. Throws std::invalid_argument if labels hold fewer
/// than two classes or rows disagree on schema.
PropertyModel train_property_model(std::span<const StandardizedFeatures> rows, std::span<const int> labels,
                                   Property property, std::uint64_t seed, BoostingParams const& params = {});

/// Area under the ROC curve; tied scores count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Analytic separability

enum class ViolationCombine { Max, Mean };

struct SeparabilityConfig {
    std::size_t samples = 64;
    double step_fraction = 1e-3; // h as a fraction of each axis width
    double tolerance = 1e-6;     // relative: tau * max(1, |f(x)|)
    std::size_t pair_budget = 45;
    ViolationCombine combine = ViolationCombine::Max;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SeparabilityResult {
    double p = 1.0;
    double cross_violation = 0.0;
    double superposition_violation = 0.0;
    std::size_t tests = 0;
    std::string note;
};

/// Finite-difference interaction test. For base point x and pair (i, j):
///   cross         |f(x+h_i+h_j) - f(x+h_i) - f(x+h_j) + f(x)|
///   superposition |D_i(x+h_j) - D_i(x)|, D_i(x) = f(x+h_i) - f(x)
/// Both are violated above tau * max(1, |f(x)|).
SeparabilityResult separability_score(ObjectiveFunction const& f, SeparabilityConfig const& config = {});

} // namespace lforge
