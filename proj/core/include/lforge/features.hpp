#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lforge/function.hpp"
#include "lforge/sampling.hpp"

namespace lforge {

/// Version of the per-dimension feature list below. Persisted with every
/// feature table, scaler and model.
inline constexpr int kFeatureSchemaVersion = 1;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Feature names for one sample, grouped as
/// ela_meta, ela_distr, nbc, disp, pca, ic (see docs/feature_schema.md).
std::vector<std::string> const& feature_schema();

/// Named ELA values for one landscape. Missing values are NaN.
struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    bool degenerate = false;

    std::size_t size() const noexcept { return values.size(); }
    bool missing(std::size_t k) const { return std::isnan(values.at(k)); }
    std::optional<double> get(std::string_view name) const;
};

class DegenerateFunction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FeatureOptions {
    std::size_t ic_levels = 1000;
    double ic_eps_min = 1e-5;
    double ic_settling_threshold = 0.05;
    double ic_partial_ratio = 0.5;
    double peaks_mode_mass = 0.01;
    std::size_t peaks_grid = 512;
};

/// ELA features of a sample. `y` is expected in [0, 1]; a constant `y`
/// yields an all-missing vector with `degenerate` set. `seed` picks the
/// start of the information-content walk.
FeatureVector compute_features(Points const& x, std::span<const double> y, std::uint64_t seed = 0,
                               FeatureOptions const& options = {});

struct AveragingConfig {
    SamplerKind sampler = SamplerKind::LatinHypercube;
    std::size_t sample_factor = 250;   // n = sample_factor * dim
    std::size_t repetitions = 5;
    std::uint64_t seed = 0;
    FeatureOptions options;
};

/// Element-wise mean of compute_features over `repetitions` designs with
/// seeds derive_seed(config.seed, {r}). Missing entries are skipped per
/// feature. Throws DegenerateFunction if every repetition is degenerate.
FeatureVector averaged_features(ObjectiveFunction const& f, AveragingConfig const& config);

/// Joins per-dimension vectors; names become "d<dim>.<name>".
FeatureVector concat_features(std::span<const FeatureVector> parts);

/// Standardized vector tagged with the schema hash of the scaler that made it.
struct StandardizedFeatures {
    std::vector<double> values;
    std::uint64_t schema_hash = 0;
};

class SchemaMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Features the scaler always drops: unbounded coefficient ratios that
/// explode whenever a fitted coefficient is near zero, which is common for
/// generated expressions that ignore a variable.
inline constexpr std::array<std::string_view, 2> kUnstableFeatures = {
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.quad_simple.cond",
};

/// True for a name in kUnstableFeatures, with or without a "d<dim>." prefix.
bool is_unstable_feature(std::string_view name) noexcept;

/// Per-feature z-score transform learned from a reference corpus.
class FeatureScaler {
public:
    struct Column {
        std::string name;
        double mean = 0.0;
        double std = 1.0;
    };

    /// Unstable features, features missing or non-finite on more than
    /// `max_missing_fraction` of the corpus, and features with zero variance
    /// are dropped.
    static FeatureScaler fit(std::span<const FeatureVector> corpus, double max_missing_fraction = 0.05);

    /// Missing inputs are imputed with the corpus mean (standardized 0).
    StandardizedFeatures standardize(FeatureVector const& v) const;

    std::vector<Column> const& columns() const noexcept { return columns_; }
    std::vector<std::string> const& dropped() const noexcept { return dropped_; }
    std::vector<std::string> names() const;
    std::uint64_t schema_hash() const noexcept { return schema_hash_; }
    int schema_version() const noexcept { return schema_version_; }

    nlohmann::json to_json() const;
    static FeatureScaler from_json(nlohmann::json const& j);

private:
    void rehash();

    std::vector<Column> columns_;
    std::vector<std::string> dropped_;
    int schema_version_ = kFeatureSchemaVersion;
    std::uint64_t schema_hash_ = 0;
};

/// Manhattan distance between standardized vectors of the same schema.
double ela_distance(StandardizedFeatures const& a, StandardizedFeatures const& b);

/// CSV rows: schema_version, id, dim, sample_size, seed, degenerate, then one
/// column per feature ("NA" = missing).
void write_feature_table(std::ostream& os, std::span<const std::string> ids, std::span<const FeatureVector> rows);

struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<FeatureVector> rows;
};

FeatureTable read_feature_table(std::istream& is);

} // namespace lforge
