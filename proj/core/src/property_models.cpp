#include "lforge/property_models.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lforge/bundled_data.hpp"
#include "lforge/util.hpp"

namespace lforge {

namespace {

constexpr std::array<std::string_view, 5> kPropertyNames = {
    "multimodality", "global_local_contrast", "search_space_homogeneity", "basin_size_homogeneity", "separability",
};

// Minimum loss reduction for a split to be kept, as in the reference
// boosting library.
constexpr double kMinSplitGain = 1e-6;

} // namespace

std::string_view to_string(Property p) noexcept
{
    return kPropertyNames[static_cast<std::size_t>(p)];
}

Property property_from_string(std::string_view name)
{
    for (std::size_t k = 0; k < kPropertyNames.size(); ++k) {
        if (kPropertyNames[k] == name) {
            return static_cast<Property>(k);
        }
    }
    throw std::invalid_argument("unknown property '" + std::string(name) + "'");
}

std::string_view property_description(Property p) noexcept
{
    switch (p) {
    case Property::Multimodality:
        return "Multimodality refers to the number of local optima or basins in the landscape.";
    case Property::GlobalLocalContrast:
        return "Global-to-local optima contrast measures the difference between the global and local optima "
               "relative to the average fitness.";
    case Property::SearchSpaceHomogeneity:
        return "Search-space homogeneity describes the similarity of the landscape structure across the search space.";
    case Property::BasinSizeHomogeneity:
        return "Basin-size homogeneity quantifies the variation between the largest and smallest basins.";
    case Property::Separability:
        return "Separability describes the extent to which the landscape can be decomposed into smaller, easier "
               "subproblems.";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Label table

PropertyLabelTable PropertyLabelTable::parse_csv(std::string_view text)
{
    PropertyLabelTable table;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto const eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto cells = split_csv_line(line);
        if (!header_seen) {
            if (cells.size() != 3 || cells[0] != "function_id" || cells[1] != "property" || cells[2] != "level") {
                throw std::invalid_argument("label table header must be function_id,property,level");
            }
            header_seen = true;
            continue;
        }
        if (cells.size() != 3) {
            throw std::invalid_argument("label table line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " cells");
        }
        int const fid = std::stoi(cells[0]);
        Property const p = property_from_string(cells[1]);
        level_rank(cells[2]);
        table.levels_[{fid, p}] = cells[2];
    }
    return table;
}

PropertyLabelTable const& PropertyLabelTable::bundled()
{
    static PropertyLabelTable const table = parse_csv(bundled_bbob_property_levels());
    return table;
}

std::optional<std::string> PropertyLabelTable::level(int function_id, Property p) const
{
    auto it = levels_.find({function_id, p});
    if (it == levels_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<int> PropertyLabelTable::function_ids() const
{
    std::vector<int> ids;
    for (auto const& [key, level] : levels_) {
        if (ids.empty() || ids.back() != key.first) {
            ids.push_back(key.first);
        }
    }
    return ids;
}

int PropertyLabelTable::level_rank(std::string_view level)
{
    if (level == "na") {
        return -1;
    }
    static constexpr std::array<std::string_view, 4> order = {"none", "low", "medium", "high"};
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (order[k] == level) {
            return static_cast<int>(k);
        }
    }
    throw std::invalid_argument("unknown property level '" + std::string(level) + "'");
}

BinaryLabels binarize_labels(PropertyLabelTable const& table, Property p)
{
    BinaryLabels out;
    std::vector<int> ranks;
    for (int fid : table.function_ids()) {
        if (auto level = table.level(fid, p)) {
            out.function_ids.push_back(fid);
            ranks.push_back(PropertyLabelTable::level_rank(*level));
        }
    }
    if (out.function_ids.empty()) {
        throw std::invalid_argument("property '" + std::string(to_string(p)) + "' is not in the label table");
    }
    // "na" rows join the negative class and do not define the lowest level.
    int lowest = std::numeric_limits<int>::max();
    int highest = -1;
    for (int r : ranks) {
        if (r >= 0) {
            lowest = std::min(lowest, r);
            highest = std::max(highest, r);
        }
    }
    out.degenerate = highest < 0 || lowest == highest;
    for (int r : ranks) {
        out.labels.push_back(r > lowest ? 1 : 0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Boosting

double RegressionTree::predict(std::span<const double> x) const
{
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
        auto const& node = nodes[static_cast<std::size_t>(k)];
        k = x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
}

PropertyModel::PropertyModel(Property property, BoostingParams params, std::vector<RegressionTree> trees, Metadata meta)
    : property_(property), params_(params), trees_(std::move(trees)), meta_(meta)
{
}

double PropertyModel::raw_score(std::span<const double> x) const
{
    double s = params_.base_score;
    for (auto const& t : trees_) {
        s += t.predict(x);
    }
    return s;
}

double PropertyModel::predict(StandardizedFeatures const& x) const
{
    if (x.schema_hash != meta_.schema_hash || x.values.size() != meta_.feature_count) {
        throw SchemaMismatch("model for '" + std::string(to_string(property_)) +
                             "' was trained on a different feature schema");
    }
    return std::clamp(raw_score(x.values), 0.0, 1.0);
}

nlohmann::json PropertyModel::to_json() const
{
    nlohmann::json trees = nlohmann::json::array();
    for (auto const& t : trees_) {
        nlohmann::json feature = nlohmann::json::array();
        nlohmann::json threshold = nlohmann::json::array();
        nlohmann::json left = nlohmann::json::array();
        nlohmann::json right = nlohmann::json::array();
        nlohmann::json value = nlohmann::json::array();
        for (auto const& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                         {"value", value}});
    }
    return {
        {"format", "lforge-gbm"},
        {"property", to_string(property_)},
        {"params",
         {{"trees", params_.trees},
          {"max_depth", params_.max_depth},
          {"learning_rate", params_.learning_rate},
          {"lambda", params_.lambda},
          {"min_child_weight", params_.min_child_weight},
          {"gamma", params_.gamma},
          {"base_score", params_.base_score}}},
        {"metadata",
         {{"corpus_hash", hex64(meta_.corpus_hash)},
          {"schema_hash", hex64(meta_.schema_hash)},
          {"schema_version", meta_.schema_version},
          {"seed", meta_.seed},
          {"feature_count", meta_.feature_count}}},
        {"trees", trees},
    };
}

PropertyModel PropertyModel::from_json(nlohmann::json const& j)
{
    if (j.value("format", "") != "lforge-gbm") {
        throw std::invalid_argument("not a property model document");
    }
    auto const& m = j.at("metadata");
    Metadata meta;
    meta.schema_version = m.at("schema_version").get<int>();
    if (meta.schema_version != kFeatureSchemaVersion) {
        throw SchemaMismatch("model schema version " + std::to_string(meta.schema_version) +
                             " differs from library version " + std::to_string(kFeatureSchemaVersion));
    }
    meta.corpus_hash = std::stoull(m.at("corpus_hash").get<std::string>(), nullptr, 16);
    meta.schema_hash = std::stoull(m.at("schema_hash").get<std::string>(), nullptr, 16);
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.feature_count = m.at("feature_count").get<std::size_t>();

    auto const& p = j.at("params");
    BoostingParams params;
    params.trees = p.at("trees").get<int>();
    params.max_depth = p.at("max_depth").get<int>();
    params.learning_rate = p.at("learning_rate").get<double>();
    params.lambda = p.at("lambda").get<double>();
    params.min_child_weight = p.at("min_child_weight").get<double>();
    params.gamma = p.at("gamma").get<double>();
    params.base_score = p.at("base_score").get<double>();

    std::vector<RegressionTree> trees;
    for (auto const& t : j.at("trees")) {
        RegressionTree tree;
        auto const& feature = t.at("feature");
        for (std::size_t k = 0; k < feature.size(); ++k) {
            RegressionTree::Node n;
            n.feature = feature[k].get<int>();
            n.threshold = t.at("threshold")[k].get<double>();
            n.left = t.at("left")[k].get<int>();
            n.right = t.at("right")[k].get<int>();
            n.value = t.at("value")[k].get<double>();
            tree.nodes.push_back(n);
        }
        trees.push_back(std::move(tree));
    }
    return PropertyModel(property_from_string(j.at("property").get<std::string>()), params, std::move(trees), meta);
}

namespace {

struct SplitCandidate {
    double gain = kMinSplitGain;
    int feature = -1;
    double threshold = 0.0;
};

double split_score(double g, double h, double lambda)
{
    return g * g / (h + lambda);
}

/// Grows one tree on gradients `grad` (hessian 1 per row) level by level.
RegressionTree grow_tree(std::vector<std::vector<double>> const& columns,
                         std::vector<std::vector<std::size_t>> const& order, std::vector<double> const& grad,
                         BoostingParams const& params)
{
    std::size_t const n = grad.size();
    std::size_t const p = columns.size();
    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<int> frontier{0};

    auto leaf_value = [&](double g, double h) { return -g / (h + params.lambda) * params.learning_rate; };

    for (int depth = 0; depth <= params.max_depth && !frontier.empty(); ++depth) {
        std::size_t const nodes = tree.nodes.size();
        std::vector<double> g_total(nodes, 0.0);
        std::vector<double> h_total(nodes, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            g_total[static_cast<std::size_t>(node_of[i])] += grad[i];
            h_total[static_cast<std::size_t>(node_of[i])] += 1.0;
        }
        std::vector<char> active(nodes, 0);
        for (int k : frontier) {
            active[static_cast<std::size_t>(k)] = 1;
        }
        std::vector<SplitCandidate> best(nodes);
        if (depth < params.max_depth) {
            std::vector<double> gl(nodes);
            std::vector<double> hl(nodes);
            std::vector<double> prev(nodes);
            std::vector<char> seen(nodes);
            for (std::size_t f = 0; f < p; ++f) {
                std::fill(gl.begin(), gl.end(), 0.0);
                std::fill(hl.begin(), hl.end(), 0.0);
                std::fill(seen.begin(), seen.end(), 0);
                auto const& col = columns[f];
                for (std::size_t i : order[f]) {
                    auto const k = static_cast<std::size_t>(node_of[i]);
                    if (!active[k]) {
                        continue;
                    }
                    double const v = col[i];
                    if (seen[k] && v > prev[k]) {
                        double const hr = h_total[k] - hl[k];
                        if (hl[k] >= params.min_child_weight && hr >= params.min_child_weight) {
                            double const gain = 0.5 * (split_score(gl[k], hl[k], params.lambda) +
                                                       split_score(g_total[k] - gl[k], hr, params.lambda) -
                                                       split_score(g_total[k], h_total[k], params.lambda)) -
                                                params.gamma;
                            if (gain > best[k].gain) {
                                double t = 0.5 * (prev[k] + v);
                                if (!(t > prev[k])) {
                                    t = v;
                                }
                                best[k] = {gain, static_cast<int>(f), t};
                            }
                        }
                    }
                    gl[k] += grad[i];
                    hl[k] += 1.0;
                    prev[k] = v;
                    seen[k] = 1;
                }
            }
        }
        std::vector<int> next;
        for (int k : frontier) {
            auto const ku = static_cast<std::size_t>(k);
            if (best[ku].feature < 0) {
                tree.nodes[ku].value = leaf_value(g_total[ku], h_total[ku]);
                continue;
            }
            int const left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            tree.nodes[ku].feature = best[ku].feature;
            tree.nodes[ku].threshold = best[ku].threshold;
            tree.nodes[ku].left = left;
            tree.nodes[ku].right = left + 1;
            next.push_back(left);
            next.push_back(left + 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto const& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
            if (node.feature >= 0 && active[static_cast<std::size_t>(node_of[i])]) {
                node_of[i] = columns[static_cast<std::size_t>(node.feature)][i] < node.threshold ? node.left
                                                                                                  : node.right;
            }
        }
        frontier = std::move(next);
    }
    return tree;
}

} // namespace

PropertyModel train_property_model(std::span<const StandardizedFeatures> rows, std::span<const int> labels,
                                   Property property, std::uint64_t seed, BoostingParams const& params)
{
    if (rows.size() != labels.size() || rows.empty()) {
        throw std::invalid_argument("train_property_model: rows and labels differ in length or are empty");
    }
    bool has0 = false;
    bool has1 = false;
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw std::invalid_argument("train_property_model: labels must be 0 or 1");
        }
        (l == 0 ? has0 : has1) = true;
    }
    if (!(has0 && has1)) {
        throw std::invalid_argument("train_property_model: labels for '" + std::string(to_string(property)) +
                                    "' contain a single class");
    }
    std::size_t const n = rows.size();
    std::size_t const p = rows.front().values.size();
    std::uint64_t const schema = rows.front().schema_hash;
    std::uint64_t corpus_hash = fnv1a(to_string(property));
    std::vector<std::vector<double>> columns(p, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].schema_hash != schema || rows[i].values.size() != p) {
            throw SchemaMismatch("train_property_model: rows come from different scalers");
        }
        for (std::size_t f = 0; f < p; ++f) {
            columns[f][i] = rows[i].values[f];
            auto const bits = std::bit_cast<std::uint64_t>(rows[i].values[f]);
            corpus_hash = fnv1a(std::string_view(reinterpret_cast<char const*>(&bits), sizeof bits), corpus_hash);
        }
        corpus_hash = fnv1a(labels[i] ? "1" : "0", corpus_hash);
    }
    std::vector<std::vector<std::size_t>> order(p, std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < p; ++f) {
        std::iota(order[f].begin(), order[f].end(), std::size_t{0});
        auto const& col = columns[f];
        std::stable_sort(order[f].begin(), order[f].end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
    }

    std::vector<double> pred(n, params.base_score);
    std::vector<double> grad(n);
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.trees));
    std::vector<double> x(p);
    for (int t = 0; t < params.trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = pred[i] - static_cast<double>(labels[i]);
        }
        RegressionTree tree = grow_tree(columns, order, grad, params);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += tree.predict(rows[i].values);
        }
        trees.push_back(std::move(tree));
    }
    PropertyModel::Metadata meta;
    meta.corpus_hash = corpus_hash;
    meta.schema_hash = schema;
    meta.seed = seed;
    meta.feature_count = p;
    return PropertyModel(property, params, std::move(trees), meta);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("roc_auc: scores and labels differ in length");
    }
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    double pos = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            ++j;
        }
        double const midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) {
                rank_sum += midrank;
                pos += 1.0;
            }
        }
        i = j;
    }
    double const neg = static_cast<double>(scores.size()) - pos;
    if (pos == 0.0 || neg == 0.0) {
        throw std::invalid_argument("roc_auc needs both classes");
    }
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

} // namespace lforge
