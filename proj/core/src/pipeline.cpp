#include "lforge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "lforge/bbob.hpp"
#include "lforge/bundled_data.hpp"
#include "lforge/rng.hpp"
#include "lforge/util.hpp"

namespace fs = std::filesystem;

namespace lforge {

namespace {

constexpr std::array<double, 3> kSweepThresholds = {0.5, 0.9, 0.99};

// ---------------------------------------------------------------------------
// Config reading

/// Reads an object, remembering which keys were consumed so leftovers can
/// be reported as typos.
class Reader {
public:
    Reader(nlohmann::json const& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError(where() + " must be an object");
        }
    }

    bool has(std::string const& key)
    {
        used_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    template <class T>
    T get(std::string const& key, T fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        try {
            return j_.at(key).get<T>();
        } catch (nlohmann::json::exception const&) {
            throw ConfigError(where() + "." + key + " has the wrong type");
        }
    }

    nlohmann::json const& at(std::string const& key)
    {
        used_.insert(key);
        return j_.at(key);
    }

    Reader child(std::string const& key)
    {
        static nlohmann::json const empty = nlohmann::json::object();
        return has(key) ? Reader(j_.at(key), path_ + "." + key) : Reader(empty, path_ + "." + key);
    }

    void finish() const
    {
        for (auto const& [key, value] : j_.items()) {
            if (!used_.contains(key)) {
                throw ConfigError("unknown config key " + path_ + "." + key);
            }
        }
    }

private:
    std::string where() const { return path_; }

    nlohmann::json const& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class T>
void require(bool ok, T const& message)
{
    if (!ok) {
        throw ConfigError(message);
    }
}

// ---------------------------------------------------------------------------
// Files

std::string read_text(fs::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes through a temporary file so readers never see a partial artifact.
void write_text(fs::path const& path, std::string const& content)
{
    fs::create_directories(path.parent_path());
    fs::path const tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
    }
    fs::rename(tmp, path);
}

std::vector<nlohmann::json> read_jsonl(fs::path const& path)
{
    std::vector<nlohmann::json> out;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            out.push_back(nlohmann::json::parse(line));
        }
    }
    return out;
}

void say(std::ostream* log, std::string const& message)
{
    if (log != nullptr) {
        *log << message << '\n';
        log->flush();
    }
}

/// Subdirectories of generate/ in sorted order.
std::vector<fs::path> group_dirs(CampaignConfig const& config)
{
    std::vector<fs::path> out;
    fs::path const root = config.output_dir / "generate";
    if (!fs::exists(root)) {
        return out;
    }
    for (auto const& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool manifest_current(fs::path const& path, std::uint64_t hash)
{
    if (!fs::exists(path)) {
        return false;
    }
    try {
        return nlohmann::json::parse(read_text(path)).value("config_hash", "") == hex64(hash);
    } catch (nlohmann::json::exception const&) {
        return false;
    }
}

double mean_of(std::vector<double> const& v)
{
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v)
{
    if (v.empty()) {
        return std::nan("");
    }
    std::sort(v.begin(), v.end());
    auto const m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

nlohmann::json finite_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

} // namespace

// ---------------------------------------------------------------------------
// CampaignConfig

nlohmann::json CampaignConfig::to_json() const
{
    nlohmann::json remote = {
        {"base_url", generator.remote.base_url},
        {"model", generator.remote.model},
        {"temperature", generator.remote.temperature},
        {"max_tokens", generator.remote.max_tokens},
        {"timeout_s", static_cast<double>(generator.remote.timeout.count()) / 1000.0},
        {"retries", generator.remote.retries},
        {"max_in_flight", generator.remote.max_in_flight},
        {"api_key_env", generator.remote.api_key_env},
    };
    nlohmann::json j = {
        {"name", name},
        {"output_dir", output_dir.string()},
        {"seed", seed},
        {"corpus", {{"functions", corpus.functions}, {"instances", corpus.instances}, {"dims", corpus.dims}}},
        {"features",
         {{"sampler", to_string(features.sampler)},
          {"sample_factor", features.sample_factor},
          {"repetitions", features.repetitions},
          {"max_missing_fraction", max_missing_fraction},
          {"ic_levels", features.options.ic_levels}}},
        {"boosting",
         {{"trees", boosting.trees},
          {"max_depth", boosting.max_depth},
          {"learning_rate", boosting.learning_rate},
          {"lambda", boosting.lambda},
          {"min_child_weight", boosting.min_child_weight}}},
        {"separability",
         {{"samples", separability.samples},
          {"step_fraction", separability.step_fraction},
          {"tolerance", separability.tolerance},
          {"pair_budget", separability.pair_budget},
          {"combine", separability.combine == ViolationCombine::Max ? "max" : "mean"}}},
        {"engine",
         {{"mu", engine.mu},
          {"lambda", engine.lambda},
          {"max_generations", engine.max_generations},
          {"sharing", engine.sharing},
          {"expr_dim", engine.expr_dim},
          {"max_nodes", engine.limits.max_nodes},
          {"max_depth", engine.limits.max_depth},
          {"target_fitness", engine.target_fitness ? nlohmann::json(*engine.target_fitness) : nlohmann::json(nullptr)}}},
        {"generator", {{"kind", generator.kind}, {"remote", remote}}},
        {"groups", groups},
        {"problems_per_group", problems_per_group},
        {"retention_threshold", retention_threshold},
        {"verify",
         {{"resolution", verify.resolution},
          {"contrast_samples", verify.contrast_samples},
          {"include_bbob", verify.include_bbob}}},
        {"embed",
         {{"perplexity", embed.tsne.perplexity},
          {"iterations", embed.tsne.iterations},
          {"learning_rate", embed.tsne.learning_rate},
          {"k", embed.k}}},
        {"workers", workers},
    };
    if (models_dir) {
        j["models_dir"] = models_dir->string();
    }
    return j;
}

std::uint64_t CampaignConfig::hash() const
{
    nlohmann::json j = to_json();
    j.erase("output_dir");
    j.erase("models_dir");
    j.erase("workers");
    return fnv1a(j.dump());
}

fs::path CampaignConfig::train_dir() const
{
    return models_dir ? *models_dir : output_dir / "train";
}

CampaignConfig CampaignConfig::from_json(nlohmann::json const& j)
{
    CampaignConfig c;
    Reader r(j, "config");
    c.name = r.get<std::string>("name", c.name);
    c.output_dir = r.get<std::string>("output_dir", "runs/" + c.name);
    if (r.has("models_dir")) {
        c.models_dir = r.get<std::string>("models_dir", "");
    }
    c.seed = r.get<std::uint64_t>("seed", c.seed);

    {
        Reader k = r.child("corpus");
        std::vector<int> all(bbob::kFunctionCount);
        std::iota(all.begin(), all.end(), 1);
        c.corpus.functions = k.get<std::vector<int>>("functions", all);
        c.corpus.instances = k.get<std::size_t>("instances", c.corpus.instances);
        c.corpus.dims = k.get<std::vector<std::size_t>>("dims", c.corpus.dims);
        k.finish();
        for (int f : c.corpus.functions) {
            require(f >= 1 && f <= bbob::kFunctionCount, "corpus.functions must lie in 1..24");
        }
        require(!c.corpus.functions.empty() && c.corpus.instances >= 1, "corpus needs functions and instances");
        require(!c.corpus.dims.empty(), "corpus.dims must not be empty");
        for (auto d : c.corpus.dims) {
            require(d >= 1, "corpus.dims entries must be positive");
        }
    }
    {
        Reader k = r.child("features");
        try {
            c.features.sampler = sampler_kind_from_string(k.get<std::string>("sampler", "latin_hypercube"));
        } catch (std::invalid_argument const& e) {
            throw ConfigError(std::string("features.sampler: ") + e.what());
        }
        c.features.sample_factor = k.get<std::size_t>("sample_factor", c.features.sample_factor);
        c.features.repetitions = k.get<std::size_t>("repetitions", c.features.repetitions);
        c.max_missing_fraction = k.get<double>("max_missing_fraction", c.max_missing_fraction);
        c.features.options.ic_levels = k.get<std::size_t>("ic_levels", c.features.options.ic_levels);
        k.finish();
        require(c.features.sampler != SamplerKind::Grid, "features.sampler must be latin_hypercube or uniform");
        require(c.features.sample_factor >= 2 && c.features.repetitions >= 1,
                "features needs sample_factor >= 2 and repetitions >= 1");
        require(c.max_missing_fraction >= 0.0 && c.max_missing_fraction < 1.0,
                "features.max_missing_fraction must lie in [0, 1)");
        require(c.features.options.ic_levels >= 2, "features.ic_levels must be at least 2");
    }
    c.features.seed = derive_seed(c.seed, {0xfea7});
    {
        Reader k = r.child("boosting");
        c.boosting.trees = k.get<int>("trees", c.boosting.trees);
        c.boosting.max_depth = k.get<int>("max_depth", c.boosting.max_depth);
        c.boosting.learning_rate = k.get<double>("learning_rate", c.boosting.learning_rate);
        c.boosting.lambda = k.get<double>("lambda", c.boosting.lambda);
        c.boosting.min_child_weight = k.get<double>("min_child_weight", c.boosting.min_child_weight);
        k.finish();
        require(c.boosting.trees >= 1 && c.boosting.max_depth >= 1 && c.boosting.learning_rate > 0.0 &&
                    c.boosting.lambda >= 0.0,
                "boosting parameters out of range");
    }
    {
        Reader k = r.child("separability");
        c.separability.samples = k.get<std::size_t>("samples", c.separability.samples);
        c.separability.step_fraction = k.get<double>("step_fraction", c.separability.step_fraction);
        c.separability.tolerance = k.get<double>("tolerance", c.separability.tolerance);
        c.separability.pair_budget = k.get<std::size_t>("pair_budget", c.separability.pair_budget);
        auto const combine = k.get<std::string>("combine", "max");
        require(combine == "max" || combine == "mean", "separability.combine must be max or mean");
        c.separability.combine = combine == "max" ? ViolationCombine::Max : ViolationCombine::Mean;
        k.finish();
        try {
            c.separability.validate();
        } catch (std::invalid_argument const& e) {
            throw ConfigError(e.what());
        }
    }
    c.separability.seed = derive_seed(c.seed, {0x5e9a});
    {
        Reader k = r.child("engine");
        c.engine.mu = k.get<std::size_t>("mu", c.engine.mu);
        c.engine.lambda = k.get<std::size_t>("lambda", c.engine.lambda);
        c.engine.max_generations = k.get<std::size_t>("max_generations", c.engine.max_generations);
        c.engine.sharing = k.get<bool>("sharing", c.engine.sharing);
        c.engine.expr_dim = k.get<std::size_t>("expr_dim", c.engine.expr_dim);
        c.engine.limits.max_nodes = k.get<std::size_t>("max_nodes", c.engine.limits.max_nodes);
        c.engine.limits.max_depth = k.get<std::size_t>("max_depth", c.engine.limits.max_depth);
        if (k.has("target_fitness")) {
            c.engine.target_fitness = k.get<double>("target_fitness", 1.0);
        }
        k.finish();
    }
    c.engine.dims = c.corpus.dims;
    c.engine.seed = c.seed;
    try {
        c.engine.validate();
    } catch (std::invalid_argument const& e) {
        throw ConfigError(e.what());
    }
    for (auto d : c.corpus.dims) {
        require(d >= c.engine.expr_dim, "corpus.dims entries must be at least engine.expr_dim");
    }
    {
        Reader k = r.child("generator");
        c.generator.kind = k.get<std::string>("kind", c.generator.kind);
        require(c.generator.kind == "offline" || c.generator.kind == "remote", "generator.kind must be offline or remote");
        Reader rem = k.child("remote");
        auto& rc = c.generator.remote;
        rc.base_url = rem.get<std::string>("base_url", rc.base_url);
        rc.model = rem.get<std::string>("model", rc.model);
        rc.temperature = rem.get<double>("temperature", rc.temperature);
        rc.max_tokens = rem.get<std::size_t>("max_tokens", rc.max_tokens);
        rc.timeout = std::chrono::milliseconds(
            static_cast<long long>(rem.get<double>("timeout_s", static_cast<double>(rc.timeout.count()) / 1000.0) * 1000.0));
        rc.retries = rem.get<int>("retries", rc.retries);
        rc.max_in_flight = rem.get<std::size_t>("max_in_flight", rc.max_in_flight);
        rc.api_key_env = rem.get<std::string>("api_key_env", rc.api_key_env);
        rem.finish();
        k.finish();
        if (c.generator.kind == "remote") {
            require(!rc.base_url.empty() && !rc.model.empty(), "generator.remote needs base_url and model");
            require(rc.base_url.find("://") != std::string::npos, "generator.remote.base_url needs a scheme");
        }
        require(rc.retries >= 0 && rc.max_in_flight >= 1, "generator.remote retries/max_in_flight out of range");
    }
    if (r.has("groups") && r.at("groups").is_array()) {
        c.groups = r.get<std::vector<std::string>>("groups", {});
    } else {
        auto const all = r.get<std::string>("groups", "all");
        require(all == "all", "groups must be \"all\" or a list of group names");
    }
    if (c.groups.empty()) {
        for (auto const& spec : enumerate_target_groups()) {
            c.groups.push_back(spec.name());
        }
    }
    for (auto const& g : c.groups) {
        try {
            TargetSpec::from_name(g);
        } catch (std::invalid_argument const& e) {
            throw ConfigError("groups: '" + g + "': " + e.what());
        }
    }
    c.problems_per_group = r.get<std::size_t>("problems_per_group", c.problems_per_group);
    c.retention_threshold = r.get<double>("retention_threshold", c.retention_threshold);
    require(c.problems_per_group >= 1, "problems_per_group must be positive");
    require(c.retention_threshold >= 0.0 && c.retention_threshold < 1.0, "retention_threshold must lie in [0, 1)");
    {
        Reader k = r.child("verify");
        c.verify.resolution = k.get<std::size_t>("resolution", c.verify.resolution);
        c.verify.contrast_samples = k.get<std::size_t>("contrast_samples", c.verify.contrast_samples);
        c.verify.include_bbob = k.get<bool>("include_bbob", c.verify.include_bbob);
        k.finish();
        require(c.verify.resolution >= 3 && c.verify.contrast_samples >= 1, "verify parameters out of range");
    }
    {
        Reader k = r.child("embed");
        c.embed.tsne.perplexity = k.get<double>("perplexity", c.embed.tsne.perplexity);
        c.embed.tsne.iterations = k.get<std::size_t>("iterations", c.embed.tsne.iterations);
        c.embed.tsne.learning_rate = k.get<double>("learning_rate", c.embed.tsne.learning_rate);
        c.embed.k = k.get<std::size_t>("k", c.embed.k);
        k.finish();
        require(c.embed.tsne.perplexity > 0.0 && c.embed.k >= 1, "embed parameters out of range");
    }
    c.embed.tsne.seed = derive_seed(c.seed, {0xe3b});
    c.workers = r.get<std::size_t>("workers", c.workers);
    c.engine.workers = c.workers;
    r.finish();
    return c;
}

CampaignConfig CampaignConfig::load(fs::path const& path)
{
    std::string text;
    try {
        text = read_text(path);
    } catch (std::runtime_error const& e) {
        throw ConfigError(e.what());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (nlohmann::json::parse_error const& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------------------
// Scoring

Assessment assess_expression(ScoringContext const& ctx, ExprTree const& tree)
{
    Assessment a;
    std::vector<FeatureVector> parts;
    double sep_p = 0.0;
    double sep_c = 0.0;
    double sep_s = 0.0;
    std::size_t sep_n = 0;
    for (std::size_t d : ctx.dims) {
        ObjectiveFunction const f = make_expr_function(tree, Domain::box(d, ctx.lower, ctx.upper));
        try {
            parts.push_back(averaged_features(f, ctx.averaging));
            if (d >= 2) {
                auto const s = separability_score(f, ctx.separability);
                sep_p += s.p;
                sep_c += s.cross_violation;
                sep_s += s.superposition_violation;
                ++sep_n;
            }
        } catch (DegenerateFunction const& e) {
            a.failure_stage = "features";
            a.failure = e.what();
            return a;
        } catch (DomainError const& e) {
            a.failure_stage = "evaluation";
            a.failure = e.what();
            return a;
        }
    }
    FeatureVector all = concat_features(parts);
    try {
        a.features = ctx.scaler.standardize(all);
        for (auto const& [p, model] : ctx.models) {
            a.scores[p] = model.predict(*a.features);
        }
    } catch (SchemaMismatch const& e) {
        a.features.reset();
        a.scores.clear();
        a.failure_stage = "scoring";
        a.failure = e.what();
        return a;
    }
    SeparabilityResult sep;
    if (sep_n > 0) {
        auto const n = static_cast<double>(sep_n);
        sep.p = sep_p / n;
        sep.cross_violation = sep_c / n;
        sep.superposition_violation = sep_s / n;
    } else {
        sep.note = "one-dimensional function is trivially separable";
    }
    a.scores[Property::Separability] = sep.p;
    a.separability = sep;
    a.raw_features = std::move(all);
    return a;
}

Assessor make_assessor(std::shared_ptr<const ScoringContext> ctx)
{
    return [ctx = std::move(ctx)](ExprTree const& tree) { return assess_expression(*ctx, tree); };
}

FeatureVector bbob_features(int function_id, int instance_id, std::vector<std::size_t> const& dims,
                            AveragingConfig const& averaging)
{
    std::vector<FeatureVector> parts;
    for (std::size_t d : dims) {
        auto const problem = bbob::instantiate(function_id, instance_id, d);
        AveragingConfig cfg = averaging;
        cfg.seed = derive_seed(averaging.seed, {static_cast<std::uint64_t>(function_id),
                                                static_cast<std::uint64_t>(instance_id), d});
        parts.push_back(averaged_features(problem.function, cfg));
    }
    return concat_features(parts);
}

TrainingResult train_corpus(CampaignConfig const& config, std::ostream* log)
{
    TrainingResult out;
    for (int fid : config.corpus.functions) {
        for (std::size_t iid = 1; iid <= config.corpus.instances; ++iid) {
            out.ids.push_back("f" + std::to_string(fid) + "_i" + std::to_string(iid));
            out.function_ids.push_back(fid);
        }
    }
    out.rows.resize(out.ids.size());
    say(log, "computing features for " + std::to_string(out.rows.size()) + " BBOB problems");
    std::size_t const instances = config.corpus.instances;
    parallel_for(out.rows.size(), config.workers, [&](std::size_t k) {
        out.rows[k] = bbob_features(out.function_ids[k], static_cast<int>(k % instances + 1), config.corpus.dims,
                                    config.features);
    });
    out.scaler = FeatureScaler::fit(out.rows, config.max_missing_fraction);
    say(log, "scaler keeps " + std::to_string(out.scaler.columns().size()) + " features, drops " +
                 std::to_string(out.scaler.dropped().size()));
    std::vector<StandardizedFeatures> x;
    x.reserve(out.rows.size());
    for (auto const& row : out.rows) {
        x.push_back(out.scaler.standardize(row));
    }
    auto const& table = PropertyLabelTable::bundled();
    for (Property p : kLearnedProperties) {
        auto const bin = binarize_labels(table, p);
        std::map<int, int> by_function;
        for (std::size_t k = 0; k < bin.function_ids.size(); ++k) {
            by_function[bin.function_ids[k]] = bin.labels[k];
        }
        std::vector<int> labels;
        for (int fid : out.function_ids) {
            auto it = by_function.find(fid);
            if (it == by_function.end()) {
                throw std::runtime_error("label table has no " + std::string(to_string(p)) + " level for f" +
                                         std::to_string(fid));
            }
            labels.push_back(it->second);
        }
        auto model = train_property_model(x, labels, p, derive_seed(config.seed, {static_cast<std::uint64_t>(p)}),
                                          config.boosting);
        std::vector<double> scores;
        for (auto const& row : x) {
            scores.push_back(model.predict(row));
        }
        out.auc[p] = roc_auc(scores, labels);
        say(log, "trained " + std::string(to_string(p)) + " model, in-sample AUC " + format_double(out.auc[p]));
        out.models.emplace(p, std::move(model));
        out.labels.emplace(p, bin);
    }
    return out;
}

std::shared_ptr<ScoringContext> load_scoring_context(CampaignConfig const& config)
{
    fs::path const dir = config.train_dir();
    if (!fs::exists(dir / "scaler.json")) {
        throw std::runtime_error("no trained models in " + dir.string() + "; run train first");
    }
    auto ctx = std::make_shared<ScoringContext>();
    ctx->scaler = FeatureScaler::from_json(nlohmann::json::parse(read_text(dir / "scaler.json")));
    for (Property p : kLearnedProperties) {
        fs::path const path = dir / "models" / (std::string(to_string(p)) + ".json");
        ctx->models.emplace(p, PropertyModel::from_json(nlohmann::json::parse(read_text(path))));
    }
    ctx->averaging = config.features;
    ctx->dims = config.corpus.dims;
    ctx->separability = config.separability;
    return ctx;
}

bool passes_retention(Individual const& ind, TargetSpec const& spec, double threshold)
{
    if (!ind.assessment.ok() || !(ind.raw_fitness > threshold)) {
        return false;
    }
    for (auto const& t : spec.targets) {
        auto it = ind.assessment.scores.find(t.property);
        if (it == ind.assessment.scores.end() || !(polarity_adjusted({it->second, t.polarity}) > threshold)) {
            return false;
        }
    }
    return true;
}

std::string embedding_group(TargetSpec const& spec)
{
    auto present = [&](Property p) {
        return std::any_of(spec.targets.begin(), spec.targets.end(),
                           [&](Target const& t) { return t.property == p && t.polarity == Polarity::Present; });
    };
    bool const bsh = present(Property::BasinSizeHomogeneity);
    bool const glc = present(Property::GlobalLocalContrast);
    if (bsh && !glc) {
        return "homogeneous_basin";
    }
    if (glc && !bsh) {
        return "non_homogeneous_basin";
    }
    if (!bsh && !glc && !present(Property::Multimodality)) {
        return "other";
    }
    return "unassigned";
}

std::string embedding_group_for_bbob(int function_id)
{
    auto const& table = PropertyLabelTable::bundled();
    auto label = [&](Property p) {
        auto const bin = binarize_labels(table, p);
        for (std::size_t k = 0; k < bin.function_ids.size(); ++k) {
            if (bin.function_ids[k] == function_id) {
                return bin.labels[k] == 1;
            }
        }
        return false;
    };
    bool const bsh = label(Property::BasinSizeHomogeneity);
    bool const glc = label(Property::GlobalLocalContrast);
    if (bsh && !glc) {
        return "homogeneous_basin";
    }
    if (glc && !bsh) {
        return "non_homogeneous_basin";
    }
    if (!bsh && !glc && !label(Property::Multimodality)) {
        return "other";
    }
    return "unassigned";
}

// ---------------------------------------------------------------------------
// Commands

void cmd_train(CampaignConfig const& config, CommandOptions const& options)
{
    fs::path const dir = config.output_dir / "train";
    std::uint64_t const hash = config.hash();
    if (!options.force && manifest_current(dir / "manifest.json", hash)) {
        say(options.log, "train: artifacts in " + dir.string() + " are up to date");
        return;
    }
    auto const result = train_corpus(config, options.log);

    std::map<std::string, std::string> files;
    {
        std::ostringstream csv;
        write_feature_table(csv, result.ids, result.rows);
        files["features.csv"] = csv.str();
    }
    files["scaler.json"] = result.scaler.to_json().dump(2) + "\n";
    {
        std::ostringstream labels;
        labels << "id,function_id";
        for (Property p : kLearnedProperties) {
            labels << ',' << to_string(p);
        }
        labels << '\n';
        for (std::size_t k = 0; k < result.ids.size(); ++k) {
            labels << result.ids[k] << ',' << result.function_ids[k];
            for (Property p : kLearnedProperties) {
                auto const& bin = result.labels.at(p);
                auto it = std::find(bin.function_ids.begin(), bin.function_ids.end(), result.function_ids[k]);
                labels << ',' << bin.labels[static_cast<std::size_t>(it - bin.function_ids.begin())];
            }
            labels << '\n';
        }
        files["labels.csv"] = labels.str();
    }
    for (auto const& [p, model] : result.models) {
        files["models/" + std::string(to_string(p)) + ".json"] = model.to_json().dump() + "\n";
    }
    nlohmann::json manifest = {
        {"config_hash", hex64(hash)},
        {"seed", config.seed},
        {"schema_version", kFeatureSchemaVersion},
        {"schema_hash", hex64(result.scaler.schema_hash())},
        {"rows", result.rows.size()},
        {"dims", config.corpus.dims},
    };
    manifest["bbob_seeding"]["scheme"] = "derive_seed(salt, {function_id, instance_id, dim})";
    manifest["bbob_seeding"]["salt"] = hex64(bbob::kSeedSalt);
    for (auto const& [name, content] : files) {
        write_text(dir / name, content);
        manifest["files"][name] = hex64(fnv1a(content));
    }
    for (auto const& [p, auc] : result.auc) {
        manifest["auc"][std::string(to_string(p))] = auc;
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    say(options.log, "train: wrote " + dir.string());
}

void cmd_generate(CampaignConfig const& config, CommandOptions const& options)
{
    auto const ctx = load_scoring_context(config);
    Assessor const assessor = make_assessor(ctx);
    std::uint64_t const hash = config.hash();

    std::unique_ptr<Generator> generator;
    if (config.generator.kind == "remote") {
        RemoteConfig rc = config.generator.remote;
        rc.debug_log = options.llm_log;
        generator = std::make_unique<RemoteGenerator>(rc);
    } else {
        generator = std::make_unique<OfflineGenerator>();
    }

    std::vector<std::string> groups = config.groups;
    if (options.group) {
        try {
            TargetSpec::from_name(*options.group);
        } catch (std::invalid_argument const& e) {
            throw ConfigError("--group '" + *options.group + "': " + e.what());
        }
        groups = {*options.group};
    }
    std::string const prompt_template(bundled_prompt_template());
    for (auto const& group : groups) {
        TargetSpec const spec = TargetSpec::from_name(group);
        fs::path const dir = config.output_dir / "generate" / group;
        if (!options.force && manifest_current(dir / "done.json", hash)) {
            say(options.log, "generate: " + group + " is up to date");
            continue;
        }
        fs::create_directories(dir);
        EngineConfig ec = config.engine;
        ec.seed = derive_seed(config.seed, {fnv1a(group)});

        std::ostringstream audit;
        Engine engine(ec, spec, *generator, assessor, prompt_template);
        engine.set_audit_sink([&](nlohmann::json const& rec) {
            nlohmann::json r = rec;
            r["config_hash"] = hex64(hash);
            r["seed"] = ec.seed;
            audit << r.dump() << '\n';
        });

        std::vector<Individual const*> retained;
        std::set<std::string> seen;
        std::size_t scanned = 0;
        auto collect = [&](Engine const& e) {
            auto const& hist = e.history();
            for (; scanned < hist.size() && retained.size() < config.problems_per_group; ++scanned) {
                auto const& ind = hist[scanned];
                if (passes_retention(ind, spec, config.retention_threshold) && seen.insert(ind.expr).second) {
                    retained.push_back(&ind);
                }
            }
            return retained.size() >= config.problems_per_group;
        };
        say(options.log, "generate: " + group);
        try {
            engine.run([&](Engine const& e) {
                retained.clear();
                seen.clear();
                scanned = 0;
                return collect(e);
            });
        } catch (UpstreamFailure const&) {
            write_text(dir / "audit.jsonl", audit.str());
            throw;
        }
        retained.clear();
        seen.clear();
        scanned = 0;
        collect(engine);

        std::ostringstream library;
        std::vector<std::string> ids;
        std::vector<FeatureVector> rows;
        for (auto const* ind : retained) {
            if (!passes_retention(*ind, spec, config.retention_threshold)) {
                throw std::logic_error("retention invariant violated for " + ind->expr);
            }
            std::string const id = group + "-" + std::to_string(ind->lineage);
            nlohmann::json scores = nlohmann::json::object();
            for (auto const& [p, s] : ind->assessment.scores) {
                scores[std::string(to_string(p))] = s;
            }
            nlohmann::json rec = {
                {"id", id},
                {"group", group},
                {"category", to_string(spec.category)},
                {"expr", ind->expr},
                {"expr_dim", ec.expr_dim},
                {"dims", ec.dims},
                {"scores", scores},
                {"raw_fitness", ind->raw_fitness},
                {"shared_fitness", ind->shared_fitness},
                {"generation", ind->generation},
                {"lineage", ind->lineage},
                {"retained", true},
                {"provenance",
                 {{"seed", ec.seed},
                  {"generator", generator->name()},
                  {"origin", ind->origin},
                  {"prompt_version", kPromptTemplateVersion},
                  {"grammar_version", kGrammarVersion},
                  {"schema_version", kFeatureSchemaVersion},
                  {"config_hash", hex64(hash)}}},
            };
            if (ind->assessment.separability) {
                rec["separability"] = {{"p", ind->assessment.separability->p},
                                       {"cross_violation", ind->assessment.separability->cross_violation},
                                       {"superposition_violation",
                                        ind->assessment.separability->superposition_violation}};
            }
            library << rec.dump() << '\n';
            ids.push_back(id);
            rows.push_back(*ind->assessment.raw_features);
        }
        std::ostringstream features;
        write_feature_table(features, ids, rows);
        write_text(dir / "audit.jsonl", audit.str());
        write_text(dir / "library.jsonl", library.str());
        write_text(dir / "features.csv", features.str());
        nlohmann::json done = {
            {"config_hash", hex64(hash)},
            {"seed", ec.seed},
            {"generations", engine.generations()},
            {"candidates", engine.history().size()},
            {"retained", retained.size()},
            {"quota", config.problems_per_group},
            {"quota_met", retained.size() >= config.problems_per_group},
        };
        write_text(dir / "done.json", done.dump(2) + "\n");
        say(options.log, "generate: " + group + " retained " + std::to_string(retained.size()) + " of " +
                             std::to_string(engine.history().size()) + " candidates in " +
                             std::to_string(engine.generations()) + " generations");
    }
}

namespace {

struct VerifyRow {
    std::string id;
    std::string group;
    std::string expr;
    std::size_t basins = 0;
    double contrast = std::nan("");
    std::string contrast_note;
    double ratio = std::nan("");
    std::string ratio_note;
    double separability = std::nan("");
    std::string error;
};

} // namespace

void cmd_verify(CampaignConfig const& config, CommandOptions const& options)
{
    struct Entry {
        std::string id;
        std::string group;
        std::string expr;
        std::size_t expr_dim = 2;
        int bbob_function = 0;
    };
    std::vector<Entry> entries;
    std::vector<fs::path> libraries;
    if (options.library) {
        libraries.push_back(*options.library);
    } else {
        for (auto const& dir : group_dirs(config)) {
            if (fs::exists(dir / "library.jsonl")) {
                libraries.push_back(dir / "library.jsonl");
            }
        }
    }
    for (auto const& lib : libraries) {
        for (auto const& rec : read_jsonl(lib)) {
            entries.push_back({rec.at("id").get<std::string>(), rec.at("group").get<std::string>(),
                               rec.at("expr").get<std::string>(), rec.value("expr_dim", std::size_t{2}), 0});
        }
    }
    if (config.verify.include_bbob) {
        for (int fid = 1; fid <= bbob::kFunctionCount; ++fid) {
            entries.push_back({"f" + std::to_string(fid) + "_i1", "bbob", std::string(bbob::function_name(fid)), 2, fid});
        }
    }
    if (entries.empty()) {
        throw std::runtime_error("verify: the library is empty");
    }
    say(options.log, "verify: " + std::to_string(entries.size()) + " problems at resolution " +
                         std::to_string(config.verify.resolution));

    std::vector<VerifyRow> rows(entries.size());
    Domain const box = Domain::box(2, -bbob::kBound, bbob::kBound);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        auto const& e = entries[k];
        VerifyRow& row = rows[k];
        row.id = e.id;
        row.group = e.group;
        row.expr = e.expr;
        try {
            ObjectiveFunction const f = e.bbob_function > 0
                                            ? bbob::instantiate(e.bbob_function, 1, 2).function
                                            : make_expr_function(parse(e.expr, e.expr_dim), box, e.id);
            BasinMap const map = assign_basins(f, config.verify.resolution, config.workers);
            row.basins = count_basins(map);
            try {
                row.contrast = optima_contrast(map, f, config.verify.contrast_samples,
                                               derive_seed(config.seed, {0xc0, k}));
            } catch (UndefinedMetric const& u) {
                row.contrast_note = u.what();
            }
            try {
                row.ratio = basin_size_ratio(map);
            } catch (UndefinedMetric const& u) {
                row.ratio_note = u.what();
            }
            row.separability = separability_score(f, config.separability).p;
        } catch (std::exception const& ex) {
            row.error = ex.what();
        }
    }

    std::ostringstream report;
    report << "id,group,expr,basins,optima_contrast,contrast_note,basin_size_ratio,ratio_note,separability,error\n";
    for (auto const& r : rows) {
        report << csv_cell(r.id) << ',' << csv_cell(r.group) << ',' << csv_cell(r.expr) << ','
               << (r.error.empty() ? std::to_string(r.basins) : "NA") << ',' << format_double(r.contrast) << ','
               << csv_cell(r.contrast_note) << ',' << format_double(r.ratio) << ',' << csv_cell(r.ratio_note) << ','
               << format_double(r.separability) << ',' << csv_cell(r.error) << '\n';
    }

    std::map<std::string, std::map<std::string, std::vector<double>>> metric_values;
    for (auto const& r : rows) {
        if (!r.error.empty()) {
            continue;
        }
        metric_values["basins"][r.group].push_back(static_cast<double>(r.basins));
        if (std::isfinite(r.contrast)) {
            metric_values["optima_contrast"][r.group].push_back(r.contrast);
        }
        if (std::isfinite(r.ratio)) {
            metric_values["basin_size_ratio"][r.group].push_back(r.ratio);
        }
    }
    std::ostringstream tests;
    tests << "metric,group_a,group_b,n_a,n_b,u,p,exact\n";
    for (auto const& [metric, by_group] : metric_values) {
        for (auto a = by_group.begin(); a != by_group.end(); ++a) {
            for (auto b = std::next(a); b != by_group.end(); ++b) {
                auto const mw = mann_whitney_u(a->second, b->second);
                tests << metric << ',' << csv_cell(a->first) << ',' << csv_cell(b->first) << ',' << a->second.size()
                      << ',' << b->second.size() << ',' << format_double(mw.u) << ',' << format_double(mw.p) << ','
                      << (mw.exact ? 1 : 0) << '\n';
            }
        }
    }
    fs::path const dir = config.output_dir / "verify";
    write_text(dir / "report.csv", report.str());
    write_text(dir / "tests.csv", tests.str());
    nlohmann::json summary = {{"config_hash", hex64(config.hash())},
                              {"seed", config.seed},
                              {"rows", rows.size()},
                              {"resolution", config.verify.resolution}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    say(options.log, "verify: wrote " + dir.string());
}

void cmd_embed(CampaignConfig const& config, CommandOptions const& options)
{
    struct Source {
        std::string name;
        FeatureTable table;
        std::vector<std::string> groups;
        std::string target;
    };
    std::vector<Source> sources;
    fs::path const train_features = config.train_dir() / "features.csv";
    if (fs::exists(train_features)) {
        std::istringstream in(read_text(train_features));
        Source s{"bbob", read_feature_table(in), {}, ""};
        for (auto const& id : s.table.ids) {
            s.groups.push_back(embedding_group_for_bbob(std::stoi(id.substr(1, id.find('_') - 1))));
        }
        sources.push_back(std::move(s));
    }
    for (auto const& dir : group_dirs(config)) {
        if (!fs::exists(dir / "features.csv")) {
            continue;
        }
        std::istringstream in(read_text(dir / "features.csv"));
        std::string const target = dir.filename().string();
        Source s{"generated", read_feature_table(in), {}, target};
        if (s.table.rows.empty()) {
            continue;
        }
        s.groups.assign(s.table.rows.size(), embedding_group(TargetSpec::from_name(target)));
        sources.push_back(std::move(s));
    }
    if (sources.size() < 2) {
        throw std::runtime_error("embed needs at least two feature sources (training corpus and a generated group)");
    }
    std::vector<FeatureVector> all;
    std::vector<std::string> ids;
    std::vector<std::string> src;
    std::vector<std::string> grp;
    std::vector<std::string> tgt;
    for (auto const& s : sources) {
        if (!all.empty() && !s.table.rows.empty() && s.table.rows.front().names != all.front().names) {
            throw SchemaMismatch("embed: feature tables have different schemas");
        }
        for (std::size_t k = 0; k < s.table.rows.size(); ++k) {
            all.push_back(s.table.rows[k]);
            ids.push_back(s.table.ids[k]);
            src.push_back(s.name);
            grp.push_back(s.groups[k]);
            tgt.push_back(s.target);
        }
    }
    auto const scaler = FeatureScaler::fit(all, config.max_missing_fraction);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(all.size()), static_cast<Eigen::Index>(scaler.columns().size()));
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto const z = scaler.standardize(all[i]);
        for (std::size_t c = 0; c < z.values.size(); ++c) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = z.values[c];
        }
    }
    say(options.log, "embed: t-SNE of " + std::to_string(all.size()) + " vectors with " +
                         std::to_string(x.cols()) + " features");
    auto const emb = tsne_embed(x, config.embed.tsne);
    double const trust = trustworthiness(x, emb.coordinates, config.embed.k);

    std::ostringstream csv;
    csv << "id,source,group,target,x,y\n";
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto const r = static_cast<Eigen::Index>(i);
        csv << csv_cell(ids[i]) << ',' << src[i] << ',' << grp[i] << ',' << csv_cell(tgt[i]) << ','
            << format_double(emb.coordinates(r, 0)) << ',' << format_double(emb.coordinates(r, 1)) << '\n';
    }
    fs::path const dir = config.output_dir / "embed";
    write_text(dir / "embedding.csv", csv.str());
    nlohmann::json summary = {
        {"config_hash", hex64(config.hash())},
        {"seed", config.embed.tsne.seed},
        {"rows", all.size()},
        {"features", x.cols()},
        {"perplexity", emb.perplexity},
        {"iterations", config.embed.tsne.iterations},
        {"learning_rate", config.embed.tsne.learning_rate},
        {"kl_divergence", emb.kl_divergence},
        {"k", config.embed.k},
        {"trustworthiness", trust},
    };
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    say(options.log, "embed: trustworthiness(k=" + std::to_string(config.embed.k) + ") = " + format_double(trust));
}

void cmd_report(CampaignConfig const& config, CommandOptions const& options)
{
    auto const dirs = group_dirs(config);
    std::vector<fs::path> audited;
    for (auto const& d : dirs) {
        if (fs::exists(d / "audit.jsonl")) {
            audited.push_back(d);
        }
    }
    if (audited.empty()) {
        throw std::runtime_error("report: no generation artifacts under " + (config.output_dir / "generate").string());
    }

    // Optional verification results keyed by record id.
    std::map<std::string, double> contrast_by_id;
    fs::path const verify_report = config.output_dir / "verify" / "report.csv";
    if (fs::exists(verify_report)) {
        std::istringstream in(read_text(verify_report));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            auto const cells = split_csv_line(line);
            if (cells.size() >= 5) {
                double const c = parse_double(cells[4]);
                if (std::isfinite(c)) {
                    contrast_by_id[cells[0]] = c;
                }
            }
        }
    }

    nlohmann::json summary = {{"config_hash", hex64(config.hash())}, {"seed", config.seed}};
    std::ostringstream csv;
    csv << "group,cycles,valid,success_rate,raw_success_rate,retained,retention_ratio";
    for (double t : kSweepThresholds) {
        csv << ",fraction_ge_" << format_double(t);
    }
    csv << '\n';
    for (auto const& dir : audited) {
        std::string const group = dir.filename().string();
        auto const records = read_jsonl(dir / "audit.jsonl");
        std::size_t valid = 0;
        std::size_t shared_success = 0;
        std::size_t raw_success = 0;
        std::vector<double> raw;
        std::map<std::string, std::array<std::size_t, 10>> histograms;
        for (auto const& rec : records) {
            double const f = rec.at("raw_fitness").get<double>();
            double const fs_ = rec.at("shared_fitness").get<double>();
            if (f < 0.0) {
                continue;
            }
            ++valid;
            raw.push_back(f);
            shared_success += fs_ > 0.5 ? 1 : 0;
            raw_success += f > 0.5 ? 1 : 0;
            for (auto const& [name, score] : rec.at("scores").items()) {
                auto const bin = std::min<std::size_t>(9, static_cast<std::size_t>(score.get<double>() * 10.0));
                ++histograms[name][bin];
            }
        }
        std::vector<nlohmann::json> library;
        if (fs::exists(dir / "library.jsonl")) {
            library = read_jsonl(dir / "library.jsonl");
        }
        auto const cycles = static_cast<double>(records.size());
        nlohmann::json g = {
            {"cycles", records.size()},
            {"valid", valid},
            {"success_rate", cycles > 0 ? static_cast<double>(shared_success) / cycles : 0.0},
            {"raw_success_rate", cycles > 0 ? static_cast<double>(raw_success) / cycles : 0.0},
            {"retained", library.size()},
            {"retention_ratio", cycles > 0 ? static_cast<double>(library.size()) / cycles : 0.0},
        };
        for (auto const& [name, h] : histograms) {
            g["score_histograms"][name] = h;
        }
        csv << group << ',' << records.size() << ',' << valid << ',' << format_double(g["success_rate"].get<double>())
            << ',' << format_double(g["raw_success_rate"].get<double>()) << ',' << library.size() << ',' << format_double(g["retention_ratio"].get<double>());
        for (double t : kSweepThresholds) {
            auto const count = static_cast<std::size_t>(std::count_if(raw.begin(), raw.end(), [&](double f) { return f >= t; }));
            double const fraction = cycles > 0 ? static_cast<double>(count) / cycles : 0.0;
            std::vector<double> contrasts;
            for (auto const& rec : library) {
                auto it = contrast_by_id.find(rec.at("id").get<std::string>());
                if (it != contrast_by_id.end() && rec.at("raw_fitness").get<double>() >= t) {
                    contrasts.push_back(it->second);
                }
            }
            g["threshold_sweep"].push_back({{"threshold", t},
                                            {"count", count},
                                            {"fraction", fraction},
                                            {"verified", contrasts.size()},
                                            {"mean_optima_contrast", finite_or_null(mean_of(contrasts))},
                                            {"median_optima_contrast", finite_or_null(median_of(contrasts))}});
            csv << ',' << format_double(fraction);
        }
        csv << '\n';
        summary["groups"][group] = g;
    }
    fs::path const dir = config.output_dir / "report";
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_text(dir / "groups.csv", csv.str());
    say(options.log, "report: wrote " + dir.string());
}

} // namespace lforge
