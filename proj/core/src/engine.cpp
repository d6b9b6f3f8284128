#include "lforge/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "lforge/rng.hpp"
#include "lforge/util.hpp"

namespace lforge {

namespace {

constexpr std::string_view kAbsentPrefix = "not_";

bool is_homogeneity(Property p)
{
    return p == Property::BasinSizeHomogeneity || p == Property::SearchSpaceHomogeneity;
}

std::string fixed3(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

std::string_view to_string(TargetCategory c) noexcept
{
    switch (c) {
    case TargetCategory::Single:
        return "single";
    case TargetCategory::Pair:
        return "pair";
    case TargetCategory::NotCombo:
        return "not_combo";
    }
    return "unknown";
}

std::string TargetSpec::name() const
{
    std::string out;
    for (auto const& t : targets) {
        if (!out.empty()) {
            out += '+';
        }
        if (t.polarity == Polarity::Absent) {
            out += kAbsentPrefix;
        }
        out += to_string(t.property);
    }
    return out;
}

void TargetSpec::validate() const
{
    if (targets.empty() || targets.size() > 2) {
        throw std::invalid_argument("a target spec names one or two properties");
    }
    if (targets.size() == 2 && targets[0].property == targets[1].property) {
        throw std::invalid_argument("a target spec cannot name the same property twice");
    }
    auto const absent = std::count_if(targets.begin(), targets.end(),
                                      [](Target const& t) { return t.polarity == Polarity::Absent; });
    switch (category) {
    case TargetCategory::Single:
        if (targets.size() != 1 || absent != 0) {
            throw std::invalid_argument("a single-property target has exactly one present property");
        }
        break;
    case TargetCategory::Pair:
        if (targets.size() != 2 || absent != 0) {
            throw std::invalid_argument("a paired target has exactly two present properties");
        }
        break;
    case TargetCategory::NotCombo: {
        if (targets.size() != 2 || absent != 1) {
            throw std::invalid_argument("a NOT target pairs one absent property with one present property");
        }
        auto const& neg = targets[0].polarity == Polarity::Absent ? targets[0] : targets[1];
        if (!is_homogeneity(neg.property)) {
            throw std::invalid_argument("the absent property of a NOT target must be a homogeneity property");
        }
        break;
    }
    }
}

TargetSpec TargetSpec::from_name(std::string_view name)
{
    TargetSpec spec;
    std::size_t start = 0;
    while (start <= name.size()) {
        auto const plus = name.find('+', start);
        std::string_view token = name.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
        Target t;
        if (token.starts_with(kAbsentPrefix)) {
            t.polarity = Polarity::Absent;
            token.remove_prefix(kAbsentPrefix.size());
        }
        t.property = property_from_string(token);
        spec.targets.push_back(t);
        if (plus == std::string_view::npos) {
            break;
        }
        start = plus + 1;
    }
    bool const any_absent = std::any_of(spec.targets.begin(), spec.targets.end(),
                                        [](Target const& t) { return t.polarity == Polarity::Absent; });
    spec.category = any_absent ? TargetCategory::NotCombo
                               : (spec.targets.size() == 1 ? TargetCategory::Single : TargetCategory::Pair);
    spec.validate();
    return spec;
}

std::vector<TargetSpec> enumerate_target_groups()
{
    std::vector<TargetSpec> out;
    for (Property p : kAllProperties) {
        out.push_back({{{p, Polarity::Present}}, TargetCategory::Single});
    }
    for (std::size_t i = 0; i < kAllProperties.size(); ++i) {
        for (std::size_t j = i + 1; j < kAllProperties.size(); ++j) {
            out.push_back({{{kAllProperties[i], Polarity::Present}, {kAllProperties[j], Polarity::Present}},
                           TargetCategory::Pair});
        }
    }
    for (Property neg : {Property::BasinSizeHomogeneity, Property::SearchSpaceHomogeneity}) {
        for (Property p : kAllProperties) {
            if (p != neg) {
                out.push_back({{{neg, Polarity::Absent}, {p, Polarity::Present}}, TargetCategory::NotCombo});
            }
        }
    }
    return out;
}

double polarity_adjusted(TargetScore const& t) noexcept
{
    return t.polarity == Polarity::Present ? t.score : 1.0 - t.score;
}

double raw_fitness(std::span<const TargetScore> scores)
{
    if (scores.empty()) {
        throw std::invalid_argument("raw_fitness needs at least one target score");
    }
    double s = 0.0;
    for (auto const& t : scores) {
        s += polarity_adjusted(t);
    }
    return s / static_cast<double>(scores.size());
}

double adaptive_sigma(std::span<const StandardizedFeatures> features)
{
    if (features.size() < 2) {
        return 1.0;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (std::size_t j = i + 1; j < features.size(); ++j) {
            sum += ela_distance(features[i], features[j]);
            ++pairs;
        }
    }
    double const mean = sum / static_cast<double>(pairs);
    return mean < 1e-9 ? 1.0 : mean;
}

SharedFitness shared_fitness(std::span<const double> raw, std::span<const std::optional<StandardizedFeatures>> features,
                             double sigma)
{
    if (raw.size() != features.size()) {
        throw std::invalid_argument("shared_fitness: fitness and feature lists differ in length");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("shared_fitness needs sigma > 0");
    }
    std::size_t const n = raw.size();
    SharedFitness out;
    out.shared.assign(n, kWorstFitness);
    out.denominators.assign(n, 0.0);
    std::vector<double> crowd(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!features[i]) {
            continue;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!features[j]) {
                continue;
            }
            double const sh = std::max(0.0, 1.0 - ela_distance(*features[i], *features[j]) / sigma);
            crowd[i] += sh;
            crowd[j] += sh;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!features[i]) {
            continue;
        }
        out.denominators[i] = std::max(1.0, crowd[i]);
        out.shared[i] = raw[i] / out.denominators[i];
    }
    return out;
}

std::vector<std::size_t> select_comma(std::span<const Individual> offspring, std::size_t mu)
{
    if (offspring.size() < mu) {
        throw std::invalid_argument("comma selection needs at least mu offspring");
    }
    std::vector<std::size_t> idx(offspring.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (offspring[a].shared_fitness != offspring[b].shared_fitness) {
            return offspring[a].shared_fitness > offspring[b].shared_fitness;
        }
        return offspring[a].lineage < offspring[b].lineage;
    });
    idx.resize(mu);
    return idx;
}

std::string compose_feedback(Individual const& ind, TargetSpec const& spec)
{
    std::string out;
    if (!ind.assessment.ok()) {
        out = "The proposed function failed at the " + ind.assessment.failure_stage + " stage";
        if (!ind.assessment.failure.empty()) {
            out += ": " + ind.assessment.failure;
        }
        out += ".\n";
        return out;
    }
    out = "Scores of the proposed function (0 = property absent, 1 = property present):\n";
    for (auto const& t : spec.targets) {
        auto it = ind.assessment.scores.find(t.property);
        out += "- " + std::string(to_string(t.property)) + " (wanted " +
               (t.polarity == Polarity::Present ? "present" : "absent") + "): score ";
        out += it == ind.assessment.scores.end() ? std::string("unavailable") : fixed3(it->second);
        if (t.property == Property::Separability && ind.assessment.separability) {
            auto const& s = *ind.assessment.separability;
            out += " (cross-term violation rate " + fixed3(s.cross_violation) + ", superposition violation rate " +
                   fixed3(s.superposition_violation) + ")";
        }
        out += "\n";
    }
    out += "Combined fitness " + fixed3(ind.raw_fitness) + "; similarity penalty factor " + fixed3(ind.denominator) +
           " gives shared fitness " + fixed3(ind.shared_fitness) + ".\n";
    return out;
}

// ---------------------------------------------------------------------------
// Engine

void EngineConfig::validate() const
{
    if (mu < 1 || lambda < mu) {
        throw std::invalid_argument("engine needs lambda >= mu >= 1");
    }
    if (max_generations < 1) {
        throw std::invalid_argument("engine needs at least one generation");
    }
    if (expr_dim < 1 || dims.empty()) {
        throw std::invalid_argument("engine needs an expression dimension and at least one feature dimension");
    }
}

Engine::Engine(EngineConfig config, TargetSpec spec, Generator& generator, Assessor assessor,
               std::string prompt_template)
    : config_(std::move(config)), spec_(std::move(spec)), generator_(generator), assessor_(std::move(assessor)),
      prompt_template_(std::move(prompt_template))
{
    config_.validate();
    spec_.validate();
}

std::string Engine::build_prompt(Individual const* parent) const
{
    std::string targets;
    for (auto const& t : spec_.targets) {
        targets += "- " + std::string(to_string(t.property)) + ": should be " +
                   (t.polarity == Polarity::Present ? "PRESENT" : "ABSENT") + ". " +
                   std::string(property_description(t.property)) + "\n";
    }
    std::string dims;
    for (auto d : config_.dims) {
        dims += (dims.empty() ? "" : ", ") + std::to_string(d);
    }
    std::map<std::string, std::string> values{
        {"targets", targets},
        {"grammar", grammar_reference(config_.expr_dim)},
        {"dims", dims},
        {"expr_dim", std::to_string(config_.expr_dim)},
        {"parent", parent ? "Current expression:\n" + parent->expr : "Start from scratch."},
        {"feedback", parent ? "Feedback on the current expression:\n" + compose_feedback(*parent, spec_) : ""},
    };
    return render_template(prompt_template_, values);
}

Individual Engine::make_offspring(std::size_t slot, Individual const* parent)
{
    Individual ind;
    ind.generation = generations_;
    ind.slot = slot;
    ind.lineage = static_cast<std::uint64_t>(generations_ * config_.lambda + slot);
    if (parent) {
        ind.parent = parent->lineage;
    }
    std::uint64_t const seed = derive_seed(config_.seed, {generations_, slot});

    ProposalRequest req;
    req.prompt = build_prompt(parent);
    if (parent) {
        req.parent_expr = parent->expr;
    }
    req.expr_dim = config_.expr_dim;
    req.dims = config_.dims;
    req.seed = seed;
    req.limits = config_.limits;
    ProposalResponse res;
    try {
        res = generator_.propose(req);
    } catch (std::exception const& e) {
        res.status = ProposalStatus::TransportError;
        res.error = e.what();
    }
    ind.proposal_status = std::string(to_string(res.status));
    ind.proposal_error = res.error;
    if (res.status == ProposalStatus::Ok && res.expr) {
        try {
            ind.genome = parse(*res.expr, config_.expr_dim, config_.limits);
            ind.origin = "generator";
        } catch (ExprError const& e) {
            ind.proposal_status = std::string(to_string(ProposalStatus::ExtractionFailure));
            ind.proposal_error = e.what();
        }
    }
    if (!ind.genome) {
        std::uint64_t const fb = derive_seed(seed, {0xfb});
        ind.genome = parent && parent->genome ? mutate_expr(*parent->genome, fb, MutationStrength::Subtree)
                                              : random_tree(config_.expr_dim, 4, fb, config_.limits);
        ind.origin = "fallback";
    }
    ind.expr = to_canonical_text(*ind.genome);

    try {
        ind.assessment = assessor_(*ind.genome);
    } catch (std::exception const& e) {
        ind.assessment = {};
        ind.assessment.failure_stage = "assessment";
        ind.assessment.failure = e.what();
    }
    if (ind.assessment.ok()) {
        std::vector<TargetScore> scores;
        for (auto const& t : spec_.targets) {
            auto it = ind.assessment.scores.find(t.property);
            if (it == ind.assessment.scores.end()) {
                ind.assessment.failure_stage = "scoring";
                ind.assessment.failure = "no score for " + std::string(to_string(t.property));
                break;
            }
            scores.push_back({it->second, t.polarity});
        }
        if (ind.assessment.ok()) {
            ind.raw_fitness = raw_fitness(scores);
        }
    }
    if (!ind.assessment.ok()) {
        ind.assessment.features.reset();
        ind.assessment.raw_features.reset();
        ind.raw_fitness = kWorstFitness;
    }
    return ind;
}

void Engine::produce_generation(bool from_parents)
{
    std::size_t const lambda = config_.lambda;
    std::vector<Individual const*> chosen(lambda, nullptr);
    if (from_parents) {
        for (std::size_t slot = 0; slot < lambda; ++slot) {
            Rng pick(derive_seed(config_.seed, {generations_, slot, 0x9a}));
            chosen[slot] = &parents_[pick.below(parents_.size())];
        }
    }
    std::vector<Individual> offspring(lambda);
    parallel_for(lambda, config_.workers, [&](std::size_t slot) { offspring[slot] = make_offspring(slot, chosen[slot]); });

    bool const all_transport = std::all_of(offspring.begin(), offspring.end(), [](Individual const& i) {
        return i.proposal_status == to_string(ProposalStatus::TransportError);
    });
    upstream_failures_ = all_transport ? upstream_failures_ + 1 : 0;
    if (upstream_failures_ >= config_.max_upstream_failure_generations) {
        throw UpstreamFailure("generator failed on every proposal for " + std::to_string(upstream_failures_) +
                              " generations in a row: " + offspring.front().proposal_error);
    }

    std::vector<std::optional<StandardizedFeatures>> feats;
    std::vector<StandardizedFeatures> present;
    std::vector<double> raw;
    for (auto const& ind : offspring) {
        feats.push_back(ind.assessment.features);
        raw.push_back(ind.raw_fitness);
        if (ind.assessment.features) {
            present.push_back(*ind.assessment.features);
        }
    }
    double const sigma = adaptive_sigma(present);
    if (config_.sharing) {
        auto const sh = shared_fitness(raw, feats, sigma);
        for (std::size_t i = 0; i < lambda; ++i) {
            offspring[i].shared_fitness = sh.shared[i];
            offspring[i].denominator = sh.denominators[i];
            offspring[i].sigma_share = sigma;
        }
    } else {
        for (auto& ind : offspring) {
            ind.shared_fitness = ind.raw_fitness;
            ind.denominator = ind.assessment.features ? 1.0 : 0.0;
            ind.sigma_share = sigma;
        }
    }
    auto const selected = select_comma(offspring, config_.mu);
    std::vector<Individual> next;
    next.reserve(selected.size());
    for (std::size_t idx : selected) {
        offspring[idx].selected = true;
    }
    for (std::size_t idx : selected) {
        next.push_back(offspring[idx]);
    }
    if (audit_) {
        for (auto const& ind : offspring) {
            audit_(audit_record(ind, spec_));
        }
    }
    history_.insert(history_.end(), offspring.begin(), offspring.end());
    offspring_ = std::move(offspring);
    parents_ = std::move(next);
    ++generations_;
}

void Engine::initialize()
{
    if (generations_ != 0) {
        throw std::logic_error("engine already initialized");
    }
    produce_generation(false);
}

void Engine::step()
{
    if (generations_ == 0) {
        throw std::logic_error("engine must be initialized before stepping");
    }
    produce_generation(true);
}

void Engine::run(std::function<bool(Engine const&)> const& stop)
{
    if (generations_ == 0) {
        initialize();
    }
    while (generations_ < config_.max_generations) {
        if (stop && stop(*this)) {
            return;
        }
        if (config_.target_fitness) {
            bool const reached = std::any_of(parents_.begin(), parents_.end(), [&](Individual const& p) {
                return p.raw_fitness >= *config_.target_fitness;
            });
            if (reached) {
                return;
            }
        }
        step();
    }
}

nlohmann::json Engine::audit_record(Individual const& ind, TargetSpec const& spec)
{
    nlohmann::json scores = nlohmann::json::object();
    for (auto const& [p, s] : ind.assessment.scores) {
        scores[std::string(to_string(p))] = s;
    }
    nlohmann::json rec = {
        {"generation", ind.generation},
        {"slot", ind.slot},
        {"lineage", ind.lineage},
        {"parent", ind.parent ? nlohmann::json(*ind.parent) : nlohmann::json(nullptr)},
        {"expr", ind.expr},
        {"origin", ind.origin},
        {"proposal_status", ind.proposal_status},
        {"scores", scores},
        {"raw_fitness", ind.raw_fitness},
        {"shared_fitness", ind.shared_fitness},
        {"penalty", ind.denominator},
        {"sigma_share", ind.sigma_share},
        {"selected", ind.selected},
        {"group", spec.name()},
        {"feedback", compose_feedback(ind, spec)},
    };
    if (!ind.proposal_error.empty()) {
        rec["proposal_error"] = ind.proposal_error;
    }
    if (!ind.assessment.ok()) {
        rec["failure_stage"] = ind.assessment.failure_stage;
        rec["failure"] = ind.assessment.failure;
    }
    if (ind.assessment.separability) {
        rec["separability"] = {{"p", ind.assessment.separability->p},
                               {"cross_violation", ind.assessment.separability->cross_violation},
                               {"superposition_violation", ind.assessment.separability->superposition_violation}};
    }
    return rec;
}

} // namespace lforge
