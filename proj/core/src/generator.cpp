#include "lforge/generator.hpp"

#include <stdexcept>

#include "lforge/rng.hpp"

namespace lforge {

namespace {

constexpr int kOfflineAttempts = 50;
constexpr std::size_t kFreshDepth = 4;

std::string_view trim(std::string_view s)
{
    auto const first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    auto const last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

ExprTree fresh_tree(std::size_t dim, std::uint64_t seed, ExprLimits limits)
{
    for (std::uint64_t attempt = 0;; ++attempt) {
        ExprTree t = random_tree(dim, kFreshDepth, derive_seed(seed, {attempt}), limits);
        if (t.uses_variables() || attempt + 1 >= kOfflineAttempts) {
            return t;
        }
    }
}

} // namespace

std::string_view to_string(ProposalStatus status) noexcept
{
    switch (status) {
    case ProposalStatus::Ok:
        return "ok";
    case ProposalStatus::TransportError:
        return "transport_error";
    case ProposalStatus::ExtractionFailure:
        return "extraction_failure";
    }
    return "unknown";
}

ProposalResponse OfflineGenerator::propose(ProposalRequest const& request)
{
    ProposalResponse out;
    if (!request.parent_expr) {
        out.expr = to_canonical_text(fresh_tree(request.expr_dim, request.seed, request.limits));
        out.raw_text = *out.expr;
        return out;
    }
    ExprTree parent = [&] {
        try {
            return parse(*request.parent_expr, request.expr_dim, request.limits);
        } catch (ExprError const& e) {
            out.error = e.what();
            return fresh_tree(request.expr_dim, request.seed, request.limits);
        }
    }();
    if (!out.error.empty()) {
        out.status = ProposalStatus::ExtractionFailure;
        return out;
    }
    std::string const parent_text = to_canonical_text(parent);
    Rng rng(derive_seed(request.seed, {0x0ff}));
    for (int attempt = 0; attempt < kOfflineAttempts; ++attempt) {
        auto const strength = rng.bernoulli(0.5) ? MutationStrength::Subtree : MutationStrength::Point;
        ExprTree child = mutate_expr(parent, rng.next(), strength);
        std::string text = to_canonical_text(child);
        if (text != parent_text && child.uses_variables()) {
            out.raw_text = text;
            out.expr = std::move(text);
            return out;
        }
    }
    out.expr = to_canonical_text(fresh_tree(request.expr_dim, request.seed, request.limits));
    out.raw_text = *out.expr;
    return out;
}

std::optional<std::string> extract_envelope(std::string_view text)
{
    constexpr std::string_view open = "<expr>";
    constexpr std::string_view close = "</expr>";
    auto const start = text.find(open);
    if (start == std::string_view::npos) {
        return std::nullopt;
    }
    auto const body = start + open.size();
    auto const end = text.find(close, body);
    if (end == std::string_view::npos) {
        return std::nullopt;
    }
    return std::string(trim(text.substr(body, end - body)));
}

ProposalResponse interpret_response(std::string raw_text, std::size_t expr_dim, ExprLimits limits)
{
    ProposalResponse out;
    out.raw_text = std::move(raw_text);
    auto body = extract_envelope(out.raw_text);
    if (!body) {
        out.status = ProposalStatus::ExtractionFailure;
        out.error = "response has no <expr>...</expr> envelope";
        return out;
    }
    try {
        out.expr = to_canonical_text(parse(*body, expr_dim, limits));
    } catch (ExprError const& e) {
        out.status = ProposalStatus::ExtractionFailure;
        out.error = std::string("expression does not parse: ") + e.what();
    }
    return out;
}

std::string grammar_reference(std::size_t expr_dim)
{
    std::string vars = "x1";
    if (expr_dim > 1) {
        vars += expr_dim == 2 ? ", x2" : " .. x" + std::to_string(expr_dim);
    }
    return "Variables: " + vars +
           ".\n"
           "Numbers: decimal literals such as 3, 0.5, 1e-3.\n"
           "Binary operators: + - * / and ^ (power, right associative).\n"
           "Functions: sin cos tanh exp abs sqrt log floor neg, and min(a, b), max(a, b).\n"
           "Evaluation is guarded: division by values near zero, log and sqrt of small or negative\n"
           "arguments, and exp overflow are clamped, so every expression is finite.";
}

std::string render_template(std::string_view tmpl, std::map<std::string, std::string> const& values)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (true) {
        auto const open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            return out;
        }
        auto const close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            throw std::invalid_argument("prompt template has an unterminated placeholder");
        }
        out.append(tmpl.substr(pos, open - pos));
        std::string const key(tmpl.substr(open + 2, close - open - 2));
        auto it = values.find(key);
        if (it == values.end()) {
            throw std::invalid_argument("prompt template placeholder '" + key + "' has no value");
        }
        out.append(it->second);
        pos = close + 2;
    }
}

} // namespace lforge
