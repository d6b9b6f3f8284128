#include "lforge/expr.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "lforge/rng.hpp"

namespace lforge {

std::string_view to_string(UnaryOp op) noexcept
{
    switch (op) {
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Log: return "log";
    case UnaryOp::Floor: return "floor";
    }
    return "?";
}

std::string_view to_string(BinaryOp op) noexcept
{
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Min: return "min";
    case BinaryOp::Max: return "max";
    }
    return "?";
}

bool ExprNode::operator==(ExprNode const& other) const noexcept
{
    if (kind != other.kind) {
        return false;
    }
    switch (kind) {
    case Kind::Constant: return std::bit_cast<std::uint64_t>(value) == std::bit_cast<std::uint64_t>(other.value);
    case Kind::Variable: return var == other.var;
    case Kind::Unary:
    case Kind::Binary: return op == other.op;
    }
    return false;
}

ExprError::ExprError(Kind kind, std::size_t position, std::string const& message)
    : std::runtime_error(message), kind_(kind), position_(position)
{
}

// ---------------------------------------------------------------------------
// ExprTree

ExprTree::ExprTree(std::vector<ExprNode> nodes, std::size_t dim, ExprLimits limits)
    : nodes_(std::move(nodes)), dim_(dim), limits_(limits)
{
    if (dim_ == 0) {
        throw ExprError(ExprError::Kind::Invalid, 0, "expression dimension must be >= 1");
    }
    if (nodes_.empty()) {
        throw ExprError(ExprError::Kind::Invalid, 0, "empty expression");
    }
    if (nodes_.size() > limits_.max_nodes) {
        throw ExprError(ExprError::Kind::SizeLimit, 0,
                        "expression has " + std::to_string(nodes_.size()) + " nodes, limit is " +
                            std::to_string(limits_.max_nodes));
    }
    // Prefix validity: `open` counts subtrees still to be read; per-slot depth on a stack.
    std::vector<std::size_t> pending_depths{1};
    std::size_t max_depth = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (pending_depths.empty()) {
            throw ExprError(ExprError::Kind::Invalid, 0, "trailing nodes after a complete expression");
        }
        std::size_t const d = pending_depths.back();
        pending_depths.pop_back();
        max_depth = std::max(max_depth, d);
        auto const& n = nodes_[i];
        switch (n.kind) {
        case ExprNode::Kind::Constant:
            if (!std::isfinite(n.value)) {
                throw ExprError(ExprError::Kind::Invalid, 0, "non-finite constant");
            }
            break;
        case ExprNode::Kind::Variable:
            if (n.var >= dim_) {
                throw ExprError(ExprError::Kind::VariableIndex, 0,
                                "variable x" + std::to_string(n.var + 1) + " exceeds dimension " + std::to_string(dim_));
            }
            break;
        case ExprNode::Kind::Unary:
            if (n.op > static_cast<std::uint8_t>(UnaryOp::Floor)) {
                throw ExprError(ExprError::Kind::Invalid, 0, "unknown unary operator code");
            }
            pending_depths.push_back(d + 1);
            break;
        case ExprNode::Kind::Binary:
            if (n.op > static_cast<std::uint8_t>(BinaryOp::Max)) {
                throw ExprError(ExprError::Kind::Invalid, 0, "unknown binary operator code");
            }
            pending_depths.push_back(d + 1);
            pending_depths.push_back(d + 1);
            break;
        }
    }
    if (!pending_depths.empty()) {
        throw ExprError(ExprError::Kind::Invalid, 0, "incomplete expression");
    }
    depth_ = max_depth;
    if (depth_ > limits_.max_depth) {
        throw ExprError(ExprError::Kind::DepthLimit, 0,
                        "expression depth " + std::to_string(depth_) + " exceeds limit " +
                            std::to_string(limits_.max_depth));
    }
}

std::size_t ExprTree::subtree_size(std::size_t index) const
{
    std::size_t open = 1;
    std::size_t i = index;
    while (open > 0) {
        open = open - 1 + nodes_.at(i).arity();
        ++i;
    }
    return i - index;
}

bool ExprTree::uses_variables() const noexcept
{
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [](ExprNode const& n) { return n.kind == ExprNode::Kind::Variable; });
}

namespace {

double saturate(double v) noexcept
{
    if (std::isnan(v)) {
        return 0.0;
    }
    return std::clamp(v, -guard::kMagnitude, guard::kMagnitude);
}

double apply(UnaryOp op, double a) noexcept
{
    switch (op) {
    case UnaryOp::Neg: return -a;
    case UnaryOp::Sin: return std::sin(a);
    case UnaryOp::Cos: return std::cos(a);
    case UnaryOp::Tanh: return std::tanh(a);
    case UnaryOp::Exp: return std::exp(std::clamp(a, -guard::kExpClamp, guard::kExpClamp));
    case UnaryOp::Abs: return std::fabs(a);
    case UnaryOp::Sqrt: return std::sqrt(a < guard::kTiny ? guard::kTiny : a);
    case UnaryOp::Log: return std::log(a < guard::kTiny ? guard::kTiny : a);
    case UnaryOp::Floor: return std::floor(a);
    }
    return 0.0;
}

double apply(BinaryOp op, double a, double b) noexcept
{
    switch (op) {
    case BinaryOp::Add: return a + b;
    case BinaryOp::Sub: return a - b;
    case BinaryOp::Mul: return a * b;
    case BinaryOp::Div:
        if (std::fabs(b) < guard::kTiny) {
            b = b < 0.0 ? -guard::kTiny : guard::kTiny;
        }
        return a / b;
    case BinaryOp::Pow:
        if (a < 0.0 && b != std::floor(b)) {
            return std::pow(-a, b);
        }
        return std::pow(a, b);
    case BinaryOp::Min: return std::min(a, b);
    case BinaryOp::Max: return std::max(a, b);
    }
    return 0.0;
}

} // namespace

double ExprTree::eval(std::span<const double> x) const
{
    constexpr std::size_t kInline = 64;
    std::array<double, kInline> inline_stack{};
    std::vector<double> heap_stack;
    double* stack = inline_stack.data();
    if (nodes_.size() > kInline) {
        heap_stack.resize(nodes_.size());
        stack = heap_stack.data();
    }
    std::size_t top = 0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        auto const& n = nodes_[i];
        switch (n.kind) {
        case ExprNode::Kind::Constant: stack[top++] = n.value; break;
        case ExprNode::Kind::Variable: stack[top++] = x[n.var]; break;
        case ExprNode::Kind::Unary:
            stack[top - 1] = saturate(apply(static_cast<UnaryOp>(n.op), stack[top - 1]));
            break;
        case ExprNode::Kind::Binary: {
            double const lhs = stack[top - 1];
            double const rhs = stack[top - 2];
            --top;
            stack[top - 1] = saturate(apply(static_cast<BinaryOp>(n.op), lhs, rhs));
            break;
        }
        }
    }
    return saturate(stack[0]);
}

double eval_expr(ExprTree const& tree, std::span<const double> x)
{
    if (x.size() != tree.dim()) {
        throw std::invalid_argument("eval_expr: point has dimension " + std::to_string(x.size()) +
                                    ", expression expects " + std::to_string(tree.dim()));
    }
    return tree.eval(x);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
    Tok kind;
    std::size_t pos;
    std::string_view text;
    double number = 0.0;
};

std::optional<UnaryOp> unary_by_name(std::string_view name)
{
    for (auto op : kUnaryOps) {
        if (to_string(op) == name) {
            return op;
        }
    }
    return std::nullopt;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Token> tokenize(std::string_view text)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        char const c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t const start = i;
        if (is_digit(c) || (c == '.' && i + 1 < text.size() && is_digit(text[i + 1]))) {
            while (i < text.size() && is_digit(text[i])) {
                ++i;
            }
            if (i < text.size() && text[i] == '.') {
                ++i;
                while (i < text.size() && is_digit(text[i])) {
                    ++i;
                }
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < text.size() && (text[j] == '+' || text[j] == '-')) {
                    ++j;
                }
                if (j < text.size() && is_digit(text[j])) {
                    i = j;
                    while (i < text.size() && is_digit(text[i])) {
                        ++i;
                    }
                }
            }
            Token t{Tok::Number, start, text.substr(start, i - start)};
            auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
            if (ec != std::errc() || ptr != t.text.data() + t.text.size() || !std::isfinite(t.number)) {
                throw ExprError(ExprError::Kind::Syntax, start, "invalid number '" + std::string(t.text) + "'");
            }
            out.push_back(t);
            continue;
        }
        if (is_ident_start(c)) {
            while (i < text.size() && is_ident_char(text[i])) {
                ++i;
            }
            out.push_back({Tok::Ident, start, text.substr(start, i - start)});
            continue;
        }
        Tok kind = Tok::End;
        switch (c) {
        case '+': kind = Tok::Plus; break;
        case '-': kind = Tok::Minus; break;
        case '*': kind = Tok::Star; break;
        case '/': kind = Tok::Slash; break;
        case '^': kind = Tok::Caret; break;
        case '(': kind = Tok::LParen; break;
        case ')': kind = Tok::RParen; break;
        case ',': kind = Tok::Comma; break;
        default:
            throw ExprError(ExprError::Kind::Syntax, start, std::string("unexpected character '") + c + "'");
        }
        out.push_back({kind, start, text.substr(start, 1)});
        ++i;
    }
    out.push_back({Tok::End, text.size(), {}});
    return out;
}

class Parser {
public:
    Parser(std::string_view text, std::size_t dim, ExprLimits limits)
        : tokens_(tokenize(text)), dim_(dim), limits_(limits)
    {
    }

    std::vector<ExprNode> run()
    {
        auto nodes = expr();
        if (peek().kind != Tok::End) {
            fail_syntax("unexpected '" + std::string(peek().text) + "'");
        }
        return nodes;
    }

private:
    // Bounded recursion so adversarial nesting cannot exhaust the stack.
    struct DepthGuard {
        explicit DepthGuard(Parser& p) : parser(p)
        {
            if (++parser.nesting_ > kMaxNesting) {
                throw ExprError(ExprError::Kind::DepthLimit, parser.peek().pos, "expression nesting too deep");
            }
        }
        ~DepthGuard() { --parser.nesting_; }
        Parser& parser;
    };
    static constexpr std::size_t kMaxNesting = 256;

    Token const& peek(std::size_t ahead = 0) const
    {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }
    Token const& advance() { return tokens_[pos_++]; }

    [[noreturn]] void fail_syntax(std::string const& what) const
    {
        auto const& t = peek();
        std::string msg = t.kind == Tok::End ? "syntax error at end of input" : "syntax error at position " + std::to_string(t.pos);
        throw ExprError(ExprError::Kind::Syntax, t.pos, msg + ": " + what);
    }

    void expect(Tok kind, char const* what)
    {
        if (peek().kind != kind) {
            fail_syntax(std::string("expected ") + what);
        }
        advance();
    }

    void check_size(std::size_t n) const
    {
        if (n > limits_.max_nodes) {
            throw ExprError(ExprError::Kind::SizeLimit, peek().pos,
                            "expression exceeds " + std::to_string(limits_.max_nodes) + " nodes");
        }
    }

    static std::vector<ExprNode> combine(ExprNode head, std::vector<ExprNode> lhs, std::vector<ExprNode> rhs = {})
    {
        std::vector<ExprNode> out;
        out.reserve(1 + lhs.size() + rhs.size());
        out.push_back(head);
        out.insert(out.end(), lhs.begin(), lhs.end());
        out.insert(out.end(), rhs.begin(), rhs.end());
        return out;
    }

    std::vector<ExprNode> expr()
    {
        DepthGuard guard(*this);
        auto lhs = term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            auto op = advance().kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
            auto rhs = term();
            lhs = combine(ExprNode::binary(op), std::move(lhs), std::move(rhs));
            check_size(lhs.size());
        }
        return lhs;
    }

    std::vector<ExprNode> term()
    {
        auto lhs = unary();
        while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
            auto op = advance().kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
            auto rhs = unary();
            lhs = combine(ExprNode::binary(op), std::move(lhs), std::move(rhs));
            check_size(lhs.size());
        }
        return lhs;
    }

    std::vector<ExprNode> unary()
    {
        DepthGuard guard(*this);
        if (peek().kind == Tok::Minus) {
            advance();
            if (peek().kind == Tok::Number && peek(1).kind != Tok::Caret) {
                return {ExprNode::constant(-advance().number)};
            }
            return combine(ExprNode::unary(UnaryOp::Neg), unary());
        }
        return power();
    }

    std::vector<ExprNode> power()
    {
        auto base = primary();
        if (peek().kind == Tok::Caret) {
            advance();
            auto exponent = unary();
            base = combine(ExprNode::binary(BinaryOp::Pow), std::move(base), std::move(exponent));
            check_size(base.size());
        }
        return base;
    }

    std::vector<ExprNode> primary()
    {
        DepthGuard guard(*this);
        auto const& t = peek();
        switch (t.kind) {
        case Tok::Number: advance(); return {ExprNode::constant(t.number)};
        case Tok::LParen: {
            advance();
            auto inner = expr();
            expect(Tok::RParen, "')'");
            return inner;
        }
        case Tok::Ident: return identifier();
        default: fail_syntax(t.kind == Tok::End ? "expected an operand" : "unexpected '" + std::string(t.text) + "'");
        }
    }

    std::vector<ExprNode> identifier()
    {
        auto const t = advance();
        std::string_view const name = t.text;
        if (name.size() >= 2 && name[0] == 'x' &&
            std::all_of(name.begin() + 1, name.end(), [](char c) { return is_digit(c); })) {
            std::uint64_t index = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
            if (ec != std::errc() || index == 0) {
                throw ExprError(ExprError::Kind::UnknownIdentifier, t.pos, "invalid variable '" + std::string(name) + "'");
            }
            if (index > dim_) {
                throw ExprError(ExprError::Kind::VariableIndex, t.pos,
                                "variable '" + std::string(name) + "' exceeds dimension " + std::to_string(dim_));
            }
            return {ExprNode::variable(static_cast<std::uint32_t>(index - 1))};
        }
        if (auto op = unary_by_name(name)) {
            expect(Tok::LParen, "'(' after function name");
            auto arg = expr();
            expect(Tok::RParen, "')'");
            return combine(ExprNode::unary(*op), std::move(arg));
        }
        if (name == "min" || name == "max") {
            expect(Tok::LParen, "'(' after function name");
            auto a = expr();
            expect(Tok::Comma, "',' between arguments");
            auto b = expr();
            expect(Tok::RParen, "')'");
            auto out = combine(ExprNode::binary(name == "min" ? BinaryOp::Min : BinaryOp::Max), std::move(a), std::move(b));
            check_size(out.size());
            return out;
        }
        throw ExprError(ExprError::Kind::UnknownIdentifier, t.pos, "unknown identifier '" + std::string(name) + "'");
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::size_t dim_;
    ExprLimits limits_;
    std::size_t nesting_ = 0;
};

} // namespace

ExprTree parse(std::string_view text, std::size_t dim, ExprLimits limits)
{
    if (dim == 0) {
        throw ExprError(ExprError::Kind::Invalid, 0, "expression dimension must be >= 1");
    }
    Parser parser(text, dim, limits);
    return ExprTree(parser.run(), dim, limits);
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string format_constant(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (std::signbit(v)) {
        return std::string("(") + buf + ")";
    }
    return buf;
}

std::size_t render(std::span<const ExprNode> nodes, std::size_t i, std::string& out)
{
    auto const& n = nodes[i];
    switch (n.kind) {
    case ExprNode::Kind::Constant: out += format_constant(n.value); return i + 1;
    case ExprNode::Kind::Variable:
        out += 'x';
        out += std::to_string(n.var + 1);
        return i + 1;
    case ExprNode::Kind::Unary: {
        out += to_string(static_cast<UnaryOp>(n.op));
        out += '(';
        auto next = render(nodes, i + 1, out);
        out += ')';
        return next;
    }
    case ExprNode::Kind::Binary: {
        auto const op = static_cast<BinaryOp>(n.op);
        if (op == BinaryOp::Min || op == BinaryOp::Max) {
            out += to_string(op);
            out += '(';
            auto mid = render(nodes, i + 1, out);
            out += ", ";
            auto next = render(nodes, mid, out);
            out += ')';
            return next;
        }
        out += '(';
        auto mid = render(nodes, i + 1, out);
        out += ' ';
        out += to_string(op);
        out += ' ';
        auto next = render(nodes, mid, out);
        out += ')';
        return next;
    }
    }
    return i + 1;
}

} // namespace

std::string to_canonical_text(ExprTree const& tree)
{
    std::string out;
    render(tree.nodes(), 0, out);
    return out;
}

// ---------------------------------------------------------------------------
// Random trees and mutation

namespace {

constexpr double kTerminalProbability = 0.3;
constexpr double kUnaryProbability = 0.35;
constexpr double kVariableProbability = 0.75;
constexpr std::size_t kSubtreeDepth = 4;
constexpr int kMaxRetries = 100;

double random_constant(Rng& rng)
{
    return std::round(rng.uniform(-5.0, 5.0) * 100.0) / 100.0;
}

ExprNode random_terminal(std::size_t dim, Rng& rng)
{
    if (rng.bernoulli(kVariableProbability)) {
        return ExprNode::variable(static_cast<std::uint32_t>(rng.below(dim)));
    }
    return ExprNode::constant(random_constant(rng));
}

void grow(std::size_t dim, std::size_t depth_left, bool is_root, Rng& rng, std::vector<ExprNode>& out)
{
    if (depth_left <= 1 || (!is_root && rng.bernoulli(kTerminalProbability))) {
        out.push_back(random_terminal(dim, rng));
        return;
    }
    if (rng.bernoulli(kUnaryProbability)) {
        out.push_back(ExprNode::unary(kUnaryOps[rng.below(std::size(kUnaryOps))]));
        grow(dim, depth_left - 1, false, rng, out);
        return;
    }
    out.push_back(ExprNode::binary(kBinaryOps[rng.below(std::size(kBinaryOps))]));
    grow(dim, depth_left - 1, false, rng, out);
    grow(dim, depth_left - 1, false, rng, out);
}

ExprNode point_mutated(ExprNode const& n, std::size_t dim, Rng& rng)
{
    switch (n.kind) {
    case ExprNode::Kind::Constant: {
        double v = n.value * (1.0 + rng.normal(0.0, 0.3));
        for (int k = 0; k < kMaxRetries && (!std::isfinite(v) || v == n.value); ++k) {
            v = n.value + rng.normal();
        }
        return ExprNode::constant(v);
    }
    case ExprNode::Kind::Variable: {
        if (dim < 2) {
            return ExprNode::constant(random_constant(rng) + 0.5);
        }
        auto other = static_cast<std::uint32_t>(rng.below(dim - 1));
        if (other >= n.var) {
            ++other;
        }
        return ExprNode::variable(other);
    }
    case ExprNode::Kind::Unary: {
        auto other = static_cast<std::uint8_t>(rng.below(std::size(kUnaryOps) - 1));
        if (other >= n.op) {
            ++other;
        }
        return ExprNode::unary(static_cast<UnaryOp>(other));
    }
    case ExprNode::Kind::Binary: {
        auto other = static_cast<std::uint8_t>(rng.below(std::size(kBinaryOps) - 1));
        if (other >= n.op) {
            ++other;
        }
        return ExprNode::binary(static_cast<BinaryOp>(other));
    }
    }
    return n;
}

} // namespace

ExprTree random_tree(std::size_t dim, std::size_t max_depth, std::uint64_t seed, ExprLimits limits)
{
    if (dim == 0 || max_depth == 0) {
        throw std::invalid_argument("random_tree needs dim >= 1 and max_depth >= 1");
    }
    Rng rng(seed);
    std::vector<ExprNode> nodes;
    grow(dim, std::min(max_depth, limits.max_depth), true, rng, nodes);
    return ExprTree(std::move(nodes), dim, limits);
}

ExprTree mutate_expr(ExprTree const& tree, std::uint64_t seed, MutationStrength strength)
{
    Rng rng(seed);
    auto const nodes = tree.nodes();
    if (strength == MutationStrength::Point) {
        auto const at = rng.below(nodes.size());
        std::vector<ExprNode> out(nodes.begin(), nodes.end());
        out[at] = point_mutated(out[at], tree.dim(), rng);
        return ExprTree(std::move(out), tree.dim(), tree.limits());
    }
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        auto const at = rng.below(nodes.size());
        auto const span_len = tree.subtree_size(at);
        std::vector<ExprNode> fresh;
        grow(tree.dim(), kSubtreeDepth, false, rng, fresh);
        std::vector<ExprNode> out;
        out.reserve(nodes.size() - span_len + fresh.size());
        out.insert(out.end(), nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(at));
        out.insert(out.end(), fresh.begin(), fresh.end());
        out.insert(out.end(), nodes.begin() + static_cast<std::ptrdiff_t>(at + span_len), nodes.end());
        try {
            return ExprTree(std::move(out), tree.dim(), tree.limits());
        } catch (ExprError const&) {
            // depth or size limit exceeded; draw another site
        }
    }
    return tree;
}

ObjectiveFunction make_expr_function(ExprTree tree, Domain domain, std::string id)
{
    if (id.empty()) {
        id = "expr:" + to_canonical_text(tree);
    }
    std::size_t const d = domain.dim();
    std::size_t const m = tree.dim();
    if (d < m) {
        throw std::invalid_argument("domain dimension " + std::to_string(d) + " is below expression dimension " +
                                    std::to_string(m));
    }
    auto shared = std::make_shared<const ExprTree>(std::move(tree));
    if (d == m) {
        return ObjectiveFunction(std::move(id), std::move(domain),
                                 [shared](std::span<const double> x) { return shared->eval(x); });
    }
    return ObjectiveFunction(std::move(id), std::move(domain), [shared, d, m](std::span<const double> x) {
        std::array<double, 64> inline_window{};
        std::vector<double> heap_window;
        double* window = inline_window.data();
        if (m > inline_window.size()) {
            heap_window.resize(m);
            window = heap_window.data();
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            for (std::size_t j = 0; j < m; ++j) {
                window[j] = x[(k + j) % d];
            }
            sum += shared->eval({window, m});
        }
        return std::clamp(sum / static_cast<double>(d), -guard::kMagnitude, guard::kMagnitude);
    });
}

} // namespace lforge
