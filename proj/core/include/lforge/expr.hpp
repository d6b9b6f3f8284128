#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lforge/function.hpp"

namespace lforge {

/// Version of the expression grammar; bump when the operator set changes.
inline constexpr int kGrammarVersion = 1;

enum class UnaryOp : std::uint8_t { Neg, Sin, Cos, Tanh, Exp, Abs, Sqrt, Log, Floor };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow, Min, Max };

inline constexpr UnaryOp kUnaryOps[] = {UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Tanh, UnaryOp::Exp,
                                        UnaryOp::Abs, UnaryOp::Sqrt, UnaryOp::Log, UnaryOp::Floor};
inline constexpr BinaryOp kBinaryOps[] = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div,
                                          BinaryOp::Pow, BinaryOp::Min, BinaryOp::Max};

std::string_view to_string(UnaryOp op) noexcept;
std::string_view to_string(BinaryOp op) noexcept;

/// Guard constants of the evaluator.
namespace guard {
inline constexpr double kTiny = 1e-12;        // smallest |divisor| and log/sqrt argument
inline constexpr double kExpClamp = 700.0;    // exp argument is clamped to [-700, 700]
inline constexpr double kMagnitude = 1e300;   // every node result saturates to [-1e300, 1e300]
} // namespace guard

struct ExprLimits {
    std::size_t max_depth = 20;
    std::size_t max_nodes = 500;
};

/// One node of a prefix-ordered expression. Arity follows from `kind`.
struct ExprNode {
    enum class Kind : std::uint8_t { Constant, Variable, Unary, Binary };

    Kind kind = Kind::Constant;
    std::uint8_t op = 0;       // UnaryOp or BinaryOp
    std::uint32_t var = 0;     // zero-based variable index
    double value = 0.0;        // constant value

    static ExprNode constant(double v) { return {Kind::Constant, 0, 0, v}; }
    static ExprNode variable(std::uint32_t index) { return {Kind::Variable, 0, index, 0.0}; }
    static ExprNode unary(UnaryOp o) { return {Kind::Unary, static_cast<std::uint8_t>(o), 0, 0.0}; }
    static ExprNode binary(BinaryOp o) { return {Kind::Binary, static_cast<std::uint8_t>(o), 0, 0.0}; }

    std::size_t arity() const noexcept
    {
        return kind == Kind::Binary ? 2 : kind == Kind::Unary ? 1 : 0;
    }

    /// Structural equality; constants compare by bit pattern.
    bool operator==(ExprNode const& other) const noexcept;
};

class ExprError : public std::runtime_error {
public:
    enum class Kind { Syntax, UnknownIdentifier, VariableIndex, DepthLimit, SizeLimit, Invalid };

    ExprError(Kind kind, std::size_t position, std::string const& message);

    Kind kind() const noexcept { return kind_; }
    /// Byte offset into the parsed text (0 when not raised by the parser).
    std::size_t position() const noexcept { return position_; }

private:
    Kind kind_;
    std::size_t position_;
};

/// Immutable expression tree over variables x1..x{dim}, stored in prefix order.
/// The subtree rooted at node i occupies [i, i + subtree_size(i)).
class ExprTree {
public:
    /// Validates structure and limits; throws ExprError.
    ExprTree(std::vector<ExprNode> nodes, std::size_t dim, ExprLimits limits = {});

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t depth() const noexcept { return depth_; }
    ExprLimits const& limits() const noexcept { return limits_; }
    std::span<const ExprNode> nodes() const noexcept { return nodes_; }

    std::size_t subtree_size(std::size_t index) const;

    /// Guarded evaluation; always finite. x.size() must equal dim().
    double eval(std::span<const double> x) const;

    bool uses_variables() const noexcept;

    bool operator==(ExprTree const& other) const noexcept { return dim_ == other.dim_ && nodes_ == other.nodes_; }

private:
    std::vector<ExprNode> nodes_;
    std::size_t dim_;
    ExprLimits limits_;
    std::size_t depth_ = 0;
};

/// Parses DSL text. Grammar, lowest to highest precedence:
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?            (right associative)
///   primary := number | 'x'<index> | name '(' expr ')' | ('min'|'max') '(' expr ',' expr ')' | '(' expr ')'
///
/// Unary names: neg sin cos tanh exp abs sqrt log floor. A minus sign directly
/// before a numeric literal that is not the base of '^' folds into a negative
/// constant; every other unary minus becomes neg().
ExprTree parse(std::string_view text, std::size_t dim, ExprLimits limits = {});

/// Fully parenthesized, deterministic rendering; constants use 17 significant
/// digits so that parse(to_canonical_text(t)) == t.
std::string to_canonical_text(ExprTree const& tree);

/// Free-function form of ExprTree::eval.
double eval_expr(ExprTree const& tree, std::span<const double> x);

enum class MutationStrength { Point, Subtree };

/// Point mutation changes exactly one node: a constant is scaled by
/// (1 + N(0, 0.3)), a variable or operator is swapped for another of the
/// same arity. Subtree mutation replaces a uniformly chosen subtree with a
/// fresh random tree of depth <= 4. Limit violations are retried up to 100
/// times, after which the input is returned unchanged.
ExprTree mutate_expr(ExprTree const& tree, std::uint64_t seed, MutationStrength strength);

/// Random tree of depth <= max_depth ("grow" initialisation).
ExprTree random_tree(std::size_t dim, std::size_t max_depth, std::uint64_t seed, ExprLimits limits = {});

/// Wraps a tree as an objective over `domain`. When domain.dim() exceeds the
/// tree's dimension the tree is applied to cyclic windows of consecutive
/// coordinates and averaged:
///   f_D(x) = (1/D) * sum_k t(x_k, x_{k+1}, ..., x_{k+m-1})   (indices mod D)
ObjectiveFunction make_expr_function(ExprTree tree, Domain domain, std::string id = {});

} // namespace lforge
