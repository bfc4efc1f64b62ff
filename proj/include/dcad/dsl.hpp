#pragma once

// Textual CAD language: abstract syntax, parser, pretty printer and static
// validation.
//
// A program is line oriented:
//
//   pragma epsilon = 1e-4
//   param w = 2.0
//   let half = w / 2
//   solid b = box(w, 1.0, 1.0)
//   translate(b.v[0..4], 0, 0, half)
//   for i in 0..3 {
//     solid k = cylinder(0.1, 0.2, 8)
//     translate(k, i * 0.5, 0, 1)
//   }
//
// Scalar expressions use + - * / and sin cos sqrt pow exp log clamp.
// Index expressions (vertex/face indices, loop bounds) are integer constants
// built from literals and loop variables.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcad::dsl {

struct Span {
    int line = 0;
    int col = 0;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Number, Name, VertexCoord, Unary, Binary, Call };

    Kind kind = Kind::Number;
    double number = 0.0;
    /// Name: identifier. VertexCoord: solid name. Call: function name.
    std::string name;
    /// Binary: one of + - * /. Unary: '-'.
    char op = 0;
    /// VertexCoord axis 0..2.
    int axis = 0;
    /// Unary: 1 operand, Binary: 2, Call: n, VertexCoord: the index expression.
    std::vector<ExprPtr> args;
    Span span;
};

/// One entry of an index list: a single index or a half-open range lo..hi.
struct IndexItem {
    ExprPtr lo;
    ExprPtr hi; // null for a single index
};

/// Reference to a solid, a vertex selection of it, or one of its faces.
struct Ref {
    enum class Part { Whole, Vertices, Face };
    std::string solid;
    Part part = Part::Whole;
    std::vector<IndexItem> items;
    Span span;
};

struct ParamDecl {
    std::string name;
    double initial = 0.0;
    Span span;
    /// Position and length of the literal, for in-place rewriting.
    Span value_span;
    int value_length = 0;
};

struct Pragma {
    std::string name;
    double value = 0.0;
    Span span;
};

struct Stmt {
    enum class Kind { Let, Solid, Op, Clamp, Loop };

    Kind kind = Kind::Op;
    /// Let/Solid: bound name. Loop: loop variable.
    std::string name;
    /// Solid: primitive (box, cylinder, rect). Op: translate, rotate, scale,
    /// extrude, chamfer.
    std::string op;
    /// Op target.
    Ref target;
    /// rotate axis: 'x', 'y' or 'z'.
    char axis = 0;
    /// Let: 1 expr. Solid/Op: scalar arguments. Clamp: lo, value, hi.
    std::vector<ExprPtr> args;
    ExprPtr loop_lo;
    ExprPtr loop_hi;
    std::vector<Stmt> body;
    Span span;
};

struct Program {
    std::vector<Pragma> pragmas;
    std::vector<ParamDecl> params;
    std::vector<Stmt> statements;

    std::optional<double> pragma(std::string_view name) const;
    int param_index(std::string_view name) const;
};

/// Parses DSL source. Throws SyntaxError.
Program parse(std::string_view text);

/// Canonical source text; parse(print(p)) is structurally equal to p.
std::string print(const Program& program);
std::string print(const Expr& expr);

/// Structural equality ignoring source spans.
bool same_tree(const Program& a, const Program& b);
bool same_tree(const Expr& a, const Expr& b);

struct Diagnostic {
    enum class Severity { Error, Warning };
    Severity severity = Severity::Error;
    std::string message;
    int line = 0;
    int col = 0;
};

/// Static checks: scoping, integer-constant indices and loop bounds, smooth
/// operator set, division and pow warnings. Deterministic and order stable.
std::vector<Diagnostic> validate(const Program& program);

bool has_errors(const std::vector<Diagnostic>& diagnostics);

/// Replaces the literal of every listed parameter in `text` with the given
/// value, leaving everything else untouched.
std::string rewrite_params(std::string_view text, const Program& program,
                           const std::vector<std::pair<std::string, double>>& values);

/// Shortest decimal literal (six significant digits or more) within 1e-7
/// relative of value, always with a decimal point.
std::string format_literal(double value);

} // namespace dcad::dsl
