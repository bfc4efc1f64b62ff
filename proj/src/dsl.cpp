#include "dcad/dsl.hpp"

#include "dcad/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>

namespace dcad::dsl {

std::optional<double> Program::pragma(std::string_view name) const {
    for (const auto& p : pragmas)
        if (p.name == name) return p.value;
    return std::nullopt;
}

int Program::param_index(std::string_view name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == name) return static_cast<int>(i);
    return -1;
}

namespace {

// ---------------------------------------------------------------- lexer

struct Token {
    enum class Kind { Ident, Number, Punct, Newline, End };
    Kind kind = Kind::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int col = 1;
    int length = 0;
};

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    int line = 1;
    int col = 1;
    std::size_t i = 0;
    auto push = [&](Token::Kind k, std::string text, int l, int c) {
        Token t;
        t.kind = k;
        t.length = static_cast<int>(text.size());
        t.text = std::move(text);
        t.line = l;
        t.col = c;
        out.push_back(std::move(t));
    };
    while (i < src.size()) {
        char ch = src[i];
        if (ch == '#') {
            while (i < src.size() && src[i] != '\n') ++i, ++col;
            continue;
        }
        if (ch == '\n') {
            push(Token::Kind::Newline, "\n", line, col);
            ++i;
            ++line;
            col = 1;
            continue;
        }
        if (ch == ' ' || ch == '\t' || ch == '\r') {
            ++i;
            ++col;
            continue;
        }
        const int start_col = col;
        const std::size_t start = i;
        auto is_digit = [&](std::size_t k) {
            return k < src.size() && src[k] >= '0' && src[k] <= '9';
        };
        if (is_digit(i) || (ch == '.' && is_digit(i + 1))) {
            while (is_digit(i)) ++i;
            if (i < src.size() && src[i] == '.' && !(i + 1 < src.size() && src[i + 1] == '.')) {
                ++i;
                while (is_digit(i)) ++i;
            }
            if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
                std::size_t k = i + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (is_digit(k)) {
                    i = k;
                    while (is_digit(i)) ++i;
                }
            }
            std::string text(src.substr(start, i - start));
            Token t;
            t.kind = Token::Kind::Number;
            t.text = text;
            t.length = static_cast<int>(text.size());
            t.line = line;
            t.col = start_col;
            auto res = std::from_chars(text.data(), text.data() + text.size(), t.number);
            if (res.ec != std::errc())
                throw SyntaxError("malformed number '" + text + "'", line, start_col, "");
            out.push_back(std::move(t));
            col += static_cast<int>(i - start);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            while (i < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_'))
                ++i;
            push(Token::Kind::Ident, std::string(src.substr(start, i - start)), line, start_col);
            col += static_cast<int>(i - start);
            continue;
        }
        if (ch == '.' && i + 1 < src.size() && src[i + 1] == '.') {
            push(Token::Kind::Punct, "..", line, start_col);
            i += 2;
            col += 2;
            continue;
        }
        static const std::string_view single = "()[]{},.=+-*/";
        if (single.find(ch) != std::string_view::npos) {
            push(Token::Kind::Punct, std::string(1, ch), line, start_col);
            ++i;
            ++col;
            continue;
        }
        throw SyntaxError(std::string("unexpected character '") + ch + "'", line, start_col, "");
    }
    push(Token::Kind::End, "", line, col);
    return out;
}

// ---------------------------------------------------------------- parser

bool is_transform(const std::string& s) {
    return s == "translate" || s == "rotate" || s == "scale";
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Program program() {
        Program p;
        skip_newlines();
        while (!at_end()) {
            if (is_ident("pragma")) {
                p.pragmas.push_back(pragma());
            } else if (is_ident("param")) {
                p.params.push_back(param());
            } else {
                p.statements.push_back(statement());
            }
            end_of_statement();
            skip_newlines();
        }
        return p;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    bool at_end() const { return peek().kind == Token::Kind::End; }
    bool is_ident(std::string_view s) const {
        return peek().kind == Token::Kind::Ident && peek().text == s;
    }
    bool is_punct(std::string_view s) const {
        return peek().kind == Token::Kind::Punct && peek().text == s;
    }
    Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& msg, const std::string& expected) const {
        const Token& t = peek();
        std::string what = msg;
        if (t.kind == Token::Kind::End) what += " at end of input";
        else if (t.kind == Token::Kind::Newline) what += " at end of line";
        else what += " near '" + t.text + "'";
        throw SyntaxError(what, t.line, t.col, expected);
    }

    void expect_punct(std::string_view s, const std::string& context) {
        if (!is_punct(s)) fail(context, "'" + std::string(s) + "'");
        next();
    }
    std::string expect_ident(const std::string& context) {
        if (peek().kind != Token::Kind::Ident) fail(context, "identifier");
        return next().text;
    }
    void skip_newlines() {
        while (peek().kind == Token::Kind::Newline) next();
    }
    void end_of_statement() {
        if (peek().kind == Token::Kind::Newline || at_end()) return;
        fail("unexpected token after statement", "end of line");
    }
    Span here() const { return Span{peek().line, peek().col}; }

    Pragma pragma() {
        Pragma p;
        p.span = here();
        next();
        p.name = expect_ident("pragma name");
        expect_punct("=", "pragma");
        p.value = signed_number("pragma value").first;
        return p;
    }

    std::pair<double, const Token*> signed_number(const std::string& context) {
        bool neg = false;
        if (is_punct("-")) {
            neg = true;
            next();
        }
        if (peek().kind != Token::Kind::Number) fail(context, "number");
        const Token& t = toks_[pos_];
        next();
        return {neg ? -t.number : t.number, &t};
    }

    ParamDecl param() {
        ParamDecl d;
        d.span = here();
        next();
        d.name = expect_ident("parameter name");
        expect_punct("=", "parameter declaration");
        d.value_span = here();
        const int start_col = peek().col;
        auto [v, tok] = signed_number("parameter initial value");
        d.initial = v;
        d.value_length = tok->col + tok->length - start_col;
        return d;
    }

    Stmt statement() {
        Stmt s;
        s.span = here();
        if (is_ident("let")) {
            next();
            s.kind = Stmt::Kind::Let;
            s.name = expect_ident("let binding name");
            expect_punct("=", "let binding");
            s.args.push_back(expr());
            return s;
        }
        if (is_ident("solid")) {
            next();
            s.kind = Stmt::Kind::Solid;
            s.name = expect_ident("solid name");
            expect_punct("=", "solid binding");
            if (!(is_ident("box") || is_ident("cylinder") || is_ident("rect")))
                fail("unknown primitive", "box, cylinder or rect");
            s.op = next().text;
            expect_punct("(", "primitive call");
            s.args = expr_list();
            expect_punct(")", "unclosed argument list");
            const std::size_t want = s.op == "rect" ? 2 : 3;
            if (s.args.size() != want)
                throw SyntaxError(s.op + " takes " + std::to_string(want) + " arguments",
                                  s.span.line, s.span.col, std::to_string(want) + " arguments");
            return s;
        }
        if (is_ident("for")) {
            next();
            s.kind = Stmt::Kind::Loop;
            s.name = expect_ident("loop variable");
            if (!is_ident("in")) fail("loop header", "'in'");
            next();
            s.loop_lo = expr();
            expect_punct("..", "loop range");
            s.loop_hi = expr();
            expect_punct("{", "loop body");
            if (peek().kind != Token::Kind::Newline) fail("loop body must start on a new line", "end of line");
            skip_newlines();
            while (!is_punct("}")) {
                if (at_end()) fail("unterminated loop body", "'}'");
                if (is_ident("param") || is_ident("pragma"))
                    fail("declarations are only allowed at top level", "statement");
                s.body.push_back(statement());
                end_of_statement();
                skip_newlines();
            }
            next();
            return s;
        }
        if (is_ident("clamp")) {
            next();
            s.kind = Stmt::Kind::Clamp;
            expect_punct("(", "clamp");
            s.args = expr_list();
            expect_punct(")", "unclosed argument list");
            if (s.args.size() != 3)
                throw SyntaxError("clamp takes 3 arguments", s.span.line, s.span.col, "3 arguments");
            return s;
        }
        if (peek().kind == Token::Kind::Ident &&
            (is_transform(peek().text) || peek().text == "extrude" || peek().text == "chamfer")) {
            s.kind = Stmt::Kind::Op;
            s.op = next().text;
            expect_punct("(", "operation call");
            s.target = ref();
            if (s.op == "rotate") {
                expect_punct(",", "rotate axis");
                const std::string ax = expect_ident("rotate axis");
                if (ax != "x" && ax != "y" && ax != "z")
                    throw SyntaxError("rotation axis must be x, y or z", s.target.span.line,
                                      s.target.span.col, "x, y or z");
                s.axis = ax[0];
            }
            while (is_punct(",")) {
                next();
                s.args.push_back(expr());
            }
            expect_punct(")", "unclosed argument list");
            check_op_shape(s);
            return s;
        }
        fail("expected a statement", "let, solid, for, clamp or an operation");
    }

    void check_op_shape(const Stmt& s) const {
        auto bad = [&](const std::string& m, const std::string& exp) {
            throw SyntaxError(m, s.span.line, s.span.col, exp);
        };
        const std::size_t n = s.args.size();
        if (s.op == "translate" && n != 3) bad("translate takes dx, dy, dz", "3 scalar arguments");
        if (s.op == "rotate" && n != 1) bad("rotate takes an axis and an angle", "1 scalar argument");
        if (s.op == "scale" && n != 1 && n != 3) bad("scale takes s or sx, sy, sz", "1 or 3 scalar arguments");
        if (is_transform(s.op) && s.target.part == Ref::Part::Face)
            bad(s.op + " applies to a solid or a vertex selection", "solid or solid.v[...]");
        if (s.op == "extrude") {
            if (s.target.part != Ref::Part::Face) bad("extrude needs a face reference", "solid.f[k]");
            if (n != 1) bad("extrude takes a length", "1 scalar argument");
        }
        if (s.op == "chamfer") {
            if (s.target.part != Ref::Part::Vertices || s.target.items.size() != 1 ||
                s.target.items[0].hi)
                bad("chamfer needs a single corner vertex", "solid.v[k]");
            if (n != 1) bad("chamfer takes a radius", "1 scalar argument");
        }
    }

    Ref ref() {
        Ref r;
        r.span = here();
        r.solid = expect_ident("solid reference");
        if (!is_punct(".")) return r;
        next();
        const std::string part = expect_ident("reference part");
        if (part == "v") r.part = Ref::Part::Vertices;
        else if (part == "f") r.part = Ref::Part::Face;
        else fail("unknown reference part", "v or f");
        expect_punct("[", "index list");
        r.items.push_back(index_item());
        while (is_punct(",")) {
            next();
            r.items.push_back(index_item());
        }
        expect_punct("]", "unclosed index list");
        if (r.part == Ref::Part::Face && (r.items.size() != 1 || r.items[0].hi))
            throw SyntaxError("face reference takes a single index", r.span.line, r.span.col, "f[k]");
        return r;
    }

    IndexItem index_item() {
        IndexItem it;
        it.lo = expr();
        if (is_punct("..")) {
            next();
            it.hi = expr();
        }
        return it;
    }

    std::vector<ExprPtr> expr_list() {
        std::vector<ExprPtr> v;
        if (is_punct(")")) return v;
        v.push_back(expr());
        while (is_punct(",")) {
            next();
            v.push_back(expr());
        }
        return v;
    }

    ExprPtr expr() {
        ExprPtr lhs = term();
        while (is_punct("+") || is_punct("-")) {
            auto e = std::make_shared<Expr>();
            e->span = here();
            e->kind = Expr::Kind::Binary;
            e->op = next().text[0];
            e->args = {lhs, term()};
            lhs = e;
        }
        return lhs;
    }

    ExprPtr term() {
        ExprPtr lhs = unary();
        while (is_punct("*") || is_punct("/")) {
            auto e = std::make_shared<Expr>();
            e->span = here();
            e->kind = Expr::Kind::Binary;
            e->op = next().text[0];
            e->args = {lhs, unary()};
            lhs = e;
        }
        return lhs;
    }

    ExprPtr unary() {
        if (is_punct("-")) {
            auto e = std::make_shared<Expr>();
            e->span = here();
            next();
            e->kind = Expr::Kind::Unary;
            e->op = '-';
            e->args = {unary()};
            return e;
        }
        return primary();
    }

    ExprPtr primary() {
        auto e = std::make_shared<Expr>();
        e->span = here();
        if (peek().kind == Token::Kind::Number) {
            e->kind = Expr::Kind::Number;
            e->number = next().number;
            return e;
        }
        if (is_punct("(")) {
            next();
            ExprPtr inner = expr();
            expect_punct(")", "unclosed parenthesis");
            return inner;
        }
        if (peek().kind == Token::Kind::Ident) {
            e->name = next().text;
            if (is_punct("(")) {
                next();
                e->kind = Expr::Kind::Call;
                e->args = expr_list();
                expect_punct(")", "unclosed argument list");
                return e;
            }
            if (is_punct(".")) {
                next();
                if (!is_ident("v")) fail("vertex coordinate reference", "v");
                next();
                expect_punct("[", "vertex index");
                e->kind = Expr::Kind::VertexCoord;
                e->args = {expr()};
                expect_punct("]", "unclosed index");
                expect_punct(".", "coordinate selector");
                const std::string ax = expect_ident("coordinate selector");
                if (ax != "x" && ax != "y" && ax != "z") fail("coordinate selector", "x, y or z");
                e->axis = ax[0] - 'x';
                return e;
            }
            e->kind = Expr::Kind::Name;
            return e;
        }
        fail("expected an expression", "expression");
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- printer

std::string number_text(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

int precedence(const Expr& e) {
    if (e.kind == Expr::Kind::Binary) return (e.op == '+' || e.op == '-') ? 1 : 2;
    if (e.kind == Expr::Kind::Unary) return 3;
    return 4;
}

void print_expr(const Expr& e, std::string& out) {
    switch (e.kind) {
    case Expr::Kind::Number:
        out += number_text(e.number);
        break;
    case Expr::Kind::Name:
        out += e.name;
        break;
    case Expr::Kind::VertexCoord:
        out += e.name + ".v[";
        print_expr(*e.args[0], out);
        out += "].";
        out += static_cast<char>('x' + e.axis);
        break;
    case Expr::Kind::Unary: {
        out += '-';
        const bool paren = precedence(*e.args[0]) < 3;
        if (paren) out += '(';
        print_expr(*e.args[0], out);
        if (paren) out += ')';
        break;
    }
    case Expr::Kind::Binary: {
        const int p = precedence(e);
        const bool lp = precedence(*e.args[0]) < p;
        const bool rp = precedence(*e.args[1]) <= p;
        if (lp) out += '(';
        print_expr(*e.args[0], out);
        if (lp) out += ')';
        out += ' ';
        out += e.op;
        out += ' ';
        if (rp) out += '(';
        print_expr(*e.args[1], out);
        if (rp) out += ')';
        break;
    }
    case Expr::Kind::Call:
        out += e.name + "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i) out += ", ";
            print_expr(*e.args[i], out);
        }
        out += ')';
        break;
    }
}

void print_ref(const Ref& r, std::string& out) {
    out += r.solid;
    if (r.part == Ref::Part::Whole) return;
    out += r.part == Ref::Part::Vertices ? ".v[" : ".f[";
    for (std::size_t i = 0; i < r.items.size(); ++i) {
        if (i) out += ", ";
        print_expr(*r.items[i].lo, out);
        if (r.items[i].hi) {
            out += "..";
            print_expr(*r.items[i].hi, out);
        }
    }
    out += ']';
}

void print_stmt(const Stmt& s, int depth, std::string& out) {
    out += std::string(static_cast<std::size_t>(depth) * 2, ' ');
    auto args = [&](std::size_t from) {
        for (std::size_t i = from; i < s.args.size(); ++i) {
            if (i) out += ", ";
            print_expr(*s.args[i], out);
        }
    };
    switch (s.kind) {
    case Stmt::Kind::Let:
        out += "let " + s.name + " = ";
        print_expr(*s.args[0], out);
        break;
    case Stmt::Kind::Solid:
        out += "solid " + s.name + " = " + s.op + "(";
        args(0);
        out += ')';
        break;
    case Stmt::Kind::Clamp:
        out += "clamp(";
        args(0);
        out += ')';
        break;
    case Stmt::Kind::Op:
        out += s.op + "(";
        print_ref(s.target, out);
        if (s.op == "rotate") {
            out += ", ";
            out += s.axis;
        }
        for (const auto& a : s.args) {
            out += ", ";
            print_expr(*a, out);
        }
        out += ')';
        break;
    case Stmt::Kind::Loop:
        out += "for " + s.name + " in ";
        print_expr(*s.loop_lo, out);
        out += "..";
        print_expr(*s.loop_hi, out);
        out += " {\n";
        for (const auto& b : s.body) print_stmt(b, depth + 1, out);
        out += std::string(static_cast<std::size_t>(depth) * 2, ' ') + "}";
        break;
    }
    out += '\n';
}

bool same_ptr(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    return same_tree(*a, *b);
}

bool same_ref(const Ref& a, const Ref& b) {
    if (a.solid != b.solid || a.part != b.part || a.items.size() != b.items.size()) return false;
    for (std::size_t i = 0; i < a.items.size(); ++i)
        if (!same_ptr(a.items[i].lo, b.items[i].lo) || !same_ptr(a.items[i].hi, b.items[i].hi))
            return false;
    return true;
}

bool same_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b);

bool same_stmt(const Stmt& a, const Stmt& b) {
    if (a.kind != b.kind || a.name != b.name || a.op != b.op || a.axis != b.axis) return false;
    if (a.kind == Stmt::Kind::Op && !same_ref(a.target, b.target)) return false;
    if (a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!same_ptr(a.args[i], b.args[i])) return false;
    return same_ptr(a.loop_lo, b.loop_lo) && same_ptr(a.loop_hi, b.loop_hi) &&
           same_stmts(a.body, b.body);
}

bool same_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_stmt(a[i], b[i])) return false;
    return true;
}

// ---------------------------------------------------------------- validator

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
    bool positive() const { return lo > 0.0; }
};

Interval unknown() { return {}; }

Interval mul(Interval a, Interval b) {
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
        if (a.lo >= 0 && b.lo >= 0) return {a.lo * b.lo, std::numeric_limits<double>::infinity()};
        return unknown();
    }
    const double c[] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
}

class Validator {
public:
    std::vector<Diagnostic> run(const Program& p) {
        scopes_.emplace_back();
        std::set<std::string> seen;
        for (const auto& pr : p.pragmas) {
            if (pr.name != "epsilon")
                warn("unknown pragma '" + pr.name + "'", pr.span);
            else if (!(pr.value > 0.0))
                error("pragma epsilon must be positive", pr.span);
        }
        for (const auto& d : p.params) {
            if (!seen.insert(d.name).second)
                error("duplicate parameter '" + d.name + "'", d.span);
            if (!std::isfinite(d.initial))
                error("parameter '" + d.name + "' must have a finite initial value", d.span);
            declare(d.name, Sym{SymKind::Param, unknown()}, d.span);
        }
        block(p.statements);
        return std::move(diags_);
    }

private:
    enum class SymKind { Param, Let, Solid, LoopVar };
    struct Sym {
        SymKind kind;
        Interval range;
    };

    void error(const std::string& m, Span s) {
        diags_.push_back({Diagnostic::Severity::Error, m, s.line, s.col});
    }
    void warn(const std::string& m, Span s) {
        diags_.push_back({Diagnostic::Severity::Warning, m, s.line, s.col});
    }

    Sym* lookup(const std::string& name) {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end()) return &f->second;
        }
        return nullptr;
    }

    void declare(const std::string& name, Sym sym, Span span) {
        if (scopes_.back().count(name)) {
            if (sym.kind != SymKind::Param) error("duplicate name '" + name + "'", span);
            return;
        }
        if (lookup(name) && lookup(name)->kind == SymKind::Param && sym.kind != SymKind::Param)
            error("'" + name + "' shadows a parameter", span);
        scopes_.back().emplace(name, sym);
    }

    void block(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) stmt(s);
    }

    void stmt(const Stmt& s) {
        switch (s.kind) {
        case Stmt::Kind::Let: {
            Interval r = scalar(*s.args[0]);
            declare(s.name, Sym{SymKind::Let, r}, s.span);
            break;
        }
        case Stmt::Kind::Solid:
            if (s.op == "cylinder") {
                scalar(*s.args[0]);
                scalar(*s.args[1]);
                auto sides = integer(*s.args[2], "cylinder side count must be integer constant");
                if (sides && *sides < 3) error("cylinder needs at least 3 sides", s.args[2]->span);
            } else {
                for (const auto& a : s.args) scalar(*a);
            }
            declare(s.name, Sym{SymKind::Solid, unknown()}, s.span);
            break;
        case Stmt::Kind::Clamp: {
            Interval lo = scalar(*s.args[0]);
            scalar(*s.args[1]);
            Interval hi = scalar(*s.args[2]);
            if (s.args[1]->kind == Expr::Kind::Name) {
                if (Sym* sym = lookup(s.args[1]->name);
                    sym && (sym->kind == SymKind::Param || sym->kind == SymKind::Let)) {
                    sym->range.lo = std::max(sym->range.lo, lo.lo);
                    sym->range.hi = std::min(sym->range.hi, hi.hi);
                }
            }
            break;
        }
        case Stmt::Kind::Op:
            target(s.target);
            for (const auto& a : s.args) scalar(*a);
            break;
        case Stmt::Kind::Loop: {
            auto lo = integer(*s.loop_lo, "loop bound must be integer constant");
            auto hi = integer(*s.loop_hi, "loop bound must be integer constant");
            scopes_.emplace_back();
            Interval r;
            if (lo && hi) r = {static_cast<double>(*lo), static_cast<double>(*hi - 1)};
            declare(s.name, Sym{SymKind::LoopVar, r}, s.span);
            block(s.body);
            scopes_.pop_back();
            break;
        }
        }
    }

    void target(const Ref& r) {
        Sym* sym = lookup(r.solid);
        if (!sym) error("unknown identifier '" + r.solid + "'", r.span);
        else if (sym->kind != SymKind::Solid) error("'" + r.solid + "' is not a solid", r.span);
        for (const auto& it : r.items) {
            integer(*it.lo, "index must be integer constant");
            if (it.hi) integer(*it.hi, "index must be integer constant");
        }
    }

    // Integer-constant check. Returns the value when it does not depend on
    // loop variables.
    std::optional<long> integer(const Expr& e, const std::string& msg) {
        bool ok = true;
        bool has_loop_var = false;
        const double v = int_eval(e, ok, has_loop_var);
        if (!ok) {
            error(msg, e.span);
            return std::nullopt;
        }
        if (has_loop_var) return std::nullopt;
        return static_cast<long>(v);
    }

    double int_eval(const Expr& e, bool& ok, bool& loop_var) {
        switch (e.kind) {
        case Expr::Kind::Number:
            if (e.number != std::floor(e.number) || !std::isfinite(e.number)) ok = false;
            return e.number;
        case Expr::Kind::Name: {
            Sym* s = lookup(e.name);
            if (!s) {
                error("unknown identifier '" + e.name + "'", e.span);
                ok = true; // already reported
                loop_var = true;
                return 0.0;
            }
            if (s->kind != SymKind::LoopVar) ok = false;
            loop_var = true;
            return 0.0;
        }
        case Expr::Kind::Unary:
            return -int_eval(*e.args[0], ok, loop_var);
        case Expr::Kind::Binary: {
            if (e.op == '/') ok = false;
            const double a = int_eval(*e.args[0], ok, loop_var);
            const double b = int_eval(*e.args[1], ok, loop_var);
            return e.op == '+' ? a + b : e.op == '-' ? a - b : a * b;
        }
        default:
            ok = false;
            return 0.0;
        }
    }

    Interval scalar(const Expr& e) {
        switch (e.kind) {
        case Expr::Kind::Number:
            return {e.number, e.number};
        case Expr::Kind::Name: {
            Sym* s = lookup(e.name);
            if (!s) {
                error("unknown identifier '" + e.name + "'", e.span);
                return unknown();
            }
            if (s->kind == SymKind::Solid) {
                error("'" + e.name + "' is a solid, not a scalar", e.span);
                return unknown();
            }
            return s->range;
        }
        case Expr::Kind::VertexCoord: {
            Sym* s = lookup(e.name);
            if (!s) error("unknown identifier '" + e.name + "'", e.span);
            else if (s->kind != SymKind::Solid) error("'" + e.name + "' is not a solid", e.span);
            integer(*e.args[0], "index must be integer constant");
            return unknown();
        }
        case Expr::Kind::Unary: {
            Interval a = scalar(*e.args[0]);
            return {-a.hi, -a.lo};
        }
        case Expr::Kind::Binary: {
            Interval a = scalar(*e.args[0]);
            Interval b = scalar(*e.args[1]);
            switch (e.op) {
            case '+': return {a.lo + b.lo, a.hi + b.hi};
            case '-': return {a.lo - b.hi, a.hi - b.lo};
            case '*': return mul(a, b);
            default:
                if (!b.excludes_zero()) {
                    warn("division by an expression not bounded away from zero; wrap the "
                         "denominator in clamp",
                         e.span);
                    return unknown();
                }
                return mul(a, Interval{1.0 / b.hi, 1.0 / b.lo});
            }
        }
        case Expr::Kind::Call:
            return call(e);
        }
        return unknown();
    }

    Interval call(const Expr& e) {
        static const std::map<std::string, std::size_t> arity = {
            {"sin", 1}, {"cos", 1}, {"sqrt", 1}, {"exp", 1}, {"log", 1}, {"pow", 2}, {"clamp", 3}};
        auto it = arity.find(e.name);
        if (it == arity.end()) {
            if (e.name == "abs" || e.name == "min" || e.name == "max")
                error("'" + e.name + "' is not differentiable everywhere and is not allowed", e.span);
            else
                error("unknown function '" + e.name + "'", e.span);
            for (const auto& a : e.args) scalar(*a);
            return unknown();
        }
        if (e.args.size() != it->second) {
            error("'" + e.name + "' takes " + std::to_string(it->second) + " argument(s)", e.span);
            for (const auto& a : e.args) scalar(*a);
            return unknown();
        }
        std::vector<Interval> a;
        for (const auto& x : e.args) a.push_back(scalar(*x));
        const double inf = std::numeric_limits<double>::infinity();
        if (e.name == "sin" || e.name == "cos") return {-1.0, 1.0};
        if (e.name == "exp") return {a[0].lo > -inf ? std::exp(a[0].lo) : 0.0, std::exp(a[0].hi)};
        if (e.name == "sqrt") {
            if (!(a[0].lo > 0.0))
                warn("sqrt argument not bounded away from zero", e.span);
            return {std::sqrt(std::max(a[0].lo, 0.0)), std::sqrt(a[0].hi)};
        }
        if (e.name == "log") {
            if (!a[0].positive()) warn("log argument not bounded away from zero", e.span);
            return unknown();
        }
        if (e.name == "pow") {
            const bool int_exp = a[1].lo == a[1].hi && a[1].lo == std::floor(a[1].lo);
            if (!int_exp && !a[0].positive())
                warn("pow with a non-integer exponent needs a base bounded above zero", e.span);
            if (a[0].positive()) return {0.0, inf};
            return unknown();
        }
        // clamp(lo, x, hi)
        return {a[0].lo, a[2].hi};
    }

    std::vector<std::map<std::string, Sym>> scopes_;
    std::vector<Diagnostic> diags_;
};

} // namespace

Program parse(std::string_view text) {
    Parser p(lex(text));
    return p.program();
}

std::string print(const Expr& expr) {
    std::string out;
    print_expr(expr, out);
    return out;
}

std::string print(const Program& program) {
    std::string out;
    for (const auto& p : program.pragmas) out += "pragma " + p.name + " = " + number_text(p.value) + "\n";
    for (const auto& p : program.params) out += "param " + p.name + " = " + number_text(p.initial) + "\n";
    for (const auto& s : program.statements) print_stmt(s, 0, out);
    return out;
}

bool same_tree(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.name != b.name || a.op != b.op || a.axis != b.axis ||
        a.args.size() != b.args.size())
        return false;
    if (a.kind == Expr::Kind::Number && !(a.number == b.number)) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!same_tree(*a.args[i], *b.args[i])) return false;
    return true;
}

bool same_tree(const Program& a, const Program& b) {
    if (a.pragmas.size() != b.pragmas.size() || a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.pragmas.size(); ++i)
        if (a.pragmas[i].name != b.pragmas[i].name || a.pragmas[i].value != b.pragmas[i].value)
            return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (a.params[i].name != b.params[i].name || a.params[i].initial != b.params[i].initial)
            return false;
    return same_stmts(a.statements, b.statements);
}

std::vector<Diagnostic> validate(const Program& program) {
    return Validator().run(program);
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; });
}

std::string format_literal(double value) {
    if (value == 0.0) return "0.0";
    char buf[64];
    // Fewest digits (at least six) that reproduce the value to 1e-7 relative.
    for (int digits = 6; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, value);
        if (std::abs(std::strtod(buf, nullptr) - value) <= 1e-7 * std::max(1.0, std::abs(value))) break;
    }
    std::string s(buf);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string rewrite_params(std::string_view text, const Program& program,
                           const std::vector<std::pair<std::string, double>>& values) {
    // Offsets of line starts.
    std::vector<std::size_t> line_start{0};
    for (std::size_t i = 0; i < text.size(); ++i)
        if (text[i] == '\n') line_start.push_back(i + 1);

    struct Edit {
        std::size_t at;
        std::size_t len;
        std::string with;
    };
    std::vector<Edit> edits;
    for (const auto& [name, value] : values) {
        const int idx = program.param_index(name);
        if (idx < 0) continue;
        const auto& d = program.params[static_cast<std::size_t>(idx)];
        const std::size_t line = static_cast<std::size_t>(d.value_span.line - 1);
        if (line >= line_start.size()) continue;
        edits.push_back({line_start[line] + static_cast<std::size_t>(d.value_span.col - 1),
                         static_cast<std::size_t>(d.value_length), format_literal(value)});
    }
    std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.at > b.at; });
    std::string out(text);
    for (const auto& e : edits) out.replace(e.at, e.len, e.with);
    return out;
}

} // namespace dcad::dsl
