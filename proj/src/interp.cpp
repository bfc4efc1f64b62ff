#include "dcad/interp.hpp"
#include "dcad/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <variant>

namespace dcad {

using dsl::Expr;
using dsl::Ref;
using dsl::Span;
using dsl::Stmt;

namespace {

[[noreturn]] void fail(const std::string& msg, Span s) { throw InterpError(msg, s.line, s.col); }

struct SolidState {
    std::string name;
    /// Local vertex slot -> global vid.
    std::vector<std::size_t> verts;
    /// Faces over local slots.
    std::vector<std::vector<std::size_t>> faces;
};

struct LoopValue {
    long value;
};

using Binding = std::variant<NodeId, std::size_t /* solid index */, LoopValue>;

class Interpreter {
public:
    Interpreter(const dsl::Program& program, std::span<const double> params)
        : program_(program) {
        result_.graph = ComputationGraph(program.params.size());
        if (params.size() != program.params.size())
            throw Error("program declares " + std::to_string(program.params.size()) +
                        " parameters, got " + std::to_string(params.size()));
        result_.epsilon = program.pragma("epsilon").value_or(kDefaultEpsilon);
        scopes_.emplace_back();
        for (std::size_t i = 0; i < params.size(); ++i) {
            result_.param_names.push_back(program.params[i].name);
            result_.params.push_back(params[i]);
        }
        // Re-trace the parameter nodes at the requested values.
        g().evaluate(params);
        for (std::size_t i = 0; i < params.size(); ++i)
            scopes_.back()[program.params[i].name] = g().param(i);
    }

    InterpResult run() && {
        for (const auto& s : program_.statements) exec(s);
        finish();
        return std::move(result_);
    }

private:
    ComputationGraph& g() { return result_.graph; }

    // ---- scopes

    const Binding* lookup(const std::string& name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
            if (auto f = it->find(name); f != it->end()) return &f->second;
        return nullptr;
    }

    SolidState& solid(const std::string& name, Span span) {
        const Binding* b = lookup(name);
        if (!b || !std::holds_alternative<std::size_t>(*b)) fail("undefined solid '" + name + "'", span);
        return solids_[std::get<std::size_t>(*b)];
    }

    // ---- expressions

    long integer(const Expr& e) {
        const double v = int_value(e);
        if (v != std::floor(v)) fail("index must be integer constant", e.span);
        return static_cast<long>(v);
    }

    double int_value(const Expr& e) {
        switch (e.kind) {
        case Expr::Kind::Number: return e.number;
        case Expr::Kind::Name: {
            const Binding* b = lookup(e.name);
            if (!b || !std::holds_alternative<LoopValue>(*b)) fail("index must be integer constant", e.span);
            return static_cast<double>(std::get<LoopValue>(*b).value);
        }
        case Expr::Kind::Unary: return -int_value(*e.args[0]);
        case Expr::Kind::Binary: {
            const double a = int_value(*e.args[0]);
            const double b = int_value(*e.args[1]);
            switch (e.op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            default:
                if (b == 0) fail("division by zero in index", e.span);
                return a / b;
            }
        }
        default: fail("index must be integer constant", e.span);
        }
    }

    NodeId scalar(const Expr& e) {
        switch (e.kind) {
        case Expr::Kind::Number: return g().constant(e.number);
        case Expr::Kind::Name: {
            const Binding* b = lookup(e.name);
            if (!b) fail("unknown identifier '" + e.name + "'", e.span);
            if (auto n = std::get_if<NodeId>(b)) return *n;
            if (auto l = std::get_if<LoopValue>(b)) return g().constant(static_cast<double>(l->value));
            fail("solid '" + e.name + "' used as a number", e.span);
        }
        case Expr::Kind::VertexCoord: {
            SolidState& s = solid(e.name, e.span);
            const long k = integer(*e.args[0]);
            if (k < 0 || static_cast<std::size_t>(k) >= s.verts.size())
                fail("vertex index " + std::to_string(k) + " out of range for '" + e.name + "' (" +
                         std::to_string(s.verts.size()) + " vertices)",
                     e.args[0]->span);
            return (*coords_[s.verts[static_cast<std::size_t>(k)]])[static_cast<std::size_t>(e.axis)];
        }
        case Expr::Kind::Unary: return g().unary(OpCode::Neg, scalar(*e.args[0]));
        case Expr::Kind::Binary: {
            const NodeId a = scalar(*e.args[0]);
            const NodeId b = scalar(*e.args[1]);
            switch (e.op) {
            case '+': return g().add(a, b);
            case '-': return g().sub(a, b);
            case '*': return g().mul(a, b);
            default: return g().div(a, b);
            }
        }
        case Expr::Kind::Call: {
            static const std::map<std::string, OpCode> unary = {
                {"sin", OpCode::Sin}, {"cos", OpCode::Cos}, {"sqrt", OpCode::Sqrt},
                {"exp", OpCode::Exp}, {"log", OpCode::Log}};
            if (auto it = unary.find(e.name); it != unary.end()) {
                if (e.args.size() != 1) fail(e.name + " takes 1 argument", e.span);
                return g().unary(it->second, scalar(*e.args[0]));
            }
            if (e.name == "pow") {
                if (e.args.size() != 2) fail("pow takes 2 arguments", e.span);
                const NodeId a = scalar(*e.args[0]);
                const NodeId b = scalar(*e.args[1]);
                return g().binary(OpCode::Pow, a, b);
            }
            if (e.name == "clamp") {
                if (e.args.size() != 3) fail("clamp takes 3 arguments", e.span);
                return clamp(e.args, e.span);
            }
            fail("unknown function '" + e.name + "'", e.span);
        }
        }
        fail("bad expression", e.span);
    }

    NodeId clamp(const std::vector<dsl::ExprPtr>& args, Span span) {
        const NodeId lo = scalar(*args[0]);
        const NodeId f = scalar(*args[1]);
        const NodeId hi = scalar(*args[2]);
        emit_clamp(g(), lo, f, hi, span, result_.constraints);
        return f;
    }

    // ---- vertices

    std::size_t new_vertex(NodeId x, NodeId y, NodeId z) {
        coords_.push_back(std::array<NodeId, 3>{x, y, z});
        return coords_.size() - 1;
    }

    std::array<NodeId, 3>& xyz(std::size_t vid) { return *coords_[vid]; }

    std::vector<std::size_t> select_vertices(const Ref& r, SolidState& s) {
        std::vector<std::size_t> out;
        if (r.part == Ref::Part::Whole) {
            for (std::size_t i = 0; i < s.verts.size(); ++i) out.push_back(i);
            return out;
        }
        auto check = [&](long k, Span span) {
            if (k < 0 || static_cast<std::size_t>(k) >= s.verts.size())
                fail("vertex index " + std::to_string(k) + " out of range for '" + s.name + "' (" +
                         std::to_string(s.verts.size()) + " vertices)",
                     span);
            return static_cast<std::size_t>(k);
        };
        std::vector<bool> seen(s.verts.size(), false);
        for (const auto& item : r.items) {
            const long lo = integer(*item.lo);
            const long hi = item.hi ? integer(*item.hi) : lo + 1;
            if (item.hi && hi < lo) fail("empty or reversed index range", item.lo->span);
            for (long k = lo; k < hi; ++k) {
                const std::size_t idx = check(k, item.lo->span);
                if (!seen[idx]) out.push_back(idx);
                seen[idx] = true;
            }
        }
        return out;
    }

    std::size_t select_face(const Ref& r, SolidState& s) {
        const long k = integer(*r.items[0].lo);
        if (k < 0 || static_cast<std::size_t>(k) >= s.faces.size())
            fail("face index " + std::to_string(k) + " out of range for '" + s.name + "' (" +
                     std::to_string(s.faces.size()) + " faces)",
                 r.items[0].lo->span);
        return static_cast<std::size_t>(k);
    }

    // ---- statements

    void exec(const Stmt& s) {
        g().set_provenance("line " + std::to_string(s.span.line) + ": " +
                           (s.op.empty() ? std::string(kind_name(s.kind)) : s.op));
        switch (s.kind) {
        case Stmt::Kind::Let: scopes_.back()[s.name] = scalar(*s.args[0]); break;
        case Stmt::Kind::Solid: make_solid(s); break;
        case Stmt::Kind::Clamp: clamp(s.args, s.span); break;
        case Stmt::Kind::Op: apply(s); break;
        case Stmt::Kind::Loop: {
            const long lo = integer(*s.loop_lo);
            const long hi = integer(*s.loop_hi);
            for (long i = lo; i < hi; ++i) {
                scopes_.emplace_back();
                scopes_.back()[s.name] = LoopValue{i};
                for (const auto& b : s.body) exec(b);
                scopes_.pop_back();
            }
            break;
        }
        }
    }

    static const char* kind_name(Stmt::Kind k) {
        switch (k) {
        case Stmt::Kind::Let: return "let";
        case Stmt::Kind::Solid: return "solid";
        case Stmt::Kind::Clamp: return "clamp";
        case Stmt::Kind::Op: return "op";
        case Stmt::Kind::Loop: return "for";
        }
        return "";
    }

    void make_solid(const Stmt& s) {
        SolidState st;
        st.name = s.name;
        if (s.op == "box") {
            const NodeId half = g().constant(0.5);
            NodeId h[3], n[3];
            for (int a = 0; a < 3; ++a) {
                h[a] = g().mul(half, scalar(*s.args[static_cast<std::size_t>(a)]));
                n[a] = g().unary(OpCode::Neg, h[a]);
            }
            // Bottom ring then top ring, counter-clockwise seen from +z.
            static constexpr int sx[8] = {0, 1, 1, 0, 0, 1, 1, 0};
            static constexpr int sy[8] = {0, 0, 1, 1, 0, 0, 1, 1};
            static constexpr int sz[8] = {0, 0, 0, 0, 1, 1, 1, 1};
            for (int i = 0; i < 8; ++i)
                st.verts.push_back(new_vertex(sx[i] ? h[0] : n[0], sy[i] ? h[1] : n[1], sz[i] ? h[2] : n[2]));
            st.faces = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                        {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
        } else if (s.op == "cylinder") {
            const NodeId r = scalar(*s.args[0]);
            const NodeId hh = g().mul(g().constant(0.5), scalar(*s.args[1]));
            const NodeId nh = g().unary(OpCode::Neg, hh);
            const long sides = integer(*s.args[2]);
            if (sides < 3) fail("cylinder needs at least 3 sides", s.args[2]->span);
            const auto n = static_cast<std::size_t>(sides);
            std::vector<NodeId> xs, ys;
            for (std::size_t j = 0; j < n; ++j) {
                const double t = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
                xs.push_back(g().mul(r, g().constant(std::cos(t))));
                ys.push_back(g().mul(r, g().constant(std::sin(t))));
            }
            for (int ring = 0; ring < 2; ++ring)
                for (std::size_t j = 0; j < n; ++j) st.verts.push_back(new_vertex(xs[j], ys[j], ring ? hh : nh));
            std::vector<std::size_t> bottom, top;
            for (std::size_t j = 0; j < n; ++j) {
                bottom.push_back(n - 1 - j);
                top.push_back(n + j);
            }
            st.faces.push_back(bottom);
            st.faces.push_back(top);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t k = (j + 1) % n;
                st.faces.push_back({j, k, n + k, n + j});
            }
        } else if (s.op == "rect") {
            const NodeId half = g().constant(0.5);
            const NodeId hw = g().mul(half, scalar(*s.args[0]));
            const NodeId hh = g().mul(half, scalar(*s.args[1]));
            const NodeId nw = g().unary(OpCode::Neg, hw);
            const NodeId nh = g().unary(OpCode::Neg, hh);
            const NodeId z = g().constant(0.0);
            st.verts = {new_vertex(nw, nh, z), new_vertex(hw, nh, z), new_vertex(hw, hh, z),
                        new_vertex(nw, hh, z)};
            st.faces = {{0, 1, 2, 3}, {3, 2, 1, 0}};
        } else {
            fail("unknown primitive '" + s.op + "'", s.span);
        }
        solids_.push_back(std::move(st));
        scopes_.back()[s.name] = solids_.size() - 1;
    }

    void apply(const Stmt& s) {
        SolidState& st = solid(s.target.solid, s.target.span);
        if (s.op == "translate") {
            const NodeId d[3] = {scalar(*s.args[0]), scalar(*s.args[1]), scalar(*s.args[2])};
            for (auto k : select_vertices(s.target, st)) {
                auto& c = xyz(st.verts[k]);
                for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = g().add(c[static_cast<std::size_t>(a)], d[a]);
            }
        } else if (s.op == "scale") {
            NodeId f[3];
            if (s.args.size() == 1) {
                f[0] = f[1] = f[2] = scalar(*s.args[0]);
            } else {
                for (int a = 0; a < 3; ++a) f[a] = scalar(*s.args[static_cast<std::size_t>(a)]);
            }
            for (auto k : select_vertices(s.target, st)) {
                auto& c = xyz(st.verts[k]);
                for (int a = 0; a < 3; ++a) c[static_cast<std::size_t>(a)] = g().mul(c[static_cast<std::size_t>(a)], f[a]);
            }
        } else if (s.op == "rotate") {
            const NodeId theta = scalar(*s.args[0]);
            const NodeId cs = g().unary(OpCode::Cos, theta);
            const NodeId sn = g().unary(OpCode::Sin, theta);
            // (u, w) is the plane rotated counter-clockwise about the axis.
            std::size_t u = 0, w = 1;
            if (s.axis == 'x') u = 1, w = 2;
            if (s.axis == 'y') u = 2, w = 0;
            for (auto k : select_vertices(s.target, st)) {
                auto& c = xyz(st.verts[k]);
                const NodeId cu = c[u], cw = c[w];
                c[u] = g().sub(g().mul(cs, cu), g().mul(sn, cw));
                c[w] = g().add(g().mul(sn, cu), g().mul(cs, cw));
            }
        } else if (s.op == "extrude") {
            extrude(s, st);
        } else if (s.op == "chamfer") {
            chamfer(s, st);
        } else {
            fail("unknown operation '" + s.op + "'", s.span);
        }
    }

    void extrude(const Stmt& s, SolidState& st) {
        const std::size_t f = select_face(s.target, st);
        const NodeId len = scalar(*s.args[0]);
        const std::vector<std::size_t> cap = st.faces[f];
        const std::size_t m = cap.size();

        // Newell normal of the face at the current coordinates.
        NodeId nrm[3];
        for (std::size_t a = 0; a < 3; ++a) {
            const std::size_t p = (a + 1) % 3, q = (a + 2) % 3;
            NodeId acc = 0;
            for (std::size_t i = 0; i < m; ++i) {
                const auto& ci = xyz(st.verts[cap[i]]);
                const auto& cj = xyz(st.verts[cap[(i + 1) % m]]);
                const NodeId term = g().mul(g().sub(ci[p], cj[p]), g().add(ci[q], cj[q]));
                acc = i == 0 ? term : g().add(acc, term);
            }
            nrm[a] = acc;
        }
        NodeId sq = g().mul(nrm[0], nrm[0]);
        sq = g().add(sq, g().mul(nrm[1], nrm[1]));
        sq = g().add(sq, g().mul(nrm[2], nrm[2]));
        const NodeId scale = g().div(len, g().unary(OpCode::Sqrt, sq));
        NodeId off[3];
        for (int a = 0; a < 3; ++a) off[a] = g().mul(nrm[a], scale);

        std::vector<std::size_t> lifted;
        for (std::size_t i = 0; i < m; ++i) {
            const auto c = xyz(st.verts[cap[i]]);
            st.verts.push_back(new_vertex(g().add(c[0], off[0]), g().add(c[1], off[1]), g().add(c[2], off[2])));
            lifted.push_back(st.verts.size() - 1);
        }
        st.faces[f] = lifted;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = (i + 1) % m;
            st.faces.push_back({cap[i], cap[j], lifted[j], lifted[i]});
        }

        ConstraintRecord rec;
        rec.node = g().sub(len, g().constant(result_.epsilon));
        rec.op = "extrude";
        rec.span = s.span;
        rec.description = "extrude length - epsilon >= 0";
        rec.kind = ConstraintRecord::Kind::Auto;
        result_.constraints.push_back(rec);
    }

    void chamfer(const Stmt& s, SolidState& st) {
        const long kk = integer(*s.target.items[0].lo);
        if (kk < 0 || static_cast<std::size_t>(kk) >= st.verts.size())
            fail("vertex index " + std::to_string(kk) + " out of range for '" + st.name + "' (" +
                     std::to_string(st.verts.size()) + " vertices)",
                 s.target.items[0].lo->span);
        const auto k = static_cast<std::size_t>(kk);

        std::optional<std::size_t> a, b;
        std::vector<std::size_t> neighbours;
        for (const auto& face : st.faces) {
            for (std::size_t i = 0; i < face.size(); ++i) {
                if (face[i] != k) continue;
                const std::size_t prev = face[(i + face.size() - 1) % face.size()];
                const std::size_t next = face[(i + 1) % face.size()];
                if (!a) a = prev, b = next;
                for (auto nb : {prev, next})
                    if (std::find(neighbours.begin(), neighbours.end(), nb) == neighbours.end())
                        neighbours.push_back(nb);
            }
        }
        if (!a || neighbours.size() != 2)
            fail("chamfer needs a corner with exactly two neighbouring vertices", s.target.span);

        const NodeId r = scalar(*s.args[0]);
        const auto pv = xyz(st.verts[k]);
        auto along = [&](std::size_t other, NodeId& length) {
            const auto po = xyz(st.verts[other]);
            NodeId d[3];
            for (std::size_t c = 0; c < 3; ++c) d[c] = g().sub(po[c], pv[c]);
            NodeId sq = g().mul(d[0], d[0]);
            sq = g().add(sq, g().mul(d[1], d[1]));
            sq = g().add(sq, g().mul(d[2], d[2]));
            length = g().unary(OpCode::Sqrt, sq);
            const NodeId t = g().div(r, length);
            return std::array<NodeId, 3>{g().add(pv[0], g().mul(d[0], t)), g().add(pv[1], g().mul(d[1], t)),
                                         g().add(pv[2], g().mul(d[2], t))};
        };
        NodeId len_a = 0, len_b = 0;
        const auto ca = along(*a, len_a);
        const auto cb = along(*b, len_b);

        // v_a takes the corner's slot, v_b is appended.
        const std::size_t vid_a = new_vertex(ca[0], ca[1], ca[2]);
        const std::size_t vid_b = new_vertex(cb[0], cb[1], cb[2]);
        coords_[st.verts[k]].reset();
        st.verts[k] = vid_a;
        st.verts.push_back(vid_b);
        const std::size_t slot_b = st.verts.size() - 1;

        for (auto& face : st.faces) {
            for (std::size_t i = 0; i < face.size(); ++i) {
                if (face[i] != k) continue;
                const std::size_t prev = face[(i + face.size() - 1) % face.size()];
                // Walking a -> corner -> b keeps (v_a, v_b); the reverse walk flips them.
                if (prev == *a) face.insert(face.begin() + static_cast<long>(i) + 1, slot_b);
                else face.insert(face.begin() + static_cast<long>(i), slot_b);
                break;
            }
        }

        auto record = [&](NodeId node, const std::string& what) {
            ConstraintRecord rec;
            rec.node = node;
            rec.op = "chamfer";
            rec.span = s.span;
            rec.description = what;
            rec.kind = ConstraintRecord::Kind::Auto;
            result_.constraints.push_back(rec);
        };
        record(g().sub(len_a, r), "chamfer radius <= first edge length");
        record(g().sub(len_b, r), "chamfer radius <= second edge length");
        record(g().sub(r, g().constant(result_.epsilon)), "chamfer radius - epsilon >= 0");
    }

    // ---- output

    void finish() {
        std::vector<long> compact(coords_.size(), -1);
        std::size_t n = 0;
        for (std::size_t vid = 0; vid < coords_.size(); ++vid) {
            if (!coords_[vid]) continue;
            compact[vid] = static_cast<long>(n);
            const auto& c = *coords_[vid];
            result_.markers.push_back({n, c[0], c[1], c[2]});
            for (auto id : c) g().vertex_outputs.push_back(id);
            ++n;
        }
        std::vector<std::vector<std::size_t>> faces;
        for (const auto& st : solids_) {
            for (const auto& f : st.faces) {
                std::vector<std::size_t> poly;
                for (auto local : f) {
                    const long c = compact[st.verts[local]];
                    if (c < 0) throw TopologyError("face references a removed vertex");
                    poly.push_back(static_cast<std::size_t>(c));
                }
                faces.push_back(std::move(poly));
            }
        }
        result_.topology = make_topology(n, std::move(faces));
        for (const auto& c : result_.constraints) g().constraint_outputs.push_back(c.node);
    }

    const dsl::Program& program_;
    InterpResult result_;
    std::vector<std::map<std::string, Binding>> scopes_;
    std::vector<SolidState> solids_;
    /// Global vid -> coordinate nodes; empty once a vertex is removed.
    std::vector<std::optional<std::array<NodeId, 3>>> coords_;
};

} // namespace

void emit_clamp(ComputationGraph& graph, NodeId lo, NodeId f, NodeId hi, Span span,
                std::vector<ConstraintRecord>& out) {
    if (graph.value(lo) >= graph.value(hi))
        fail("degenerate clamp band: lower bound is not below upper bound", span);
    ConstraintRecord a;
    a.node = graph.sub(f, lo);
    a.op = "clamp";
    a.span = span;
    a.description = "clamp lower bound";
    a.kind = ConstraintRecord::Kind::UserClamp;
    ConstraintRecord b = a;
    b.node = graph.sub(hi, f);
    b.description = "clamp upper bound";
    out.push_back(a);
    out.push_back(b);
}

std::vector<double> InterpResult::traced_positions() const {
    std::vector<double> v;
    v.reserve(markers.size() * 3);
    for (const auto& m : markers) {
        v.push_back(graph.value(m.node_x));
        v.push_back(graph.value(m.node_y));
        v.push_back(graph.value(m.node_z));
    }
    return v;
}

std::vector<double> InterpResult::traced_constraints() const {
    std::vector<double> v;
    for (const auto& c : constraints) v.push_back(graph.value(c.node));
    return v;
}

InterpResult interpret(const dsl::Program& program) {
    std::vector<double> p;
    for (const auto& d : program.params) p.push_back(d.initial);
    return interpret(program, p);
}

InterpResult interpret(const dsl::Program& program, std::span<const double> params) {
    return Interpreter(program, params).run();
}

const std::vector<OpCatalogEntry>& op_catalog() {
    static const std::vector<OpCatalogEntry> catalog = {
        {"box", "solid b = box(w, h, d)",
         "8 vertices centered at the origin: 0(-,-,-) 1(+,-,-) 2(+,+,-) 3(-,+,-) 4(-,-,+) "
         "5(+,-,+) 6(+,+,+) 7(-,+,+)",
         "6 quads: 0 bottom (0,3,2,1), 1 top (4,5,6,7), 2 front y- (0,1,5,4), 3 right x+ "
         "(1,2,6,5), 4 back y+ (2,3,7,6), 5 left x- (3,0,4,7)",
         "none"},
        {"cylinder", "solid c = cylinder(r, h, n)",
         "2n vertices: ring 0 at z=-h/2 is 0..n-1, ring 1 at z=+h/2 is n..2n-1; vertex j of a "
         "ring sits at angle 2*pi*j/n. n must be an integer constant >= 3",
         "face 0 bottom cap, face 1 top cap, then n side quads (j, j+1, n+j+1, n+j)", "none"},
        {"rect", "solid r = rect(w, h)",
         "4 vertices in the z=0 plane: 0(-,-) 1(+,-) 2(+,+) 3(-,+)",
         "face 0 (0,1,2,3) facing +z, face 1 (3,2,1,0) facing -z", "none"},
        {"translate", "translate(target, dx, dy, dz)",
         "target is a solid or solid.v[i, j..k]; coordinates of each selected vertex replaced by "
         "sum nodes",
         "unchanged", "none"},
        {"rotate", "rotate(target, x|y|z, theta)",
         "rotation about the named axis through the origin, radians; the two coordinates in the "
         "rotation plane are replaced by cos/sin combination nodes",
         "unchanged", "none"},
        {"scale", "scale(target, s) or scale(target, sx, sy, sz)",
         "coordinates multiplied about the origin; every selected coordinate node replaced by a "
         "product node",
         "unchanged", "none"},
        {"extrude", "extrude(solid.f[k], length)",
         "appends one vertex per face vertex, offset by length along the face's unit Newell "
         "normal, in face order",
         "face k becomes the lifted cap; one side quad (a, b, b', a') per face edge is appended",
         "1 auto: length - epsilon >= 0"},
        {"chamfer", "chamfer(solid.v[k], r)",
         "corner k must have exactly two neighbours a, b (first found walking the faces). Slot k "
         "becomes the point at distance r toward a; the point toward b is appended. The old "
         "corner loses its marker",
         "every face through the corner gets both new vertices in place of it",
         "3 auto: |a-v| - r >= 0, |b-v| - r >= 0, r - epsilon >= 0"},
        {"clamp", "clamp(lo, f, hi) as a statement or expression",
         "none; as an expression it evaluates to f", "none",
         "2 user: f - lo >= 0, hi - f >= 0; lo >= hi at the initial parameters is an error"},
        {"for", "for i in a..b { ... }",
         "body replicated for i = a, ..., b-1 (integer constant bounds); solids made in the body "
         "are added in iteration order",
         "as the body", "as the body, per iteration"},
    };
    return catalog;
}

} // namespace dcad
