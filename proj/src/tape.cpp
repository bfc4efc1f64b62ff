#include "dcad/autodiff.hpp"
#include "dcad/error.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <ostream>
#include <unordered_map>

namespace dcad {

namespace {

struct Key {
    OpCode op;
    std::uint32_t a;
    std::uint32_t b;
    std::uint64_t bits;
    bool operator==(const Key&) const = default;
};

struct KeyHash {
    std::size_t operator()(const Key& k) const {
        std::uint64_t h = static_cast<std::uint64_t>(k.op) * 0x9E3779B97F4A7C15ull;
        h ^= (static_cast<std::uint64_t>(k.a) << 32 | k.b) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
        h ^= k.bits + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

bool commutative(OpCode op) { return op == OpCode::Add || op == OpCode::Mul; }

// Shared by graph and tape lowering. `nodes` follows the graph convention:
// operands precede users, Param nodes carry their slot in imm.
Tape lower_nodes(std::span<const Instruction> nodes, std::size_t num_params,
                 std::span<const std::uint32_t> vertex_out,
                 std::span<const std::uint32_t> constraint_out) {
    // Pass 1: fold constants and merge equal expressions.
    std::vector<Instruction> pre;
    pre.reserve(nodes.size());
    std::vector<std::uint32_t> remap(nodes.size());
    std::unordered_map<Key, std::uint32_t, KeyHash> seen;

    auto intern = [&](const Instruction& ins) {
        Key k{ins.op, ins.a, ins.b, std::bit_cast<std::uint64_t>(ins.imm)};
        auto [it, inserted] = seen.try_emplace(k, static_cast<std::uint32_t>(pre.size()));
        if (inserted) pre.push_back(ins);
        return it->second;
    };

    for (std::size_t slot = 0; slot < num_params; ++slot) {
        Instruction p;
        p.op = OpCode::Param;
        p.imm = static_cast<double>(slot);
        intern(p);
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Instruction ins = nodes[i];
        if (ins.op == OpCode::Param) {
            remap[i] = static_cast<std::uint32_t>(ins.imm);
            continue;
        }
        if (ins.op == OpCode::Const) {
            ins.a = ins.b = 0;
            remap[i] = intern(ins);
            continue;
        }
        const int arity = opcode_arity(ins.op);
        ins.a = remap[ins.a];
        ins.b = arity == 2 ? remap[ins.b] : 0;
        ins.imm = 0.0;
        const bool const_a = pre[ins.a].op == OpCode::Const;
        const bool const_b = arity < 2 || pre[ins.b].op == OpCode::Const;
        if (const_a && const_b) {
            Instruction c;
            c.op = OpCode::Const;
            c.imm = apply_op(ins.op, pre[ins.a].imm, arity == 2 ? pre[ins.b].imm : 0.0);
            remap[i] = intern(c);
            continue;
        }
        if (commutative(ins.op) && ins.a > ins.b) std::swap(ins.a, ins.b);
        remap[i] = intern(ins);
    }

    // Pass 2: keep ancestors of outputs (parameters always keep their slot).
    std::vector<char> live(pre.size(), 0);
    for (std::size_t s = 0; s < num_params; ++s) live[s] = 1;
    for (auto o : vertex_out) live[remap[o]] = 1;
    for (auto o : constraint_out) live[remap[o]] = 1;
    for (std::size_t i = pre.size(); i-- > 0;) {
        if (!live[i]) continue;
        const int arity = opcode_arity(pre[i].op);
        if (arity >= 1) live[pre[i].a] = 1;
        if (arity == 2) live[pre[i].b] = 1;
    }

    // Pass 3: compact.
    Tape tape;
    tape.num_params = num_params;
    std::vector<std::uint32_t> index(pre.size(), 0);
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (!live[i]) continue;
        Instruction ins = pre[i];
        const int arity = opcode_arity(ins.op);
        if (arity >= 1) ins.a = index[ins.a];
        if (arity == 2) ins.b = index[ins.b];
        index[i] = static_cast<std::uint32_t>(tape.code.size());
        tape.code.push_back(ins);
    }
    for (auto o : vertex_out) tape.vertex_outputs.push_back(index[remap[o]]);
    for (auto o : constraint_out) tape.constraint_outputs.push_back(index[remap[o]]);
    return tape;
}

void check_params(const Tape& tape, std::span<const double> params) {
    if (params.size() != tape.num_params)
        throw Error("tape expects " + std::to_string(tape.num_params) + " parameters, got " +
                    std::to_string(params.size()));
}

} // namespace

std::size_t Tape::arithmetic_count() const {
    std::size_t n = 0;
    for (const auto& ins : code)
        if (is_arithmetic(ins.op)) ++n;
    return n;
}

Tape lower(const ComputationGraph& graph) {
    std::vector<Instruction> nodes(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) {
        const auto& n = graph.node(static_cast<NodeId>(i));
        nodes[i] = Instruction{n.op, n.a, n.b, n.imm};
    }
    return lower_nodes(nodes, graph.num_params(), graph.vertex_outputs, graph.constraint_outputs);
}

Tape lower(const Tape& tape) {
    return lower_nodes(tape.code, tape.num_params, tape.vertex_outputs, tape.constraint_outputs);
}

void dump(const Tape& tape, std::ostream& os) {
    os << "# params " << tape.num_params << " registers " << tape.code.size() << " arithmetic "
       << tape.arithmetic_count() << "\n";
    for (std::size_t i = 0; i < tape.code.size(); ++i) {
        const auto& ins = tape.code[i];
        os << '%' << i << " = " << opcode_name(ins.op);
        switch (opcode_arity(ins.op)) {
        case 0: {
            char buf[32];
            auto r = std::to_chars(buf, buf + sizeof buf, ins.imm);
            os << ' ' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
            break;
        }
        case 1: os << " %" << ins.a; break;
        default: os << " %" << ins.a << " %" << ins.b;
        }
        os << '\n';
    }
    for (std::size_t v = 0; v < tape.num_vertices(); ++v)
        os << "vertex " << v << " = %" << tape.vertex_outputs[3 * v] << " %"
           << tape.vertex_outputs[3 * v + 1] << " %" << tape.vertex_outputs[3 * v + 2] << '\n';
    for (std::size_t c = 0; c < tape.num_constraints(); ++c)
        os << "constraint " << c << " = %" << tape.constraint_outputs[c] << '\n';
}

void eval_tape(const Tape& tape, std::span<const double> params, TapeWorkspace& ws) {
    check_params(tape, params);
    const std::size_t n = tape.code.size();
    ws.value.resize(n);
    double* v = ws.value.data();
    const Instruction* code = tape.code.data();
    for (std::size_t i = 0; i < n; ++i) {
        const Instruction& ins = code[i];
        switch (ins.op) {
        case OpCode::Const: v[i] = ins.imm; break;
        case OpCode::Param: v[i] = params[static_cast<std::size_t>(ins.imm)]; break;
        case OpCode::Add: v[i] = v[ins.a] + v[ins.b]; break;
        case OpCode::Sub: v[i] = v[ins.a] - v[ins.b]; break;
        case OpCode::Mul: v[i] = v[ins.a] * v[ins.b]; break;
        case OpCode::Div: v[i] = v[ins.a] / v[ins.b]; break;
        case OpCode::Neg: v[i] = -v[ins.a]; break;
        case OpCode::Sin: v[i] = std::sin(v[ins.a]); break;
        case OpCode::Cos: v[i] = std::cos(v[ins.a]); break;
        case OpCode::Sqrt: v[i] = std::sqrt(v[ins.a]); break;
        case OpCode::Pow: v[i] = std::pow(v[ins.a], v[ins.b]); break;
        case OpCode::Exp: v[i] = std::exp(v[ins.a]); break;
        case OpCode::Log: v[i] = std::log(v[ins.a]); break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i]))
            throw NumericError("instruction " + std::to_string(i) + " (" +
                                   opcode_name(code[i].op) + ") is not finite",
                               static_cast<long>(i));
    }
}

TapeOutputs read_outputs(const Tape& tape, const TapeWorkspace& ws) {
    TapeOutputs out;
    out.vertices.resize(tape.vertex_outputs.size());
    out.constraints.resize(tape.constraint_outputs.size());
    for (std::size_t i = 0; i < tape.vertex_outputs.size(); ++i)
        out.vertices[i] = ws.value[tape.vertex_outputs[i]];
    for (std::size_t i = 0; i < tape.constraint_outputs.size(); ++i)
        out.constraints[i] = ws.value[tape.constraint_outputs[i]];
    return out;
}

TapeOutputs eval_tape(const Tape& tape, std::span<const double> params) {
    TapeWorkspace ws;
    eval_tape(tape, params, ws);
    return read_outputs(tape, ws);
}

Eigen::VectorXd vjp_after_eval(const Tape& tape, std::span<const double> w_vertices,
                               std::span<const double> w_constraints, TapeWorkspace& ws) {
    const std::size_t n = tape.code.size();
    ws.adjoint.assign(n, 0.0);
    double* g = ws.adjoint.data();
    const double* v = ws.value.data();
    if (!w_vertices.empty()) {
        if (w_vertices.size() != tape.vertex_outputs.size())
            throw Error("vertex cotangent has wrong size");
        for (std::size_t i = 0; i < w_vertices.size(); ++i) g[tape.vertex_outputs[i]] += w_vertices[i];
    }
    if (!w_constraints.empty()) {
        if (w_constraints.size() != tape.constraint_outputs.size())
            throw Error("constraint cotangent has wrong size");
        for (std::size_t i = 0; i < w_constraints.size(); ++i)
            g[tape.constraint_outputs[i]] += w_constraints[i];
    }
    const Instruction* code = tape.code.data();
    for (std::size_t i = n; i-- > tape.num_params;) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const Instruction& ins = code[i];
        switch (ins.op) {
        case OpCode::Const:
        case OpCode::Param: break;
        case OpCode::Add:
            g[ins.a] += gi;
            g[ins.b] += gi;
            break;
        case OpCode::Sub:
            g[ins.a] += gi;
            g[ins.b] -= gi;
            break;
        case OpCode::Mul:
            g[ins.a] += gi * v[ins.b];
            g[ins.b] += gi * v[ins.a];
            break;
        case OpCode::Div:
            g[ins.a] += gi / v[ins.b];
            g[ins.b] -= gi * v[i] / v[ins.b];
            break;
        case OpCode::Neg: g[ins.a] -= gi; break;
        case OpCode::Sin: g[ins.a] += gi * std::cos(v[ins.a]); break;
        case OpCode::Cos: g[ins.a] -= gi * std::sin(v[ins.a]); break;
        case OpCode::Sqrt: g[ins.a] += gi * 0.5 / v[i]; break;
        case OpCode::Pow:
            g[ins.a] += gi * v[ins.b] * std::pow(v[ins.a], v[ins.b] - 1.0);
            if (code[ins.b].op != OpCode::Const && v[ins.a] > 0.0)
                g[ins.b] += gi * v[i] * std::log(v[ins.a]);
            break;
        case OpCode::Exp: g[ins.a] += gi * v[i]; break;
        case OpCode::Log: g[ins.a] += gi / v[ins.a]; break;
        }
    }
    Eigen::VectorXd dp(static_cast<Eigen::Index>(tape.num_params));
    for (std::size_t s = 0; s < tape.num_params; ++s) dp[static_cast<Eigen::Index>(s)] = g[s];
    return dp;
}

Eigen::VectorXd vjp(const Tape& tape, std::span<const double> params,
                    std::span<const double> w_vertices, std::span<const double> w_constraints,
                    TapeWorkspace& ws) {
    eval_tape(tape, params, ws);
    return vjp_after_eval(tape, w_vertices, w_constraints, ws);
}

Eigen::VectorXd vjp(const Tape& tape, std::span<const double> params,
                    std::span<const double> w_vertices, std::span<const double> w_constraints) {
    TapeWorkspace ws;
    return vjp(tape, params, w_vertices, w_constraints, ws);
}

void jvp_after_eval(const Tape& tape, std::span<const double> dp, TapeWorkspace& ws) {
    if (dp.size() != tape.num_params) throw Error("tangent has wrong size");
    const std::size_t n = tape.code.size();
    ws.tangent.resize(n);
    double* t = ws.tangent.data();
    const double* v = ws.value.data();
    const Instruction* code = tape.code.data();
    for (std::size_t i = 0; i < n; ++i) {
        const Instruction& ins = code[i];
        switch (ins.op) {
        case OpCode::Const: t[i] = 0.0; break;
        case OpCode::Param: t[i] = dp[static_cast<std::size_t>(ins.imm)]; break;
        case OpCode::Add: t[i] = t[ins.a] + t[ins.b]; break;
        case OpCode::Sub: t[i] = t[ins.a] - t[ins.b]; break;
        case OpCode::Mul: t[i] = t[ins.a] * v[ins.b] + v[ins.a] * t[ins.b]; break;
        case OpCode::Div: t[i] = (t[ins.a] - v[i] * t[ins.b]) / v[ins.b]; break;
        case OpCode::Neg: t[i] = -t[ins.a]; break;
        case OpCode::Sin: t[i] = std::cos(v[ins.a]) * t[ins.a]; break;
        case OpCode::Cos: t[i] = -std::sin(v[ins.a]) * t[ins.a]; break;
        case OpCode::Sqrt: t[i] = 0.5 * t[ins.a] / v[i]; break;
        case OpCode::Pow: {
            double d = t[ins.a] == 0.0 ? 0.0
                                       : v[ins.b] * std::pow(v[ins.a], v[ins.b] - 1.0) * t[ins.a];
            if (t[ins.b] != 0.0 && v[ins.a] > 0.0) d += v[i] * std::log(v[ins.a]) * t[ins.b];
            t[i] = d;
            break;
        }
        case OpCode::Exp: t[i] = v[i] * t[ins.a]; break;
        case OpCode::Log: t[i] = t[ins.a] / v[ins.a]; break;
        }
    }
}

TapeOutputs jvp(const Tape& tape, std::span<const double> params, std::span<const double> dp,
                TapeWorkspace& ws) {
    eval_tape(tape, params, ws);
    jvp_after_eval(tape, dp, ws);
    TapeOutputs out;
    out.vertices.resize(tape.vertex_outputs.size());
    out.constraints.resize(tape.constraint_outputs.size());
    for (std::size_t i = 0; i < tape.vertex_outputs.size(); ++i)
        out.vertices[i] = ws.tangent[tape.vertex_outputs[i]];
    for (std::size_t i = 0; i < tape.constraint_outputs.size(); ++i)
        out.constraints[i] = ws.tangent[tape.constraint_outputs[i]];
    return out;
}

TapeOutputs jvp(const Tape& tape, std::span<const double> params, std::span<const double> dp) {
    TapeWorkspace ws;
    return jvp(tape, params, dp, ws);
}

FullJacobian full_jacobian(const Tape& tape, std::span<const double> params, TapeWorkspace& ws) {
    const auto m = static_cast<Eigen::Index>(tape.num_params);
    FullJacobian J;
    J.vertices.setZero(static_cast<Eigen::Index>(tape.vertex_outputs.size()), m);
    J.constraints.setZero(static_cast<Eigen::Index>(tape.constraint_outputs.size()), m);
    eval_tape(tape, params, ws);
    std::vector<double> e(tape.num_params, 0.0);
    for (Eigen::Index c = 0; c < m; ++c) {
        e[static_cast<std::size_t>(c)] = 1.0;
        jvp_after_eval(tape, e, ws);
        e[static_cast<std::size_t>(c)] = 0.0;
        for (std::size_t i = 0; i < tape.vertex_outputs.size(); ++i)
            J.vertices(static_cast<Eigen::Index>(i), c) = ws.tangent[tape.vertex_outputs[i]];
        for (std::size_t i = 0; i < tape.constraint_outputs.size(); ++i)
            J.constraints(static_cast<Eigen::Index>(i), c) = ws.tangent[tape.constraint_outputs[i]];
    }
    return J;
}

Eigen::MatrixXd jacobian(const Tape& tape, std::span<const double> params) {
    TapeWorkspace ws;
    return full_jacobian(tape, params, ws).vertices;
}

std::vector<std::vector<std::size_t>> parameter_descendants(const Tape& tape) {
    const std::size_t words = (tape.num_params + 63) / 64;
    const std::size_t n = tape.code.size();
    std::vector<std::uint64_t> bits(n * words, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const Instruction& ins = tape.code[i];
        std::uint64_t* dst = &bits[i * words];
        if (ins.op == OpCode::Param) {
            const auto s = static_cast<std::size_t>(ins.imm);
            dst[s / 64] |= std::uint64_t{1} << (s % 64);
            continue;
        }
        const int arity = opcode_arity(ins.op);
        for (std::size_t w = 0; w < words; ++w) {
            if (arity >= 1) dst[w] |= bits[ins.a * words + w];
            if (arity == 2) dst[w] |= bits[ins.b * words + w];
        }
    }
    std::vector<std::vector<std::size_t>> out(tape.num_params);
    for (std::size_t v = 0; v < tape.num_vertices(); ++v) {
        for (std::size_t s = 0; s < tape.num_params; ++s) {
            const std::uint64_t mask = std::uint64_t{1} << (s % 64);
            bool dep = false;
            for (int c = 0; c < 3; ++c)
                dep = dep || (bits[tape.vertex_outputs[3 * v + c] * words + s / 64] & mask);
            if (dep) out[s].push_back(v);
        }
    }
    return out;
}

} // namespace dcad
