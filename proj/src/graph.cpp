#include "dcad/autodiff.hpp"
#include "dcad/error.hpp"

#include <cmath>

namespace dcad {

const char* opcode_name(OpCode op) {
    switch (op) {
    case OpCode::Const: return "const";
    case OpCode::Param: return "param";
    case OpCode::Add: return "add";
    case OpCode::Sub: return "sub";
    case OpCode::Mul: return "mul";
    case OpCode::Div: return "div";
    case OpCode::Neg: return "neg";
    case OpCode::Sin: return "sin";
    case OpCode::Cos: return "cos";
    case OpCode::Sqrt: return "sqrt";
    case OpCode::Pow: return "pow";
    case OpCode::Exp: return "exp";
    case OpCode::Log: return "log";
    }
    return "?";
}

int opcode_arity(OpCode op) {
    switch (op) {
    case OpCode::Const:
    case OpCode::Param: return 0;
    case OpCode::Add:
    case OpCode::Sub:
    case OpCode::Mul:
    case OpCode::Div:
    case OpCode::Pow: return 2;
    default: return 1;
    }
}

bool is_arithmetic(OpCode op) { return op != OpCode::Const && op != OpCode::Param; }

double apply_op(OpCode op, double a, double b) {
    switch (op) {
    case OpCode::Add: return a + b;
    case OpCode::Sub: return a - b;
    case OpCode::Mul: return a * b;
    case OpCode::Div: return a / b;
    case OpCode::Neg: return -a;
    case OpCode::Sin: return std::sin(a);
    case OpCode::Cos: return std::cos(a);
    case OpCode::Sqrt: return std::sqrt(a);
    case OpCode::Pow: return std::pow(a, b);
    case OpCode::Exp: return std::exp(a);
    case OpCode::Log: return std::log(a);
    default: return a;
    }
}

ComputationGraph::ComputationGraph(std::size_t num_params) {
    provenance_text_.emplace_back();
    for (std::size_t i = 0; i < num_params; ++i) {
        Node n;
        n.op = OpCode::Param;
        n.imm = static_cast<double>(i);
        params_.push_back(push(n, 0.0));
    }
}

std::uint32_t ComputationGraph::intern(std::string text) {
    if (!provenance_text_.empty() && provenance_text_.back() == text)
        return static_cast<std::uint32_t>(provenance_text_.size() - 1);
    provenance_text_.push_back(std::move(text));
    return static_cast<std::uint32_t>(provenance_text_.size() - 1);
}

NodeId ComputationGraph::push(Node n, double value) {
    nodes_.push_back(n);
    values_.push_back(value);
    provenance_.push_back(current_provenance_);
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId ComputationGraph::constant(double v) {
    Node n;
    n.op = OpCode::Const;
    n.imm = v;
    return push(n, v);
}

NodeId ComputationGraph::unary(OpCode op, NodeId a) {
    Node n;
    n.op = op;
    n.a = a;
    return push(n, apply_op(op, values_[a], 0.0));
}

NodeId ComputationGraph::binary(OpCode op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    return push(n, apply_op(op, values_[a], values_[b]));
}

void ComputationGraph::evaluate(std::span<const double> params) {
    if (params.size() != params_.size())
        throw Error("graph expects " + std::to_string(params_.size()) + " parameters, got " +
                    std::to_string(params.size()));
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        double v;
        switch (n.op) {
        case OpCode::Const: v = n.imm; break;
        case OpCode::Param: v = params[static_cast<std::size_t>(n.imm)]; break;
        default: v = apply_op(n.op, values_[n.a], opcode_arity(n.op) == 2 ? values_[n.b] : 0.0);
        }
        if (!std::isfinite(v)) {
            const std::string& where = provenance_text_[provenance_[i]];
            throw NumericError("node " + std::to_string(i) + " (" + opcode_name(n.op) +
                                   ") is not finite" + (where.empty() ? "" : " in " + where),
                               static_cast<long>(i));
        }
        values_[i] = v;
    }
}

std::vector<double> eval_graph(ComputationGraph& graph, std::span<const double> params) {
    graph.evaluate(params);
    return graph.values();
}

} // namespace dcad
