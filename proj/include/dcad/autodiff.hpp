#pragma once

// Computation graph recorded while a program runs, and its lowered form: a
// flat single-assignment tape evaluated by a tight loop with forward-mode
// (jvp) and reverse-mode (vjp) derivatives.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dcad {

using NodeId = std::uint32_t;

enum class OpCode : std::uint8_t {
    Const,
    Param,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Sqrt,
    Pow,
    Exp,
    Log,
};

const char* opcode_name(OpCode op);
int opcode_arity(OpCode op);
bool is_arithmetic(OpCode op);

/// Applies a unary/binary opcode to values. Shared by the graph and the tape
/// so that both produce bit-identical results.
double apply_op(OpCode op, double a, double b);

class ComputationGraph {
public:
    struct Node {
        OpCode op = OpCode::Const;
        NodeId a = 0;
        NodeId b = 0;
        /// Const: the value. Param: the slot index.
        double imm = 0.0;
    };

    explicit ComputationGraph(std::size_t num_params = 0);

    std::size_t num_params() const { return params_.size(); }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_[id]; }

    NodeId param(std::size_t slot) const { return params_[slot]; }
    NodeId constant(double v);
    NodeId unary(OpCode op, NodeId a);
    NodeId binary(OpCode op, NodeId a, NodeId b);

    NodeId add(NodeId a, NodeId b) { return binary(OpCode::Add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return binary(OpCode::Sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return binary(OpCode::Mul, a, b); }
    NodeId div(NodeId a, NodeId b) { return binary(OpCode::Div, a, b); }

    /// Value of a node as of the last trace or evaluation.
    double value(NodeId id) const { return values_[id]; }
    const std::vector<double>& values() const { return values_; }

    /// Sets parameter values and recomputes every node in creation order.
    /// Throws NumericError naming the first non-finite node.
    void evaluate(std::span<const double> params);

    /// Free-form provenance attached to subsequently created nodes.
    void set_provenance(std::string text) { current_provenance_ = intern(std::move(text)); }
    const std::string& provenance(NodeId id) const { return provenance_text_[provenance_[id]]; }

    /// Marks nodes as program outputs; only their ancestors survive lowering.
    std::vector<NodeId> vertex_outputs;     // 3 per vertex, x y z
    std::vector<NodeId> constraint_outputs; // value >= 0 required

private:
    NodeId push(Node n, double value);
    std::uint32_t intern(std::string text);

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<NodeId> params_;
    std::vector<std::uint32_t> provenance_;
    std::vector<std::string> provenance_text_;
    std::uint32_t current_provenance_ = 0;
};

/// Evaluates the graph at P and returns all node values.
std::vector<double> eval_graph(ComputationGraph& graph, std::span<const double> params);

struct Instruction {
    OpCode op = OpCode::Const;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double imm = 0.0;

    bool operator==(const Instruction&) const = default;
};

/// Lowered graph. Instruction i writes register i; operands always refer to
/// earlier registers. Registers [0, num_params) hold the parameters.
class Tape {
public:
    std::vector<Instruction> code;
    std::size_t num_params = 0;
    std::vector<std::uint32_t> vertex_outputs;
    std::vector<std::uint32_t> constraint_outputs;

    std::size_t num_registers() const { return code.size(); }
    std::size_t num_vertices() const { return vertex_outputs.size() / 3; }
    std::size_t num_constraints() const { return constraint_outputs.size(); }
    /// Instructions other than Const and Param.
    std::size_t arithmetic_count() const;

    bool operator==(const Tape&) const = default;
};

/// Dead-code elimination, constant folding and hash-consing of syntactically
/// equal subexpressions (commutative operands canonicalised).
Tape lower(const ComputationGraph& graph);
/// Re-lowers an existing tape; lower(lower(g)) == lower(g).
Tape lower(const Tape& tape);

/// One instruction per line: "%5 = mul %2 %3", outputs at the end.
void dump(const Tape& tape, std::ostream& os);

/// Caller-owned scratch space. One per concurrent evaluation.
struct TapeWorkspace {
    std::vector<double> value;
    std::vector<double> adjoint;
    std::vector<double> tangent;
};

struct TapeOutputs {
    std::vector<double> vertices;    // 3n, (v0.x, v0.y, v0.z, v1.x, ...)
    std::vector<double> constraints; // k
};

/// Forward evaluation into ws.value. Throws NumericError with the instruction
/// index of the first non-finite register.
void eval_tape(const Tape& tape, std::span<const double> params, TapeWorkspace& ws);
TapeOutputs eval_tape(const Tape& tape, std::span<const double> params);

/// Extracts outputs after eval_tape(tape, P, ws).
TapeOutputs read_outputs(const Tape& tape, const TapeWorkspace& ws);

/// dP = (dV/dP)^T w_vertices + (dg/dP)^T w_constraints. Runs the forward pass.
Eigen::VectorXd vjp(const Tape& tape, std::span<const double> params,
                    std::span<const double> w_vertices, std::span<const double> w_constraints,
                    TapeWorkspace& ws);
Eigen::VectorXd vjp(const Tape& tape, std::span<const double> params,
                    std::span<const double> w_vertices, std::span<const double> w_constraints);

/// Reverse pass only; ws.value must hold a forward pass at the same P.
Eigen::VectorXd vjp_after_eval(const Tape& tape, std::span<const double> w_vertices,
                               std::span<const double> w_constraints, TapeWorkspace& ws);

/// Directional derivative along dp. Runs the forward pass.
TapeOutputs jvp(const Tape& tape, std::span<const double> params, std::span<const double> dp,
                TapeWorkspace& ws);
TapeOutputs jvp(const Tape& tape, std::span<const double> params, std::span<const double> dp);

/// Forward tangent only; ws.value must hold a forward pass at the same P.
void jvp_after_eval(const Tape& tape, std::span<const double> dp, TapeWorkspace& ws);

/// dV/dP as a dense 3n x m matrix, one jvp per column.
Eigen::MatrixXd jacobian(const Tape& tape, std::span<const double> params);

struct FullJacobian {
    Eigen::MatrixXd vertices;    // 3n x m
    Eigen::MatrixXd constraints; // k x m
};
/// Both vertex and constraint Jacobians from the same m forward passes.
FullJacobian full_jacobian(const Tape& tape, std::span<const double> params, TapeWorkspace& ws);

/// For every vertex output, the set of parameter slots among its ancestors.
/// Result[slot] lists vertex ids (sorted) that depend on that slot.
std::vector<std::vector<std::size_t>> parameter_descendants(const Tape& tape);

} // namespace dcad
