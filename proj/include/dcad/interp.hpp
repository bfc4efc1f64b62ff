#pragma once

// Runs a parsed program, recording every scalar computation into a
// ComputationGraph. Produces the mesh topology, the coordinate nodes of each
// live vertex, and the constraints emitted by operations and clamps.

#include "dcad/autodiff.hpp"
#include "dcad/dsl.hpp"
#include "dcad/mesh.hpp"

#include <span>
#include <string>
#include <vector>

namespace dcad {

inline constexpr double kDefaultEpsilon = 1e-4;

struct VertexMarker {
    std::size_t vid = 0;
    NodeId node_x = 0;
    NodeId node_y = 0;
    NodeId node_z = 0;
};

struct ConstraintRecord {
    enum class Kind { Auto, UserClamp };

    NodeId node = 0;
    /// Operation that emitted the constraint ("extrude", "chamfer", "clamp").
    std::string op;
    dsl::Span span;
    std::string description;
    Kind kind = Kind::Auto;
};

struct InterpResult {
    ComputationGraph graph;
    /// One per live vertex, ordered by vid (0..n-1).
    std::vector<VertexMarker> markers;
    MeshTopology topology;
    std::vector<ConstraintRecord> constraints;
    std::vector<std::string> param_names;
    /// Parameter values the program was traced at.
    std::vector<double> params;
    double epsilon = kDefaultEpsilon;

    /// Vertex positions computed during tracing (3n).
    std::vector<double> traced_positions() const;
    /// Constraint values computed during tracing.
    std::vector<double> traced_constraints() const;
};

/// Traces the program at its declared initial parameter values.
InterpResult interpret(const dsl::Program& program);
/// Traces at explicit values (one per declared parameter, in order).
InterpResult interpret(const dsl::Program& program, std::span<const double> params);

struct OpCatalogEntry {
    std::string name;
    std::string signature;
    std::string vertices;
    std::string faces;
    std::string constraints;
};

/// What each operation does to vertices, faces and constraints, including
/// the exact vertex order primitives create.
const std::vector<OpCatalogEntry>& op_catalog();

/// Records lo <= f <= hi as two constraints f - lo >= 0 and hi - f >= 0.
/// Throws InterpError when lo >= hi at the graph's current values.
void emit_clamp(ComputationGraph& graph, NodeId lo, NodeId f, NodeId hi, dsl::Span span,
                std::vector<ConstraintRecord>& out);

} // namespace dcad
