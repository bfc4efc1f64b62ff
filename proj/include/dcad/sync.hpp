#pragma once

// Resolves a geometric edit back into program parameters: one constrained
// solve per enabled objective, then deduplication into a ranked gallery.

#include "dcad/objectives.hpp"
#include "dcad/optimize.hpp"

#include <span>
#include <string>
#include <vector>

namespace dcad {

struct SyncOptions {
    double tol = 1e-6;
    double feas_tol = 1e-8;
    int max_iter = 200;
    /// Options closer than this (relative L-infinity over parameters) merge.
    double dedup_threshold = 1e-3;
    /// A finished run counts as a usable option only below this violation.
    double safety_tol = 1e-6;
    bool parallel = true;
};

/// One objective's solve, kept whether or not it produced an option.
struct ObjectiveRun {
    ObjectiveId objective = ObjectiveId::Edit;
    OptResult result;
    double e_edit = 0.0;
    /// Unweighted objective term at the result.
    double objective_value = 0.0;
    double seconds = 0.0;
    /// ARAP only: energy after each alternation, one list per continuation stage.
    std::vector<std::vector<double>> arap_trace;
    std::string error;

    bool usable(const SyncOptions& opt) const;
};

struct GalleryOption {
    /// Objective whose result represents the option.
    ObjectiveId objective = ObjectiveId::Edit;
    /// Every objective that converged to this option, in id order.
    std::vector<ObjectiveId> merged;
    std::vector<double> P;
    std::vector<double> V;
    double e_edit = 0.0;
    double objective_value = 0.0;
    OptStatus status = OptStatus::Converged;
};

struct OptionGallery {
    /// Ascending E_edit.
    std::vector<GalleryOption> options;
    /// All runs in objective id order, including failures.
    std::vector<ObjectiveRun> runs;
    std::vector<std::string> warnings;
    double seconds = 0.0;
};

/// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
double relative_distance(std::span<const double> a, std::span<const double> b);

/// Constraint callback for the optimizer: g and dg/dP from the tape.
ConstraintFn tape_constraints(const Tape& tape);

/// Solves E_edit + gamma * E_obj for one objective from ctx.P0.
ObjectiveRun solve_objective(const ObjectiveContext& ctx, ObjectiveId id, const SyncOptions& opt = {});

OptionGallery synchronize(const Tape& tape, const MeshTopology& topo, std::span<const double> P0,
                          const EditSpec& edit, const ObjectiveConfig& config, const SyncOptions& opt = {});

struct BaselineResult {
    /// Free-geometry biharmonic deformation honoring the edit (3n).
    std::vector<double> free_positions;
    std::vector<double> P;
    OptResult fit;
};

/// Deforms the mesh ignoring the program (biharmonic, edited vertices as
/// hard constraints), then fits parameters to all deformed vertices.
BaselineResult project_then_fit_baseline(const Tape& tape, const MeshTopology& topo,
                                         std::span<const double> P0, const EditSpec& edit,
                                         const SyncOptions& opt = {});

struct AppliedOption {
    std::vector<double> P;
    std::vector<double> V;
};

/// Throws Error when index is out of range.
AppliedOption apply_option(const OptionGallery& gallery, std::size_t index);

} // namespace dcad
