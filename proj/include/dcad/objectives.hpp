#pragma once

// Energies over program parameters: the edit term and the objectives that
// resolve what the edit leaves open. Every energy returns its value and the
// gradient with respect to P.

#include "dcad/autodiff.hpp"
#include "dcad/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcad {

enum class ObjectiveId { Edit, Vtx, Edg, Par, Bh, Arap, Vol, Cm };

inline constexpr std::array<ObjectiveId, 8> kAllObjectives = {
    ObjectiveId::Edit, ObjectiveId::Vtx, ObjectiveId::Edg,  ObjectiveId::Par,
    ObjectiveId::Bh,   ObjectiveId::Arap, ObjectiveId::Vol, ObjectiveId::Cm};

const char* objective_name(ObjectiveId id);
std::optional<ObjectiveId> parse_objective(std::string_view name);
double default_gamma(ObjectiveId id);

struct MovedVertex {
    std::size_t vid = 0;
    Vec3 target = Vec3::Zero();
};

struct EditSpec {
    std::vector<MovedVertex> moved;
    /// Pinned at their positions in the unedited mesh.
    std::vector<std::size_t> fixed;

    /// moved then fixed vids.
    std::vector<std::size_t> edited() const;
    /// Throws EditError on out-of-range or repeated vids or an empty edit.
    /// Returns a warning when every vertex is edited.
    std::optional<std::string> check(std::size_t num_vertices) const;
};

struct ObjectiveConfig {
    std::vector<ObjectiveId> enabled = {ObjectiveId::Edit, ObjectiveId::Vtx, ObjectiveId::Edg,
                                        ObjectiveId::Par,  ObjectiveId::Bh,  ObjectiveId::Vol};
    /// Overrides of the default weights.
    std::map<ObjectiveId, double> gamma;
    double k_v = 0.01;
    double delta = 1e-6;
    int arap_max_alternations = 10;
    double arap_tol = 1e-6;
    /// Each objective is solved with weights gamma * factor^s for
    /// s = 0 .. stages-1, warm starting each stage from the previous one.
    int continuation_stages = 4;
    double continuation_factor = 1e-2;

    double gamma_of(ObjectiveId id) const;
    bool is_enabled(ObjectiveId id) const;
};

struct LocalizationWeights {
    /// Edge-graph distance from the edited set, per vertex.
    std::vector<double> distance;
    std::vector<bool> edited;
    /// Zero on edited vertices; sums to 1 over the rest.
    std::vector<double> w_vtx;
    /// Per topology edge; zero for edges with both ends edited.
    std::vector<double> w_edg;
    std::vector<double> w_par;
    /// Vertices depending on each parameter.
    std::vector<std::vector<std::size_t>> param_vertices;
};

LocalizationWeights compute_weights(const Tape& tape, const MeshTopology& topo,
                                    std::span<const double> P0, const EditSpec& edit);

/// Everything an energy needs that is frozen at P0.
struct ObjectiveContext {
    const Tape* tape = nullptr;
    MeshTopology topology;
    std::vector<double> P0;
    std::vector<double> V0;
    EditSpec edit;
    /// Target position per coordinate of every edited vertex.
    std::vector<std::pair<std::size_t, Vec3>> targets;
    LocalizationWeights weights;
    DeformationData deform;
    double vol0 = 0.0;
    std::optional<Vec3> com0;
    ObjectiveConfig config;

    static ObjectiveContext build(const Tape& tape, const MeshTopology& topo, std::span<const double> P0,
                                  const EditSpec& edit, const ObjectiveConfig& config);
};

struct Energy {
    double value = 0.0;
    Eigen::VectorXd grad;
};

using Rotations = std::vector<Eigen::Matrix3d>;

Energy e_edit(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);
Energy e_vtx(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);
Energy e_edg(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);
Energy e_par(const ObjectiveContext& ctx, std::span<const double> P);
Energy e_bh(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);
/// ARAP with rotations refit at P (the energy minimized over rotations).
Energy e_arap(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);
/// ARAP with the given rotations held fixed.
Energy e_arap_fixed(const ObjectiveContext& ctx, std::span<const double> P, const Rotations& R,
                    TapeWorkspace& ws);
Energy e_vol(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);
Energy e_cm(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws);

/// Unweighted objective term by id (Edit gives e_edit).
Energy evaluate_objective(const ObjectiveContext& ctx, ObjectiveId id, std::span<const double> P,
                          TapeWorkspace& ws);

/// E_edit + gamma * E_obj, values and gradients.
Energy compose(const Energy& edit, const Energy& objective, double gamma);

/// Cotangent weight as used by ARAP. Obtuse fan triangles give negative
/// weights, which would make the energy indefinite; those are dropped.
inline double arap_weight(double w) { return w > 0.0 ? w : 0.0; }

/// Best rotation per vertex mapping rest one-ring edges onto deformed ones.
Rotations arap_local_step(std::span<const double> V, std::span<const double> V0,
                          const DeformationData& deform);

/// sqrt(x^2 + delta^2) - delta and its derivative.
inline double smooth_abs(double x, double delta) { return std::sqrt(x * x + delta * delta) - delta; }
inline double smooth_abs_grad(double x, double delta) { return x / std::sqrt(x * x + delta * delta); }

} // namespace dcad
