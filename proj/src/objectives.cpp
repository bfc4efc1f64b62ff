#include "dcad/objectives.hpp"
#include "dcad/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <set>

namespace dcad {

const char* objective_name(ObjectiveId id) {
    switch (id) {
    case ObjectiveId::Edit: return "edit";
    case ObjectiveId::Vtx: return "vtx";
    case ObjectiveId::Edg: return "edg";
    case ObjectiveId::Par: return "par";
    case ObjectiveId::Bh: return "bh";
    case ObjectiveId::Arap: return "arap";
    case ObjectiveId::Vol: return "vol";
    case ObjectiveId::Cm: return "cm";
    }
    return "?";
}

std::optional<ObjectiveId> parse_objective(std::string_view name) {
    for (auto id : kAllObjectives)
        if (name == objective_name(id)) return id;
    return std::nullopt;
}

double default_gamma(ObjectiveId id) {
    switch (id) {
    case ObjectiveId::Par:
    case ObjectiveId::Vol:
    case ObjectiveId::Cm: return 1.0;
    case ObjectiveId::Vtx:
    case ObjectiveId::Edg: return 0.1;
    case ObjectiveId::Bh:
    case ObjectiveId::Arap: return 1e-3;
    case ObjectiveId::Edit: return 0.0;
    }
    return 1.0;
}

double ObjectiveConfig::gamma_of(ObjectiveId id) const {
    if (auto it = gamma.find(id); it != gamma.end()) return it->second;
    return default_gamma(id);
}

bool ObjectiveConfig::is_enabled(ObjectiveId id) const {
    return std::find(enabled.begin(), enabled.end(), id) != enabled.end();
}

std::vector<std::size_t> EditSpec::edited() const {
    std::vector<std::size_t> v;
    for (const auto& m : moved) v.push_back(m.vid);
    v.insert(v.end(), fixed.begin(), fixed.end());
    return v;
}

std::optional<std::string> EditSpec::check(std::size_t num_vertices) const {
    const auto ids = edited();
    if (ids.empty()) throw EditError("edit moves or pins no vertices");
    std::set<std::size_t> seen;
    for (auto v : ids) {
        if (v >= num_vertices)
            throw EditError("vertex " + std::to_string(v) + " does not exist (mesh has " +
                            std::to_string(num_vertices) + " vertices)");
        if (!seen.insert(v).second) throw EditError("vertex " + std::to_string(v) + " appears twice in the edit");
    }
    for (const auto& m : moved)
        if (!m.target.allFinite()) throw EditError("non-finite target for vertex " + std::to_string(m.vid));
    if (ids.size() == num_vertices) return std::string("every vertex is edited; nothing is left to predict");
    return std::nullopt;
}

LocalizationWeights compute_weights(const Tape& tape, const MeshTopology& topo,
                                    std::span<const double> P0, const EditSpec& edit) {
    const std::size_t n = topo.num_vertices;
    const auto V0 = eval_tape(tape, P0).vertices;
    const auto ids = edit.edited();

    LocalizationWeights w;
    w.edited.assign(n, false);
    for (auto v : ids) w.edited[v] = true;
    w.distance = geodesic_distances(topo, V0, ids);

    w.w_vtx.assign(n, 0.0);
    double total = 0.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (!w.edited[i]) total += w.distance[i], ++free_count;
    for (std::size_t i = 0; i < n; ++i) {
        if (w.edited[i]) continue;
        w.w_vtx[i] = total > 0 ? w.distance[i] / total : 1.0 / static_cast<double>(free_count);
    }

    w.w_edg.reserve(topo.edges.size());
    for (const auto& e : topo.edges)
        w.w_edg.push_back(w.edited[e[0]] && w.edited[e[1]] ? 0.0 : std::max(w.w_vtx[e[0]], w.w_vtx[e[1]]));

    w.param_vertices = parameter_descendants(tape);
    for (const auto& vs : w.param_vertices) {
        if (vs.empty()) {
            w.w_par.push_back(1.0);
            continue;
        }
        std::size_t hit = 0;
        for (auto v : vs) hit += w.edited[v] ? 1 : 0;
        const double r = 1.0 - static_cast<double>(hit) / static_cast<double>(vs.size());
        w.w_par.push_back(r * r);
    }
    return w;
}

ObjectiveContext ObjectiveContext::build(const Tape& tape, const MeshTopology& topo,
                                         std::span<const double> P0, const EditSpec& edit,
                                         const ObjectiveConfig& config) {
    if (P0.size() != tape.num_params)
        throw Error("expected " + std::to_string(tape.num_params) + " parameters, got " +
                    std::to_string(P0.size()));
    edit.check(topo.num_vertices);
    ObjectiveContext c;
    c.tape = &tape;
    c.topology = topo;
    c.P0.assign(P0.begin(), P0.end());
    c.V0 = eval_tape(tape, P0).vertices;
    c.edit = edit;
    for (const auto& m : edit.moved) c.targets.push_back({m.vid, m.target});
    for (auto v : edit.fixed) c.targets.push_back({v, vertex(c.V0, v)});
    c.weights = compute_weights(tape, topo, P0, edit);
    c.deform = build_deformation_data(topo, c.V0);
    c.vol0 = signed_volume(topo.tris, c.V0);
    if (std::abs(c.vol0) >= 1e-10) c.com0 = centroid(topo.tris, c.V0);
    c.config = config;
    return c;
}

namespace {

// Runs the forward pass and returns vertex positions.
std::vector<double> positions(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    eval_tape(*ctx.tape, P, ws);
    std::vector<double> V(ctx.tape->vertex_outputs.size());
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = ws.value[ctx.tape->vertex_outputs[i]];
    return V;
}

Eigen::VectorXd pull_back(const ObjectiveContext& ctx, std::span<const double> dV, TapeWorkspace& ws) {
    return vjp_after_eval(*ctx.tape, dV, {}, ws);
}

double vtx_term(const ObjectiveContext& ctx, std::span<const double> V, double scale, std::span<double> dV) {
    double value = 0.0;
    const double delta = ctx.config.delta;
    for (std::size_t i = 0; i < ctx.topology.num_vertices; ++i) {
        const double w = ctx.weights.w_vtx[i];
        if (ctx.weights.edited[i] || w == 0.0) continue;
        for (std::size_t c = 0; c < 3; ++c) {
            const double x = V[3 * i + c] - ctx.V0[3 * i + c];
            value += w * smooth_abs(x, delta);
            dV[3 * i + c] += scale * w * smooth_abs_grad(x, delta);
        }
    }
    return value;
}

} // namespace

Energy e_edit(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    std::vector<double> dV(V.size(), 0.0);
    Energy e;
    for (const auto& [vid, target] : ctx.targets) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double r = V[3 * vid + c] - target[static_cast<Eigen::Index>(c)];
            e.value += r * r;
            dV[3 * vid + c] = 2.0 * r;
        }
    }
    e.grad = pull_back(ctx, dV, ws);
    return e;
}

Energy e_vtx(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    std::vector<double> dV(V.size(), 0.0);
    Energy e;
    e.value = vtx_term(ctx, V, 1.0, dV);
    e.grad = pull_back(ctx, dV, ws);
    return e;
}

Energy e_edg(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    std::vector<double> dV(V.size(), 0.0);
    const double d2 = ctx.config.delta * ctx.config.delta;
    Energy e;
    for (std::size_t k = 0; k < ctx.topology.edges.size(); ++k) {
        const double w = ctx.weights.w_edg[k];
        if (w == 0.0) continue;
        const auto [i, j] = ctx.topology.edges[k];
        const Vec3 d = vertex(V, i) - vertex(V, j);
        const Vec3 d0 = vertex(ctx.V0, i) - vertex(ctx.V0, j);
        const double len = std::sqrt(d.squaredNorm() + d2);
        const double len0 = std::sqrt(d0.squaredNorm() + d2);
        const double r = len - len0;
        e.value += w * r * r;
        const Vec3 g = (2.0 * w * r / len) * d;
        for (int c = 0; c < 3; ++c) {
            dV[3 * i + static_cast<std::size_t>(c)] += g[c];
            dV[3 * j + static_cast<std::size_t>(c)] -= g[c];
        }
    }
    e.grad = pull_back(ctx, dV, ws);
    return e;
}

Energy e_par(const ObjectiveContext& ctx, std::span<const double> P) {
    Energy e;
    e.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P.size()));
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double x = P[i] - ctx.P0[i];
        const double w = ctx.weights.w_par[i];
        e.value += w * smooth_abs(x, ctx.config.delta);
        e.grad[static_cast<Eigen::Index>(i)] = w * smooth_abs_grad(x, ctx.config.delta);
    }
    return e;
}

Energy e_bh(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    const auto n = static_cast<Eigen::Index>(ctx.topology.num_vertices);
    Eigen::MatrixXd D(n, 3);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < 3; ++c)
            D(i, c) = V[static_cast<std::size_t>(3 * i + c)] - ctx.V0[static_cast<std::size_t>(3 * i + c)];
    const Eigen::MatrixXd QD = ctx.deform.Q * D;
    Energy e;
    e.value = (D.array() * QD.array()).sum();
    // dE/dD = (Q + Q^T) D, contracted with each Jacobian column dD/dp_k.
    const Eigen::MatrixXd G = QD + ctx.deform.Q.transpose() * D;
    const auto m = static_cast<Eigen::Index>(P.size());
    e.grad = Eigen::VectorXd::Zero(m);
    std::vector<double> dp(P.size(), 0.0);
    for (Eigen::Index k = 0; k < m; ++k) {
        dp[static_cast<std::size_t>(k)] = 1.0;
        jvp_after_eval(*ctx.tape, dp, ws);
        dp[static_cast<std::size_t>(k)] = 0.0;
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index c = 0; c < 3; ++c)
                s += G(i, c) * ws.tangent[ctx.tape->vertex_outputs[static_cast<std::size_t>(3 * i + c)]];
        e.grad[k] = s;
    }
    return e;
}

Rotations arap_local_step(std::span<const double> V, std::span<const double> V0,
                          const DeformationData& deform) {
    Rotations R(deform.neighbors.size(), Eigen::Matrix3d::Identity());
    for (std::size_t i = 0; i < deform.neighbors.size(); ++i) {
        Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
        for (auto [j, w] : deform.neighbors[i]) {
            const Vec3 e0 = vertex(V0, i) - vertex(V0, j);
            const Vec3 e = vertex(V, i) - vertex(V, j);
            S += arap_weight(w) * e0 * e.transpose();
        }
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vec3 sv = svd.singularValues();
        if (!(sv[0] > 1e-12) || sv[1] <= 1e-12 * sv[0]) continue;
        Eigen::Matrix3d U = svd.matrixU();
        Eigen::Matrix3d Rot = svd.matrixV() * U.transpose();
        if (Rot.determinant() < 0) {
            U.col(2) *= -1.0;
            Rot = svd.matrixV() * U.transpose();
        }
        R[i] = Rot;
    }
    return R;
}

Energy e_arap_fixed(const ObjectiveContext& ctx, std::span<const double> P, const Rotations& R,
                    TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    std::vector<double> dV(V.size(), 0.0);
    Energy e;
    const auto& nb = ctx.deform.neighbors;
    for (std::size_t i = 0; i < nb.size(); ++i) {
        const double wi = ctx.deform.cell_weight[i];
        for (auto [j, wij] : nb[i]) {
            const double w = arap_weight(wij);
            const Vec3 r = (vertex(V, i) - vertex(V, j)) - R[i] * (vertex(ctx.V0, i) - vertex(ctx.V0, j));
            e.value += wi * w * r.squaredNorm();
            const Vec3 g = 2.0 * wi * w * r;
            for (int c = 0; c < 3; ++c) {
                dV[3 * i + static_cast<std::size_t>(c)] += g[c];
                dV[3 * j + static_cast<std::size_t>(c)] -= g[c];
            }
        }
    }
    e.grad = pull_back(ctx, dV, ws);
    return e;
}

Energy e_arap(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    return e_arap_fixed(ctx, P, arap_local_step(V, ctx.V0, ctx.deform), ws);
}

Energy e_vol(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    const auto V = positions(ctx, P, ws);
    const double vol = signed_volume(ctx.topology.tris, V);
    std::vector<double> dV(V.size(), 0.0);
    signed_volume_gradient(ctx.topology.tris, V, 2.0 * (vol - ctx.vol0), dV);
    Energy e;
    e.value = (vol - ctx.vol0) * (vol - ctx.vol0);
    e.grad = pull_back(ctx, dV, ws);
    return e;
}

Energy e_cm(const ObjectiveContext& ctx, std::span<const double> P, TapeWorkspace& ws) {
    if (!ctx.com0) throw DegenerateVolume("center of mass undefined: the unedited mesh has ~zero volume");
    const auto V = positions(ctx, P, ws);
    const Vec3 diff = centroid(ctx.topology.tris, V) - *ctx.com0;
    const double delta = ctx.config.delta;
    const double dist = std::sqrt(diff.squaredNorm() + delta * delta);
    std::vector<double> dV(V.size(), 0.0);
    centroid_vjp(ctx.topology.tris, V, diff / dist, dV);
    Energy e;
    e.value = dist - delta + ctx.config.k_v * vtx_term(ctx, V, ctx.config.k_v, dV);
    e.grad = pull_back(ctx, dV, ws);
    return e;
}

Energy evaluate_objective(const ObjectiveContext& ctx, ObjectiveId id, std::span<const double> P,
                          TapeWorkspace& ws) {
    switch (id) {
    case ObjectiveId::Edit: return e_edit(ctx, P, ws);
    case ObjectiveId::Vtx: return e_vtx(ctx, P, ws);
    case ObjectiveId::Edg: return e_edg(ctx, P, ws);
    case ObjectiveId::Par: return e_par(ctx, P);
    case ObjectiveId::Bh: return e_bh(ctx, P, ws);
    case ObjectiveId::Arap: return e_arap(ctx, P, ws);
    case ObjectiveId::Vol: return e_vol(ctx, P, ws);
    case ObjectiveId::Cm: return e_cm(ctx, P, ws);
    }
    throw Error("unknown objective");
}

Energy compose(const Energy& edit, const Energy& objective, double gamma) {
    Energy e;
    e.value = edit.value + gamma * objective.value;
    e.grad = edit.grad + gamma * objective.grad;
    return e;
}

} // namespace dcad
