#include "dcad/mesh.hpp"
#include "dcad/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <set>

namespace dcad {

std::vector<Tri> triangulate(const std::vector<std::vector<std::size_t>>& faces,
                             std::vector<std::size_t>* tri_face) {
    std::vector<Tri> tris;
    if (tri_face) tri_face->clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& poly = faces[f];
        if (poly.size() < 3)
            throw TopologyError("face " + std::to_string(f) + " has fewer than 3 vertices");
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
            tris.push_back({poly[0], poly[k], poly[k + 1]});
            if (tri_face) tri_face->push_back(f);
        }
    }
    return tris;
}

MeshTopology make_topology(std::size_t num_vertices, std::vector<std::vector<std::size_t>> faces) {
    MeshTopology t;
    t.num_vertices = num_vertices;
    std::set<EdgePair> edges;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& poly = faces[f];
        for (std::size_t k = 0; k < poly.size(); ++k) {
            if (poly[k] >= num_vertices)
                throw TopologyError("face " + std::to_string(f) + " references vertex " +
                                    std::to_string(poly[k]) + " of " + std::to_string(num_vertices));
            const std::size_t a = poly[k];
            const std::size_t b = poly[(k + 1) % poly.size()];
            if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
        }
    }
    t.faces = std::move(faces);
    t.edges.assign(edges.begin(), edges.end());
    t.tris = triangulate(t.faces, &t.tri_face);
    return t;
}

std::vector<double> geodesic_distances(const MeshTopology& topo, std::span<const double> V0,
                                       std::span<const std::size_t> sources) {
    const std::size_t n = topo.num_vertices;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    double total = 0.0;
    for (const auto& e : topo.edges) {
        const double len = (vertex(V0, e[0]) - vertex(V0, e[1])).norm();
        adj[e[0]].push_back({e[1], len});
        adj[e[1]].push_back({e[0], len});
        total += len;
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (auto s : sources) {
        if (s >= n) throw TopologyError("source vertex out of range");
        dist[s] = 0.0;
        heap.push({0.0, s});
    }
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (auto [v, w] : adj[u]) {
            if (d + w < dist[v]) {
                dist[v] = d + w;
                heap.push({dist[v], v});
            }
        }
    }
    for (auto& d : dist)
        if (d == inf) d = total;
    return dist;
}

double DeformationData::weight(std::size_t i, std::size_t j) const {
    for (auto [k, w] : neighbors[i])
        if (k == j) return w;
    return 0.0;
}

DeformationData build_deformation_data(const MeshTopology& topo, std::span<const double> V0) {
    const std::size_t n = topo.num_vertices;
    constexpr double kMaxCot = 1e6;
    std::map<EdgePair, double> w;
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (const auto& t : topo.tris) {
        const Vec3 p[3] = {vertex(V0, t[0]), vertex(V0, t[1]), vertex(V0, t[2])};
        const double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
        for (int c = 0; c < 3; ++c) mass[static_cast<Eigen::Index>(t[c])] += area / 3.0;
        for (int c = 0; c < 3; ++c) {
            // Angle at corner c is opposite edge (c+1, c+2).
            const std::size_t i = t[(c + 1) % 3];
            const std::size_t j = t[(c + 2) % 3];
            if (i == j) continue;
            const Vec3 e1 = p[(c + 1) % 3] - p[c];
            const Vec3 e2 = p[(c + 2) % 3] - p[c];
            const double cr = e1.cross(e2).norm();
            double cot = e1.dot(e2) / std::max(cr, 1e-300);
            cot = std::clamp(cot, -kMaxCot, kMaxCot);
            w[{std::min(i, j), std::max(i, j)}] += 0.5 * cot;
        }
    }

    DeformationData d;
    d.neighbors.assign(n, {});
    d.cell_weight.assign(n, 1.0);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (const auto& [e, wij] : w) {
        const auto i = static_cast<Eigen::Index>(e[0]);
        const auto j = static_cast<Eigen::Index>(e[1]);
        trip.emplace_back(i, j, wij);
        trip.emplace_back(j, i, wij);
        diag[i] -= wij;
        diag[j] -= wij;
        d.neighbors[e[0]].push_back({e[1], wij});
        d.neighbors[e[1]].push_back({e[0], wij});
    }
    for (std::size_t i = 0; i < n; ++i)
        trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i),
                          diag[static_cast<Eigen::Index>(i)]);
    d.L.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    d.L.setFromTriplets(trip.begin(), trip.end());
    d.mass = mass;

    Eigen::VectorXd inv = mass.cwiseMax(1e-12).cwiseInverse();
    Eigen::SparseMatrix<double> Lt = d.L.transpose();
    Eigen::SparseMatrix<double> ML = inv.asDiagonal() * d.L;
    // Structural product: the pattern depends on topology only.
    d.Q = Lt * ML;
    // Symmetrize exactly.
    Eigen::SparseMatrix<double> Qt = d.Q.transpose();
    d.Q = 0.5 * (d.Q + Qt);
    return d;
}

double signed_volume(std::span<const Tri> tris, std::span<const double> V) {
    double vol = 0.0;
    for (const auto& t : tris) {
        const Vec3 a = vertex(V, t[0]), b = vertex(V, t[1]), c = vertex(V, t[2]);
        vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
}

void signed_volume_gradient(std::span<const Tri> tris, std::span<const double> V, double w,
                            std::span<double> grad) {
    for (const auto& t : tris) {
        const Vec3 a = vertex(V, t[0]), b = vertex(V, t[1]), c = vertex(V, t[2]);
        const Vec3 ga = b.cross(c) * (w / 6.0);
        const Vec3 gb = c.cross(a) * (w / 6.0);
        const Vec3 gc = a.cross(b) * (w / 6.0);
        for (int k = 0; k < 3; ++k) {
            grad[3 * t[0] + k] += ga[k];
            grad[3 * t[1] + k] += gb[k];
            grad[3 * t[2] + k] += gc[k];
        }
    }
}

Vec3 centroid(std::span<const Tri> tris, std::span<const double> V) {
    double vol = 0.0;
    Vec3 s = Vec3::Zero();
    for (const auto& t : tris) {
        const Vec3 a = vertex(V, t[0]), b = vertex(V, t[1]), c = vertex(V, t[2]);
        const double vt = a.dot(b.cross(c)) / 6.0;
        vol += vt;
        s += vt * (a + b + c) / 4.0;
    }
    if (std::abs(vol) < 1e-10) throw DegenerateVolume("center of mass of a mesh with ~zero volume");
    return s / vol;
}

void centroid_vjp(std::span<const Tri> tris, std::span<const double> V, const Vec3& w,
                  std::span<double> grad) {
    const double vol = signed_volume(tris, V);
    const Vec3 com = centroid(tris, V);
    const double wc = w.dot(com);
    for (const auto& t : tris) {
        const Vec3 p[3] = {vertex(V, t[0]), vertex(V, t[1]), vertex(V, t[2])};
        const double vt = p[0].dot(p[1].cross(p[2])) / 6.0;
        const Vec3 ct = (p[0] + p[1] + p[2]) / 4.0;
        const Vec3 dvol[3] = {p[1].cross(p[2]) / 6.0, p[2].cross(p[0]) / 6.0, p[0].cross(p[1]) / 6.0};
        for (int c = 0; c < 3; ++c) {
            // d(w.S)/dp = (w.ct) dvol + vt w / 4, then the quotient rule.
            const Vec3 g = ((w.dot(ct) - wc) * dvol[c] + vt * w / 4.0) / vol;
            for (int k = 0; k < 3; ++k) grad[3 * t[c] + k] += g[k];
        }
    }
}

void write_obj(std::ostream& os, const MeshTopology& topo, std::span<const double> V,
               bool triangulated) {
    os << std::setprecision(17);
    for (std::size_t i = 0; i < topo.num_vertices; ++i)
        os << "v " << V[3 * i] << ' ' << V[3 * i + 1] << ' ' << V[3 * i + 2] << '\n';
    if (triangulated) {
        for (const auto& t : topo.tris) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
        return;
    }
    for (const auto& f : topo.faces) {
        os << 'f';
        for (auto v : f) os << ' ' << v + 1;
        os << '\n';
    }
}

} // namespace dcad
