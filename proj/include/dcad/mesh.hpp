#pragma once

// Static mesh topology and the geometric kernels the objectives use:
// triangulation, edge graph geodesics, cotangent Laplacian / bi-Laplacian,
// volume and center of mass.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace dcad {

using Vec3 = Eigen::Vector3d;
using Tri = std::array<std::size_t, 3>;
using EdgePair = std::array<std::size_t, 2>;

struct MeshTopology {
    std::size_t num_vertices = 0;
    /// Polygons, counter-clockwise seen from outside.
    std::vector<std::vector<std::size_t>> faces;
    /// Unique undirected polygon edges, (i, j) with i < j, sorted.
    std::vector<EdgePair> edges;
    /// Fan triangulation and the polygon each triangle came from.
    std::vector<Tri> tris;
    std::vector<std::size_t> tri_face;

    bool operator==(const MeshTopology&) const = default;
};

/// Builds edges and triangles from polygons. Throws TopologyError on faces
/// with fewer than 3 vertices or out-of-range indices.
MeshTopology make_topology(std::size_t num_vertices, std::vector<std::vector<std::size_t>> faces);

/// Fan triangulation anchored at each polygon's first vertex.
std::vector<Tri> triangulate(const std::vector<std::vector<std::size_t>>& faces,
                             std::vector<std::size_t>* tri_face = nullptr);

inline Vec3 vertex(std::span<const double> V, std::size_t i) {
    return Vec3(V[3 * i], V[3 * i + 1], V[3 * i + 2]);
}

/// Multi-source shortest paths over the edge graph weighted by Euclidean
/// edge length. Unreachable vertices get the sum of all edge lengths.
std::vector<double> geodesic_distances(const MeshTopology& topo, std::span<const double> V0,
                                       std::span<const std::size_t> sources);

struct DeformationData {
    /// Cotangent Laplacian, L_ij = w_ij, L_ii = -sum_j w_ij.
    Eigen::SparseMatrix<double> L;
    /// Barycentric lumped mass.
    Eigen::VectorXd mass;
    /// Bi-Laplacian L^T M^-1 L.
    Eigen::SparseMatrix<double> Q;
    /// One-ring of each vertex with cotangent weights w_ij = (cot a + cot b) / 2.
    std::vector<std::vector<std::pair<std::size_t, double>>> neighbors;
    /// Per-cell ARAP weights (all 1).
    std::vector<double> cell_weight;

    double weight(std::size_t i, std::size_t j) const;
};

/// Cotangent weights are clamped to |cot| <= 1e6 for degenerate triangles.
DeformationData build_deformation_data(const MeshTopology& topo, std::span<const double> V0);

/// (1/6) sum det[a, b, c] over triangles.
double signed_volume(std::span<const Tri> tris, std::span<const double> V);
/// Adds dVol/dV * w to grad (3n).
void signed_volume_gradient(std::span<const Tri> tris, std::span<const double> V, double w,
                            std::span<double> grad);

/// Volume-weighted average of origin-tetrahedron centroids. Throws
/// DegenerateVolume when |Vol| < 1e-10.
Vec3 centroid(std::span<const Tri> tris, std::span<const double> V);
/// Adds w^T dCOM/dV to grad (3n).
void centroid_vjp(std::span<const Tri> tris, std::span<const double> V, const Vec3& w,
                  std::span<double> grad);

/// Wavefront OBJ: vertices, then polygon or triangle faces (1-based).
void write_obj(std::ostream& os, const MeshTopology& topo, std::span<const double> V,
               bool triangulated = false);

} // namespace dcad
