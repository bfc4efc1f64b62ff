#include "dcad/error.hpp"
#include "dcad/mesh.hpp"
#include "dcad/model.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace dcad;

namespace {

MeshTopology cube_topology() {
    return make_topology(8, {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}});
}

std::vector<double> cube(double sx = 1, Vec3 offset = Vec3::Zero()) {
    std::vector<double> V;
    const double s[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                            {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
    for (const auto& c : s) {
        V.push_back(0.5 * c[0] * sx + offset.x());
        V.push_back(0.5 * c[1] + offset.y());
        V.push_back(0.5 * c[2] + offset.z());
    }
    return V;
}

} // namespace

TEST_CASE("fan triangulation") {
    CHECK(triangulate({{0, 1, 2, 3}}) == std::vector<Tri>{{0, 1, 2}, {0, 2, 3}});
    CHECK(triangulate({{4, 5, 6}}) == std::vector<Tri>{{4, 5, 6}});
    const auto t = cube_topology();
    CHECK(t.tris.size() == 12);
    CHECK(t.tri_face[11] == 5);
    CHECK_THROWS_AS(make_topology(3, {{0, 1}}), TopologyError);
    CHECK_THROWS_AS(make_topology(3, {{0, 1, 5}}), TopologyError);
}

TEST_CASE("geodesic distances") {
    const auto t = cube_topology();
    const auto V = cube();
    const std::vector<std::size_t> src{0};
    const auto d = geodesic_distances(t, V, src);
    CHECK(d[0] == 0.0);
    CHECK(d[6] == doctest::Approx(3.0));
    CHECK(d[1] == doctest::Approx(1.0));
    for (const auto& e : t.edges) {
        const double len = (vertex(V, e[0]) - vertex(V, e[1])).norm();
        CHECK(d[e[1]] <= d[e[0]] + len + 1e-12);
        CHECK(d[e[0]] <= d[e[1]] + len + 1e-12);
    }
    const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5, 6, 7};
    for (double x : geodesic_distances(t, V, all)) CHECK(x == 0.0);
}

TEST_CASE("unreachable vertices get the total edge length") {
    auto faces = cube_topology().faces;
    for (const auto& f : cube_topology().faces) {
        auto g = f;
        for (auto& i : g) i += 8;
        faces.push_back(g);
    }
    const auto t = make_topology(16, faces);
    auto V = cube();
    const auto V2 = cube(1, Vec3(5, 0, 0));
    V.insert(V.end(), V2.begin(), V2.end());
    const std::vector<std::size_t> src{0};
    const auto d = geodesic_distances(t, V, src);
    CHECK(d[8] == doctest::Approx(24.0));
    CHECK(std::isfinite(d[15]));
}

TEST_CASE("removing a source never decreases distances") {
    const auto t = cube_topology();
    const auto V = cube();
    const std::vector<std::size_t> two{0, 6}, one{0};
    const auto a = geodesic_distances(t, V, two), b = geodesic_distances(t, V, one);
    for (std::size_t i = 0; i < 8; ++i) CHECK(b[i] >= a[i]);
}

TEST_CASE("cotangent weights of two equilateral triangles") {
    const double h = std::sqrt(3.0) / 2;
    const std::vector<double> V{0, 0, 0, 1, 0, 0, 0.5, h, 0, 0.5, -h, 0};
    const auto t = make_topology(4, {{0, 1, 2}, {1, 0, 3}});
    const auto dd = build_deformation_data(t, V);
    CHECK(dd.weight(0, 1) == doctest::Approx(1 / std::sqrt(3.0)));
    CHECK(dd.weight(1, 0) == doctest::Approx(1 / std::sqrt(3.0)));
    CHECK(dd.weight(0, 2) == doctest::Approx(0.5 / std::sqrt(3.0)));
}

TEST_CASE("Laplacian and bi-Laplacian properties on bundled models") {
    for (const auto& name : test::bundled_models()) {
        CAPTURE(name);
        const auto m = load_bundled(name);
        const auto V = m.positions(m.initial_params());
        const auto dd = build_deformation_data(m.topology(), V);
        const auto n = static_cast<Eigen::Index>(m.topology().num_vertices);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
        CHECK((dd.L * ones).lpNorm<Eigen::Infinity>() <= 1e-9);
        CHECK((dd.Q * ones).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, Eigen::MatrixXd(dd.Q).lpNorm<Eigen::Infinity>()));
        const Eigen::MatrixXd Q(dd.Q);
        CHECK((Q - Q.transpose()).lpNorm<Eigen::Infinity>() <= 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
        CHECK(es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
        CHECK((dd.mass.array() > 0).all());

        // Sparsity depends on topology only.
        std::mt19937_64 rng(2);
        const auto V2 = m.positions(test::random_params(m, rng, 0.05));
        const auto dd2 = build_deformation_data(m.topology(), V2);
        CHECK(dd2.Q.nonZeros() == dd.Q.nonZeros());
        CHECK(dd2.L.nonZeros() == dd.L.nonZeros());
    }
}

TEST_CASE("volume and centroid") {
    const auto t = cube_topology();
    CHECK(signed_volume(t.tris, cube()) == doctest::Approx(1.0));
    CHECK(centroid(t.tris, cube()).norm() <= 1e-12);
    CHECK(signed_volume(t.tris, cube(2)) == doctest::Approx(2.0));
    CHECK(centroid(t.tris, cube(2)).norm() <= 1e-12);
    const auto moved = cube(1, Vec3(1, 0, 0));
    CHECK(signed_volume(t.tris, moved) == doctest::Approx(1.0));
    CHECK(centroid(t.tris, moved).isApprox(Vec3(1, 0, 0)));
    const auto flat = make_topology(4, {{0, 1, 2, 3}, {3, 2, 1, 0}});
    const std::vector<double> V{0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0};
    CHECK_THROWS_AS(centroid(flat.tris, V), DegenerateVolume);
}

TEST_CASE("volume and centroid gradients match finite differences") {
    for (const auto& name : test::bundled_models()) {
        CAPTURE(name);
        const auto m = load_bundled(name);
        const auto& tris = m.topology().tris;
        auto V = m.positions(m.initial_params());
        std::vector<double> g(V.size(), 0.0), gc(V.size(), 0.0);
        signed_volume_gradient(tris, V, 1.0, g);
        const Vec3 w(0.3, -0.7, 0.2);
        centroid_vjp(tris, V, w, gc);
        const double h = 1e-6;
        double err = 0, scale = 0, errc = 0, scalec = 0;
        for (std::size_t i = 0; i < V.size(); ++i) {
            const double x = V[i];
            V[i] = x + h;
            const double vp = signed_volume(tris, V);
            const double cp = w.dot(centroid(tris, V));
            V[i] = x - h;
            const double vm = signed_volume(tris, V);
            const double cm = w.dot(centroid(tris, V));
            V[i] = x;
            const double fd = (vp - vm) / (2 * h), fdc = (cp - cm) / (2 * h);
            err = std::max(err, std::abs(fd - g[i]));
            scale = std::max({scale, std::abs(fd), std::abs(g[i])});
            errc = std::max(errc, std::abs(fdc - gc[i]));
            scalec = std::max({scalec, std::abs(fdc), std::abs(gc[i])});
        }
        CHECK(err / scale <= 1e-5);
        CHECK(errc / scalec <= 1e-5);
    }
}

TEST_CASE("OBJ export") {
    const auto t = cube_topology();
    std::ostringstream os;
    write_obj(os, t, cube());
    const auto s = os.str();
    CHECK(std::count(s.begin(), s.end(), 'v') >= 8);
    CHECK(s.find("f 1 4 3 2") != std::string::npos);
    std::ostringstream tri;
    write_obj(tri, t, cube(), true);
    CHECK(tri.str().find("f 1 4 3\n") != std::string::npos);
}
