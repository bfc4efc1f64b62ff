#include "dcad/error.hpp"
#include "dcad/gradcheck.hpp"
#include "dcad/interp.hpp"
#include "dcad/model.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

using namespace dcad;

namespace {

InterpResult run(const std::string& text) { return interpret(dsl::parse(text)); }

std::vector<double> sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("box(2, 2, 2)") {
    const auto r = run("solid b = box(2, 2, 2)");
    CHECK(r.topology.num_vertices == 8);
    CHECK(r.topology.faces.size() == 6);
    CHECK(r.constraints.empty());
    const auto V = r.traced_positions();
    for (double x : V) CHECK(std::abs(x) == 1.0);
    // Canonical order.
    CHECK(vertex(V, 0) == Vec3(-1, -1, -1));
    CHECK(vertex(V, 1) == Vec3(1, -1, -1));
    CHECK(vertex(V, 6) == Vec3(1, 1, 1));
    CHECK(r.topology.faces[0] == std::vector<std::size_t>{0, 3, 2, 1});
    CHECK(r.topology.edges.size() == 12);
}

TEST_CASE("extrude adds one ring and one constraint") {
    const auto r = run("param len = 0.5\nsolid b = box(1, 1, 1)\nextrude(b.f[3], len)");
    CHECK(r.topology.num_vertices == 12);
    CHECK(r.topology.faces.size() == 10);
    REQUIRE(r.constraints.size() == 1);
    CHECK(r.constraints[0].op == "extrude");
    CHECK(r.constraints[0].kind == ConstraintRecord::Kind::Auto);
    CHECK(r.constraints[0].span.line == 3);
    CHECK(r.traced_constraints()[0] == doctest::Approx(0.5 - kDefaultEpsilon));
    // Face 3 is the +x side; its lifted copy sits at x = 0.5 + len.
    const auto V = r.traced_positions();
    for (std::size_t i = 8; i < 12; ++i) CHECK(V[3 * i] == doctest::Approx(1.0));
}

TEST_CASE("epsilon pragma") {
    const auto r = run("pragma epsilon = 0.01\nparam len = 0.5\nsolid b = box(1, 1, 1)\nextrude(b.f[1], len)");
    CHECK(r.traced_constraints()[0] == doctest::Approx(0.49));
}

TEST_CASE("chamfer replaces a corner by two vertices with three constraints") {
    const auto r = run("param r = 0.3\nsolid s = rect(2, 1)\nchamfer(s.v[0], r)");
    CHECK(r.topology.num_vertices == 5);
    REQUIRE(r.constraints.size() == 3);
    for (const auto& c : r.constraints) CHECK(c.op == "chamfer");
    const auto g = sorted(r.traced_constraints());
    CHECK(g[0] == doctest::Approx(0.3 - kDefaultEpsilon));
    CHECK(g[1] == doctest::Approx(0.7));
    CHECK(g[2] == doctest::Approx(1.7));
    // Both new vertices are at distance r from the removed corner (-1, -0.5).
    const auto V = r.traced_positions();
    int on_corner_edges = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        const double d = (vertex(V, i) - Vec3(-1, -0.5, 0)).norm();
        if (std::abs(d - 0.3) < 1e-12) ++on_corner_edges;
        CHECK(d > 1e-9);
    }
    CHECK(on_corner_edges == 2);
    for (const auto& f : r.topology.faces) CHECK(f.size() == 5);
}

TEST_CASE("chamfer needs a corner with two neighbours") {
    CHECK_THROWS_AS(run("solid b = box(1, 1, 1)\nchamfer(b.v[0], 0.1)"), InterpError);
}

TEST_CASE("clamp records") {
    auto r = run("param w = 4.0\nparam h = 2.0\nclamp(0.5, w / h, 4.0)");
    REQUIRE(r.constraints.size() == 2);
    CHECK(r.constraints[0].kind == ConstraintRecord::Kind::UserClamp);
    CHECK(r.traced_constraints()[0] == doctest::Approx(1.5));
    CHECK(r.traced_constraints()[1] == doctest::Approx(2.0));

    r = run("param p = 0.0\nclamp(0, p, 1)");
    CHECK(r.traced_constraints()[0] == 0.0);

    try {
        run("param p = 0.5\nclamp(1, p, 0)");
        FAIL("expected InterpError");
    } catch (const InterpError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("clamp as an expression passes its value through") {
    const auto r = run("param w = 2.0\nsolid b = box(clamp(1, w, 3), 1, 1)");
    CHECK(r.constraints.size() == 2);
    CHECK(r.traced_positions()[3] == doctest::Approx(1.0));
}

TEST_CASE("cylinder(1, 1, 4)") {
    const auto r = run("solid c = cylinder(1, 1, 4)");
    CHECK(r.topology.num_vertices == 8);
    CHECK(r.topology.faces.size() == 6);
    const auto V = r.traced_positions();
    for (std::size_t ring = 0; ring < 2; ++ring)
        for (std::size_t j = 0; j < 4; ++j) {
            const Vec3 v = vertex(V, 4 * ring + j);
            const double a = 2 * std::numbers::pi * static_cast<double>(j) / 4;
            CHECK(v.x() == doctest::Approx(std::cos(a)));
            CHECK(v.y() == doctest::Approx(std::sin(a)));
            CHECK(v.z() == doctest::Approx(ring == 0 ? -0.5 : 0.5));
        }
}

TEST_CASE("transforms") {
    auto V = run("solid b = box(2, 2, 2)\nscale(b, 3)").traced_positions();
    CHECK(vertex(V, 6) == Vec3(3, 3, 3));
    V = run("solid b = box(2, 2, 2)\nscale(b, 1, 2, 3)").traced_positions();
    CHECK(vertex(V, 6) == Vec3(1, 2, 3));
    V = run("solid b = box(2, 2, 2)\nrotate(b, z, 1.5707963267948966)").traced_positions();
    CHECK(vertex(V, 1).isApprox(Vec3(1, 1, -1)));
    V = run("solid b = box(2, 2, 2)\ntranslate(b.v[4..8], 0, 0, 1)").traced_positions();
    CHECK(vertex(V, 0).z() == -1.0);
    CHECK(vertex(V, 4).z() == 2.0);
}

TEST_CASE("vertex coordinate references read traced values") {
    const auto V = run("solid a = box(2, 2, 2)\nsolid b = box(1, 1, 1)\ntranslate(b, a.v[6].x, 0, 0)").traced_positions();
    CHECK(vertex(V, 8).x() == doctest::Approx(0.5));
}

TEST_CASE("loops replicate statements") {
    const auto r = run("for i in 0..3 {\n  solid k = box(1, 1, 1)\n  translate(k, i * 2, 0, 0)\n}");
    CHECK(r.topology.num_vertices == 24);
    CHECK(vertex(r.traced_positions(), 16).x() == doctest::Approx(3.5));
}

TEST_CASE("out-of-range references are InterpErrors with a position") {
    try {
        run("solid b = box(1, 1, 1)\ntranslate(b.v[9], 1, 0, 0)");
        FAIL("expected InterpError");
    } catch (const InterpError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(run("solid b = box(1, 1, 1)\nextrude(b.f[6], 1)"), InterpError);
    CHECK_THROWS_AS(run("translate(nothing, 1, 0, 0)"), InterpError);
}

TEST_CASE("operation catalog") {
    std::vector<std::string> names;
    for (const auto& e : op_catalog()) {
        names.push_back(e.name);
        CHECK_FALSE(e.signature.empty());
        CHECK_FALSE(e.vertices.empty());
    }
    for (const char* op : {"box", "cylinder", "rect", "translate", "rotate", "scale", "extrude", "chamfer", "clamp", "for"})
        CHECK(std::find(names.begin(), names.end(), op) != names.end());
}

TEST_CASE("interpretation is deterministic") {
    const auto p = dsl::parse(read_file(models_dir() + "/dresser.dcad"));
    const auto a = interpret(p), b = interpret(p);
    CHECK(a.topology == b.topology);
    CHECK(a.graph.size() == b.graph.size());
    CHECK(a.graph.values() == b.graph.values());
    CHECK(a.traced_positions() == b.traced_positions());
}

TEST_CASE("bundled models: constraint counts, markers and static topology") {
    const std::map<std::string, std::size_t> expected_constraints = {
        {"box.dcad", 0}, {"bracket.dcad", 2 + 3 + 3 + 1}, {"column.dcad", 4}, {"box_depth.dcad", 0}, {"dresser.dcad", 4}};
    for (const auto& name : test::bundled_models()) {
        CAPTURE(name);
        const auto m = load_bundled(name);
        const auto& base = m.interp;
        CHECK(base.constraints.size() == expected_constraints.at(name));
        REQUIRE(base.markers.size() == base.topology.num_vertices);
        ComputationGraph g = base.graph;
        const auto vals = eval_graph(g, m.initial_params());
        const auto traced = base.traced_positions();
        for (std::size_t i = 0; i < base.markers.size(); ++i) {
            CHECK(base.markers[i].vid == i);
            CHECK(std::abs(vals[base.markers[i].node_x] - traced[3 * i]) <= 1e-12);
            CHECK(std::abs(vals[base.markers[i].node_z] - traced[3 * i + 2]) <= 1e-12);
        }

        std::mt19937_64 rng(5);
        int same = 0;
        const auto P0 = m.initial_params();
        for (int k = 0; k < 1000; ++k) {
            const auto P = random_feasible_point(m, P0, rng, 0.2, 0.0);
            const auto r = interpret(m.program, P);
            bool ok = r.topology == base.topology && r.markers.size() == base.markers.size();
            for (std::size_t i = 0; ok && i < r.markers.size(); ++i) ok = r.markers[i].vid == base.markers[i].vid;
            same += ok;
        }
        CHECK(same == 1000);
    }
}
